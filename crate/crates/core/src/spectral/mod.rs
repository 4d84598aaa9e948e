//! Welch PSD estimation, SNR-ranked segment selection, calibration-peak
//! areas and Lorentzian resonance fits.
//!
//! Every PSD here is one-sided: integrating it over `[0, f_s/2]` gives the
//! variance of the input.

mod lorentzian;
mod welch;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use lorentzian::{fit_lorentzian, fit_spectrum, lorentzian_model, FitOptions, LorentzianFit};
pub use welch::{welch, welch_psd, WelchResult};

/// Neighborhood used by the SNR metric: bins within this distance of the
/// peak bin...
pub const SNR_NEIGHBORHOOD: usize = 20;
/// ...excluding bins this close to it.
pub const SNR_GUARD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let s = (std::f64::consts::PI * i as f64 / n as f64).sin();
                    s * s
                })
                .collect(),
        }
    }

    /// `1 / mean(w^2)`: the factor restoring noise power after windowing
    /// (8/3 for Hann).
    pub fn power_correction(&self, n: usize) -> f64 {
        let w = self.coefficients(n);
        n as f64 / w.iter().map(|x| x * x).sum::<f64>()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

/// One-sided PSD on a uniform frequency grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    frequencies: Vec<f64>,
    psd: Vec<f64>,
    bin_width: f64,
    n_segments_used: usize,
    window: Window,
    sample_rate: f64,
}

impl SpectrumEstimate {
    pub fn new(
        frequencies: Vec<f64>,
        psd: Vec<f64>,
        bin_width: f64,
        n_segments_used: usize,
        window: Window,
        sample_rate: f64,
    ) -> Result<Self> {
        if frequencies.len() != psd.len() || frequencies.is_empty() {
            return Err(Error::Precondition(
                "spectrum needs equal, non-empty columns".into(),
            ));
        }
        if !(bin_width > 0.0) || !(sample_rate > 0.0) {
            return Err(Error::Precondition(
                "bin width and sample rate must be positive".into(),
            ));
        }
        if frequencies[0] < 0.0 {
            return Err(Error::Precondition(
                "frequencies must start at or above 0".into(),
            ));
        }
        Ok(Self {
            frequencies,
            psd,
            bin_width,
            n_segments_used,
            window,
            sample_rate,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn n_segments_used(&self) -> usize {
        self.n_segments_used
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Index of the bin nearest `f`, or `None` outside the grid.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let f0 = self.frequencies[0];
        let k = ((f - f0) / self.bin_width).round();
        if k < 0.0 || k as usize >= self.len() || !k.is_finite() {
            None
        } else {
            Some(k as usize)
        }
    }

    /// `sum(psd) * bin_width`, the variance carried by the spectrum.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_width
    }

    /// Keeps bins with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, p)| (*f, *p))
            .unzip()
    }

    /// Columns `freq_hz,psd`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["freq_hz", "psd"])?;
        for (f, p) in self.frequencies.iter().zip(&self.psd) {
            w.write_record([format!("{f:.17e}"), format!("{p:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean of several spectra on the same grid.
pub fn average_spectra(spectra: &[&SpectrumEstimate]) -> Result<SpectrumEstimate> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Precondition("nothing to average".into()))?;
    let n = first.len();
    if spectra.iter().any(|s| {
        s.len() != n || s.bin_width != first.bin_width || s.frequencies[0] != first.frequencies[0]
    }) {
        return Err(Error::Precondition("spectra are on different grids".into()));
    }
    let mut acc = vec![0.0; n];
    let mut segs = 0;
    for s in spectra {
        for (a, p) in acc.iter_mut().zip(&s.psd) {
            *a += p;
        }
        segs += s.n_segments_used;
    }
    let m = spectra.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    SpectrumEstimate::new(
        first.frequencies.clone(),
        acc,
        first.bin_width,
        segs,
        first.window,
        first.sample_rate,
    )
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Peak-bin power at `f_cal` divided by the median of the bins within
/// +-20 of it, leaving out the +-2 bins next to the peak.
pub fn segment_snr(spectrum: &SpectrumEstimate, f_cal: f64) -> Result<f64> {
    let k = spectrum.bin_of(f_cal).ok_or_else(|| {
        Error::Precondition(format!("f_cal = {f_cal} Hz lies outside the spectrum"))
    })?;
    let lo = k.saturating_sub(SNR_NEIGHBORHOOD);
    let hi = (k + SNR_NEIGHBORHOOD).min(spectrum.len() - 1);
    let mut ring: Vec<f64> = (lo..=hi)
        .filter(|&j| j.abs_diff(k) > SNR_GUARD)
        .map(|j| spectrum.psd[j])
        .collect();
    if ring.is_empty() {
        return Err(Error::Precondition(
            "no neighborhood bins around f_cal".into(),
        ));
    }
    let floor = median(&mut ring);
    Ok(spectrum.psd[k] / floor)
}

/// Segment indices ordered by decreasing SNR at `f_cal` (ties by index),
/// with their SNR.
pub fn rank_segments_by_snr(
    segments: &[SpectrumEstimate],
    f_cal: f64,
) -> Result<Vec<(usize, f64)>> {
    let mut ranked = segments
        .iter()
        .enumerate()
        .map(|(i, s)| segment_snr(s, f_cal).map(|snr| (i, snr)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Average of the `top_n` segments with the highest SNR at `f_cal`.
pub fn select_segments_by_snr(
    segments: &[SpectrumEstimate],
    f_cal: f64,
    top_n: usize,
) -> Result<SpectrumEstimate> {
    if top_n == 0 || top_n > segments.len() {
        return Err(Error::Precondition(format!(
            "top_n = {top_n} must lie in 1..={}",
            segments.len()
        )));
    }
    let ranked = rank_segments_by_snr(segments, f_cal)?;
    let chosen: Vec<&SpectrumEstimate> =
        ranked[..top_n].iter().map(|&(i, _)| &segments[i]).collect();
    average_spectra(&chosen)
}

/// Bins on each side of the band used to estimate the local floor.
pub const FLOOR_BINS: usize = 20;

/// Mean-square power of a line at `f_center`: `sum (psd - floor) * df`
/// over `f_center +- halfwidth_bins`, where `floor` is the median of the
/// 20 bins on either side of the band.
///
/// With `resonance = Some((f_r, Q))`, a band touching
/// `f_r +- f_r / (2 Q)` yields [`Error::ResonanceOverlap`] carrying the
/// (biased) area.
pub fn peak_area(
    spectrum: &SpectrumEstimate,
    f_center: f64,
    halfwidth_bins: usize,
    resonance: Option<(f64, f64)>,
) -> Result<f64> {
    let k = spectrum.bin_of(f_center).ok_or_else(|| {
        Error::Precondition(format!(
            "f_center = {f_center} Hz lies outside the spectrum"
        ))
    })?;
    if k < halfwidth_bins || k + halfwidth_bins >= spectrum.len() {
        return Err(Error::Precondition(
            "peak band runs off the spectrum".into(),
        ));
    }
    let (lo, hi) = (k - halfwidth_bins, k + halfwidth_bins);
    let mut ring: Vec<f64> = (lo.saturating_sub(FLOOR_BINS)..lo)
        .chain(hi + 1..(hi + 1 + FLOOR_BINS).min(spectrum.len()))
        .map(|j| spectrum.psd[j])
        .collect();
    if ring.is_empty() {
        return Err(Error::Precondition(
            "no floor bins around the peak band".into(),
        ));
    }
    let floor = median(&mut ring);
    let area = spectrum.psd[lo..=hi].iter().map(|p| p - floor).sum::<f64>() * spectrum.bin_width;
    if let Some((f_r, q)) = resonance {
        let half = f_r / (2.0 * q);
        let (band_lo, band_hi) = (spectrum.frequencies[lo], spectrum.frequencies[hi]);
        if band_hi >= f_r - half && band_lo <= f_r + half {
            log::warn!("calibration band [{band_lo}, {band_hi}] Hz overlaps the resonance");
            return Err(Error::ResonanceOverlap {
                area,
                band_lo,
                band_hi,
            });
        }
    }
    Ok(area)
}
