use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{average_spectra, SpectrumEstimate, Window};
use crate::{Error, Result, TimeSeries};

/// Per-segment spectra and their average.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchResult {
    pub segments: Vec<SpectrumEstimate>,
    pub average: SpectrumEstimate,
}

/// Welch estimate of a timestamped series. The samples are treated as lying
/// on their mean-interval grid, so timing jitter must stay below half an
/// interval; resample first otherwise.
pub fn welch_psd(
    series: &TimeSeries,
    segment_length: f64,
    window: Window,
    overlap: f64,
) -> Result<WelchResult> {
    if series.len() < 2 {
        return Err(Error::Precondition("series too short for a PSD".into()));
    }
    if !(segment_length > 0.0) {
        return Err(Error::domain(
            "segment_length",
            segment_length,
            "must be > 0",
        ));
    }
    if series.duration() < 2.0 * segment_length * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "series spans {:.3} s, need at least two {segment_length} s segments",
            series.duration()
        )));
    }
    let dev = series.max_grid_deviation();
    if dev >= 0.5 {
        return Err(Error::Precondition(format!(
            "timestamps deviate from a uniform grid by {dev:.2} intervals; resample first"
        )));
    }
    let fs = series.sample_rate();
    let n = (segment_length * fs).round() as usize;
    welch(series.values(), fs, n, window, overlap)
}

/// Welch estimate of uniformly sampled `values` at `sample_rate` with
/// segments of `segment_samples`. Each segment has its mean removed. Only
/// whole segments are used.
pub fn welch(
    values: &[f64],
    sample_rate: f64,
    segment_samples: usize,
    window: Window,
    overlap: f64,
) -> Result<WelchResult> {
    if segment_samples < 8 {
        return Err(Error::Precondition(format!(
            "segment of {segment_samples} samples is too short"
        )));
    }
    if !(0.0..0.95).contains(&overlap) {
        return Err(Error::domain("overlap", overlap, "must lie in [0, 0.95)"));
    }
    let step = (((1.0 - overlap) * segment_samples as f64).round() as usize).max(1);
    if values.len() < segment_samples + step {
        return Err(Error::Precondition(format!(
            "{} samples give fewer than two segments of {segment_samples}",
            values.len()
        )));
    }
    let starts: Vec<usize> = (0..)
        .map(|i| i * step)
        .take_while(|&s| s + segment_samples <= values.len())
        .collect();
    let w = window.coefficients(segment_samples);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(segment_samples);
    let n_bins = segment_samples / 2 + 1;
    let df = sample_rate / segment_samples as f64;
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * df).collect();
    let scale = 2.0 / (sample_rate * w2);

    let segments = starts
        .par_iter()
        .map(|&s| {
            let seg = &values[s..s + segment_samples];
            let mean = seg.iter().sum::<f64>() / segment_samples as f64;
            let mut buf: Vec<Complex<f64>> = seg
                .iter()
                .zip(&w)
                .map(|(x, wi)| Complex::new((x - mean) * wi, 0.0))
                .collect();
            fft.process(&mut buf);
            let mut psd: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr() * scale).collect();
            // DC and (for even lengths) Nyquist have no mirror image
            psd[0] /= 2.0;
            if segment_samples.is_multiple_of(2) {
                psd[n_bins - 1] /= 2.0;
            }
            SpectrumEstimate::new(freqs.clone(), psd, df, 1, window, sample_rate)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SpectrumEstimate> = segments.iter().collect();
    let average = average_spectra(&refs)?;
    Ok(WelchResult { segments, average })
}
