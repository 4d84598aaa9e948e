use serde::{Deserialize, Serialize};

use super::{Frame, FrameSequence, SpotTrack};
use crate::{Error, Result};

/// MAD-to-sigma factor for Gaussian noise.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Pixels below the threshold are zeroed and the threshold is subtracted
    /// from the rest, so weights vary continuously with intensity.
    #[default]
    Soft,
    /// Pixels below the threshold are zeroed; the rest keep their value.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSettings {
    /// Threshold above background, in units of the robust background
    /// sigma.
    pub threshold_sigma: f64,
    /// Half-width of the centroid window around the previous estimate, px.
    pub roi_halfwidth: usize,
    /// Frames whose peak-to-noise ratio falls below this count as lost.
    pub quality_floor: f64,
    /// Consecutive lost frames tolerated before tracking fails.
    pub max_lost_frames: usize,
    pub mode: ThresholdMode,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        Self {
            threshold_sigma: 3.0,
            roi_halfwidth: 15,
            quality_floor: 5.0,
            max_lost_frames: 5,
            mode: ThresholdMode::Soft,
        }
    }
}

/// Centroid of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub position: f64,
    pub orthogonal: f64,
    pub quality: f64,
    pub lost: bool,
}

/// Stateful tracker: each frame's window is centered on the previous
/// estimate, falling back to the brightest column when the spot is lost
/// or sits near the window edge.
#[derive(Debug, Clone)]
pub struct CentroidTracker {
    settings: TrackerSettings,
    last: Option<(f64, f64)>,
    lost_run: usize,
    frame_index: usize,
}

/// Median and robust sigma of a histogram of integer pixel values.
///
/// The sigma is the RMS deviation from the median over values within
/// `max(5 sigma_MAD, 3)` counts. MAD alone is too coarse when the noise is
/// under a count, since it then jumps between 0 and 1.48 from frame to frame.
fn background_stats(hist: &[u32], n: u64) -> (f64, f64) {
    let quantile = |k: u64| {
        let mut acc = 0u64;
        for (v, &c) in hist.iter().enumerate() {
            acc += c as u64;
            if acc > k {
                return v as f64;
            }
        }
        (hist.len() - 1) as f64
    };
    let bg = if n % 2 == 1 {
        quantile(n / 2)
    } else {
        0.5 * (quantile(n / 2 - 1) + quantile(n / 2))
    };
    // MAD by bisection on the count of |v - bg| <= d
    let within = |d: f64| -> u64 {
        hist.iter()
            .enumerate()
            .filter(|(v, _)| (*v as f64 - bg).abs() <= d)
            .map(|(_, &c)| c as u64)
            .sum()
    };
    let mut mad = 0.0;
    while within(mad) * 2 < n {
        mad += 0.5;
    }
    let clip = (5.0 * MAD_SCALE * mad).max(3.0);
    let (mut m, mut s2) = (0u64, 0.0);
    for (v, &c) in hist.iter().enumerate() {
        let d = v as f64 - bg;
        if c > 0 && d.abs() <= clip {
            m += c as u64;
            s2 += c as f64 * d * d;
        }
    }
    (bg, (s2 / m.max(1) as f64).sqrt())
}

impl CentroidTracker {
    pub fn new(settings: TrackerSettings) -> Result<Self> {
        if !(settings.threshold_sigma >= 0.0) {
            return Err(Error::domain(
                "threshold_sigma",
                settings.threshold_sigma,
                "must be >= 0",
            ));
        }
        if settings.roi_halfwidth < 1 {
            return Err(Error::domain("roi_halfwidth", 0.0, "must be >= 1"));
        }
        Ok(Self {
            settings,
            last: None,
            lost_run: 0,
            frame_index: 0,
        })
    }

    pub fn settings(&self) -> &TrackerSettings {
        &self.settings
    }

    /// Column with the largest summed intensity.
    fn brightest_column(frame: &Frame) -> usize {
        (0..frame.width)
            .max_by_key(|&x| {
                (0..frame.height)
                    .map(|y| frame.get(x, y) as u64)
                    .sum::<u64>()
            })
            .unwrap_or(0)
    }

    /// Thresholded centroid inside the window around column `center`.
    /// Returns `(x, y, quality, weight)`.
    fn measure(&self, frame: &Frame, center: usize) -> Result<(f64, f64, f64, f64)> {
        let s = self.settings;
        let lo = center.saturating_sub(s.roi_halfwidth);
        let hi = (center + s.roi_halfwidth).min(frame.width - 1);

        let top = frame.data.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0u32; top + 1];
        let mut n_out = 0u64;
        for y in 0..frame.height {
            let row = &frame.data[y * frame.width..(y + 1) * frame.width];
            for &v in row[..lo].iter().chain(&row[hi + 1..]) {
                hist[v as usize] += 1;
            }
            n_out += (lo + frame.width - 1 - hi) as u64;
        }
        if n_out == 0 {
            return Err(Error::Precondition(
                "ROI covers the whole frame; no background pixels".into(),
            ));
        }
        let (bg, sigma) = background_stats(&hist, n_out);
        let thr = s.threshold_sigma * sigma;
        // quantization noise when the background is perfectly flat
        let noise = sigma.max(1.0 / 12f64.sqrt());

        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let mut peak = f64::NEG_INFINITY;
        for y in 0..frame.height {
            let row = &frame.data[y * frame.width..(y + 1) * frame.width];
            for (x, &v) in row.iter().enumerate().take(hi + 1).skip(lo) {
                let d = v as f64 - bg;
                peak = peak.max(d);
                let w = match s.mode {
                    ThresholdMode::Soft => (d - thr).max(0.0),
                    ThresholdMode::Hard => {
                        if d > thr {
                            d
                        } else {
                            0.0
                        }
                    }
                };
                sw += w;
                sx += w * x as f64;
                sy += w * y as f64;
            }
        }
        let (x, y) = if sw > 0.0 {
            (sx / sw, sy / sw)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok((x, y, peak / noise, sw))
    }

    pub fn process(&mut self, frame: &Frame) -> Result<Measurement> {
        let index = self.frame_index;
        self.frame_index += 1;
        let s = self.settings;
        let ok = |q: f64, w: f64| w > 0.0 && q >= s.quality_floor;
        let (mut x, mut y, mut quality, mut sw) = (f64::NAN, f64::NAN, 0.0, 0.0);
        let mut found = false;
        if let Some((lx, _)) = self.last {
            let center = lx.round().clamp(0.0, (frame.width - 1) as f64) as usize;
            (x, y, quality, sw) = self.measure(frame, center)?;
            // a spot near the window edge is cut off; look again from scratch
            found = ok(quality, sw) && (x - center as f64).abs() <= 0.5 * s.roi_halfwidth as f64;
        }
        if !found {
            let (bx, by, bq, bw) = self.measure(frame, Self::brightest_column(frame))?;
            if ok(bq, bw) || self.last.is_none() {
                (x, y, quality, sw) = (bx, by, bq, bw);
            }
        }
        if ok(quality, sw) {
            let m = Measurement {
                position: x,
                orthogonal: y,
                quality,
                lost: false,
            };
            self.last = Some((m.position, m.orthogonal));
            self.lost_run = 0;
            return Ok(m);
        }
        self.lost_run += 1;
        match self.last {
            Some((x, y)) if self.lost_run <= s.max_lost_frames => Ok(Measurement {
                position: x,
                orthogonal: y,
                quality,
                lost: true,
            }),
            _ => Err(Error::SpotLost {
                frame: index,
                quality,
                run: self.lost_run,
            }),
        }
    }

    /// Tracks every frame of `frames` in order.
    pub fn track(&mut self, frames: &FrameSequence) -> Result<SpotTrack> {
        let n = frames.len();
        let mut pos = Vec::with_capacity(n);
        let mut orth = Vec::with_capacity(n);
        let mut qual = Vec::with_capacity(n);
        for f in frames.frames() {
            let m = self.process(f)?;
            pos.push(m.position);
            orth.push(m.orthogonal);
            qual.push(m.quality);
        }
        SpotTrack::new(
            pos,
            frames.actual_timestamps().to_vec(),
            frames.nominal_timestamps().to_vec(),
            qual,
            orth,
        )
    }
}

/// Tracks with the given threshold and window and default values for the
/// remaining settings.
pub fn track_centroid(
    frames: &FrameSequence,
    threshold_sigma: f64,
    roi_halfwidth: usize,
) -> Result<SpotTrack> {
    let settings = TrackerSettings {
        threshold_sigma,
        roi_halfwidth,
        ..TrackerSettings::default()
    };
    CentroidTracker::new(settings)?.track(frames)
}
