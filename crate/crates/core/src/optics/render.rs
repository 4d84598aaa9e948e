use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    angle_to_displacement, CentroidTracker, Frame, FrameSequence, ReadoutGeometry, SpotTrack,
    TrackerSettings,
};
use crate::{AngleSeries, Error, Result};

/// Delays are clipped to this fraction of the frame interval so frames stay
/// in order.
pub const MAX_DELAY_FRACTION: f64 = 0.45;

/// Stream reserved for the jitter draws; frame `i` uses stream `i`.
const JITTER_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterKind {
    #[default]
    Gaussian,
    /// Uniform with the same standard deviation (half-width `sqrt(3) sigma`).
    Uniform,
}

/// Random frame delay model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    /// Standard deviation of the delay, s.
    pub sigma: f64,
    pub kind: JitterKind,
}

impl Jitter {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            kind: JitterKind::Gaussian,
        }
    }

    pub fn uniform(sigma: f64) -> Self {
        Self {
            sigma,
            kind: JitterKind::Uniform,
        }
    }
}

/// Nominal and actual frame times for frames scheduled every
/// `1/frame_rate` from `t_start` up to `t_end`. Actual times are nominal
/// plus a random delay clipped to +-0.45 intervals and to the record.
pub fn frame_schedule(
    t_start: f64,
    t_end: f64,
    frame_rate: f64,
    jitter: Jitter,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(frame_rate > 0.0) {
        return Err(Error::domain("frame_rate", frame_rate, "must be > 0"));
    }
    if !(jitter.sigma >= 0.0) {
        return Err(Error::domain("jitter_sigma", jitter.sigma, "must be >= 0"));
    }
    let interval = 1.0 / frame_rate;
    if 3.0 * jitter.sigma > 0.5 * interval {
        return Err(Error::Precondition(format!(
            "jitter sigma {:.3e} s is too large to keep {} frames/s in order",
            jitter.sigma, frame_rate
        )));
    }
    if !(t_end > t_start) {
        return Err(Error::Precondition("empty time span for frames".into()));
    }
    let n = ((t_end - t_start) * frame_rate + 1e-9).floor() as usize + 1;
    let nominal: Vec<f64> = (0..n).map(|i| t_start + i as f64 * interval).collect();
    if jitter.sigma == 0.0 {
        return Ok((nominal.clone(), nominal));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(JITTER_STREAM);
    let clip = MAX_DELAY_FRACTION * interval;
    let half = 3f64.sqrt() * jitter.sigma;
    let uniform =
        Uniform::new_inclusive(-half, half).map_err(|e| Error::Precondition(e.to_string()))?;
    let actual = nominal
        .iter()
        .map(|&t| {
            let d = match jitter.kind {
                JitterKind::Gaussian => {
                    jitter.sigma
                        * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                }
                JitterKind::Uniform => uniform.sample(&mut rng),
            };
            (t + d.clamp(-clip, clip)).clamp(t_start, t_end)
        })
        .collect::<Vec<_>>();
    if actual.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "jittered frame times are not strictly increasing".into(),
        ));
    }
    Ok((nominal, actual))
}

/// Renders frames one at a time from an angle record, so long records can
/// be processed in chunks.
pub struct FrameRenderer<'a> {
    angles: &'a AngleSeries,
    geometry: ReadoutGeometry,
    nominal: Vec<f64>,
    actual: Vec<f64>,
    photon_noise: bool,
    seed: u64,
}

impl<'a> FrameRenderer<'a> {
    pub fn new(
        angles: &'a AngleSeries,
        geometry: ReadoutGeometry,
        jitter: Jitter,
        photon_noise: bool,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        if angles.len() < 2 {
            return Err(Error::Precondition(
                "angle record too short to render".into(),
            ));
        }
        if angles.dt() > geometry.frame_interval() * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "angle sampling ({} s) is coarser than the frame interval ({} s)",
                angles.dt(),
                geometry.frame_interval()
            )));
        }
        let t = angles.timestamps();
        let (nominal, actual) =
            frame_schedule(t[0], t[t.len() - 1], geometry.frame_rate, jitter, seed)?;
        Ok(Self {
            angles,
            geometry,
            nominal,
            actual,
            photon_noise,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }

    pub fn nominal_timestamps(&self) -> &[f64] {
        &self.nominal
    }

    pub fn actual_timestamps(&self) -> &[f64] {
        &self.actual
    }

    pub fn geometry(&self) -> &ReadoutGeometry {
        &self.geometry
    }

    /// True spot column of frame `i`.
    pub fn spot_position(&self, i: usize) -> Result<f64> {
        let theta = self.angles.interpolate(self.actual[i]);
        Ok(self.geometry.rest_position() + angle_to_displacement(theta, &self.geometry)?)
    }

    pub fn render(&self, i: usize) -> Result<Frame> {
        let x = self.spot_position(i)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        Ok(render_spot(
            &self.geometry,
            x,
            self.geometry.rest_row(),
            self.photon_noise,
            &mut rng,
        ))
    }

    /// Frames `range` rendered in parallel.
    pub fn render_range(&self, range: std::ops::Range<usize>) -> Result<Vec<Frame>> {
        range.into_par_iter().map(|i| self.render(i)).collect()
    }
}

/// Mean electron count above which shot noise is drawn from the normal
/// approximation. At this level one count is many electrons, so the
/// quantized output cannot tell the two apart.
const GAUSSIAN_SHOT_LEVEL: f64 = 1000.0;

/// Gaussian spot centered at column `x`, row `y`, plus background, optional
/// shot noise and read noise, quantized to the bit depth.
pub(crate) fn render_spot(
    g: &ReadoutGeometry,
    x: f64,
    y: f64,
    photon_noise: bool,
    rng: &mut ChaCha8Rng,
) -> Frame {
    let (w, h) = (g.frame_width, g.frame_height);
    let inv = 1.0 / (2.0 * g.spot_sigma * g.spot_sigma);
    let reach = 10.0 * g.spot_sigma;
    let gx: Vec<f64> = (0..w)
        .map(|j| {
            let d = j as f64 - x;
            if d.abs() > reach {
                0.0
            } else {
                (-d * d * inv).exp()
            }
        })
        .collect();
    let gy: Vec<f64> = (0..h)
        .map(|i| {
            let d = i as f64 - y;
            (-d * d * inv).exp()
        })
        .collect();
    let full = g.full_scale() as f64;
    let gain = full / g.full_well;
    let read_var = g.read_noise * g.read_noise;
    let mut data = Vec::with_capacity(w * h);
    for gyi in &gy {
        for gxj in &gx {
            let level = g.background + g.spot_peak * gxj * gyi;
            let mut counts = level * full;
            let mut var = read_var;
            if photon_noise {
                let mean = level * g.full_well;
                if mean > GAUSSIAN_SHOT_LEVEL {
                    // shot and read noise combine into one normal draw
                    var += mean * gain * gain;
                } else if mean > 0.0 {
                    counts = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean) * gain;
                }
            }
            if var > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                counts += var.sqrt() * z;
            }
            data.push(counts.round().clamp(0.0, full) as u16);
        }
    }
    Frame {
        width: w,
        height: h,
        data,
    }
}

/// Renders every frame of `angles` at the configured frame rate.
pub fn render_frames(
    angles: &AngleSeries,
    geometry: &ReadoutGeometry,
    jitter: Jitter,
    photon_noise: bool,
    seed: u64,
) -> Result<FrameSequence> {
    let r = FrameRenderer::new(angles, *geometry, jitter, photon_noise, seed)?;
    let frames = r.render_range(0..r.len())?;
    FrameSequence::new(frames, r.nominal, r.actual, *geometry)
}

/// Frames rendered per parallel batch in [`render_and_track`].
pub const RENDER_CHUNK: usize = 4096;

/// Renders and tracks in batches without holding the whole frame sequence
/// in memory. Gives the same track as `track(render_frames(..))`.
pub fn render_and_track(
    angles: &AngleSeries,
    geometry: &ReadoutGeometry,
    jitter: Jitter,
    photon_noise: bool,
    seed: u64,
    settings: TrackerSettings,
) -> Result<SpotTrack> {
    let r = FrameRenderer::new(angles, *geometry, jitter, photon_noise, seed)?;
    let mut tracker = CentroidTracker::new(settings)?;
    let n = r.len();
    let mut pos = Vec::with_capacity(n);
    let mut orth = Vec::with_capacity(n);
    let mut qual = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + RENDER_CHUNK).min(n);
        for frame in r.render_range(start..end)? {
            let m = tracker.process(&frame)?;
            pos.push(m.position);
            orth.push(m.orthogonal);
            qual.push(m.quality);
        }
        start = end;
    }
    SpotTrack::new(pos, r.actual, r.nominal, qual, orth)
}
