//! Laser-lever readout: angle to spot displacement, camera frame rendering
//! with timing jitter, and the centroid tracker that inverts it.

mod frames;
mod render;
mod track;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use frames::{Frame, FrameSequence, SpotTrack};
pub use render::{
    frame_schedule, render_and_track, render_frames, FrameRenderer, Jitter, JitterKind,
};
pub use track::{track_centroid, CentroidTracker, ThresholdMode, TrackerSettings};

/// Largest angle accepted by the small-angle lever model, rad.
pub const SMALL_ANGLE_LIMIT: f64 = 1e-2;

/// Camera and lever-arm parameters.
///
/// Intensities (`spot_peak`, `background`) are fractions of full scale.
/// `read_noise` is in counts, `full_well` in photo-electrons at full scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutGeometry {
    /// Mirror-to-camera distance, m.
    pub path_length: f64,
    /// Pixel pitch, m.
    pub pixel_size: f64,
    pub frame_rate: f64,
    pub bit_depth: u32,
    /// Gaussian spot width, px.
    pub spot_sigma: f64,
    pub spot_peak: f64,
    pub background: f64,
    pub frame_width: usize,
    pub frame_height: usize,
    pub read_noise: f64,
    pub full_well: f64,
}

impl Default for ReadoutGeometry {
    /// 0.7 m lever, 4.8 um pixels, 8-bit camera at 50 frames/s. The spot
    /// and noise settings put the tracker floor of a static spot near
    /// 8e-7 px^2/Hz.
    fn default() -> Self {
        Self {
            path_length: 0.7,
            pixel_size: 4.8e-6,
            frame_rate: 50.0,
            bit_depth: 8,
            spot_sigma: 2.5,
            spot_peak: 0.8,
            background: 0.05,
            frame_width: 640,
            frame_height: 12,
            read_noise: 0.45,
            full_well: 40_000.0,
        }
    }
}

impl ReadoutGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("path_length", self.path_length),
            ("pixel_size", self.pixel_size),
            ("frame_rate", self.frame_rate),
            ("spot_sigma", self.spot_sigma),
            ("full_well", self.full_well),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "must be > 0"));
            }
        }
        if ![8, 10, 12, 16].contains(&self.bit_depth) {
            return Err(Error::domain(
                "bit_depth",
                self.bit_depth as f64,
                "must be 8, 10, 12 or 16",
            ));
        }
        if !(self.spot_peak > 0.0)
            || !(self.background >= 0.0)
            || self.spot_peak + self.background > 1.0
        {
            return Err(Error::domain(
                "spot_peak",
                self.spot_peak,
                "need spot_peak > 0, background >= 0 and spot_peak + background <= 1",
            ));
        }
        if !(self.read_noise >= 0.0) {
            return Err(Error::domain("read_noise", self.read_noise, "must be >= 0"));
        }
        if self.frame_width < 16 || self.frame_height < 1 {
            return Err(Error::Precondition(
                "frame must be at least 16 x 1 pixels".into(),
            ));
        }
        Ok(())
    }

    /// `2 L / l_c`, px/rad.
    pub fn lever_gain(&self) -> f64 {
        2.0 * self.path_length / self.pixel_size
    }

    /// Largest count value, `2^bit_depth - 1`.
    pub fn full_scale(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    /// Spot column at zero angle: the frame center.
    pub fn rest_position(&self) -> f64 {
        (self.frame_width as f64 - 1.0) / 2.0
    }

    pub fn rest_row(&self) -> f64 {
        (self.frame_height as f64 - 1.0) / 2.0
    }

    pub fn frame_interval(&self) -> f64 {
        1.0 / self.frame_rate
    }
}

/// `2 L angle / l_c`, px. Rejects `|angle| >= 1e-2` rad.
pub fn angle_to_displacement(angle: f64, geometry: &ReadoutGeometry) -> Result<f64> {
    if !(angle.abs() < SMALL_ANGLE_LIMIT) {
        return Err(Error::domain(
            "angle",
            angle,
            "small-angle model needs |angle| < 1e-2 rad",
        ));
    }
    Ok(geometry.lever_gain() * angle)
}
