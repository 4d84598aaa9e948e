use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReadoutGeometry;
use crate::{Error, Result, TimeSeries};

/// One camera image, row-major counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Precondition(format!(
                "frame data has {} pixels, expected {width} x {height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    /// Binary portable grey-map (P5). 16-bit samples are big-endian.
    pub fn write_pgm(&self, w: &mut impl Write, maxval: u16) -> Result<()> {
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, maxval)?;
        if maxval < 256 {
            let bytes: Vec<u8> = self.data.iter().map(|&v| v as u8).collect();
            w.write_all(&bytes)?;
        } else {
            let mut bytes = Vec::with_capacity(self.data.len() * 2);
            for &v in &self.data {
                bytes.extend_from_slice(&v.to_be_bytes());
            }
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_pgm(path: &Path) -> Result<(Self, u16)> {
        let bad = |reason: String| Error::Format {
            kind: "pgm",
            path: path.to_path_buf(),
            reason,
        };
        let mut r = BufReader::new(fs::File::open(path)?);
        let mut header = Vec::new();
        // magic, width, height, maxval, skipping comments
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("truncated header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header.len() != 4 || header[0] != "P5" {
            return Err(bad("not a binary grey-map".into()));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(format!("bad header field '{s}'")))
        };
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(bad(format!("maxval {maxval} out of range")));
        }
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        let bpp = if maxval < 256 { 1 } else { 2 };
        if raw.len() != width * height * bpp {
            return Err(bad(format!(
                "expected {} data bytes, found {}",
                width * height * bpp,
                raw.len()
            )));
        }
        let data: Vec<u16> = if bpp == 1 {
            raw.iter().map(|&b| b as u16).collect()
        } else {
            raw.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        if data.iter().any(|&v| v as usize > maxval) {
            return Err(bad("sample exceeds maxval".into()));
        }
        Ok((Self::new(width, height, data)?, maxval as u16))
    }
}

/// Rendered camera record.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    nominal_timestamps: Vec<f64>,
    actual_timestamps: Vec<f64>,
    geometry: ReadoutGeometry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameManifest {
    format: String,
    n_frames: usize,
    geometry: ReadoutGeometry,
    nominal_timestamps: Vec<f64>,
    actual_timestamps: Vec<f64>,
}

const MANIFEST: &str = "frames.toml";

impl FrameSequence {
    pub fn new(
        frames: Vec<Frame>,
        nominal_timestamps: Vec<f64>,
        actual_timestamps: Vec<f64>,
        geometry: ReadoutGeometry,
    ) -> Result<Self> {
        geometry.validate()?;
        let n = frames.len();
        if nominal_timestamps.len() != n || actual_timestamps.len() != n {
            return Err(Error::Precondition(
                "frame and timestamp counts differ".into(),
            ));
        }
        if actual_timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "actual timestamps must be strictly increasing".into(),
            ));
        }
        let dt = geometry.frame_interval();
        if nominal_timestamps.iter().enumerate().any(|(i, &t)| {
            (t - nominal_timestamps[0] - i as f64 * dt).abs() > 1e-9 * (1.0 + t.abs())
        }) {
            return Err(Error::Precondition(
                "nominal timestamps must be uniform at 1/frame_rate".into(),
            ));
        }
        let full = geometry.full_scale();
        for f in &frames {
            if f.width != geometry.frame_width || f.height != geometry.frame_height {
                return Err(Error::Precondition(
                    "frame size does not match the geometry".into(),
                ));
            }
            if f.data.iter().any(|&v| v > full) {
                return Err(Error::Precondition(
                    "pixel value exceeds the bit depth".into(),
                ));
            }
        }
        Ok(Self {
            frames,
            nominal_timestamps,
            actual_timestamps,
            geometry,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn nominal_timestamps(&self) -> &[f64] {
        &self.nominal_timestamps
    }

    pub fn actual_timestamps(&self) -> &[f64] {
        &self.actual_timestamps
    }

    pub fn geometry(&self) -> &ReadoutGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Adds `offset` counts to every pixel, saturating at full scale.
    pub fn with_offset(&self, offset: u16) -> Self {
        let full = self.geometry.full_scale();
        let frames = self
            .frames
            .iter()
            .map(|f| Frame {
                width: f.width,
                height: f.height,
                data: f
                    .data
                    .iter()
                    .map(|&v| v.saturating_add(offset).min(full))
                    .collect(),
            })
            .collect();
        Self {
            frames,
            ..self.clone()
        }
    }

    fn frame_path(dir: &Path, i: usize) -> PathBuf {
        dir.join(format!("frame_{i:07}.pgm"))
    }

    /// Writes `frame_NNNNNNN.pgm` files plus a `frames.toml` manifest.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let full = self.geometry.full_scale();
        for (i, f) in self.frames.iter().enumerate() {
            let mut w = std::io::BufWriter::new(fs::File::create(Self::frame_path(dir, i))?);
            f.write_pgm(&mut w, full)?;
            w.flush()?;
        }
        let manifest = FrameManifest {
            format: "fmto-frames-1".into(),
            n_frames: self.frames.len(),
            geometry: self.geometry,
            nominal_timestamps: self.nominal_timestamps.clone(),
            actual_timestamps: self.actual_timestamps.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mpath = dir.join(MANIFEST);
        let text = fs::read_to_string(&mpath)?;
        let m: FrameManifest = toml::from_str(&text).map_err(|e| Error::Format {
            kind: "frame manifest",
            path: mpath.clone(),
            reason: e.to_string(),
        })?;
        if m.format != "fmto-frames-1" {
            return Err(Error::Format {
                kind: "frame manifest",
                path: mpath,
                reason: format!("unknown format '{}'", m.format),
            });
        }
        let full = m.geometry.full_scale();
        let mut frames = Vec::with_capacity(m.n_frames);
        for i in 0..m.n_frames {
            let p = Self::frame_path(dir, i);
            let (f, maxval) = Frame::read_pgm(&p)?;
            if maxval != full {
                return Err(Error::Format {
                    kind: "pgm",
                    path: p,
                    reason: format!("maxval {maxval} does not match bit depth ({full})"),
                });
            }
            frames.push(f);
        }
        Self::new(
            frames,
            m.nominal_timestamps,
            m.actual_timestamps,
            m.geometry,
        )
    }
}

/// Sub-pixel spot positions extracted from a frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotTrack {
    positions: Vec<f64>,
    timestamps: Vec<f64>,
    nominal_timestamps: Vec<f64>,
    quality: Vec<f64>,
    orthogonal: Vec<f64>,
}

impl SpotTrack {
    /// `timestamps` are the actual frame times; `nominal_timestamps` the
    /// ideal uniform grid they were scheduled on.
    pub fn new(
        positions: Vec<f64>,
        timestamps: Vec<f64>,
        nominal_timestamps: Vec<f64>,
        quality: Vec<f64>,
        orthogonal: Vec<f64>,
    ) -> Result<Self> {
        let n = positions.len();
        if [
            timestamps.len(),
            nominal_timestamps.len(),
            quality.len(),
            orthogonal.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::Precondition(
                "spot track columns differ in length".into(),
            ));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0]))
            || nominal_timestamps.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::Precondition(
                "track timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            positions,
            timestamps,
            nominal_timestamps,
            quality,
            orthogonal,
        })
    }

    /// Track with identical actual and nominal times and unit quality.
    pub fn from_positions(timestamps: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        Self::new(
            positions,
            timestamps.clone(),
            timestamps,
            vec![1.0; n],
            vec![0.0; n],
        )
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn nominal_timestamps(&self) -> &[f64] {
        &self.nominal_timestamps
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    /// Centroid along the insensitive axis, kept for diagnostics.
    pub fn orthogonal(&self) -> &[f64] {
        &self.orthogonal
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions against actual (`true`) or nominal timestamps.
    pub fn to_time_series(&self, use_actual: bool) -> Result<TimeSeries> {
        let t = if use_actual {
            &self.timestamps
        } else {
            &self.nominal_timestamps
        };
        TimeSeries::new(t.clone(), self.positions.clone())
    }

    /// Keeps frames with actual time `>= t_start`.
    pub fn after(&self, t_start: f64) -> Self {
        let i = self.timestamps.partition_point(|&t| t < t_start);
        Self {
            positions: self.positions[i..].to_vec(),
            timestamps: self.timestamps[i..].to_vec(),
            nominal_timestamps: self.nominal_timestamps[i..].to_vec(),
            quality: self.quality[i..].to_vec(),
            orthogonal: self.orthogonal[i..].to_vec(),
        }
    }

    /// Appends another track that starts after this one ends.
    pub fn extend(&mut self, other: SpotTrack) -> Result<()> {
        if let (Some(&a), Some(&b)) = (self.timestamps.last(), other.timestamps.first()) {
            if !(b > a) {
                return Err(Error::Precondition(
                    "appended track overlaps in time".into(),
                ));
            }
        }
        self.positions.extend(other.positions);
        self.timestamps.extend(other.timestamps);
        self.nominal_timestamps.extend(other.nominal_timestamps);
        self.quality.extend(other.quality);
        self.orthogonal.extend(other.orthogonal);
        Ok(())
    }

    /// Columns `time_s,position_px,quality` (actual timestamps).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time_s", "position_px", "quality"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.17e}", self.timestamps[i]),
                format!("{:.17e}", self.positions[i]),
                format!("{:.6e}", self.quality[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a track written by [`Self::write_csv`]. The nominal grid is
    /// rebuilt from the first timestamp and the mean interval.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: String| Error::Format {
            kind: "track csv",
            path: path.to_path_buf(),
            reason,
        };
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.iter().collect::<Vec<_>>() != ["time_s", "position_px", "quality"] {
            return Err(bad("expected header time_s,position_px,quality".into()));
        }
        let (mut t, mut x, mut q) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad number '{}'", &rec[i])))
            };
            t.push(num(0)?);
            x.push(num(1)?);
            q.push(num(2)?);
        }
        let n = t.len();
        let nominal = if n >= 2 {
            let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
            (0..n).map(|i| t[0] + i as f64 * dt).collect()
        } else {
            t.clone()
        };
        Self::new(x, t, nominal, q, vec![0.0; n])
    }
}
