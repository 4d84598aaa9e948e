use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, OscillatorParams, Result, TimeSeries};

const BINARY_MAGIC: &[u8; 8] = b"FMTOANG1";

/// Uniformly sampled torsion angle record, `timestamps[i] = (k0 + i) * dt`
/// where `k0` is 0 unless leading samples were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    dt: f64,
    timestamps: Vec<f64>,
    angles: Vec<f64>,
    angular_rates: Option<Vec<f64>>,
    seed: Option<u64>,
    params: Option<OscillatorParams<f64>>,
}

impl AngleSeries {
    pub(crate) fn from_parts(
        dt: f64,
        angles: Vec<f64>,
        angular_rates: Option<Vec<f64>>,
        seed: Option<u64>,
        params: Option<OscillatorParams<f64>>,
    ) -> Self {
        Self::from_parts_at(0, dt, angles, angular_rates, seed, params)
    }

    /// As `from_parts` with the first sample at index `first` of the
    /// original grid.
    fn from_parts_at(
        first: u64,
        dt: f64,
        angles: Vec<f64>,
        angular_rates: Option<Vec<f64>>,
        seed: Option<u64>,
        params: Option<OscillatorParams<f64>>,
    ) -> Self {
        let timestamps = (0..angles.len())
            .map(|i| (first + i as u64) as f64 * dt)
            .collect();
        Self {
            dt,
            timestamps,
            angles,
            angular_rates,
            seed,
            params,
        }
    }

    /// Wraps externally produced angles sampled every `dt` from t = 0.
    pub fn from_angles(dt: f64, angles: Vec<f64>, angular_rates: Option<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("dt", dt, "must be > 0"));
        }
        if let Some(r) = &angular_rates {
            if r.len() != angles.len() {
                return Err(Error::Precondition(
                    "angular_rates length differs from angles".into(),
                ));
            }
        }
        Ok(Self::from_parts(dt, angles, angular_rates, None, None))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angular_rates(&self) -> Option<&[f64]> {
        self.angular_rates.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn params(&self) -> Option<&OscillatorParams<f64>> {
        self.params.as_ref()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// Steady-state settling time `10 Q / f_res` for the recorded
    /// oscillator, or zero if no parameters are attached.
    pub fn transient_time(&self) -> f64 {
        self.params.map_or(0.0, |p| 10.0 * p.q_factor() / p.f_res())
    }

    /// Drops the first [`transient_time`](Self::transient_time) seconds.
    /// Timestamps keep their absolute values.
    pub fn drop_transient(&self) -> Self {
        self.drop_before(self.transient_time())
    }

    /// Drops samples with `t < t_start`; timestamps keep absolute values.
    pub fn drop_before(&self, t_start: f64) -> Self {
        let i = self.timestamps.partition_point(|&t| t < t_start);
        Self {
            dt: self.dt,
            timestamps: self.timestamps[i..].to_vec(),
            angles: self.angles[i..].to_vec(),
            angular_rates: self.angular_rates.as_ref().map(|r| r[i..].to_vec()),
            seed: self.seed,
            params: self.params,
        }
    }

    pub fn to_time_series(&self) -> TimeSeries {
        TimeSeries::new(self.timestamps.clone(), self.angles.clone())
            .expect("uniform timestamps are ordered")
    }

    /// Angle at arbitrary `t` inside the record: cubic Hermite when rates are
    /// available, linear otherwise.
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return f64::NAN;
        }
        let t0 = self.timestamps[0];
        let x = (t - t0) / self.dt;
        if x <= 0.0 {
            return self.angles[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= n {
            return self.angles[n - 1];
        }
        let s = x - i as f64;
        let (y0, y1) = (self.angles[i], self.angles[i + 1]);
        match &self.angular_rates {
            Some(r) => {
                let (m0, m1) = (r[i] * self.dt, r[i + 1] * self.dt);
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                    + (s3 - 2.0 * s2 + s) * m0
                    + (-2.0 * s3 + 3.0 * s2) * y1
                    + (s3 - s2) * m1
            }
            None => y0 + s * (y1 - y0),
        }
    }

    /// Writes `time_s,angle_rad` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time_s", "angle_rad"])?;
        for (t, a) in self.timestamps.iter().zip(&self.angles) {
            w.write_record([format!("{t:.17e}"), format!("{a:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `time_s,angle_rad` file. The samples must be uniformly spaced
    /// (to 1e-9 of the step); the first may sit at any time.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: String| Error::Format {
            kind: "angle csv",
            path: path.to_path_buf(),
            reason,
        };
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["time_s", "angle_rad"] {
            return Err(bad(format!(
                "expected header time_s,angle_rad, found {headers:?}"
            )));
        }
        let mut times = Vec::new();
        let mut angles = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let t: f64 = rec[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
            let a: f64 = rec[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
            times.push(t);
            angles.push(a);
        }
        if times.len() < 2 {
            return Err(bad("fewer than two samples".into()));
        }
        let (t0, n) = (times[0], times.len());
        let dt = (times[n - 1] - t0) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(bad("time does not increase".into()));
        }
        let tol = 1e-9 * dt.max(t0.abs()).max(times[n - 1].abs());
        for (i, &t) in times.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > tol {
                return Err(bad(format!(
                    "sample {i} at t = {t} is off the uniform grid"
                )));
            }
        }
        let mut s = Self::from_parts(dt, angles, None, None, None);
        s.timestamps = times;
        Ok(s)
    }

    /// Binary record carrying the parameter snapshot and seed, so a run can
    /// be reproduced bit for bit.
    ///
    /// Layout (little endian): magic `FMTOANG1`; flags `u8` (bit 0 params,
    /// bit 1 seed, bit 2 rates); `dt f64`; index of the first sample on
    /// the `dt` grid `u64`; seven `f64` parameter fields
    /// (inertia, moment, q_factor, bias_field, k_offset, stiffness, f_res)
    /// when present; `seed u64` when present; `n u64`; `n` angles; `n` rates
    /// when present.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        let flags = u8::from(self.params.is_some())
            | (u8::from(self.seed.is_some()) << 1)
            | (u8::from(self.angular_rates.is_some()) << 2);
        w.write_all(&[flags])?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.first_index().to_le_bytes())?;
        if let Some(p) = &self.params {
            for v in [
                p.inertia(),
                p.moment(),
                p.q_factor(),
                p.bias_field(),
                p.k_offset(),
                p.stiffness(),
                p.f_res(),
            ] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        if let Some(s) = self.seed {
            w.write_all(&s.to_le_bytes())?;
        }
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for a in &self.angles {
            w.write_all(&a.to_le_bytes())?;
        }
        if let Some(r) = &self.angular_rates {
            for v in r {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: &str| Error::Format {
            kind: "angle binary",
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut flags = [0u8; 1];
        r.read_exact(&mut flags)?;
        let flags = flags[0];
        let dt = read_f64(&mut r)?;
        let first = read_u64(&mut r)?;
        let params = if flags & 1 != 0 {
            let mut v = [0.0; 7];
            for x in v.iter_mut() {
                *x = read_f64(&mut r)?;
            }
            Some(
                OscillatorParams::from_raw_parts(v)
                    .map_err(|_| bad("invalid parameter snapshot"))?,
            )
        } else {
            None
        };
        let seed = if flags & 2 != 0 {
            Some(read_u64(&mut r)?)
        } else {
            None
        };
        let n = usize::try_from(read_u64(&mut r)?).map_err(|_| bad("length overflow"))?;
        let mut angles = Vec::with_capacity(n);
        for _ in 0..n {
            angles.push(read_f64(&mut r)?);
        }
        let rates = if flags & 4 != 0 {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(read_f64(&mut r)?);
            }
            Some(v)
        } else {
            None
        };
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self::from_parts_at(first, dt, angles, rates, seed, params))
    }

    /// Position of the first sample on the `dt` grid from t = 0.
    fn first_index(&self) -> u64 {
        self.timestamps
            .first()
            .map_or(0, |&t| (t / self.dt).round().max(0.0) as u64)
    }
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;
    use crate::DriveSignal;

    #[test]
    fn binary_round_trip_is_exact() {
        let p = OscillatorParams::reference();
        let s = simulate(
            &p,
            &DriveSignal::sinusoid(1e-10, 1.0, 0.0),
            300.0,
            0.004,
            4.0,
            99,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        s.write_binary(&path).unwrap();
        let back = AngleSeries::read_binary(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.params().unwrap(), &p);
    }

    #[test]
    fn csv_round_trip() {
        let p = OscillatorParams::reference();
        let s = simulate(&p, &DriveSignal::None, 300.0, 0.004, 2.0, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("time_s,angle_rad\n"));
        let back = AngleSeries::read_csv(&path).unwrap();
        assert_eq!(back.angles(), s.angles());
        assert_eq!(back.len(), s.len());
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "t,theta\n0,1\n1,2\n").unwrap();
        assert!(AngleSeries::read_csv(&path).is_err());
    }

    #[test]
    fn hermite_interpolation_of_sinusoid() {
        let w = std::f64::consts::TAU * 5.0;
        let dt = 0.004;
        let angles: Vec<f64> = (0..1000).map(|i| (w * i as f64 * dt).sin()).collect();
        let rates: Vec<f64> = (0..1000).map(|i| w * (w * i as f64 * dt).cos()).collect();
        let s = AngleSeries::from_angles(dt, angles, Some(rates)).unwrap();
        for k in 0..500 {
            let t = 0.0137 + k as f64 * 0.0071;
            assert!((s.interpolate(t) - (w * t).sin()).abs() < 2e-5);
        }
    }

    #[test]
    fn drop_transient_keeps_absolute_time() {
        let p = OscillatorParams::reference();
        let s = simulate(&p, &DriveSignal::None, 0.0, 0.004, 100.0, 0).unwrap();
        let d = s.drop_transient();
        let t0 = 10.0 * 39.0 / 4.99;
        assert!(d.timestamps()[0] >= t0 && d.timestamps()[0] < t0 + 0.004 + 1e-12);
    }
}
