//! Plain timestamped scalar series shared by the analysis modules.

use crate::{Error, Result};

/// Samples `values[i]` taken at `times[i]` (seconds, strictly increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Precondition(format!(
                "series has {} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Uniformly sampled series starting at `t0`.
    pub fn uniform(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("dt", dt, "must be > 0"));
        }
        let times = (0..values.len()).map(|i| t0 + i as f64 * dt).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time spanned by the samples, counting one trailing interval, so `n`
    /// samples at spacing `dt` have duration `n dt`.
    pub fn duration(&self) -> f64 {
        match self.times.len() {
            0 => 0.0,
            1 => 0.0,
            n => (self.times[n - 1] - self.times[0]) * n as f64 / (n - 1) as f64,
        }
    }

    /// Mean sample spacing.
    pub fn mean_interval(&self) -> f64 {
        let n = self.times.len();
        if n < 2 {
            return f64::NAN;
        }
        (self.times[n - 1] - self.times[0]) / (n - 1) as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.mean_interval()
    }

    /// Largest deviation of any timestamp from the uniform grid, in units of
    /// the mean interval.
    pub fn max_grid_deviation(&self) -> f64 {
        let dt = self.mean_interval();
        let t0 = self.times.first().copied().unwrap_or(0.0);
        self.times
            .iter()
            .enumerate()
            .map(|(i, &t)| ((t - t0 - i as f64 * dt) / dt).abs())
            .fold(0.0, f64::max)
    }

    /// Keeps samples with `t >= t_start`.
    pub fn after(&self, t_start: f64) -> Self {
        let i = self.times.partition_point(|&t| t < t_start);
        Self {
            times: self.times[i..].to_vec(),
            values: self.values[i..].to_vec(),
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Linear interpolation onto a uniform grid at `rate` covering the
    /// original span.
    pub fn resample_linear(&self, rate: f64) -> Result<Self> {
        if self.len() < 2 {
            return Err(Error::Precondition(
                "need at least two samples to resample".into(),
            ));
        }
        let t0 = self.times[0];
        let t1 = self.times[self.len() - 1];
        let n = ((t1 - t0) * rate).floor() as usize + 1;
        let mut out = Vec::with_capacity(n);
        let mut j = 0usize;
        for i in 0..n {
            let t = t0 + i as f64 / rate;
            while j + 2 < self.len() && self.times[j + 1] < t {
                j += 1;
            }
            let (ta, tb) = (self.times[j], self.times[j + 1]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            out.push(self.values[j] + w * (self.values[j + 1] - self.values[j]));
        }
        Self::uniform(t0, 1.0 / rate, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unordered() {
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn duration_counts_trailing_interval() {
        let s = TimeSeries::uniform(0.0, 0.5, vec![0.0; 4]).unwrap();
        assert!((s.duration() - 2.0).abs() < 1e-15);
        assert!((s.sample_rate() - 2.0).abs() < 1e-15);
        assert_eq!(s.max_grid_deviation(), 0.0);
    }

    #[test]
    fn resample_reproduces_linear_data() {
        let times: Vec<f64> = (0..50)
            .map(|i| i as f64 * 0.1 + 0.01 * ((i * 7) % 3) as f64)
            .collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * t - 1.0).collect();
        let s = TimeSeries::new(times, values).unwrap();
        let r = s.resample_linear(7.0).unwrap();
        for (t, v) in r.times().iter().zip(r.values()) {
            assert!((v - (3.0 * t - 1.0)).abs() < 1e-12);
        }
    }
}
