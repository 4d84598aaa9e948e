use crate::{Error, Result, Scalar};

/// One sinusoidal component `amplitude * cos(2 pi frequency t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone<T = f64> {
    /// Field amplitude, T.
    pub amplitude: T,
    /// Hz.
    pub frequency: T,
    /// rad.
    pub phase: T,
}

/// Signal field `B_sig(t)` applied perpendicular to the moment.
///
/// The field is a signed scalar; the torque it exerts is `moment * B_sig`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DriveSignal<T = f64> {
    #[default]
    None,
    Tones(Vec<Tone<T>>),
    /// Samples interpolated linearly between points and zero outside the
    /// table.
    Tabulated {
        times: Vec<T>,
        values: Vec<T>,
    },
}

impl<T: Scalar> DriveSignal<T> {
    pub fn sinusoid(amplitude: T, frequency: T, phase: T) -> Self {
        DriveSignal::Tones(vec![Tone {
            amplitude,
            frequency,
            phase,
        }])
    }

    pub fn multi_tone(tones: Vec<Tone<T>>) -> Self {
        DriveSignal::Tones(tones)
    }

    pub fn tabulated(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Precondition(format!(
                "tabulated drive has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Precondition(
                "tabulated drive needs at least two samples".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "tabulated drive times must be strictly increasing".into(),
            ));
        }
        Ok(DriveSignal::Tabulated { times, values })
    }

    pub fn tones(&self) -> &[Tone<T>] {
        match self {
            DriveSignal::Tones(t) => t,
            _ => &[],
        }
    }

    pub fn is_none(&self) -> bool {
        match self {
            DriveSignal::None => true,
            DriveSignal::Tones(t) => t.is_empty(),
            DriveSignal::Tabulated { .. } => false,
        }
    }

    /// Multiplies every amplitude (or table value) by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        match self {
            DriveSignal::None => DriveSignal::None,
            DriveSignal::Tones(t) => DriveSignal::Tones(
                t.iter()
                    .map(|tone| Tone {
                        amplitude: tone.amplitude * factor,
                        ..*tone
                    })
                    .collect(),
            ),
            DriveSignal::Tabulated { times, values } => DriveSignal::Tabulated {
                times: times.clone(),
                values: values.iter().map(|&v| v * factor).collect(),
            },
        }
    }

    /// Field value at time `t`, T.
    pub fn value_at(&self, t: T) -> T {
        match self {
            DriveSignal::None => T::zero(),
            DriveSignal::Tones(tones) => tones
                .iter()
                .map(|tone| tone.amplitude * (T::TAU() * tone.frequency * t + tone.phase).cos())
                .fold(T::zero(), |a, b| a + b),
            DriveSignal::Tabulated { times, values } => interpolate_table(times, values, t),
        }
    }

    /// Value of only the tabulated part (zero for tone drives).
    pub(crate) fn table_value_at(&self, t: T) -> T {
        match self {
            DriveSignal::Tabulated { times, values } => interpolate_table(times, values, t),
            _ => T::zero(),
        }
    }
}

fn interpolate_table<T: Scalar>(times: &[T], values: &[T], t: T) -> T {
    let n = times.len();
    if n == 0 || t < times[0] || t > times[n - 1] {
        return T::zero();
    }
    let j = times.partition_point(|&x| x <= t);
    if j == 0 {
        return values[0];
    }
    if j >= n {
        return values[n - 1];
    }
    let (t0, t1) = (times[j - 1], times[j]);
    let w = (t - t0) / (t1 - t0);
    values[j - 1] + w * (values[j] - values[j - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_must_be_ordered() {
        assert!(DriveSignal::tabulated(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(DriveSignal::tabulated(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
        assert!(DriveSignal::tabulated(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(DriveSignal::tabulated(vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_ok());
    }

    #[test]
    fn table_interpolates_linearly_and_is_zero_outside() {
        let d = DriveSignal::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, -2.0]).unwrap();
        assert_eq!(d.value_at(0.5), 1.0);
        assert_eq!(d.value_at(2.0), 0.0);
        assert_eq!(d.value_at(3.0), -2.0);
        assert_eq!(d.value_at(-0.1), 0.0);
        assert_eq!(d.value_at(3.1), 0.0);
    }

    #[test]
    fn tones_sum() {
        let d = DriveSignal::multi_tone(vec![
            Tone {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            },
            Tone {
                amplitude: 2.0,
                frequency: 2.0,
                phase: std::f64::consts::FRAC_PI_2,
            },
        ]);
        assert!((d.value_at(0.0) - 1.0).abs() < 1e-15);
        assert!(
            (d.value_at(0.25)
                - (0.0 + 2.0 * (std::f64::consts::PI + std::f64::consts::FRAC_PI_2).cos()))
            .abs()
                < 1e-12
        );
    }
}
