//! 2x2 helpers for the oscillator state-space recurrences.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn diag(x: f64, y: f64) -> Self {
        Self::new(x, 0.0, 0.0, y)
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    #[cfg(test)]
    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[cfg(test)]
    pub fn inverse(self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.d, -self.b, -self.c, self.a).scale(1.0 / det))
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Lower Cholesky factor of a symmetric positive semi-definite matrix.
    /// Tiny negative pivots from round-off are clamped to zero.
    pub fn cholesky_lower(self) -> Self {
        let l11 = self.a.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.c / l11 } else { 0.0 };
        let l22 = (self.d - l21 * l21).max(0.0).sqrt();
        Self::new(l11, 0.0, l21, l22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_cholesky() {
        let m = Mat2::new(4.0, 2.0, 2.0, 3.0);
        let i = m.inverse().unwrap() * m;
        assert!(
            (i.a - 1.0).abs() < 1e-15
                && i.b.abs() < 1e-15
                && i.c.abs() < 1e-15
                && (i.d - 1.0).abs() < 1e-15
        );
        let l = m.cholesky_lower();
        let back = l * l.transpose();
        assert!(
            (back - m).a.abs() < 1e-14 && (back - m).b.abs() < 1e-14 && (back - m).d.abs() < 1e-14
        );
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }
}
