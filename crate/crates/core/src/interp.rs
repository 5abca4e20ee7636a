//! Monotone piecewise-cubic Hermite interpolation.

use crate::error::{invalid, Result};

/// Cubic Hermite interpolant through increasing data. Slopes are either
/// supplied (exact derivatives) or estimated, and in both cases limited by
/// the Fritsch–Carlson condition so the interpolant stays monotone.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check(&x, &y)?;
        let n = x.len();
        let secant: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut m = vec![0.0; n];
        m[0] = secant[0];
        m[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            m[k] = if secant[k - 1] * secant[k] <= 0.0 {
                0.0
            } else {
                // harmonic mean weighted by interval lengths
                let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w1 + w2) / (w1 / secant[k - 1] + w2 / secant[k])
            };
        }
        Ok(Self::limited(x, y, m, &secant))
    }

    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        check(&x, &y)?;
        if m.len() != x.len() || m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("slopes must be finite, nonnegative and one per node"));
        }
        let n = x.len();
        let secant: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        Ok(Self::limited(x, y, m, &secant))
    }

    fn limited(x: Vec<f64>, y: Vec<f64>, mut m: Vec<f64>, secant: &[f64]) -> Self {
        for (k, &d) in secant.iter().enumerate() {
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let (a, b) = (m[k] / d, m[k + 1] / d);
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[k] = tau * a * d;
                m[k + 1] = tau * b * d;
            }
        }
        MonotoneCubic { x, y, m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1
    }

    /// Value; linear extrapolation with the end slopes outside the knots.
    pub fn eval(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let n = self.x.len();
        if t < lo {
            return self.y[0] + self.m[0] * (t - lo);
        }
        if t > hi {
            return self.y[n - 1] + self.m[n - 1] * (t - hi);
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let n = self.x.len();
        if t < lo {
            return self.m[0];
        }
        if t > hi {
            return self.m[n - 1];
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (d00 * self.y[k] + d01 * self.y[k + 1]) / h + d10 * self.m[k] + d11 * self.m[k + 1]
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(invalid("interpolation needs at least two matching knots"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("knots must be strictly increasing"));
    }
    if y.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("monotone interpolation needs nondecreasing data"));
    }
    Ok(())
}
