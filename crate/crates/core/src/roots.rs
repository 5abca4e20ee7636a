//! Scalar root finding for increasing functions.

use crate::error::{Error, Result};

/// Root of an increasing `g` in `[lo, hi]` (with `g(lo) <= 0 <= g(hi)`) by
/// Newton steps that fall back to bisection whenever they leave the bracket.
pub fn newton_increasing<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for it in 0..200 {
        let v = g(x)?;
        if v == 0.0 {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let newton = x - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= xtol * (1.0 + x.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return Ok(x);
        }
        if it == 199 {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "bracketed newton",
        iterations: 200,
        residual: hi - lo,
    })
}

/// Grows `hi` geometrically from `start` until `g(hi) >= 0`.
pub fn bracket_above<G: Fn(f64) -> Result<f64>>(g: G, start: f64) -> Result<f64> {
    let mut hi = start.max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        if g(hi)? >= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::NonConvergence {
        what: "bracket",
        iterations: 200,
        residual: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let r = newton_increasing(|x| Ok(x * x * x - 2.0), |x| 3.0 * x * x, 0.0, 2.0, 1e-15)
            .unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        let hi = bracket_above(|x| Ok(x - 1000.0), 1.0).unwrap();
        assert!(hi >= 1000.0);
    }
}
