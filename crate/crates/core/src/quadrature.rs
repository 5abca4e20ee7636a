//! One-dimensional quadrature: adaptive Simpson for CDFs and moments,
//! Gauss–Hermite rules for Gaussian expectations.

use crate::error::{Error, Result};

/// Stopping rule for adaptive integration: a panel is accepted when its
/// Richardson error estimate is below `max(abs, rel * |whole integral|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const CDF: Tolerance = Tolerance {
        abs: 1e-12,
        rel: 1e-12,
    };

    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson rule with Richardson extrapolation.
///
/// The relative part of the tolerance is resolved against a coarse
/// 16-panel estimate so that tiny tail integrals keep relative accuracy.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature { a, b });
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    const PANELS: usize = 16;
    let width = (b - a) / PANELS as f64;
    let mut coarse = Vec::with_capacity(PANELS);
    let mut scale = 0.0;
    for k in 0..PANELS {
        let lo = a + width * k as f64;
        let hi = if k + 1 == PANELS { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        scale += whole.abs();
        coarse.push((lo, hi, flo, fmid, fhi, whole));
    }
    let eps = tol.abs.max(tol.rel * scale) / PANELS as f64;
    let mut total = 0.0;
    for (lo, hi, flo, fmid, fhi, whole) in coarse {
        total += simpson_step(&f, lo, hi, flo, fmid, fhi, whole, eps, MAX_DEPTH)
            .ok_or(Error::Quadrature { a: lo, b: hi })?;
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Quadrature { a, b })
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * eps || (b - a) <= 1e-14 * (1.0 + a.abs()) {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?;
    Some(l + r)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(crate::error::invalid("Gauss-Legendre order must be positive"));
        }
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        r * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
    }
}

// P_m(x) and P_m'(x) by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    (p1, m as f64 * (x * p1 - p0) / (x * x - 1.0))
}

thread_local! {
    static GL16: GaussLegendre = GaussLegendre::new(16).expect("order 16");
    static GL10: GaussLegendre = GaussLegendre::new(10).expect("order 10");
}

/// 10-point Gauss–Legendre value with no error control, for short panels
/// on which the integrand is known to be smooth.
pub fn gauss_legendre_10<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    GL10.with(|gl| gl.integrate(f, a, b))
}

/// Integral over a short panel: a 16-point Gauss–Legendre value, accepted
/// when it agrees with the two-half composite rule to the relative part of
/// `tol`; otherwise falls back to [`integrate`].
pub fn integrate_panel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (whole, halves) = GL16.with(|gl| {
        let m = 0.5 * (a + b);
        (gl.integrate(&f, a, b), gl.integrate(&f, a, m) + gl.integrate(&f, m, b))
    });
    if halves.is_finite() && (whole - halves).abs() <= tol.abs.max(tol.rel * halves.abs()) {
        Ok(halves)
    } else {
        integrate(f, a, b, tol)
    }
}

/// Gauss–Hermite rule for the standard Gaussian measure: `sum w_i f(x_i)`
/// approximates `E f(Y)`, `Y ~ N(0, 1)`, exactly for polynomials of degree
/// below `2m`. Weights sum to one.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > 200 {
            return Err(Error::InvalidArgument(format!(
                "Gauss-Hermite order {m} outside 1..=200"
            )));
        }
        // Newton iteration on orthonormal physicists' Hermite polynomials,
        // weight e^{-x^2}; rescaled to the probabilists' weight at the end.
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; m];
        let mut w = vec![0.0; m];
        let n = m as f64;
        let half = m.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * n + 1.0).sqrt() - 1.85575 * (2.0 * n + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * n.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..m {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NonConvergence {
                    what: "Gauss-Hermite node",
                    iterations: 100,
                    residual: z,
                });
            }
            x[i] = z;
            x[m - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[m - 1 - i] = w[i];
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let sqrtpi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * sqrt2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrtpi).collect();
        nodes.reverse();
        weights.reverse();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF, accurate in relative terms in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF: rational start refined by Halley steps
/// against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
