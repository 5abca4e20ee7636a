//! Measures, potentials and convexity audits.
//!
//! A [`MeasureSpec`] is either a density `e^{-V}` for a [`Potential`] `V`,
//! the uniform law on a [`ConvexBody`], a radial density, the model measure
//! `dx / cos(Ax)`, or a constant density on the half-line. The last two have
//! infinite mass and are never silently normalized.

mod body;
mod potential;
mod specfile;

pub use body::ConvexBody;
pub use specfile::{load_spec, parse_spec};
pub use potential::{add_potentials, second_difference, Domain, Modulus, Potential, Symmetry};

use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::report::{theorem, CheckEntry, Comparison};

/// Truncation radius for unbounded densities, in standard deviations.
pub const DEFAULT_TRUNCATION: f64 = 8.0;

/// Round-off allowance for audits of analytic Hessians.
pub const AUDIT_TOL: f64 = 1e-8;

/// A positive scalar function of one variable: the radial profile `Psi(r)`
/// of a rotation-invariant density, or the density of a half-line measure.
#[derive(Clone)]
pub struct ScalarProfile {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarProfile {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarProfile {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c)
    }

    /// `e^{r}`
    pub fn exponential() -> Self {
        Self::new("exp", f64::exp)
    }

    /// `1 + r`
    pub fn one_plus() -> Self {
        Self::new("1+r", |r| 1.0 + r)
    }

    /// `1 / (1 + r)`
    pub fn inv_one_plus() -> Self {
        Self::new("1/(1+r)", |r| 1.0 / (1.0 + r))
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for ScalarProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarProfile({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub enum MeasureKind {
    /// `e^{-V} dx`
    Density(Potential),
    UniformOnBody(ConvexBody),
    /// `Psi(|x|) dx` on R^d
    Radial { psi: ScalarProfile, dim: usize },
    /// `dx / cos(Ax)` on `(-pi/2A, pi/2A)`
    ModelNu { a: f64 },
    /// `rho(x) dx` on `[0, inf)`
    HalfLine { rho: ScalarProfile },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mass {
    Probability,
    Infinite,
    Unnormalized(f64),
}

#[derive(Clone, Debug)]
pub struct MeasureSpec {
    pub name: String,
    pub kind: MeasureKind,
    pub mass: Mass,
    /// Characteristic length (standard deviation or an upper bound for it)
    /// used for truncation.
    pub scale: f64,
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match &self.kind {
            MeasureKind::Density(p) => p.dim(),
            MeasureKind::UniformOnBody(b) => b.dim(),
            MeasureKind::Radial { dim, .. } => *dim,
            MeasureKind::ModelNu { .. } | MeasureKind::HalfLine { .. } => 1,
        }
    }

    pub fn is_probability(&self) -> bool {
        self.mass == Mass::Probability
    }

    pub fn is_infinite(&self) -> bool {
        self.mass == Mass::Infinite
    }

    pub fn domain(&self) -> Domain {
        match &self.kind {
            MeasureKind::Density(p) => p.domain().clone(),
            MeasureKind::UniformOnBody(b) => {
                let bb = b.bounding_box();
                Domain {
                    lo: bb.iter().map(|r| r.0).collect(),
                    hi: bb.iter().map(|r| r.1).collect(),
                    open: false,
                }
            }
            MeasureKind::Radial { dim, .. } => Domain::whole(*dim),
            MeasureKind::ModelNu { a } => {
                Domain::open_interval(-PI / (2.0 * a), PI / (2.0 * a))
            }
            MeasureKind::HalfLine { .. } => Domain::interval(0.0, f64::INFINITY),
        }
    }

    /// The box the measure is evaluated on: the domain clipped to
    /// `truncation * scale` on unbounded sides.
    pub fn truncated_box(&self, truncation: f64) -> Vec<(f64, f64)> {
        self.domain().truncate(truncation * self.scale)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            MeasureKind::Density(p) => {
                if p.domain().contains(x) {
                    (-p.value(x)).exp()
                } else {
                    0.0
                }
            }
            MeasureKind::UniformOnBody(b) => {
                if b.contains(x) {
                    1.0 / b.volume().unwrap_or(f64::INFINITY)
                } else {
                    0.0
                }
            }
            MeasureKind::Radial { psi, .. } => {
                psi.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            MeasureKind::ModelNu { a } => {
                let c = (a * x[0]).cos();
                if self.domain().contains(x) && c > 0.0 {
                    1.0 / c
                } else {
                    0.0
                }
            }
            MeasureKind::HalfLine { rho } => {
                if x[0] >= 0.0 {
                    rho.eval(x[0])
                } else {
                    0.0
                }
            }
        }
    }

    pub fn density_1d(&self, x: f64) -> f64 {
        self.density(&[x])
    }

    /// The potential when the measure is a density `e^{-V}`.
    pub fn potential(&self) -> Option<&Potential> {
        match &self.kind {
            MeasureKind::Density(p) => Some(p),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Standard Gaussian measure on R^d with the normalized quadratic potential.
pub fn make_standard_gaussian(d: usize) -> Result<MeasureSpec> {
    make_gaussian(d, 1.0)
}

/// Centered Gaussian with covariance `sigma^2 Id`.
pub fn make_gaussian(d: usize, sigma: f64) -> Result<MeasureSpec> {
    let p = Potential::gaussian(d, sigma)?;
    Ok(MeasureSpec {
        name: p.name().to_string(),
        kind: MeasureKind::Density(p),
        mass: Mass::Probability,
        scale: sigma,
    })
}

/// Centered Gaussian `e^{-x^T A x / 2}` with precision matrix `A`, normalized
/// in closed form.
pub fn make_gaussian_precision(precision: DMatrix<f64>) -> Result<MeasureSpec> {
    let d = precision.nrows();
    let det = precision.determinant();
    let p = Potential::quadratic(precision)?;
    let kmin = p
        .convexity_lower_bound
        .filter(|k| *k > 0.0)
        .ok_or_else(|| invalid("precision matrix must be positive definite"))?;
    let log_norm = 0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * det.ln();
    let p = add_potentials(&p, &Potential::constant(d, log_norm))?.named("gaussian(precision)");
    Ok(MeasureSpec {
        name: p.name().to_string(),
        kind: MeasureKind::Density(p),
        mass: Mass::Probability,
        scale: 1.0 / kmin.sqrt(),
    })
}

/// Probability measure `e^{-V}` for an arbitrary potential, normalized by
/// quadrature over the truncated domain. `scale` bounds the standard
/// deviation along every axis.
pub fn make_density(potential: Potential, scale: f64) -> Result<MeasureSpec> {
    if !(scale > 0.0) {
        return Err(invalid("scale must be positive"));
    }
    if potential.dim() > 2 {
        return Err(Error::Unsupported(
            "numerically normalized densities beyond d = 2".into(),
        ));
    }
    let window = potential.domain().truncate(DEFAULT_TRUNCATION * scale);
    let name = potential.name().to_string();
    let p = potential.normalized(&window)?;
    Ok(MeasureSpec {
        name,
        kind: MeasureKind::Density(p),
        mass: Mass::Probability,
        scale,
    })
}

/// `|x|^2/2 + lambda * sum x_i^4`, normalized.
pub fn make_quartic(d: usize, lambda: f64) -> Result<MeasureSpec> {
    if lambda < 0.0 {
        return Err(invalid("lambda must be nonnegative"));
    }
    let q = Potential::quadratic(DMatrix::identity(d, d))?;
    let p = Potential::coord_quartic(vec![lambda; d])?;
    let v = add_potentials(&q, &p)?.named(format!("quartic(lambda={lambda})"));
    make_density(v, 1.0)
}

/// Exponential law `rate * e^{-rate x}` on `[0, inf)`.
pub fn make_exponential(rate: f64) -> Result<MeasureSpec> {
    if !(rate > 0.0) {
        return Err(invalid("rate must be positive"));
    }
    let p = add_potentials(
        &Potential::linear(vec![rate])?,
        &Potential::constant(1, -rate.ln()),
    )?
    .with_domain(Domain::interval(0.0, f64::INFINITY))?
    .named(format!("exponential(rate={rate})"));
    Ok(MeasureSpec {
        name: p.name().to_string(),
        kind: MeasureKind::Density(p),
        mass: Mass::Probability,
        // 8 "standard deviations" of the truncation rule give e^{-8*...};
        // widen so the truncated tail is below 1e-30.
        scale: 9.0 / rate,
    })
}

/// Uniform probability on a bounded convex body.
pub fn make_uniform(body: ConvexBody) -> Result<MeasureSpec> {
    if body.volume().is_none() {
        return Err(invalid("uniform measure needs a bounded body"));
    }
    let scale = body.diameter();
    Ok(MeasureSpec {
        name: format!("uniform({})", body.label()),
        kind: MeasureKind::UniformOnBody(body),
        mass: Mass::Probability,
        scale,
    })
}

/// The model measure `dx / cos(Ax)`, flagged infinite.
pub fn make_model_nu(a: f64) -> Result<MeasureSpec> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("A must be positive, got {a}")));
    }
    Ok(MeasureSpec {
        name: format!("nu_A(A={a})"),
        kind: MeasureKind::ModelNu { a },
        mass: Mass::Infinite,
        scale: PI / (2.0 * a),
    })
}

/// Log-convex potential `W = -log cos(Ax)` of the model measure
/// (`nu_A = e^{W} dx`).
pub fn model_nu_log_density(a: f64) -> Result<Potential> {
    Potential::log_sec(a)
}

/// Lebesgue measure on `[0, inf)`.
pub fn make_lebesgue_halfline() -> MeasureSpec {
    make_halfline(ScalarProfile::constant(1.0))
}

/// `rho(x) dx` on `[0, inf)`, flagged infinite.
pub fn make_halfline(rho: ScalarProfile) -> MeasureSpec {
    MeasureSpec {
        name: format!("halfline({})", rho.name()),
        kind: MeasureKind::HalfLine { rho },
        mass: Mass::Infinite,
        scale: 1.0,
    }
}

/// `Psi(|x|) dx` on R^d, infinite unless Psi is integrable (not checked).
pub fn make_radial(psi: ScalarProfile, dim: usize) -> Result<MeasureSpec> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(MeasureSpec {
        name: format!("radial({},d={dim})", psi.name()),
        kind: MeasureKind::Radial { psi, dim },
        mass: Mass::Infinite,
        scale: 1.0,
    })
}

/// Checks `min eig D^2 p >= claimed_k - AUDIT_TOL` over `points`.
pub fn audit_convexity(p: &Potential, claimed_k: f64, points: &[Vec<f64>]) -> Result<CheckEntry> {
    audit_convexity_with_tol(p, claimed_k, points, AUDIT_TOL)
}

pub fn audit_convexity_with_tol(
    p: &Potential,
    claimed_k: f64,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<CheckEntry> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut min_eig = f64::INFINITY;
    for x in points {
        if !p.domain().contains(x) {
            return Err(Error::OutOfDomain { point: x.clone() });
        }
        min_eig = min_eig.min(p.min_hessian_eigenvalue(x));
    }
    Ok(CheckEntry::compare_abs(
        format!("convexity_audit[{}]", p.name()),
        theorem::AUDIT,
        min_eig,
        claimed_k,
        Comparison::AtLeast,
        tol,
    )
    .with_inputs(&format!("{}|K={claimed_k}|n={}", p.name(), points.len()))
    .with_detail("n_points", points.len() as f64))
}

/// Regular audit grid on a box: `n` points per axis, endpoints included.
pub fn audit_grid(window: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axis = |&(lo, hi): &(f64, f64)| -> Vec<f64> {
        if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect()
        }
    };
    match window {
        [a] => axis(a).into_iter().map(|x| vec![x]).collect(),
        [a, b] => {
            let (xs, ys) = (axis(a), axis(b));
            xs.iter()
                .flat_map(|x| ys.iter().map(move |y| vec![*x, *y]))
                .collect()
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use rand::{Rng, SeedableRng};

    #[test]
    fn standard_gaussian_examples() {
        let g = make_standard_gaussian(1).unwrap();
        assert!((g.density(&[0.0]) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let g2 = make_standard_gaussian(2).unwrap();
        let p = g2.potential().unwrap();
        assert_eq!(p.convexity_lower_bound, Some(1.0));
        assert_eq!(p.directional_upper_bound, Some(1.0));
        assert!(p.symmetry.even && p.symmetry.unconditional);
        assert!((p.min_hessian_eigenvalue(&[0.3, -2.0]) - 1.0).abs() < 1e-15);
        assert!(make_standard_gaussian(0).is_err());
        let mass = integrate(|x| g.density(&[x]), -8.0, 8.0, Tolerance::CDF).unwrap();
        assert!((mass - 1.0).abs() < 1e-12, "mass {mass}");
    }

    #[test]
    fn probability_families_integrate_to_one() {
        for m in [
            make_quartic(1, 0.1).unwrap(),
            make_quartic(1, 10.0).unwrap(),
            make_exponential(1.5).unwrap(),
            make_gaussian(1, 0.5).unwrap(),
        ] {
            let (lo, hi) = m.truncated_box(DEFAULT_TRUNCATION)[0];
            let mass = integrate(|x| m.density_1d(x), lo, hi, Tolerance::CDF).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "{}: {mass}", m.name);
        }
        let q2 = make_quartic(2, 0.25).unwrap();
        let z = q2
            .potential()
            .unwrap()
            .partition_function(&q2.truncated_box(DEFAULT_TRUNCATION))
            .unwrap();
        assert!((z - 1.0).abs() < 1e-8, "{z}");
    }

    #[test]
    fn precision_gaussian_normalized() {
        let m = make_gaussian_precision(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            vec![1.0, 4.0],
        )))
        .unwrap();
        let z = m
            .potential()
            .unwrap()
            .partition_function(&m.truncated_box(DEFAULT_TRUNCATION))
            .unwrap();
        assert!((z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn model_nu_identity() {
        for a in [0.5, 1.0, 2.0] {
            let nu = make_model_nu(a).unwrap();
            assert!(nu.is_infinite());
            let w = model_nu_log_density(a).unwrap();
            let half = PI / (2.0 * a);
            assert_eq!(nu.domain(), Domain::open_interval(-half, half));
            for k in 1..200 {
                let x = -half + 2.0 * half * k as f64 / 200.0;
                let d = nu.density_1d(x);
                assert!((d * (a * x).cos() - 1.0).abs() < 1e-12);
                assert!((w.value(&[x]).exp() / d - 1.0).abs() < 1e-12);
                let lhs = w.hessian(&[x])[(0, 0)] * (-2.0 * w.value(&[x])).exp();
                assert!((lhs / (a * a) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn audit_examples() {
        let half = Potential::quadratic(DMatrix::identity(1, 1)).unwrap();
        let quartic = Potential::coord_quartic(vec![1.0]).unwrap();
        let both = add_potentials(&half, &quartic).unwrap();
        let pts = audit_grid(&[(-3.0, 3.0)], 61);
        let e = audit_convexity(&half, 1.0, &pts).unwrap();
        assert!(e.passed());
        assert_eq!(e.computed, 1.0);
        assert!(!audit_convexity(&quartic, 1.0, &pts).unwrap().passed());
        assert!(audit_convexity(&both, 1.0, &pts).unwrap().passed());
        assert_eq!(audit_convexity(&half, 1.0, &[]), Err(Error::EmptySamples));
    }

    #[test]
    fn smoothed_abs_keeps_convexity_bound() {
        let q = Potential::quadratic(DMatrix::identity(1, 1)).unwrap();
        let p = Potential::smooth_abs(1, 1.0, 1e-2).unwrap();
        let pts = audit_grid(&[(-4.0, 4.0)], 801);
        // P'' >= 0 audited on the grid
        assert!(audit_convexity(&p, 0.0, &pts).unwrap().passed());
        let v = add_potentials(&q, &p).unwrap();
        assert_eq!(v.convexity_lower_bound, Some(1.0));
        assert!(audit_convexity(&v, 1.0, &pts).unwrap().passed());
    }

    fn families() -> Vec<Potential> {
        vec![
            Potential::gaussian(1, 0.5).unwrap(),
            Potential::gaussian(2, 1.0).unwrap(),
            add_potentials(
                &Potential::quadratic(DMatrix::identity(2, 2)).unwrap(),
                &Potential::coord_quartic(vec![0.25, 0.25]).unwrap(),
            )
            .unwrap(),
            add_potentials(
                &Potential::quadratic(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    1.0, 4.0,
                ])))
                .unwrap(),
                &Potential::radial_quartic(2, 0.125).unwrap(),
            )
            .unwrap(),
            Potential::log_sec(1.0).unwrap(),
            Potential::smooth_abs(2, 1.0, 0.3).unwrap(),
            Potential::linear(vec![1.5]).unwrap(),
        ]
    }

    #[test]
    fn analytic_derivatives_match_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for p in families() {
            let d = p.dim();
            let dom = p.domain().truncate(3.0);
            for _ in 0..100 {
                let x: Vec<f64> = dom
                    .iter()
                    .map(|&(lo, hi)| rng.random_range(lo * 0.9..hi * 0.9))
                    .collect();
                let g = p.gradient(&x);
                let h = p.hessian(&x);
                for i in 0..d {
                    let step = 1e-5 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * step);
                    assert!(
                        (fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()),
                        "{} grad {fd} vs {}",
                        p.name(),
                        g[i]
                    );
                    let gp = p.gradient(&xp);
                    let gm = p.gradient(&xm);
                    for j in 0..d {
                        let fd = (gp[j] - gm[j]) / (2.0 * step);
                        assert!(
                            (fd - h[(i, j)]).abs() <= 1e-6 * (1.0 + h[(i, j)].abs()),
                            "{} hess {fd} vs {}",
                            p.name(),
                            h[(i, j)]
                        );
                    }
                }
                assert!((&h - h.transpose()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn second_difference_dominates_convexity_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for p in families() {
            let Some(k) = p.convexity_lower_bound else { continue };
            let dom = p.domain().truncate(3.0);
            for _ in 0..200 {
                let x: Vec<f64> = dom.iter().map(|&(lo, hi)| rng.random_range(lo * 0.3..hi * 0.3)).collect();
                let y: Vec<f64> = dom.iter().map(|&(lo, hi)| rng.random_range(lo * 0.3..hi * 0.3)).collect();
                let y2: f64 = y.iter().map(|v| v * v).sum();
                let s = second_difference(&p, &x, &y).unwrap();
                assert!(s >= k * y2 - AUDIT_TOL, "{}: {s} < {}", p.name(), k * y2);
                if let Some(m) = p.effective_modulus() {
                    assert!(s >= m.eval(y2.sqrt()) - 1e-9, "{} modulus", p.name());
                }
            }
        }
    }
}
