use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Axis-aligned (possibly unbounded) box. `open` marks domains whose
/// boundary is singular, e.g. the model measure's interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub open: bool,
}

impl Domain {
    pub fn whole(dim: usize) -> Self {
        Domain {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            open: false,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain {
            lo: vec![lo],
            hi: vec![hi],
            open: false,
        }
    }

    pub fn open_interval(lo: f64, hi: f64) -> Self {
        Domain {
            lo: vec![lo],
            hi: vec![hi],
            open: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| {
                if self.open {
                    v > l && v < h
                } else {
                    v >= l && v <= h
                }
            })
    }

    pub fn intersect(&self, other: &Domain) -> Result<Domain> {
        if self.dim() != other.dim() {
            return Err(invalid("domains of different dimension"));
        }
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::DisjointDomains);
        }
        Ok(Domain {
            lo,
            hi,
            open: self.open || other.open,
        })
    }

    /// Clips the domain to `[-radius, radius]` on every unbounded side.
    pub fn truncate(&self, radius: f64) -> Vec<(f64, f64)> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (l.max(-radius), h.min(radius)))
            .collect()
    }
}

/// Generalized convexity modulus `delta(r) = sum c_k r^k` with
/// nonnegative coefficients: a lower bound on `W(x+y) + W(x-y) - 2W(x)` in
/// terms of `|y|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Modulus {
    pub terms: Vec<(f64, i32)>,
}

impl Modulus {
    pub fn power(coef: f64, exponent: i32) -> Self {
        Modulus {
            terms: vec![(coef, exponent)],
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(c, k)| c * r.powi(k)).sum()
    }

    pub fn add(&self, other: &Modulus) -> Modulus {
        let mut terms = self.terms.clone();
        for &(c, k) in &other.terms {
            match terms.iter_mut().find(|t| t.1 == k) {
                Some(t) => t.0 += c,
                None => terms.push((c, k)),
            }
        }
        terms.retain(|t| t.0 != 0.0);
        terms.sort_by_key(|t| t.1);
        Modulus { terms }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.terms.iter().all(|&(c, k)| c >= 0.0 && k >= 1) && self.terms.iter().any(|t| t.0 > 0.0)
    }

    /// Inverse on `[0, inf)` by bisection.
    pub fn inverse(&self, value: f64) -> Result<f64> {
        if !self.is_strictly_increasing() || value < 0.0 || !value.is_finite() {
            return Err(invalid(format!("modulus not invertible at {value}")));
        }
        if value == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.eval(hi) < value {
            hi *= 2.0;
            if hi > 1e150 {
                return Err(invalid("modulus inverse out of range"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < value {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Term {
    Constant(f64),
    /// <c, x>
    Linear(Vec<f64>),
    /// x^T A x / 2
    Quadratic(DMatrix<f64>),
    /// sum c_i x_i^4
    CoordQuartic(Vec<f64>),
    /// c |x|^4
    RadialQuartic(f64),
    /// -log cos(a x), one-dimensional
    LogSec(f64),
    /// w sqrt(|x|^2 + eps^2)
    SmoothAbs { weight: f64, eps: f64 },
}

impl Term {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Term::Constant(c) => *c,
            Term::Linear(c) => c.iter().zip(x).map(|(a, b)| a * b).sum(),
            Term::Quadratic(a) => {
                // no allocation: densities are evaluated in inner loops
                let mut s = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        s += a[(i, j)] * xi * xj;
                    }
                }
                0.5 * s
            }
            Term::CoordQuartic(c) => c.iter().zip(x).map(|(a, b)| a * b.powi(4)).sum(),
            Term::RadialQuartic(c) => c * norm2(x).powi(2),
            Term::LogSec(a) => -(a * x[0]).cos().ln(),
            Term::SmoothAbs { weight, eps } => weight * (norm2(x) + eps * eps).sqrt(),
        }
    }

    fn add_gradient(&self, x: &[f64], g: &mut DVector<f64>) {
        match self {
            Term::Constant(_) => {}
            Term::Linear(c) => {
                for (gi, ci) in g.iter_mut().zip(c) {
                    *gi += ci;
                }
            }
            Term::Quadratic(a) => *g += a * DVector::from_column_slice(x),
            Term::CoordQuartic(c) => {
                for i in 0..x.len() {
                    g[i] += 4.0 * c[i] * x[i].powi(3);
                }
            }
            Term::RadialQuartic(c) => {
                let r2 = norm2(x);
                for i in 0..x.len() {
                    g[i] += 4.0 * c * r2 * x[i];
                }
            }
            Term::LogSec(a) => g[0] += a * (a * x[0]).tan(),
            Term::SmoothAbs { weight, eps } => {
                let s = (norm2(x) + eps * eps).sqrt();
                for i in 0..x.len() {
                    g[i] += weight * x[i] / s;
                }
            }
        }
    }

    fn add_hessian(&self, x: &[f64], h: &mut DMatrix<f64>) {
        let d = x.len();
        match self {
            Term::Constant(_) | Term::Linear(_) => {}
            Term::Quadratic(a) => *h += a,
            Term::CoordQuartic(c) => {
                for i in 0..d {
                    h[(i, i)] += 12.0 * c[i] * x[i] * x[i];
                }
            }
            Term::RadialQuartic(c) => {
                let r2 = norm2(x);
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { r2 } else { 0.0 };
                        h[(i, j)] += 4.0 * c * (delta + 2.0 * x[i] * x[j]);
                    }
                }
            }
            Term::LogSec(a) => {
                let c = (a * x[0]).cos();
                h[(0, 0)] += a * a / (c * c);
            }
            Term::SmoothAbs { weight, eps } => {
                let s = (norm2(x) + eps * eps).sqrt();
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 / s } else { 0.0 };
                        h[(i, j)] += weight * (delta - x[i] * x[j] / (s * s * s));
                    }
                }
            }
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Symmetry {
    /// V(-x) = V(x)
    pub even: bool,
    /// V invariant under sign flips of individual coordinates.
    pub unconditional: bool,
}

/// A smooth scalar field given as a sum of analytic terms, with declared
/// convexity metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    name: String,
    dim: usize,
    terms: Vec<Term>,
    domain: Domain,
    /// D^2 V >= K Id, when declared.
    pub convexity_lower_bound: Option<f64>,
    /// V_ee <= C for every unit e, when declared.
    pub directional_upper_bound: Option<f64>,
    pub symmetry: Symmetry,
    pub modulus: Option<Modulus>,
}

impl Potential {
    fn with_terms(name: impl Into<String>, dim: usize, terms: Vec<Term>) -> Self {
        Potential {
            name: name.into(),
            dim,
            terms,
            domain: Domain::whole(dim),
            convexity_lower_bound: Some(0.0),
            directional_upper_bound: None,
            symmetry: Symmetry {
                even: true,
                unconditional: true,
            },
            modulus: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        let mut p = Self::with_terms("0", dim, Vec::new());
        p.directional_upper_bound = Some(0.0);
        p
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::with_terms(format!("{c}"), dim, vec![Term::Constant(c)]);
        p.directional_upper_bound = Some(0.0);
        p
    }

    /// `|x|^2 / (2 sigma^2) + (d/2) log(2 pi sigma^2)`: the normalized
    /// potential of the centered Gaussian with covariance `sigma^2 Id`.
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        let k = 1.0 / (sigma * sigma);
        let log_norm = 0.5 * dim as f64 * (2.0 * PI * sigma * sigma).ln();
        let mut p = Self::quadratic(DMatrix::from_diagonal_element(dim, dim, k))?;
        p.terms.push(Term::Constant(log_norm));
        p.name = if sigma == 1.0 {
            "gaussian".into()
        } else {
            format!("gaussian(sigma={sigma})")
        };
        Ok(p)
    }

    /// `x^T A x / 2` for a symmetric positive semidefinite `A`.
    pub fn quadratic(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(invalid("quadratic form must be square"));
        }
        if (&a - a.transpose()).amax() > 1e-14 * (1.0 + a.amax()) {
            return Err(invalid("quadratic form must be symmetric"));
        }
        let eig = a.clone().symmetric_eigenvalues();
        let kmin = eig.min();
        let kmax = eig.max();
        if kmin < 0.0 {
            return Err(invalid("quadratic form must be positive semidefinite"));
        }
        let dim = a.nrows();
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || a[(i, j)] == 0.0));
        let mut p = Self::with_terms("quadratic", dim, vec![Term::Quadratic(a)]);
        p.convexity_lower_bound = Some(kmin);
        p.directional_upper_bound = Some(kmax);
        p.symmetry.unconditional = diagonal;
        if kmin > 0.0 {
            p.modulus = Some(Modulus::power(kmin, 2));
        }
        Ok(p)
    }

    /// `sum c_i x_i^4` with `c_i >= 0`.
    pub fn coord_quartic(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(invalid("quartic coefficients must be nonnegative"));
        }
        let dim = coeffs.len();
        let cmin = coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut p = Self::with_terms("coord_quartic", dim, vec![Term::CoordQuartic(coeffs)]);
        // sum_i 2 c_i y_i^4 >= 2 c_min |y|^4 / d
        if cmin > 0.0 {
            p.modulus = Some(Modulus::power(2.0 * cmin / dim as f64, 4));
        }
        Ok(p)
    }

    /// `c |x|^4`, `c >= 0`.
    pub fn radial_quartic(dim: usize, c: f64) -> Result<Self> {
        if dim == 0 || c < 0.0 || !c.is_finite() {
            return Err(invalid("radial quartic needs dim >= 1 and c >= 0"));
        }
        let mut p = Self::with_terms("radial_quartic", dim, vec![Term::RadialQuartic(c)]);
        if c > 0.0 {
            p.modulus = Some(Modulus::power(2.0 * c, 4));
        }
        Ok(p)
    }

    /// `<c, x>`.
    pub fn linear(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(invalid("linear term needs dim >= 1"));
        }
        let dim = c.len();
        let zero = c.iter().all(|v| *v == 0.0);
        let mut p = Self::with_terms("linear", dim, vec![Term::Linear(c)]);
        p.directional_upper_bound = Some(0.0);
        p.symmetry = Symmetry {
            even: zero,
            unconditional: zero,
        };
        Ok(p)
    }

    /// `-log cos(a x)` on `(-pi/2a, pi/2a)`: the log-density of the model
    /// measure `dx / cos(ax)`, convex with `W'' = a^2 sec^2(ax) >= a^2`.
    pub fn log_sec(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("A must be positive, got {a}")));
        }
        let half = PI / (2.0 * a);
        let mut p = Self::with_terms(format!("log_sec(A={a})"), 1, vec![Term::LogSec(a)]);
        p.domain = Domain::open_interval(-half, half);
        p.convexity_lower_bound = Some(a * a);
        Ok(p)
    }

    /// `w sqrt(|x|^2 + eps^2)`, a smoothed multiple of `|x|`.
    pub fn smooth_abs(dim: usize, weight: f64, eps: f64) -> Result<Self> {
        if dim == 0 || weight < 0.0 || eps <= 0.0 {
            return Err(invalid("smooth |x| needs weight >= 0 and eps > 0"));
        }
        Ok(Self::with_terms(
            "smooth_abs",
            dim,
            vec![Term::SmoothAbs { weight, eps }],
        ))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(invalid("domain dimension mismatch"));
        }
        self.domain = self.domain.intersect(&domain)?;
        Ok(self)
    }

    pub fn with_modulus(mut self, modulus: Modulus) -> Self {
        self.modulus = Some(modulus);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for t in &self.terms {
            t.add_gradient(x, &mut g);
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            t.add_hessian(x, &mut h);
        }
        h
    }

    pub fn min_hessian_eigenvalue(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        if self.dim == 1 {
            h[(0, 0)]
        } else {
            h.symmetric_eigenvalues().min()
        }
    }

    /// Per-coordinate `(w2, w4)` with `V = sum w2 x_i^2 / 2 + w4 x_i^4 + const`,
    /// when the potential has that separable form.
    pub fn separable_quartic(&self) -> Option<Vec<(f64, f64)>> {
        let mut w = vec![(0.0, 0.0); self.dim];
        for t in &self.terms {
            match t {
                Term::Constant(_) => {}
                Term::Quadratic(a) => {
                    for i in 0..self.dim {
                        for j in 0..self.dim {
                            if i != j && a[(i, j)] != 0.0 {
                                return None;
                            }
                        }
                        w[i].0 += a[(i, i)];
                    }
                }
                Term::CoordQuartic(c) => {
                    for (wi, ci) in w.iter_mut().zip(c) {
                        wi.1 += ci;
                    }
                }
                _ => return None,
            }
        }
        Some(w)
    }

    /// Modulus implied by the metadata: the declared one, or `K r^2` from
    /// the convexity bound.
    pub fn effective_modulus(&self) -> Option<Modulus> {
        match (&self.modulus, self.convexity_lower_bound) {
            (Some(m), _) => Some(m.clone()),
            (None, Some(k)) if k > 0.0 => Some(Modulus::power(k, 2)),
            (None, Some(_)) => Some(Modulus { terms: Vec::new() }),
            (None, None) => None,
        }
    }

    /// Adds the constant `log Z`, `Z = integral of e^{-V}` over `window`,
    /// so that `e^{-V}` becomes a probability density (1-D or 2-D).
    pub fn normalized(mut self, window: &[(f64, f64)]) -> Result<Self> {
        let z = self.partition_function(window)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(invalid(format!("partition function {z} not positive")));
        }
        self.terms.push(Term::Constant(z.ln()));
        Ok(self)
    }

    pub fn partition_function(&self, window: &[(f64, f64)]) -> Result<f64> {
        let tol = Tolerance::new(1e-14, 1e-12);
        match window {
            [(a, b)] => integrate(|x| (-self.value(&[x])).exp(), *a, *b, tol),
            [(a0, b0), (a1, b1)] => {
                let inner_tol = Tolerance::new(1e-15, 1e-11);
                let err = std::cell::RefCell::new(None);
                let v = integrate(
                    |x0| {
                        integrate(|x1| (-self.value(&[x0, x1])).exp(), *a1, *b1, inner_tol)
                            .unwrap_or_else(|e| {
                                *err.borrow_mut() = Some(e);
                                0.0
                            })
                    },
                    *a0,
                    *b0,
                    Tolerance::new(1e-14, 1e-11),
                )?;
                match err.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            }
            _ => Err(Error::Unsupported(format!(
                "normalization in dimension {}",
                window.len()
            ))),
        }
    }
}

/// Sum of two potentials on the intersection of their domains; declared
/// bounds and moduli add, symmetry flags are conjoined.
pub fn add_potentials(q: &Potential, p: &Potential) -> Result<Potential> {
    if q.dim != p.dim {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            q.dim, p.dim
        )));
    }
    let domain = q.domain.intersect(&p.domain)?;
    let mut terms = q.terms.clone();
    terms.extend(p.terms.iter().cloned());
    let modulus = match (q.effective_modulus(), p.effective_modulus()) {
        (Some(a), Some(b)) => {
            let m = a.add(&b);
            (!m.terms.is_empty()).then_some(m)
        }
        _ => None,
    };
    Ok(Potential {
        name: format!("{}+{}", q.name, p.name),
        dim: q.dim,
        terms,
        domain,
        convexity_lower_bound: match (q.convexity_lower_bound, p.convexity_lower_bound) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        },
        directional_upper_bound: match (q.directional_upper_bound, p.directional_upper_bound) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        },
        symmetry: Symmetry {
            even: q.symmetry.even && p.symmetry.even,
            unconditional: q.symmetry.unconditional && p.symmetry.unconditional,
        },
        modulus,
    })
}

/// `p(x + y) + p(x - y) - 2 p(x)`.
pub fn second_difference(p: &Potential, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != p.dim || y.len() != p.dim {
        return Err(invalid("dimension mismatch"));
    }
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    for pt in [&plus, &minus, &x.to_vec()] {
        if !p.domain.contains(pt) {
            return Err(Error::OutOfDomain { point: pt.clone() });
        }
    }
    let v = p.value(&plus) + p.value(&minus) - 2.0 * p.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::OutOfDomain { point: x.to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_gaussian_and_quartic() {
        let q = Potential::quadratic(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let p = Potential::coord_quartic(vec![1.0]).unwrap();
        let v = add_potentials(&q, &p).unwrap();
        assert_eq!(v.hessian(&[1.0])[(0, 0)], 13.0);
        assert_eq!(v.convexity_lower_bound, Some(1.0));
        let zero = Potential::zero(1);
        let same = add_potentials(&q, &zero).unwrap();
        assert_eq!(same.value(&[3.0]), 4.5);
        assert_eq!(same.convexity_lower_bound, Some(1.0));
    }

    #[test]
    fn add_rejects_disjoint_domains() {
        let a = Potential::zero(1).with_domain(Domain::interval(0.0, 1.0)).unwrap();
        let b = Potential::zero(1).with_domain(Domain::interval(2.0, 3.0)).unwrap();
        assert_eq!(add_potentials(&a, &b), Err(Error::DisjointDomains));
    }

    #[test]
    fn second_difference_examples() {
        let half = Potential::quadratic(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let quartic = Potential::coord_quartic(vec![1.0]).unwrap();
        assert!((second_difference(&half, &[0.3], &[0.7]).unwrap() - 0.49).abs() < 1e-15);
        assert!((second_difference(&quartic, &[0.0], &[0.5]).unwrap() - 2.0 * 0.0625).abs() < 1e-15);
        assert_eq!(second_difference(&quartic, &[1.0], &[1.0]).unwrap(), 14.0);
        let nu = Potential::log_sec(1.0).unwrap();
        assert!(matches!(
            second_difference(&nu, &[1.0], &[1.0]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn modulus_inverse() {
        let m = Modulus::power(1.0, 2);
        assert!((m.inverse(4.0).unwrap() - 2.0).abs() < 1e-12);
        let m = Modulus {
            terms: vec![(1.0, 2), (2.0, 4)],
        };
        let r = m.inverse(3.0).unwrap();
        assert!((m.eval(r) - 3.0).abs() < 1e-12);
        assert!(Modulus { terms: vec![] }.inverse(1.0).is_err());
    }

    #[test]
    fn gaussian_rejects_bad_input() {
        assert!(Potential::gaussian(0, 1.0).is_err());
        assert!(Potential::gaussian(1, 0.0).is_err());
    }
}
