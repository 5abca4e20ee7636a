//! Radial transport `T(x) = phi(|x|) x / |x|` from Lebesgue measure on R^d
//! to `Psi(|x|) dx`.
//!
//! Balls are matched by volume: `d * int_0^phi(r) s^{d-1} Psi(s) ds = r^d`.
//! The radial eigenvalue of `DT` is `phi'`, the tangential one `phi / r`.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write;

use crate::error::{invalid, Error, Result};
use crate::interp::MonotoneCubic;
use crate::map::{Provenance, TransportMap};
use crate::measures::{MeasureKind, MeasureSpec, ScalarProfile};
use crate::quadrature::{integrate, Tolerance};
use crate::report::{theorem, CheckEntry, Comparison, Status};
use crate::roots::{bracket_above, newton_increasing};

const MASS_TOL: Tolerance = Tolerance::new(1e-300, 1e-14);
/// Allowance on the maximal eigenvalue when the criterion holds.
pub const EIGEN_TOL: f64 = 1e-6;

/// `d * int_a^b s^{d-1} Psi(s) ds`
fn shell_mass(psi: &ScalarProfile, d: usize, a: f64, b: f64) -> Result<f64> {
    let k = d as i32 - 1;
    Ok(d as f64 * integrate(|s| s.powi(k) * psi.eval(s), a, b, MASS_TOL)?)
}

fn check_positive(psi: &ScalarProfile, r_max: f64) -> Result<()> {
    for k in 0..=1000 {
        let s = r_max * k as f64 / 1000.0;
        let v = psi.eval(s);
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("Psi({s}) = {v} is not positive")));
        }
    }
    Ok(())
}

/// Solves `m0 + d * int_{a}^{phi} s^{d-1} Psi = target` for `phi >= a`.
fn match_mass(psi: &ScalarProfile, d: usize, a: f64, m0: f64, target: f64) -> Result<f64> {
    if target <= m0 {
        return Ok(a);
    }
    let g = |p: f64| -> Result<f64> { Ok(m0 + shell_mass(psi, d, a, p)? - target) };
    let dg = |p: f64| d as f64 * p.powi(d as i32 - 1) * psi.eval(p);
    // Initial guess from the local density: d s^{d-1} Psi(a) ds.
    let guess = {
        let rate = psi.eval(a.max(0.0));
        ((target - m0) / rate + a.powi(d as i32)).powf(1.0 / d as f64)
    };
    let hi = bracket_above(g, guess.max(a + f64::EPSILON * (1.0 + a)))?;
    newton_increasing(g, dg, a, hi, 1e-15)
}

/// `phi(r)` for the map from Lebesgue measure to `Psi(|x|) dx` on R^d.
pub fn radial_profile(psi: &ScalarProfile, d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("radius must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let phi = match_mass(psi, d, 0.0, 0.0, r.powi(d as i32))?;
    check_positive(psi, phi)?;
    Ok(phi)
}

/// Inverse profile `psi(rho) = (d int_0^rho s^{d-1} Psi)^{1/d}`.
pub fn inverse_profile(psi: &ScalarProfile, d: usize, rho: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Ok(0.0);
    }
    Ok(shell_mass(psi, d, 0.0, rho)?.powf(1.0 / d as f64))
}

/// Tabulated radial map.
#[derive(Clone, Debug)]
pub struct RadialMap {
    psi: ScalarProfile,
    d: usize,
    r_max: f64,
    phi: MonotoneCubic,
}

impl RadialMap {
    /// Tabulates `phi` on a geometric grid of `n` radii in `(0, r_max]`.
    pub fn new(psi: ScalarProfile, d: usize, r_max: f64, n: usize) -> Result<Self> {
        if d == 0 || n < 4 || !(r_max > 0.0) {
            return Err(invalid("radial map needs d >= 1, n >= 4 and r_max > 0"));
        }
        let r_min = r_max * 1e-6;
        let ratio = (r_max / r_min).powf(1.0 / (n - 1) as f64);
        let mut radii = vec![0.0];
        radii.extend((0..n).map(|k| r_min * ratio.powi(k as i32)));
        *radii.last_mut().unwrap() = r_max;
        let mut phis = vec![0.0];
        let mut mass = 0.0;
        for k in 1..radii.len() {
            let prev = phis[k - 1];
            let p = match_mass(&psi, d, prev, mass, radii[k].powi(d as i32))?;
            // re-anchor the running mass at the exact target to stop drift
            mass = radii[k].powi(d as i32);
            phis.push(p);
        }
        let phi_max = *phis.last().unwrap();
        check_positive(&psi, phi_max.max(r_max))?;
        let slopes: Vec<f64> = radii
            .iter()
            .zip(&phis)
            .map(|(&r, &p)| jacobian_radial(&psi, d, r, p))
            .collect();
        let phi = MonotoneCubic::with_slopes(radii, phis, slopes)?;
        Ok(RadialMap { psi, d, r_max, phi })
    }

    /// From a radial `MeasureSpec` target.
    pub fn to_measure(target: &MeasureSpec, r_max: f64, n: usize) -> Result<Self> {
        match &target.kind {
            MeasureKind::Radial { psi, dim } => Self::new(psi.clone(), *dim, r_max, n),
            _ => Err(invalid(format!("{} is not a radial measure", target.name))),
        }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Spline value of `phi(r)`.
    pub fn phi_interpolated(&self, r: f64) -> f64 {
        self.phi.eval(r)
    }

    /// `phi(r)`: the spline value refined by Newton on the mass identity
    /// over the enclosing knot interval. Falls back to the spline outside
    /// the table.
    pub fn phi(&self, r: f64) -> f64 {
        let (radii, phis) = self.phi.knots();
        let n = radii.len();
        if r <= 0.0 || r >= radii[n - 1] {
            return self.phi.eval(r);
        }
        let k = radii.partition_point(|&v| v <= r).clamp(1, n - 1) - 1;
        if r == radii[k] {
            return phis[k];
        }
        let d = self.d;
        let (a, b) = (phis[k], phis[k + 1]);
        let m0 = radii[k].powi(d as i32);
        let target = r.powi(d as i32);
        let psi = &self.psi;
        let g = |p: f64| -> Result<f64> { Ok(m0 + shell_mass(psi, d, a, p)? - target) };
        let dg = |p: f64| d as f64 * p.powi(d as i32 - 1) * psi.eval(p);
        // one Newton step from the spline value, then bracketed refinement
        let guess = self.phi.eval(r).clamp(a, b);
        let start = match g(guess) {
            Ok(v) if dg(guess) > 0.0 => (guess - v / dg(guess)).clamp(a, b),
            _ => guess,
        };
        let width = (b - a).max(f64::MIN_POSITIVE);
        let lo = (start - 1e-3 * width).max(a);
        let hi = (start + 1e-3 * width).min(b);
        let bracket = match (g(lo), g(hi)) {
            (Ok(x), Ok(y)) if x <= 0.0 && y >= 0.0 => (lo, hi),
            _ => (a, b),
        };
        newton_increasing(g, dg, bracket.0, bracket.1, 1e-15).unwrap_or(guess)
    }

    /// `(phi'(r), phi(r)/r)` with `phi'` from implicit differentiation.
    pub fn eigenvalues(&self, r: f64) -> (f64, f64) {
        radial_jacobian_eigs(&self.psi, self.d, r, self.phi(r))
    }

    /// CSV rows `r, phi, dphi, phi_over_r, criterion`.
    pub fn export_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("r,phi,dphi,phi_over_r,criterion\n");
        for &r in grid {
            let (a, b) = self.eigenvalues(r);
            let c = if self.d >= 2 {
                criterion_value(&self.psi, self.d, r)
            } else {
                f64::NAN
            };
            let _ = writeln!(out, "{r:e},{:e},{a:e},{b:e},{c:e}", self.phi(r));
        }
        out
    }
}

fn jacobian_radial(psi: &ScalarProfile, d: usize, r: f64, phi: f64) -> f64 {
    if r == 0.0 || phi == 0.0 {
        return psi.eval(0.0).powf(-1.0 / d as f64);
    }
    let k = d as i32 - 1;
    // r^{d-1} / (phi^{d-1} Psi(phi)), written as a ratio power
    (r / phi).powi(k) / psi.eval(phi)
}

/// The two eigenvalues of `DT` at radius `r` given `phi(r)`: radial
/// `phi'(r) = r^{d-1} / (phi^{d-1} Psi(phi))` and tangential `phi / r`
/// (multiplicity `d - 1`). At `r = 0` both equal `Psi(0)^{-1/d}`.
pub fn radial_jacobian_eigs(psi: &ScalarProfile, d: usize, r: f64, phi: f64) -> (f64, f64) {
    let radial = jacobian_radial(psi, d, r, phi);
    if r == 0.0 {
        (radial, radial)
    } else {
        (radial, phi / r)
    }
}

/// `(r Psi(r)^{1/(d-1)})'` by central differences.
fn criterion_value(psi: &ScalarProfile, d: usize, r: f64) -> f64 {
    let e = 1.0 / (d as f64 - 1.0);
    let f = |s: f64| s * psi.eval(s.max(0.0)).powf(e);
    let h = 1e-5 * (1.0 + r);
    if r < h {
        (f(r + h) - f(r)) / h
    } else {
        (f(r + h) - f(r - h)) / (2.0 * h)
    }
}

/// Radial contraction criterion `(r Psi^{1/(d-1)})' >= 1` on `r_grid`,
/// checked against the maximal eigenvalue of the exact map. When the
/// criterion fails somewhere the entry is diagnostic only: the criterion is
/// sufficient, not necessary.
pub fn contraction_criterion(psi: &ScalarProfile, d: usize, r_grid: &[f64]) -> Result<CheckEntry> {
    if d < 2 {
        return Err(invalid("the radial criterion needs d >= 2"));
    }
    if r_grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    let map = RadialMap::new(psi.clone(), d, r_max.max(1e-3), 400)?;
    let mut crit_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    for &r in r_grid {
        crit_min = crit_min.min(criterion_value(psi, d, r));
        let phi = radial_profile(psi, d, r)?;
        let (a, b) = radial_jacobian_eigs(psi, d, r, phi);
        eig_max = eig_max.max(a).max(b);
    }
    let holds = crit_min >= 1.0 - 1e-9;
    let mut entry = CheckEntry::compare_abs(
        format!("radial_criterion[{},d={d}]", psi.name()),
        theorem::RADIAL,
        eig_max,
        1.0,
        Comparison::AtMost,
        EIGEN_TOL,
    )
    .with_inputs(&format!("{}|d={d}|grid={r_grid:?}", psi.name()))
    .with_detail("criterion_min", crit_min)
    .with_detail("max_eigenvalue", eig_max)
    .with_detail("phi_at_rmax", map.phi(r_max));
    if !holds {
        entry = entry
            .with_status(Status::Diagnostic)
            .with_note("criterion fails on the grid; the eigenvalue bound is not implied");
    }
    Ok(entry)
}

impl TransportMap for RadialMap {
    fn dim(&self) -> usize {
        self.d
    }

    fn provenance(&self) -> Provenance {
        Provenance::Radial
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        // the ball of radius r_max; its bounding box is reported
        vec![(-self.r_max, self.r_max); self.d]
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm(x);
        if r > self.r_max * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        if r == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let s = self.phi(r) / r;
        Ok(x.iter().map(|v| v * s).collect())
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = norm(x);
        let d = self.d;
        let (a, b) = self.eigenvalues(r);
        if r == 0.0 {
            return Ok(DMatrix::identity(d, d) * a);
        }
        let n = DVector::from_iterator(d, x.iter().map(|v| v / r));
        let nn = &n * n.transpose();
        Ok(&nn * a + (DMatrix::identity(d, d) - &nn) * b)
    }

    fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let rho = norm(y);
        if rho == 0.0 {
            return Ok(vec![0.0; y.len()]);
        }
        let r = inverse_profile(&self.psi, self.d, rho)?;
        Ok(y.iter().map(|v| v * r / rho).collect())
    }

    /// `Phi(x) = int_0^{|x|} phi`.
    fn potential(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        integrate(|s| self.phi(s), 0.0, r, Tolerance::new(1e-14, 1e-12))
    }

    fn has_potential(&self) -> bool {
        true
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_profiles() {
        for d in 1..=3 {
            let one = ScalarProfile::constant(1.0);
            for &r in &[0.1, 1.0, 3.0] {
                assert!((radial_profile(&one, d, r).unwrap() - r).abs() < 1e-12);
            }
        }
        let two = ScalarProfile::constant(2.0);
        assert!((radial_profile(&two, 1, 3.0).unwrap() - 1.5).abs() < 1e-12);
        let bad = ScalarProfile::new("neg", |s| 1.0 - s);
        assert!(radial_profile(&bad, 2, 2.0).is_err());
    }

    #[test]
    fn one_plus_s_matches_cubic_root() {
        // oracle: phi^2/2 + phi^3/3 = r^2/2 by bisection on the polynomial
        let psi = ScalarProfile::one_plus();
        for &r in &[0.2, 1.0, 2.5] {
            let (mut lo, mut hi) = (0.0f64, r);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid * mid / 2.0 + mid.powi(3) / 3.0 < r * r / 2.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let phi = radial_profile(&psi, 2, r).unwrap();
            assert!((phi - lo).abs() < 1e-12, "r={r}: {phi} vs {lo}");
            let (a, b) = radial_jacobian_eigs(&psi, 2, r, phi);
            assert!((a - r / (phi * (1.0 + phi))).abs() < 1e-12);
            // finite-difference cross-check of phi'
            let h = 1e-5;
            let fd = (radial_profile(&psi, 2, r + h).unwrap()
                - radial_profile(&psi, 2, r - h).unwrap())
                / (2.0 * h);
            assert!((fd - a).abs() < 1e-8);
            assert!(a <= 1.0 && b <= 1.0);
        }
    }

    #[test]
    fn small_radius_limit() {
        let psi = ScalarProfile::exponential();
        let map = RadialMap::new(psi.clone(), 2, 4.0, 300).unwrap();
        let (a, b) = map.eigenvalues(0.0);
        assert_eq!((a, b), (1.0, 1.0));
        let (a, b) = map.eigenvalues(1e-7);
        assert!((a - 1.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mass_matching_and_inverse() {
        let psi = ScalarProfile::exponential();
        let map = RadialMap::new(psi.clone(), 2, 4.0, 400).unwrap();
        for k in 1..=40 {
            let r = 0.1 * k as f64;
            let phi = map.phi(r);
            let mass = shell_mass(&psi, 2, 0.0, phi).unwrap();
            assert!((mass - r * r).abs() < 1e-9, "r={r}");
            assert!((inverse_profile(&psi, 2, phi).unwrap() - r).abs() < 1e-8);
        }
        let y = map.forward(&[0.6, -0.8]).unwrap();
        let back = map.inverse(&y).unwrap();
        assert!((back[0] - 0.6).abs() < 1e-8 && (back[1] + 0.8).abs() < 1e-8);
    }

    #[test]
    fn jacobian_frame() {
        let map = RadialMap::new(ScalarProfile::one_plus(), 2, 3.0, 300).unwrap();
        let x = [1.0, 1.0];
        let j = map.jacobian(&x).unwrap();
        let (a, b) = map.eigenvalues(2f64.sqrt());
        let eig = j.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        assert!((lo - a.min(b)).abs() < 1e-12 && (hi - a.max(b)).abs() < 1e-12);
        // central differences of forward
        let h = 1e-6;
        let fx = map.forward(&[1.0 + h, 1.0]).unwrap();
        let bx = map.forward(&[1.0 - h, 1.0]).unwrap();
        assert!(((fx[0] - bx[0]) / (2.0 * h) - j[(0, 0)]).abs() < 1e-6);
    }

    #[test]
    fn criterion_examples() {
        let grid: Vec<f64> = (0..=80).map(|k| 0.05 * k as f64).collect();
        let e = contraction_criterion(&ScalarProfile::constant(1.0), 2, &grid).unwrap();
        assert_eq!(e.status, Status::Pass);
        assert!((e.computed - 1.0).abs() < 1e-9);
        let e = contraction_criterion(&ScalarProfile::exponential(), 2, &grid).unwrap();
        assert_eq!(e.status, Status::Pass);
        let g3: Vec<f64> = (0..=60).map(|k| 0.05 * k as f64).collect();
        let e = contraction_criterion(&ScalarProfile::inv_one_plus(), 2, &g3).unwrap();
        assert_eq!(e.status, Status::Diagnostic);
        assert!(e.details["criterion_min"] < 1.0);
        assert!(e.computed > 1.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let map = RadialMap::new(ScalarProfile::exponential(), 2, 2.0, 100).unwrap();
        let csv = map.export_csv(&[0.0, 1.0, 2.0]);
        assert!(csv.starts_with("r,phi,dphi,phi_over_r,criterion\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
