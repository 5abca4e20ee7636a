//! Exact monotone transport in one dimension.
//!
//! For probability measures the map is `F_target^{-1} o F_source`; for
//! infinite measures both sides are put in signed mass coordinates anchored
//! at a common reference point (the left endpoint of a half-line, the centre
//! of a symmetric measure) and matched there. Lower tails are matched
//! through the CDF and upper tails through the survival function, so the map
//! keeps relative accuracy far out in the tails.

use nalgebra::DMatrix;
use std::sync::{Arc, OnceLock};

use crate::error::{invalid, Error, Result};
use crate::map::{Provenance, TransportMap};
use crate::measures::{Mass, MeasureKind, MeasureSpec};
use crate::quadrature::{gauss_legendre_10, integrate, integrate_panel, Tolerance};

/// Truncation (in units of the measure's scale) for CDF tables. Wider than
/// [`crate::measures::DEFAULT_TRUNCATION`] so that queries on `[-8, 8]`
/// stay strictly interior.
pub const CDF_TRUNCATION: f64 = 12.0;

const TABLE_PANELS: usize = 2048;
const PIECE_TOL: Tolerance = Tolerance::new(1e-300, 1e-13);
const INVERSION_TOL: f64 = 1e-10;
const MIN_JACOBIAN: f64 = 1e-12;
const PHI_CELLS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Anchoring {
    /// Probability measure; mass coordinates are CDF / survival values.
    Probability,
    /// Infinite measure with mass 0 at the left endpoint.
    LeftEndpoint,
    /// Infinite symmetric measure with mass 0 at the centre.
    Centre,
}

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated cumulative mass of a 1-D measure.
#[derive(Clone)]
pub struct MassTable {
    density: Density,
    nodes: Vec<f64>,
    /// integral from nodes[0] to nodes[k]
    left: Vec<f64>,
    /// integral from nodes[k] to the last node
    right: Vec<f64>,
    /// open support (density may be singular or undefined at the ends)
    support: (f64, f64),
    anchoring: Anchoring,
    anchor: f64,
    anchor_left: f64,
    total: f64,
    /// cells on which the fixed 10-point rule reproduces the panel integral
    smooth: Vec<bool>,
}

impl std::fmt::Debug for MassTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MassTable")
            .field("window", &(self.nodes[0], self.nodes[self.nodes.len() - 1]))
            .field("anchoring", &self.anchoring)
            .field("total", &self.total)
            .finish()
    }
}

impl MassTable {
    pub fn new(m: &MeasureSpec) -> Result<Self> {
        if m.dim() != 1 {
            return Err(invalid(format!("{} is not one-dimensional", m.name)));
        }
        let domain = m.domain();
        let support = (domain.lo[0], domain.hi[0]);
        let (anchoring, window) = match (&m.kind, m.mass) {
            (_, Mass::Probability) => {
                let w = m.truncated_box(CDF_TRUNCATION)[0];
                (Anchoring::Probability, w)
            }
            (MeasureKind::ModelNu { .. }, Mass::Infinite) => {
                let b = support.1 * (1.0 - 1e-3);
                (Anchoring::Centre, (-b, b))
            }
            (MeasureKind::HalfLine { .. }, Mass::Infinite) => {
                (Anchoring::LeftEndpoint, (0.0, 16.0 * m.scale))
            }
            (_, mass) => {
                return Err(Error::Unsupported(format!(
                    "mass coordinates for {} with mass {mass:?}",
                    m.name
                )))
            }
        };
        let spec = m.clone();
        let density: Density = Arc::new(move |x| spec.density_1d(x));
        Self::build(density, window, support, anchoring)
    }

    fn build(
        density: Density,
        window: (f64, f64),
        support: (f64, f64),
        anchoring: Anchoring,
    ) -> Result<Self> {
        let (lo, hi) = window;
        if !(lo < hi) {
            return Err(invalid("empty mass window"));
        }
        let n = TABLE_PANELS;
        let nodes: Vec<f64> = (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .collect();
        // Interior zero of the density makes the quantile ill-defined.
        let positive: Vec<bool> = nodes.iter().map(|&x| density(x) > 0.0).collect();
        if let (Some(first), Some(last)) = (
            positive.iter().position(|p| *p),
            positive.iter().rposition(|p| *p),
        ) {
            if let Some(k) = (first..=last).find(|&k| !positive[k]) {
                return Err(Error::VanishingDensity(nodes[k]));
            }
        } else {
            return Err(Error::VanishingDensity(0.5 * (lo + hi)));
        }
        let mut panels = Vec::with_capacity(n);
        let mut smooth = Vec::with_capacity(n);
        for k in 0..n {
            let v = integrate_panel(|x| density(x), nodes[k], nodes[k + 1], PIECE_TOL)?;
            let fixed = gauss_legendre_10(|x| density(x), nodes[k], nodes[k + 1]);
            smooth.push(v > 0.0 && (fixed - v).abs() <= 1e-14 * v);
            panels.push(v);
        }
        let mut left = vec![0.0; n + 1];
        for k in 0..n {
            left[k + 1] = left[k] + panels[k];
        }
        let mut right = vec![0.0; n + 1];
        for k in (0..n).rev() {
            right[k] = right[k + 1] + panels[k];
        }
        let total = left[n];
        let mut table = MassTable {
            density,
            nodes,
            left,
            right,
            support,
            anchoring,
            anchor: 0.0,
            anchor_left: 0.0,
            total,
            smooth,
        };
        table.anchor = match anchoring {
            Anchoring::Probability => lo,
            Anchoring::LeftEndpoint => support.0,
            Anchoring::Centre => 0.5 * (support.0 + support.1),
        };
        table.anchor_left = table.left_mass(table.anchor)?;
        Ok(table)
    }

    fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    fn cell(&self, x: f64) -> usize {
        let n = self.nodes.len() - 1;
        let k = ((x - self.nodes[0]) / self.spacing()).floor();
        (k.max(0.0) as usize).min(n - 1)
    }

    // mass of [a, b] with both ends in cell k
    fn piece_in_cell(&self, k: usize, a: f64, b: f64) -> Result<f64> {
        if self.smooth[k] {
            let f = &self.density;
            Ok(gauss_legendre_10(|x| f(x), a, b))
        } else {
            self.piece(a, b)
        }
    }

    fn piece(&self, a: f64, b: f64) -> Result<f64> {
        let f = &self.density;
        if (b - a).abs() <= 1.0001 * self.spacing() {
            integrate_panel(|x| f(x), a, b, PIECE_TOL)
        } else {
            integrate(|x| f(x), a, b, PIECE_TOL)
        }
    }

    /// Mass of `[nodes[0], x]` (negative left of the window for infinite
    /// measures; clamped for probability measures).
    fn left_mass(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        if x <= lo {
            return if self.anchoring == Anchoring::Probability {
                Ok(0.0)
            } else {
                Ok(-self.piece(x, lo)?)
            };
        }
        if x >= hi {
            return if self.anchoring == Anchoring::Probability {
                Ok(self.total)
            } else {
                Ok(self.total + self.piece(hi, x)?)
            };
        }
        let k = self.cell(x);
        Ok(self.left[k] + self.piece_in_cell(k, self.nodes[k], x)?)
    }

    /// Mass of `[x, last node]` (probability measures only).
    fn right_mass(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        if x <= lo {
            return Ok(self.total);
        }
        if x >= hi {
            return Ok(0.0);
        }
        let k = self.cell(x);
        Ok(self.right[k + 1] + self.piece_in_cell(k, x, self.nodes[k + 1])?)
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    pub fn is_probability(&self) -> bool {
        self.anchoring == Anchoring::Probability
    }

    /// CDF for probability measures; signed mass from the anchor otherwise.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let closure_ok = x >= self.support.0 && x <= self.support.1;
        if !closure_ok || x.is_nan() {
            return Err(Error::OutOfDomain { point: vec![x] });
        }
        match self.anchoring {
            Anchoring::Probability => Ok(self.left_mass(x)? / self.total),
            _ => {
                if (x == self.support.0 || x == self.support.1) && self.anchoring == Anchoring::Centre
                {
                    return Ok(if x == self.support.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    });
                }
                Ok(self.left_mass(x)? - self.anchor_left)
            }
        }
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        if self.anchoring != Anchoring::Probability {
            return Err(Error::Unsupported("survival of an infinite measure".into()));
        }
        Ok(self.right_mass(x)? / self.total)
    }

    fn coordinate(&self, x: f64) -> Result<MassCoordinate> {
        if self.anchoring == Anchoring::Probability {
            let l = self.left_mass(x)?;
            let r = self.right_mass(x)?;
            if l <= r {
                Ok(MassCoordinate::Lower(l / self.total))
            } else {
                Ok(MassCoordinate::Upper(r / self.total))
            }
        } else {
            Ok(MassCoordinate::Signed(self.left_mass(x)? - self.anchor_left))
        }
    }

    /// Point with the given mass coordinate.
    fn locate(&self, c: MassCoordinate) -> Result<f64> {
        let n = self.nodes.len() - 1;
        let (lo, hi) = (self.nodes[0], self.nodes[n]);
        match c {
            MassCoordinate::Lower(p) => {
                let target = p * self.total;
                if target <= 0.0 {
                    return Ok(lo);
                }
                if target >= self.total {
                    return Ok(hi);
                }
                let k = self.left.partition_point(|&v| v < target).clamp(1, n);
                self.solve_log(self.nodes[k - 1], self.nodes[k], target, true)
            }
            MassCoordinate::Upper(q) => {
                let target = q * self.total;
                if target <= 0.0 {
                    return Ok(hi);
                }
                if target >= self.total {
                    return Ok(lo);
                }
                // right is decreasing
                let k = self.right.partition_point(|&v| v > target).clamp(1, n);
                self.solve_log(self.nodes[k - 1], self.nodes[k], target, false)
            }
            MassCoordinate::Signed(m) => {
                let target = m + self.anchor_left;
                let (a, b) = self.bracket_signed(target)?;
                self.solve_linear(a, b, target)
            }
        }
    }

    fn bracket_signed(&self, target: f64) -> Result<(f64, f64)> {
        let n = self.nodes.len() - 1;
        let (lo, hi) = (self.nodes[0], self.nodes[n]);
        if target >= self.left[0] && target <= self.left[n] {
            let k = self.left.partition_point(|&v| v < target).clamp(1, n);
            return Ok((self.nodes[k - 1], self.nodes[k]));
        }
        let upward = target > self.left[n];
        let (start, bound) = if upward {
            (hi, self.support.1)
        } else {
            (lo, self.support.0)
        };
        let mut inner = start;
        for j in 1..200 {
            let outer = if bound.is_finite() {
                bound - (bound - start) * 0.5f64.powi(j)
            } else {
                start + (start - self.anchor).abs().max(1.0) * (2f64.powi(j) - 1.0)
                    * start.signum().max(if upward { 1.0 } else { -1.0 })
            };
            let m = self.left_mass(outer)?;
            if (upward && m >= target) || (!upward && m <= target) {
                return Ok(if upward { (inner, outer) } else { (outer, inner) });
            }
            inner = outer;
        }
        Err(Error::NonConvergence {
            what: "mass bracket",
            iterations: 200,
            residual: target,
        })
    }

    // Safeguarded Newton on log(mass) inside [a, b].
    fn solve_log(&self, mut a: f64, mut b: f64, target: f64, lower: bool) -> Result<f64> {
        let ln_target = target.ln();
        let g = |y: f64| -> Result<(f64, f64)> {
            let rho = self.density(y);
            if lower {
                let m = self.left_mass(y)?;
                Ok((m.ln() - ln_target, rho / m))
            } else {
                let m = self.right_mass(y)?;
                Ok((m.ln() - ln_target, -rho / m))
            }
        };
        let mut y = 0.5 * (a + b);
        for _ in 0..100 {
            let (gv, dg) = g(y)?;
            if gv.is_nan() {
                return Err(Error::NonConvergence {
                    what: "quantile",
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            // maintain the bracket: g increasing for lower, decreasing for upper
            let below = if lower { gv < 0.0 } else { gv > 0.0 };
            if below {
                a = y;
            } else {
                b = y;
            }
            let newton = y - gv / dg;
            let next = if dg.is_finite() && dg != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            let step = (next - y).abs();
            y = next;
            if step <= INVERSION_TOL * 1e-3 * (1.0 + y.abs()) || b - a <= 1e-15 * (1.0 + y.abs()) {
                return Ok(y);
            }
        }
        if b - a <= INVERSION_TOL {
            Ok(y)
        } else {
            Err(Error::NonConvergence {
                what: "quantile",
                iterations: 100,
                residual: b - a,
            })
        }
    }

    fn solve_linear(&self, mut a: f64, mut b: f64, target: f64) -> Result<f64> {
        let mut y = 0.5 * (a + b);
        for _ in 0..200 {
            let gv = self.left_mass(y)? - target;
            let dg = self.density(y);
            if gv < 0.0 {
                a = y;
            } else {
                b = y;
            }
            let newton = y - gv / dg;
            let next = if dg > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            let step = (next - y).abs();
            y = next;
            if step <= INVERSION_TOL * 1e-3 * (1.0 + y.abs()) || b - a <= 1e-15 * (1.0 + y.abs()) {
                return Ok(y);
            }
        }
        if b - a <= INVERSION_TOL {
            Ok(y)
        } else {
            Err(Error::NonConvergence {
                what: "signed quantile",
                iterations: 200,
                residual: b - a,
            })
        }
    }

    /// Total mass of the table window (infinite measures: the mass of the
    /// window only).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Point below which a fraction `p` of a probability measure lies.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.anchoring != Anchoring::Probability {
            return Err(Error::Unsupported("quantile of an infinite measure".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("probability {p} outside [0, 1]")));
        }
        if p <= 0.5 {
            self.locate(MassCoordinate::Lower(p))
        } else {
            self.locate(MassCoordinate::Upper(1.0 - p))
        }
    }

    /// Point whose signed mass from the anchor is `m` (infinite measures).
    pub fn point_at_mass(&self, m: f64) -> Result<f64> {
        if self.anchoring == Anchoring::Probability {
            return Err(Error::Unsupported("signed mass of a probability measure".into()));
        }
        if self.anchoring == Anchoring::LeftEndpoint && m < 0.0 {
            return Err(invalid(format!("mass {m} left of the endpoint")));
        }
        self.locate(MassCoordinate::Signed(m))
    }

    /// Whether the measure carries infinite mass on its left or right.
    pub fn infinite_sides(&self) -> (bool, bool) {
        match self.anchoring {
            Anchoring::Probability => (false, false),
            Anchoring::LeftEndpoint => (false, true),
            Anchoring::Centre => (true, true),
        }
    }

    /// Window on which the table is built.
    pub fn window(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }
}

#[derive(Clone, Copy, Debug)]
enum MassCoordinate {
    Lower(f64),
    Upper(f64),
    Signed(f64),
}

/// CDF of a 1-D probability measure, or signed mass from the anchor for an
/// infinite one.
pub fn cdf(m: &MeasureSpec, x: f64) -> Result<f64> {
    MassTable::new(m)?.cdf(x)
}

/// Monotone map between two 1-D measures.
#[derive(Clone, Debug)]
pub struct MonotoneMap {
    source: Arc<MassTable>,
    target: Arc<MassTable>,
    names: (String, String),
    /// Phi at 1024 cells of the evaluation window, built on first use.
    phi_table: Arc<OnceLock<Vec<f64>>>,
}

/// `F_target^{-1} o F_source` (or its signed-mass analogue).
pub fn monotone_map(source: &MeasureSpec, target: &MeasureSpec) -> Result<MonotoneMap> {
    if source.dim() != 1 || target.dim() != 1 {
        return Err(invalid("monotone maps are one-dimensional"));
    }
    match (source.mass, target.mass) {
        (Mass::Probability, Mass::Probability) | (Mass::Infinite, Mass::Infinite) => {}
        (a, b) => {
            return Err(Error::MassMismatch(format!(
                "{} is {a:?}, {} is {b:?}",
                source.name, target.name
            )))
        }
    }
    let s = MassTable::new(source)?;
    let t = MassTable::new(target)?;
    if s.anchoring != t.anchoring {
        return Err(Error::MassMismatch(format!(
            "anchoring {:?} vs {:?}",
            s.anchoring, t.anchoring
        )));
    }
    MonotoneMap::from_tables(
        Arc::new(s),
        Arc::new(t),
        (source.name.clone(), target.name.clone()),
    )
}

/// The inverse monotone map, with reciprocal Jacobian at matched points.
pub fn inverse_map(t: &MonotoneMap) -> Result<MonotoneMap> {
    // T' below the floor somewhere means S' is unbounded there.
    let (lo, hi) = t.source.window();
    let n = 1000;
    let mut min_jac = f64::INFINITY;
    for k in 1..n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        if t.source.density(x) > 0.0 {
            min_jac = min_jac.min(t.derivative(x)?);
        }
    }
    if min_jac < MIN_JACOBIAN {
        return Err(Error::NotInvertible(min_jac));
    }
    MonotoneMap::from_tables(
        t.target.clone(),
        t.source.clone(),
        (t.names.1.clone(), t.names.0.clone()),
    )
}

impl MonotoneMap {
    fn from_tables(
        source: Arc<MassTable>,
        target: Arc<MassTable>,
        names: (String, String),
    ) -> Result<Self> {
        Ok(MonotoneMap {
            source,
            target,
            names,
            phi_table: Arc::new(OnceLock::new()),
        })
    }

    fn phi_nodes(&self) -> Vec<f64> {
        let (lo, hi) = self.eval_window();
        (0..=PHI_CELLS)
            .map(|k| lo + (hi - lo) * k as f64 / PHI_CELLS as f64)
            .collect()
    }

    fn phi_table(&self) -> Result<&[f64]> {
        if let Some(t) = self.phi_table.get() {
            return Ok(t);
        }
        let nodes = self.phi_nodes();
        let mut phi = vec![0.0; PHI_CELLS + 1];
        for k in 0..PHI_CELLS {
            phi[k + 1] = phi[k] + self.integrate_forward(nodes[k], nodes[k + 1])?;
        }
        Ok(self.phi_table.get_or_init(|| phi))
    }

    fn eval_window(&self) -> (f64, f64) {
        let (lo, hi) = self.source.window();
        let (slo, shi) = self.source.support();
        (lo.max(slo), hi.min(shi))
    }

    fn integrate_forward(&self, a: f64, b: f64) -> Result<f64> {
        let err = std::cell::RefCell::new(None);
        let (lo, hi) = self.eval_window();
        if (b - a).abs() <= 1.0001 * (hi - lo) / PHI_CELLS as f64 {
            // within one table cell T is smooth
            let v = gauss_legendre_10(|x| self.apply(x).unwrap_or(f64::NAN), a, b);
            if v.is_finite() {
                return Ok(v);
            }
        }
        let v = integrate(
            |x| {
                self.apply(x).unwrap_or_else(|e| {
                    *err.borrow_mut() = Some(e);
                    0.0
                })
            },
            a,
            b,
            Tolerance::new(1e-14, 1e-11),
        )?;
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    pub fn source_name(&self) -> &str {
        &self.names.0
    }

    pub fn target_name(&self) -> &str {
        &self.names.1
    }

    /// `T(x)`.
    pub fn apply(&self, x: f64) -> Result<f64> {
        let c = self.source.coordinate(x)?;
        self.target.locate(c)
    }

    /// `T'(x) = rho_source(x) / rho_target(T(x))`. At an endpoint of the
    /// support, where the ratio is undefined or singular, the one-sided
    /// difference quotient over the adjacent table cell is returned.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.source.support();
        let h = self.source.spacing();
        if x <= lo || x >= hi {
            return self.endpoint_derivative(x, h);
        }
        let y = self.apply(x)?;
        let rs = self.source.density(x);
        let rt = self.target.density(y);
        if rt > 0.0 && rs > 0.0 {
            Ok(rs / rt)
        } else {
            self.endpoint_derivative(x, h)
        }
    }

    fn endpoint_derivative(&self, x: f64, h: f64) -> Result<f64> {
        let (lo, hi) = self.eval_window();
        let (a, b) = if x - lo < hi - x {
            (x.max(lo), (x.max(lo) + h).min(hi))
        } else {
            ((x.min(hi) - h).max(lo), x.min(hi))
        };
        Ok((self.apply(b)? - self.apply(a)?) / (b - a))
    }

    /// Whether `x` is an endpoint of the source support (its derivative is a
    /// one-sided quotient).
    pub fn is_endpoint(&self, x: f64) -> bool {
        let (lo, hi) = self.source.support();
        x <= lo || x >= hi
    }

    pub fn inverse_apply(&self, y: f64) -> Result<f64> {
        let c = self.target.coordinate(y)?;
        self.source.locate(c)
    }

    /// `Phi(x) = integral of T` from the left end of the evaluation window.
    pub fn phi(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.eval_window();
        let table = self.phi_table()?;
        let n = PHI_CELLS;
        if x < lo {
            return Ok(-self.integrate_forward(x, lo)?);
        }
        if x > hi {
            return Ok(table[n] + self.integrate_forward(hi, x)?);
        }
        let k = (((x - lo) / (hi - lo) * n as f64).floor() as usize).min(n - 1);
        let node = lo + (hi - lo) * k as f64 / n as f64;
        Ok(table[k] + self.integrate_forward(node, x)?)
    }

    pub fn window(&self) -> (f64, f64) {
        self.eval_window()
    }

    pub fn target_support(&self) -> (f64, f64) {
        self.target.support()
    }

    /// Rows `(x, T(x), T'(x), endpoint)` on a grid.
    pub fn tabulate(&self, grid: &[f64]) -> Result<Vec<MapRow>> {
        grid.iter()
            .map(|&x| {
                Ok(MapRow {
                    x,
                    t: self.apply(x)?,
                    dt: self.derivative(x)?,
                    endpoint: self.is_endpoint(x),
                })
            })
            .collect()
    }

    /// Supremum of `T'` over a grid.
    pub fn sup_derivative(&self, grid: &[f64]) -> Result<f64> {
        let mut sup = f64::NEG_INFINITY;
        for &x in grid {
            sup = sup.max(self.derivative(x)?);
        }
        Ok(sup)
    }

    pub fn inf_derivative(&self, grid: &[f64]) -> Result<f64> {
        let mut inf = f64::INFINITY;
        for &x in grid {
            inf = inf.min(self.derivative(x)?);
        }
        Ok(inf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapRow {
    pub x: f64,
    pub t: f64,
    pub dt: f64,
    pub endpoint: bool,
}

/// CSV export `x,T,dT,endpoint`.
pub fn rows_to_csv(rows: &[MapRow]) -> String {
    use std::fmt::Write;
    let mut out = String::from("x,T,dT,endpoint\n");
    for r in rows {
        let _ = writeln!(out, "{:e},{:e},{:e},{}", r.x, r.t, r.dt, r.endpoint as u8);
    }
    out
}

impl TransportMap for MonotoneMap {
    fn dim(&self) -> usize {
        1
    }

    fn provenance(&self) -> Provenance {
        Provenance::Monotone1d
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        vec![self.eval_window()]
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.apply(x[0])?])
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, self.derivative(x[0])?))
    }

    fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.inverse_apply(y[0])?])
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        self.phi(x[0])
    }

    fn has_potential(&self) -> bool {
        true
    }
}
