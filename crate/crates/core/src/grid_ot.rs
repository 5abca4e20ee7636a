//! Entropic optimal transport between measures quantized on 2-D tensor
//! grids, and the barycentric map it induces.
//!
//! The cost is `|x - y|^2 / 2`, so the source dual `f` gives the convex
//! potential directly: `Phi(x) = |x|^2/2 - f(x)` and `grad Phi = T`. With
//! duals normalized so that `pi_ij = a_i b_j exp((f_i + g_j - c_ij) / eps)`,
//! each Sinkhorn half-step is a log-sum-exp against a Gaussian kernel that
//! factors over the two axes, so a half-step costs `O(n^3)` instead of
//! `O(n^4)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt::Write;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::map::{Provenance, TransportMap};
use crate::measures::{MeasureKind, MeasureSpec};

/// Largest mass a discretization box may leave out.
pub const MAX_MASS_DEFICIT: f64 = 1e-10;
/// Nodes excluded from each side for map statistics.
pub const BOUNDARY_MARGIN: usize = 2;

/// Weights on the cell centres of a regular `n0 x n1` grid over a box.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    /// cell-centre coordinates per axis
    pub axes: [Vec<f64>; 2],
    /// row-major: index `i0 * n1 + i1`
    pub weights: Vec<f64>,
    pub spacing: [f64; 2],
    pub name: String,
}

impl DiscreteMeasure {
    /// Regular grid measure from explicit weights (renormalized).
    pub fn from_weights(
        axes: [Vec<f64>; 2],
        weights: Vec<f64>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (n0, n1) = (axes[0].len(), axes[1].len());
        if n0 == 0 || n1 == 0 || weights.len() != n0 * n1 {
            return Err(invalid("weights must match the grid"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("weights sum to zero"));
        }
        let spacing = [spacing_of(&axes[0]), spacing_of(&axes[1])];
        Ok(DiscreteMeasure {
            axes,
            weights: weights.iter().map(|w| w / total).collect(),
            spacing,
            name: name.into(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].len(), self.axes[1].len())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, idx: usize) -> [f64; 2] {
        let n1 = self.axes[1].len();
        [self.axes[0][idx / n1], self.axes[1][idx % n1]]
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.axes[1].len() + i1
    }

    /// Box spanned by the cells.
    pub fn bounds(&self) -> [(f64, f64); 2] {
        let b = |k: usize| {
            let a = &self.axes[k];
            (
                a[0] - 0.5 * self.spacing[k],
                a[a.len() - 1] + 0.5 * self.spacing[k],
            )
        };
        [b(0), b(1)]
    }

    fn log_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
            .collect()
    }
}

fn spacing_of(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        axis[1] - axis[0]
    }
}

fn centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect()
}

/// Quantizes a 2-D probability measure on `n x n` cell centres of `bx`.
/// Weights are density times cell area, renormalized. The box must hold all
/// but [`MAX_MASS_DEFICIT`] of the mass.
pub fn discretize(m: &MeasureSpec, bx: [(f64, f64); 2], n: usize) -> Result<DiscreteMeasure> {
    if m.dim() != 2 {
        return Err(invalid("grid transport is two-dimensional"));
    }
    if !m.is_probability() {
        return Err(invalid(format!("{} is not a probability measure", m.name)));
    }
    if n < 2 || bx.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(invalid("grid needs n >= 2 and a nonempty box"));
    }
    let deficit = mass_deficit(m, bx)?;
    if deficit > MAX_MASS_DEFICIT {
        return Err(Error::MassDeficit {
            deficit,
            allowed: MAX_MASS_DEFICIT,
        });
    }
    let axes = [centres(bx[0].0, bx[0].1, n), centres(bx[1].0, bx[1].1, n)];
    let mut weights = Vec::with_capacity(n * n);
    for &x0 in &axes[0] {
        for &x1 in &axes[1] {
            weights.push(m.density(&[x0, x1]));
        }
    }
    DiscreteMeasure::from_weights(axes, weights, m.name.clone())
}

/// Default truncation (in axis standard deviations) for [`fit_box`].
pub const BOX_TRUNCATION: f64 = 7.0;

/// A grid box adapted to each axis: the bounding box of a uniform body, and
/// for densities `e^{-V}` the points along each half-axis where `V` has risen
/// by `truncation^2 / 2` above `V(0)` (seven standard deviations of a
/// Gaussian at the default), clipped to the domain. Falls back to the
/// isotropic truncated box.
pub fn fit_box(m: &MeasureSpec, truncation: f64) -> Result<[(f64, f64); 2]> {
    if m.dim() != 2 {
        return Err(invalid("grid transport is two-dimensional"));
    }
    let iso = m.truncated_box(truncation);
    let out = match &m.kind {
        MeasureKind::UniformOnBody(b) => {
            let bb = b.bounding_box();
            [bb[0], bb[1]]
        }
        MeasureKind::Density(p) if p.domain().contains(&[0.0, 0.0]) => {
            let v0 = p.value(&[0.0, 0.0]);
            let level = 0.5 * truncation * truncation;
            let mut bx = [iso[0], iso[1]];
            for (i, b) in bx.iter_mut().enumerate() {
                let reach = |sign: f64, limit: f64| -> f64 {
                    let rise = |r: f64| {
                        let mut x = [0.0, 0.0];
                        x[i] = sign * r;
                        p.value(&x) - v0 - level
                    };
                    if !limit.is_finite() || rise(limit) <= 0.0 {
                        return limit;
                    }
                    // V is convex along the axis: bisection on the rise
                    let (mut lo, mut hi) = (0.0, limit);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if rise(mid) > 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                };
                *b = (-reach(-1.0, -b.0), reach(1.0, b.1));
            }
            bx
        }
        _ => [iso[0], iso[1]],
    };
    Ok(out)
}

fn mass_deficit(m: &MeasureSpec, bx: [(f64, f64); 2]) -> Result<f64> {
    match &m.kind {
        MeasureKind::UniformOnBody(body) => {
            let bb = body.bounding_box();
            let covered = bb
                .iter()
                .zip(&bx)
                .all(|(b, w)| w.0 <= b.0 + 1e-12 && w.1 >= b.1 - 1e-12);
            Ok(if covered { 0.0 } else { f64::INFINITY })
        }
        MeasureKind::Density(p) => {
            let window = p.domain().truncate(f64::INFINITY);
            let clipped: Vec<(f64, f64)> = bx
                .iter()
                .zip(&window)
                .map(|(b, w)| (b.0.max(w.0), b.1.min(w.1)))
                .collect();
            let inside = p.partition_function(&clipped)?;
            Ok((1.0 - inside).max(0.0))
        }
        _ => Err(invalid(format!("cannot discretize {}", m.name))),
    }
}

/// Dual potentials of an entropic coupling.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub source: Arc<DiscreteMeasure>,
    pub target: Arc<DiscreteMeasure>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon: f64,
    /// L1 distance between the plan's row sums and the source weights
    /// (columns are exact after the last half-step).
    pub marginal_error: f64,
    pub iterations: usize,
}

/// Per-epsilon record of a continuation run.
#[derive(Clone, Debug, PartialEq)]
pub struct StageDiagnostics {
    pub epsilon: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    pub converged: bool,
}

/// Half-step kernel: squared-distance tables per axis, scaled by `1/eps`.
struct AxisCost {
    /// `(x_i - y_j)^2 / (2 eps)`, row-major `[i][j]`
    c: [Vec<f64>; 2],
    m: [usize; 2],
    n: [usize; 2],
}

impl AxisCost {
    fn new(from: &DiscreteMeasure, to: &DiscreteMeasure, eps: f64) -> Self {
        let table = |k: usize| -> Vec<f64> {
            let mut t = Vec::with_capacity(from.axes[k].len() * to.axes[k].len());
            for &x in &from.axes[k] {
                for &y in &to.axes[k] {
                    t.push((x - y) * (x - y) / (2.0 * eps));
                }
            }
            t
        };
        AxisCost {
            c: [table(0), table(1)],
            m: [from.axes[0].len(), from.axes[1].len()],
            n: [to.axes[0].len(), to.axes[1].len()],
        }
    }

    /// `out_i = LSE_j [h_j - c0(i0, j0) - c1(i1, j1)]`
    fn softmin(&self, h: &[f64], out: &mut [f64]) {
        let [m0, m1] = self.m;
        let [n0, n1] = self.n;
        // pass 1: a[j0][i1] = LSE_{j1} [h(j0, j1) - c1(i1, j1)]
        let mut a = vec![0.0; n0 * m1];
        a.par_chunks_mut(m1).enumerate().for_each(|(j0, row)| {
            let hrow = &h[j0 * n1..(j0 + 1) * n1];
            for (i1, slot) in row.iter_mut().enumerate() {
                let crow = &self.c[1][i1 * n1..(i1 + 1) * n1];
                *slot = lse(hrow.iter().zip(crow).map(|(hv, cv)| hv - cv));
            }
        });
        // pass 2: out[i0][i1] = LSE_{j0} [a(j0, i1) - c0(i0, j0)]
        out.par_chunks_mut(m1).enumerate().for_each(|(i0, row)| {
            let crow = &self.c[0][i0 * n0..(i0 + 1) * n0];
            for (i1, slot) in row.iter_mut().enumerate() {
                *slot = lse((0..n0).map(|j0| a[j0 * m1 + i1] - crow[j0]));
            }
        });
        debug_assert_eq!(out.len(), m0 * m1);
    }
}

fn lse<I: Iterator<Item = f64> + Clone>(it: I) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Solver {
    src: Arc<DiscreteMeasure>,
    tgt: Arc<DiscreteMeasure>,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
}

impl Solver {
    fn new(src: Arc<DiscreteMeasure>, tgt: Arc<DiscreteMeasure>) -> Self {
        let log_a = src.log_weights();
        let log_b = tgt.log_weights();
        Solver {
            src,
            tgt,
            log_a,
            log_b,
        }
    }

    /// Runs Sinkhorn at fixed `eps` from the given duals. Returns
    /// `(f, g, iterations, marginal_error)`.
    fn run(
        &self,
        eps: f64,
        mut f: Vec<f64>,
        mut g: Vec<f64>,
        max_iter: usize,
        tol: f64,
    ) -> (Vec<f64>, Vec<f64>, usize, f64) {
        let fwd = AxisCost::new(&self.src, &self.tgt, eps);
        let bwd = AxisCost::new(&self.tgt, &self.src, eps);
        let mut h_t = vec![0.0; self.tgt.len()];
        let mut h_s = vec![0.0; self.src.len()];
        let mut lse_s = vec![0.0; self.src.len()];
        let mut lse_t = vec![0.0; self.tgt.len()];
        let mut err = f64::INFINITY;
        let mut it = 0;
        while it < max_iter {
            it += 1;
            // g-update: columns exact
            for j in 0..h_s.len() {
                h_s[j] = f[j] / eps + self.log_a[j];
            }
            bwd.softmin(&h_s, &mut lse_t);
            for j in 0..g.len() {
                g[j] = -eps * lse_t[j];
            }
            // f-update; the change in f measures the row marginal error
            for j in 0..h_t.len() {
                h_t[j] = g[j] / eps + self.log_b[j];
            }
            fwd.softmin(&h_t, &mut lse_s);
            err = 0.0;
            for i in 0..f.len() {
                let new = -eps * lse_s[i];
                if self.src.weights[i] > 0.0 {
                    err += self.src.weights[i] * ((f[i] - new) / eps).exp_m1().abs();
                }
                f[i] = new;
            }
            if err <= tol {
                break;
            }
        }
        // after the final f-update rows are exact; report the column error
        // of the returned pair instead
        for j in 0..h_s.len() {
            h_s[j] = f[j] / eps + self.log_a[j];
        }
        bwd.softmin(&h_s, &mut lse_t);
        let col_err: f64 = (0..g.len())
            .filter(|&j| self.tgt.weights[j] > 0.0)
            .map(|j| self.tgt.weights[j] * ((g[j] + eps * lse_t[j]) / eps).exp_m1().abs())
            .sum();
        (f, g, it, err.min(f64::INFINITY).max(col_err))
    }
}

/// Log-domain Sinkhorn from zero duals.
pub fn sinkhorn(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Coupling> {
    let (c, _) = epsilon_schedule_solve(src, tgt, &[eps], max_iter, tol)?;
    Ok(c)
}

/// Warm-started continuation over a strictly decreasing `eps_list`. Only
/// the final stage must reach `tol`; earlier stages stop at `tol` or
/// `max_iter`, whichever comes first.
pub fn epsilon_schedule_solve(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    eps_list: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(Coupling, Vec<StageDiagnostics>)> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("epsilon list must be nonempty and positive"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("epsilon list must be strictly decreasing"));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("tol must be positive and max_iter at least 1"));
    }
    let solver = Solver::new(Arc::new(src.clone()), Arc::new(tgt.clone()));
    let mut f = vec![0.0; src.len()];
    let mut g = vec![0.0; tgt.len()];
    let mut stages = Vec::with_capacity(eps_list.len());
    let mut last = (0, f64::INFINITY);
    for &eps in eps_list {
        let (nf, ng, it, err) = solver.run(eps, f, g, max_iter, tol);
        f = nf;
        g = ng;
        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence {
                what: "sinkhorn (non-finite duals)",
                iterations: it,
                residual: err,
            });
        }
        stages.push(StageDiagnostics {
            epsilon: eps,
            iterations: it,
            marginal_error: err,
            converged: err <= tol,
        });
        last = (it, err);
    }
    let eps = *eps_list.last().unwrap();
    if !(last.1 <= tol) {
        return Err(Error::NonConvergence {
            what: "sinkhorn",
            iterations: last.0,
            residual: last.1,
        });
    }
    Ok((
        Coupling {
            source: solver.src,
            target: solver.tgt,
            f,
            g,
            epsilon: eps,
            marginal_error: last.1,
            iterations: last.0,
        },
        stages,
    ))
}

/// Halving schedule `eps_start, eps_start/2, ...` down to the first value
/// above `eps_end`, then `eps_end` itself.
pub fn halving_schedule(eps_start: f64, eps_end: f64) -> Result<Vec<f64>> {
    if !(eps_end > 0.0 && eps_start >= eps_end && eps_start.is_finite()) {
        return Err(invalid("need 0 < eps_end <= eps_start"));
    }
    let mut out = Vec::new();
    let mut e = eps_start;
    while e > eps_end * (1.0 + 1e-12) {
        out.push(e);
        e *= 0.5;
    }
    out.push(eps_end);
    Ok(out)
}

/// Everything an entropic run needs besides the two measures.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropicConfig {
    pub grid_n: usize,
    pub source_box: [(f64, f64); 2],
    pub target_box: [(f64, f64); 2],
    pub eps_start: f64,
    pub eps_end: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl EntropicConfig {
    /// 64^2 grids, schedule from 1 down to 5e-3, marginal tolerance 1e-6.
    pub fn new(source_box: [(f64, f64); 2], target_box: [(f64, f64); 2]) -> Self {
        EntropicConfig {
            grid_n: 64,
            source_box,
            target_box,
            eps_start: 1.0,
            eps_end: 5e-3,
            tol: 1e-6,
            max_iter: 20_000,
        }
    }

    /// Worst grid spacing of the two boxes.
    pub fn spacing(&self) -> f64 {
        self.source_box
            .iter()
            .chain(&self.target_box)
            .map(|(lo, hi)| (hi - lo) / self.grid_n as f64)
            .fold(0.0, f64::max)
    }
}

/// Discretizes both measures, runs the schedule and extracts the
/// barycentric map.
pub fn solve_entropic(
    source: &MeasureSpec,
    target: &MeasureSpec,
    cfg: &EntropicConfig,
) -> Result<(BarycentricMap, Vec<StageDiagnostics>)> {
    let src = discretize(source, cfg.source_box, cfg.grid_n)?;
    let tgt = discretize(target, cfg.target_box, cfg.grid_n)?;
    let eps = halving_schedule(cfg.eps_start, cfg.eps_end)?;
    let (c, stages) = epsilon_schedule_solve(&src, &tgt, &eps, cfg.max_iter, cfg.tol)?;
    Ok((barycentric_map(&c)?, stages))
}

impl Coupling {
    /// `pi(i, .)` for one source node.
    pub fn plan_row(&self, i: usize) -> Vec<f64> {
        let x = self.source.node(i);
        let a = self.source.weights[i];
        (0..self.target.len())
            .map(|j| {
                let y = self.target.node(j);
                let c = 0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2));
                a * self.target.weights[j] * ((self.f[i] + self.g[j] - c) / self.epsilon).exp()
            })
            .collect()
    }

    /// `sum_ij pi_ij c_ij`
    pub fn transport_cost(&self) -> f64 {
        (0..self.source.len())
            .map(|i| {
                let x = self.source.node(i);
                self.plan_row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let y = self.target.node(j);
                        p * 0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// CSV of the dual potentials on both grids: `side,x0,x1,weight,dual`.
    pub fn duals_csv(&self) -> String {
        let mut out = String::from("side,x0,x1,weight,dual\n");
        for (side, m, d) in [("source", &self.source, &self.f), ("target", &self.target, &self.g)] {
            for (k, v) in d.iter().enumerate() {
                let p = m.node(k);
                let _ = writeln!(out, "{side},{:e},{:e},{:e},{v:e}", p[0], p[1], m.weights[k]);
            }
        }
        out
    }
}

/// The barycentric map of a coupling, extended off the grid through the
/// conditional law `pi(dy | x) ~ b_j exp((g_j - |x - y_j|^2/2) / eps)`.
#[derive(Clone, Debug)]
pub struct BarycentricMap {
    coupling: Arc<Coupling>,
    log_b: Vec<f64>,
    /// step for central differences (the source grid spacing)
    step: [f64; 2],
    margin: usize,
}

/// Barycentric projection of a converged coupling.
pub fn barycentric_map(c: &Coupling) -> Result<BarycentricMap> {
    for i in 0..c.source.len() {
        if c.source.weights[i] > 0.0 && !c.f[i].is_finite() {
            return Err(Error::EmptyRow(i));
        }
    }
    Ok(BarycentricMap {
        coupling: Arc::new(c.clone()),
        log_b: c.target.log_weights(),
        step: c.source.spacing,
        margin: BOUNDARY_MARGIN,
    })
}

impl BarycentricMap {
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Conditional mean and covariance of `y` given `x`, plus the
    /// out-of-sample dual `f(x)`.
    fn moments(&self, x: &[f64]) -> Result<([f64; 2], [[f64; 3]; 1], f64)> {
        let c = &self.coupling;
        let eps = c.epsilon;
        let t = &c.target;
        let n1 = t.axes[1].len();
        let mut best = f64::NEG_INFINITY;
        let mut logits = Vec::with_capacity(t.len());
        for (j, (&g, &lb)) in c.g.iter().zip(&self.log_b).enumerate() {
            let y0 = t.axes[0][j / n1];
            let y1 = t.axes[1][j % n1];
            let cost = 0.5 * ((x[0] - y0).powi(2) + (x[1] - y1).powi(2));
            let v = (g - cost) / eps + lb;
            best = best.max(v);
            logits.push(v);
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::EmptyRow(usize::MAX));
        }
        let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for (j, v) in logits.iter().enumerate() {
            let w = (v - best).exp();
            if w == 0.0 {
                continue;
            }
            let y0 = t.axes[0][j / n1];
            let y1 = t.axes[1][j % n1];
            z += w;
            m0 += w * y0;
            m1 += w * y1;
            s00 += w * y0 * y0;
            s01 += w * y0 * y1;
            s11 += w * y1 * y1;
        }
        let (m0, m1) = (m0 / z, m1 / z);
        let cov = [s00 / z - m0 * m0, s01 / z - m0 * m1, s11 / z - m1 * m1];
        let f = -eps * (best + z.ln());
        Ok(([m0, m1], [cov], f))
    }

    /// `DT = Cov(y | x) / eps`, the exact derivative of the extended map.
    pub fn analytic_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (_, [cov], _) = self.moments(x)?;
        let e = self.coupling.epsilon;
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[cov[0] / e, cov[1] / e, cov[1] / e, cov[2] / e],
        ))
    }

    /// Map values at every source node (row-major).
    pub fn node_values(&self) -> Result<Vec<[f64; 2]>> {
        let s = &self.coupling.source;
        (0..s.len())
            .into_par_iter()
            .map(|i| {
                let x = s.node(i);
                self.moments(&x).map(|(m, _, _)| m)
            })
            .collect()
    }

    /// Source node indices at least `margin` nodes from every edge.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let s = &self.coupling.source;
        let (n0, n1) = s.shape();
        let m = self.margin;
        let mut out = Vec::new();
        for i0 in m..n0.saturating_sub(m) {
            for i1 in m..n1.saturating_sub(m) {
                out.push(s.index(i0, i1));
            }
        }
        out
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    /// CSV `x0,x1,T0,T1,weight` over the source grid.
    pub fn export_csv(&self) -> Result<String> {
        let s = &self.coupling.source;
        let vals = self.node_values()?;
        let mut out = String::from("x0,x1,T0,T1,weight\n");
        for (i, v) in vals.iter().enumerate() {
            let p = s.node(i);
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                p[0], p[1], v[0], v[1], s.weights[i]
            );
        }
        Ok(out)
    }
}

impl TransportMap for BarycentricMap {
    fn dim(&self) -> usize {
        2
    }

    fn provenance(&self) -> Provenance {
        Provenance::Entropic
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.coupling.source.bounds().to_vec()
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(invalid("entropic maps are two-dimensional"));
        }
        Ok(self.moments(x)?.0.to_vec())
    }

    /// Central differences with the grid step, one-sided where a stencil
    /// point would leave the box.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let bounds = self.coupling.source.bounds();
        let mut j = DMatrix::zeros(2, 2);
        for k in 0..2 {
            let h = self.step[k];
            let (lo, hi) = bounds[k];
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            let (mut a, mut b) = (x[k] - h, x[k] + h);
            if a < lo {
                a = x[k];
            }
            if b > hi {
                b = x[k];
            }
            plus[k] = b;
            minus[k] = a;
            let tp = self.moments(&plus)?.0;
            let tm = self.moments(&minus)?.0;
            for r in 0..2 {
                j[(r, k)] = (tp[r] - tm[r]) / (b - a);
            }
        }
        Ok(j)
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        let f = self.moments(x)?.2;
        Ok(0.5 * (x[0] * x[0] + x[1] * x[1]) - f)
    }

    fn has_potential(&self) -> bool {
        true
    }

    fn boundary_margin(&self) -> usize {
        self.margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::*;

    fn tiny(weights: Vec<f64>, shift: f64) -> DiscreteMeasure {
        let axes = [vec![0.0 + shift, 1.0 + shift, 2.0 + shift], vec![0.0, 0.5, 1.0]];
        DiscreteMeasure::from_weights(axes, weights, "tiny").unwrap()
    }

    // Exact discrete OT by successive shortest paths (Bellman-Ford on the
    // residual bipartite graph); independent of any entropic machinery.
    fn exact_ot(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
        let (n, m) = (a.len(), b.len());
        let mut flow = vec![vec![0.0; m]; n];
        let mut supply = a.to_vec();
        let mut demand = b.to_vec();
        loop {
            // nodes: 0..n sources, n..n+m sinks; distances from all
            // sources with remaining supply
            let mut dist = vec![f64::INFINITY; n + m];
            let mut prev = vec![usize::MAX; n + m];
            for i in 0..n {
                if supply[i] > 1e-15 {
                    dist[i] = 0.0;
                }
            }
            for _ in 0..(n + m) {
                let mut changed = false;
                for i in 0..n {
                    for j in 0..m {
                        let c = cost(i, j);
                        if dist[i] + c < dist[n + j] - 1e-15 {
                            dist[n + j] = dist[i] + c;
                            prev[n + j] = i;
                            changed = true;
                        }
                        if flow[i][j] > 1e-15 && dist[n + j] - c < dist[i] - 1e-15 {
                            dist[i] = dist[n + j] - c;
                            prev[i] = n + j;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let sink = (0..m)
                .filter(|&j| demand[j] > 1e-15 && dist[n + j].is_finite())
                .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]));
            let Some(j) = sink else { break };
            // bottleneck along the path
            let mut amount = demand[j];
            let mut v = n + j;
            while prev[v] != usize::MAX {
                let u = prev[v];
                if u >= n {
                    amount = amount.min(flow[v][u - n]);
                }
                v = u;
            }
            amount = amount.min(supply[v]);
            let origin = v;
            let mut v = n + j;
            while prev[v] != usize::MAX {
                let u = prev[v];
                if u < n {
                    flow[u][v - n] += amount;
                } else {
                    flow[v][u - n] -= amount;
                }
                v = u;
            }
            supply[origin] -= amount;
            demand[j] -= amount;
        }
        let mut total = 0.0;
        for (i, row) in flow.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                total += f * cost(i, j);
            }
        }
        total
    }

    #[test]
    fn tiny_instance_matches_exact_lp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2 {
            let wa: Vec<f64> = (0..9).map(|_| rng.random_range(0.2..1.0)).collect();
            let wb: Vec<f64> = (0..9).map(|_| rng.random_range(0.2..1.0)).collect();
            let src = tiny(wa, 0.0);
            let tgt = tiny(wb, 0.3);
            let eps_list: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).chain([1e-3]).collect();
            let (c, _) = epsilon_schedule_solve(&src, &tgt, &eps_list, 200_000, 1e-9).unwrap();
            let cost = |i: usize, j: usize| {
                let (x, y) = (src.node(i), tgt.node(j));
                0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
            };
            let exact = exact_ot(&src.weights, &tgt.weights, &cost);
            let entropic = c.transport_cost();
            assert!(
                (entropic - exact).abs() <= 0.01 * exact,
                "{entropic} vs {exact}"
            );
        }
    }

    #[test]
    fn schedule_halves_to_the_end_value() {
        let s = halving_schedule(1.0, 5e-3).unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s[7], 0.0078125);
        assert_eq!(s[8], 5e-3);
        assert_eq!(halving_schedule(0.5, 0.5).unwrap(), vec![0.5]);
        assert!(halving_schedule(0.1, 0.5).is_err());
    }

    #[test]
    fn discretize_examples() {
        let g = make_standard_gaussian(2).unwrap();
        let d = discretize(&g, [(-8.0, 8.0), (-8.0, 8.0)], 64).unwrap();
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (n0, n1) = d.shape();
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                let w = d.weights[d.index(i0, i1)];
                let r = d.weights[d.index(n0 - 1 - i0, n1 - 1 - i1)];
                assert!((w - r).abs() <= 1e-15 * w.max(1e-300) + 1e-300);
            }
        }
        assert!(matches!(
            discretize(&g, [(-3.0, 3.0), (-3.0, 3.0)], 16),
            Err(Error::MassDeficit { .. })
        ));
        let u = make_uniform(ConvexBody::square(1.0).unwrap()).unwrap();
        let d = discretize(&u, [(-1.0, 1.0), (-1.0, 1.0)], 32).unwrap();
        assert!(d.weights.iter().all(|w| (w - 1.0 / 1024.0).abs() < 1e-15));
    }

    #[test]
    fn self_transport_is_near_identity() {
        let g = make_standard_gaussian(2).unwrap();
        let d = discretize(&g, [(-7.0, 7.0), (-7.0, 7.0)], 32).unwrap();
        let eps = [0.5, 0.1, 0.02];
        let (c, _) = epsilon_schedule_solve(&d, &d, &eps, 20_000, 1e-6).unwrap();
        let map = barycentric_map(&c).unwrap();
        let vals = map.node_values().unwrap();
        for i in map.interior_nodes() {
            let x = d.node(i);
            if d.weights[i] < 1e-8 {
                continue;
            }
            let dx = ((vals[i][0] - x[0]).powi(2) + (vals[i][1] - x[1]).powi(2)).sqrt();
            assert!(dx < 0.05, "node {x:?} moved {dx}");
        }
    }

    #[test]
    fn jacobians_agree() {
        let g = make_standard_gaussian(2).unwrap();
        let src = discretize(&g, [(-7.0, 7.0), (-7.0, 7.0)], 20).unwrap();
        let h = make_gaussian(2, 0.5).unwrap();
        let tgt = discretize(&h, [(-3.5, 3.5), (-3.5, 3.5)], 20).unwrap();
        let (c, _) = epsilon_schedule_solve(&src, &tgt, &[1.0, 0.5, 0.25, 0.1], 50_000, 1e-9)
            .unwrap();
        let map = barycentric_map(&c).unwrap();
        let x = [0.35, -0.35];
        let fd = map.jacobian(&x).unwrap();
        let an = map.analytic_jacobian(&x).unwrap();
        assert!((fd - &an).amax() < 0.05, "{an}");
        // gradient of the recovered potential is the map
        let hstep = 1e-5;
        let t = map.forward(&x).unwrap();
        let dphi = (map.potential(&[x[0] + hstep, x[1]]).unwrap()
            - map.potential(&[x[0] - hstep, x[1]]).unwrap())
            / (2.0 * hstep);
        assert!((dphi - t[0]).abs() < 1e-6);
    }

    #[test]
    fn schedule_rejects_bad_lists() {
        let g = make_standard_gaussian(2).unwrap();
        let d = discretize(&g, [(-7.0, 7.0), (-7.0, 7.0)], 8).unwrap();
        assert!(epsilon_schedule_solve(&d, &d, &[0.1, 0.2], 10, 1e-6).is_err());
        assert!(epsilon_schedule_solve(&d, &d, &[], 10, 1e-6).is_err());
        let h = make_gaussian(2, 0.5).unwrap();
        let t = discretize(&h, [(-3.5, 3.5), (-3.5, 3.5)], 8).unwrap();
        assert!(matches!(
            sinkhorn(&d, &t, 1e-2, 2, 1e-12),
            Err(Error::NonConvergence { .. })
        ));
    }
}
