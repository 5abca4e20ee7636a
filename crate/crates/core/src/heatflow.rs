//! Heat-flow transport with standard Gaussian reference.
//!
//! For a target `nu = e^{-U} gamma / Z` the Ornstein–Uhlenbeck semigroup
//! gives `U_t = -log P_t e^{-U}` and the flow `dS/dt = grad U_t(S)`,
//! `S_0 = Id`. `S_inf` pushes `nu` to `gamma`; its inverse `T` pushes
//! `gamma` to `nu`. `P_t` is the Mehler integral
//! `P_t h(x) = E h(x e^{-t} + sqrt(1 - e^{-2t}) Y)`, evaluated by
//! Gauss–Hermite quadrature in log space.
//!
//! Admissible `U` are separable even polynomials of degree at most four in
//! each coordinate, so `P_t` factors over coordinates and so does the flow.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt::Write;

use crate::error::{invalid, Error, Result};
use crate::interp::MonotoneCubic;
use crate::map::{Provenance, TransportMap};
use crate::measures::{MeasureSpec, Potential};
use crate::quadrature::GaussHermite;
use crate::report::{theorem, CheckEntry, Comparison};

pub const DEFAULT_GH_ORDER: usize = 64;
pub const DEFAULT_T_MAX: f64 = 20.0;
pub const DEFAULT_DT: f64 = 1e-2;
pub const FLOW_TOL: f64 = 1e-8;
pub const PROBE_TOL: f64 = 1e-6;
const MAX_HALVINGS: u32 = 10;

/// `U(x) = sum_i (a_i x_i^2 + b_i x_i^4)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPotential {
    pub coords: Vec<(f64, f64)>,
}

impl FlowPotential {
    /// `b_i >= 0`, and `a_i > -1/2` when `b_i = 0` so that `e^{-U} gamma` is
    /// finite.
    pub fn new(coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("flow potential needs at least one coordinate"));
        }
        for &(a, b) in &coords {
            if !(a.is_finite() && b.is_finite()) || b < 0.0 || (b == 0.0 && a <= -0.5) {
                return Err(Error::Unsupported(format!(
                    "U = {a} x^2 + {b} x^4 is outside the admissible family"
                )));
            }
        }
        Ok(FlowPotential { coords })
    }

    /// `U = W - |x|^2/2` for `W = sum (w2_i x_i^2/2 + w4_i x_i^4)`.
    pub fn from_target(w: &[(f64, f64)]) -> Result<Self> {
        Self::new(w.iter().map(|&(w2, w4)| (0.5 * (w2 - 1.0), w4)).collect())
    }

    /// Flow potential of a density target of separable quartic form.
    pub fn from_measure(m: &MeasureSpec) -> Result<Self> {
        let w = m
            .potential()
            .and_then(|p| p.separable_quartic())
            .ok_or_else(|| {
                Error::Unsupported(format!("heat flow towards {}: not a separable quartic", m.name))
            })?;
        Self::from_target(&w)
    }

    /// `U = 0`: the target is the reference Gaussian.
    pub fn zero(dim: usize) -> Self {
        FlowPotential {
            coords: vec![(0.0, 0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The same function as a [`Potential`], for convexity audits.
    pub fn to_potential(&self) -> Result<Potential> {
        let d = self.dim();
        let quad = Potential::quadratic(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            self.coords.iter().map(|c| 2.0 * c.0),
        )));
        let quart = Potential::coord_quartic(self.coords.iter().map(|c| c.1).collect())?;
        // quadratic() rejects indefinite forms; those U are not convex anyway
        let p = crate::measures::add_potentials(&quad?, &quart)?;
        Ok(p.named(format!("U{:?}", self.coords)))
    }

    fn value(&self, i: usize, x: f64) -> f64 {
        let (a, b) = self.coords[i];
        let x2 = x * x;
        a * x2 + b * x2 * x2
    }

    fn d1(&self, i: usize, x: f64) -> f64 {
        let (a, b) = self.coords[i];
        2.0 * a * x + 4.0 * b * x * x * x
    }

    fn d2(&self, i: usize, x: f64) -> f64 {
        let (a, b) = self.coords[i];
        2.0 * a + 12.0 * b * x * x
    }
}

/// `P_t h(x)` for a positive `h` by Gauss–Hermite quadrature.
pub fn ou_apply<H: Fn(f64) -> f64>(gh: &GaussHermite, h: H, t: f64, x: f64) -> f64 {
    if t == 0.0 {
        return h(x);
    }
    let (c, s) = ou_coefficients(t);
    gh.expect(|y| h(c * x + s * y))
}

fn ou_coefficients(t: f64) -> (f64, f64) {
    let c = (-t).exp();
    // 1 - e^{-2t} without cancellation at small t
    let s = (-(-2.0 * t).exp_m1()).sqrt();
    (c, s)
}

/// `U_t(x)`, `U_t'(x)` and `U_t''(x)` for one coordinate of the flow
/// potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothed {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Smoothed potential of coordinate `i` at time `t`, computed from
/// `(P_t h)' = e^{-t} P_t h'` and `(P_t h)'' = e^{-2t} P_t h''` with
/// `h = e^{-u}` and log-sum-exp weights.
pub fn smoothed(u: &FlowPotential, i: usize, gh: &GaussHermite, t: f64, x: f64) -> Result<Smoothed> {
    if t == 0.0 {
        let d1 = u.d1(i, x);
        return Ok(Smoothed {
            value: u.value(i, x),
            d1,
            d2: u.d2(i, x),
        });
    }
    let (c, s) = ou_coefficients(t);
    let mut best = f64::NEG_INFINITY;
    let mut logs = [0.0f64; 256];
    let m = gh.order();
    if m > logs.len() {
        return Err(invalid("Gauss-Hermite order above 256"));
    }
    for (k, slot) in logs.iter_mut().enumerate().take(m) {
        let z = c * x + s * gh.nodes[k];
        let l = gh.weights[k].ln() - u.value(i, z);
        *slot = l;
        best = best.max(l);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Underflow(vec![x]));
    }
    let (mut z0, mut z1, mut z2) = (0.0, 0.0, 0.0);
    for (k, &l) in logs.iter().enumerate().take(m) {
        let w = (l - best).exp();
        if w == 0.0 {
            continue;
        }
        let z = c * x + s * gh.nodes[k];
        let du = u.d1(i, z);
        z0 += w;
        z1 += w * du;
        z2 += w * (du * du - u.d2(i, z));
    }
    if !(z0 > 0.0) {
        return Err(Error::Underflow(vec![x]));
    }
    let value = -(best + z0.ln());
    // U_t' = -(P h)'/(P h) = e^{-t} E[u' h] / E[h]
    let m1 = z1 / z0;
    let d1 = c * m1;
    // U_t'' = -(P h)''/(P h) + (U_t')^2
    let d2 = -(c * c) * (z2 / z0) + d1 * d1;
    Ok(Smoothed { value, d1, d2 })
}

/// `grad U_t(x)`, the flow velocity.
pub fn velocity(u: &FlowPotential, gh: &GaussHermite, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != u.dim() {
        return Err(invalid("point and potential dimensions differ"));
    }
    (0..x.len())
        .map(|i| smoothed(u, i, gh, t, x[i]).map(|s| s.d1))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub t_max: f64,
    pub dt: f64,
    pub gh_order: usize,
    /// trajectory snapshot every this many steps (0: only the endpoints)
    pub record_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_max: DEFAULT_T_MAX,
            dt: DEFAULT_DT,
            gh_order: DEFAULT_GH_ORDER,
            record_every: 0,
        }
    }
}

/// Snapshot of the flow at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

/// Result of integrating the flow from a seed set.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub potential: FlowPotential,
    pub t: f64,
    pub seeds: Vec<Vec<f64>>,
    /// `S_t(seed)`
    pub positions: Vec<Vec<f64>>,
    /// `log dS_t/dx` per coordinate (the flow is separable)
    pub log_jacobian: Vec<Vec<f64>>,
    pub step: f64,
    pub quadrature_order: usize,
    /// sup of `|velocity|` over seeds at the final time
    pub residual_velocity: f64,
    /// number of steps that needed halving
    pub halved_steps: usize,
    pub trajectory: Vec<Snapshot>,
}

// state per seed and coordinate: (position, log S')
fn rhs(u: &FlowPotential, gh: &GaussHermite, t: f64, st: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    st.iter()
        .enumerate()
        .map(|(i, &(p, _))| smoothed(u, i, gh, t, p).map(|s| (s.d1, s.d2)))
        .collect()
}

fn rk4(
    u: &FlowPotential,
    gh: &GaussHermite,
    t: f64,
    h: f64,
    st: &[(f64, f64)],
) -> Result<Vec<(f64, f64)>> {
    let add = |a: &[(f64, f64)], k: &[(f64, f64)], s: f64| -> Vec<(f64, f64)> {
        a.iter()
            .zip(k)
            .map(|(x, d)| (x.0 + s * d.0, x.1 + s * d.1))
            .collect()
    };
    let k1 = rhs(u, gh, t, st)?;
    let k2 = rhs(u, gh, t + 0.5 * h, &add(st, &k1, 0.5 * h))?;
    let k3 = rhs(u, gh, t + 0.5 * h, &add(st, &k2, 0.5 * h))?;
    let k4 = rhs(u, gh, t + h, &add(st, &k3, h))?;
    Ok((0..st.len())
        .map(|i| {
            let comb = |f: fn(&(f64, f64)) -> f64| {
                f(&k1[i]) + 2.0 * f(&k2[i]) + 2.0 * f(&k3[i]) + f(&k4[i])
            };
            (
                st[i].0 + h / 6.0 * comb(|v| v.0),
                st[i].1 + h / 6.0 * comb(|v| v.1),
            )
        })
        .collect())
}

fn ordered(states: &[Vec<(f64, f64)>], seeds: &[Vec<f64>]) -> bool {
    // 1-D only: seeds are given sorted and must stay strictly sorted
    if seeds[0].len() != 1 {
        return true;
    }
    states.windows(2).zip(seeds.windows(2)).all(|(s, x)| {
        if x[1][0] > x[0][0] {
            s[1][0].0 > s[0][0].0
        } else {
            true
        }
    })
}

/// Classical fourth-order Runge–Kutta integration of the flow (and of its
/// tangent `d log S'/dt = U_t''(S)`) from every seed to `t_max`. In 1-D a
/// step that breaks the order of the seeds is retried with half the step,
/// at most ten times.
pub fn integrate_flow(u: &FlowPotential, seeds: &[Vec<f64>], cfg: FlowConfig) -> Result<FlowState> {
    if seeds.is_empty() {
        return Err(Error::EmptySamples);
    }
    if seeds.iter().any(|s| s.len() != u.dim() || s.iter().any(|v| !v.is_finite())) {
        return Err(invalid("seeds must be finite points of the potential's dimension"));
    }
    if !(cfg.t_max >= 0.0 && cfg.dt > 0.0) {
        return Err(invalid("t_max must be nonnegative and dt positive"));
    }
    let gh = GaussHermite::new(cfg.gh_order)?;
    let mut states: Vec<Vec<(f64, f64)>> = seeds
        .iter()
        .map(|s| s.iter().map(|&x| (x, 0.0)).collect())
        .collect();
    let n_steps = (cfg.t_max / cfg.dt).round().max(0.0) as usize;
    let dt = if n_steps > 0 { cfg.t_max / n_steps as f64 } else { 0.0 };
    let mut trajectory = Vec::new();
    let snapshot = |t: f64, states: &[Vec<(f64, f64)>]| -> Result<Snapshot> {
        let positions: Vec<Vec<f64>> =
            states.iter().map(|s| s.iter().map(|v| v.0).collect()).collect();
        let velocities = positions
            .iter()
            .map(|p| velocity(u, &gh, t, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot {
            t,
            positions,
            velocities,
        })
    };
    if cfg.record_every > 0 {
        trajectory.push(snapshot(0.0, &states)?);
    }
    let mut halved = 0;
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let mut k = 0;
        let next = loop {
            let sub = 1usize << k;
            let h = dt / sub as f64;
            let mut trial = states.clone();
            for j in 0..sub {
                let tj = t + j as f64 * h;
                trial = trial
                    .par_iter()
                    .map(|st| rk4(u, &gh, tj, h, st))
                    .collect::<Result<Vec<_>>>()?;
            }
            if ordered(&trial, seeds) {
                break trial;
            }
            k += 1;
            if k > MAX_HALVINGS {
                return Err(Error::NonConvergence {
                    what: "flow step (seed order violated)",
                    iterations: k as usize,
                    residual: t,
                });
            }
        };
        if k > 0 {
            halved += 1;
        }
        states = next;
        if cfg.record_every > 0 && (step + 1) % cfg.record_every == 0 {
            trajectory.push(snapshot((step + 1) as f64 * dt, &states)?);
        }
    }
    let t_end = n_steps as f64 * dt;
    let positions: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|v| v.0).collect()).collect();
    let mut residual: f64 = 0.0;
    for p in &positions {
        for v in velocity(u, &gh, t_end, p)? {
            residual = residual.max(v.abs());
        }
    }
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            what: "flow (non-finite position)",
            iterations: n_steps,
            residual: f64::NAN,
        });
    }
    Ok(FlowState {
        potential: u.clone(),
        t: t_end,
        seeds: seeds.to_vec(),
        log_jacobian: states.iter().map(|s| s.iter().map(|v| v.1).collect()).collect(),
        positions,
        step: dt,
        quadrature_order: cfg.gh_order,
        residual_velocity: residual,
        halved_steps: halved,
        trajectory,
    })
}

impl FlowState {
    /// CSV `t,seed,axis,position,velocity` over the recorded snapshots.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,seed,axis,position,velocity\n");
        for snap in &self.trajectory {
            for (k, (p, v)) in snap.positions.iter().zip(&snap.velocities).enumerate() {
                for i in 0..p.len() {
                    let _ = writeln!(out, "{:e},{k},{i},{:e},{:e}", snap.t, p[i], v[i]);
                }
            }
        }
        out
    }
}

/// `T = S^{-1}` built from the integrated seeds.
#[derive(Clone, Debug)]
pub struct HeatflowMap {
    /// per coordinate: `x -> S(x)` with slopes `S'`
    forward_s: Vec<MonotoneCubic>,
    /// per coordinate: `y -> T(y)` with slopes `1/S'`
    inverse_s: Vec<MonotoneCubic>,
    domain: Vec<(f64, f64)>,
}

/// Inverse of the flow map: in 1-D by monotone interpolation of the pairs
/// `(S(x), x)`; in higher dimension by damped Newton on the interpolated
/// `S`, per query point.
pub fn inverse_flow_map(fs: &FlowState) -> Result<HeatflowMap> {
    let d = fs.potential.dim();
    let mut forward_s = Vec::with_capacity(d);
    let mut inverse_s = Vec::with_capacity(d);
    let mut domain = Vec::with_capacity(d);
    for i in 0..d {
        // the coordinate-i flow depends only on the seed's coordinate i
        let mut pts: Vec<(f64, f64, f64)> = fs
            .seeds
            .iter()
            .zip(&fs.positions)
            .zip(&fs.log_jacobian)
            .map(|((x, s), lj)| (x[i], s[i], lj[i].exp()))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() < 2 {
            return Err(invalid("inversion needs at least two distinct seeds per axis"));
        }
        if pts.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(Error::NotInvertible(0.0));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ss: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ds: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let inv: Vec<f64> = ds.iter().map(|v| 1.0 / v).collect();
        domain.push((ss[0], ss[ss.len() - 1]));
        forward_s.push(MonotoneCubic::with_slopes(xs.clone(), ss.clone(), ds)?);
        inverse_s.push(MonotoneCubic::with_slopes(ss, xs, inv)?);
    }
    Ok(HeatflowMap {
        forward_s,
        inverse_s,
        domain,
    })
}

impl HeatflowMap {
    /// `S(x)` from the interpolated seeds.
    pub fn flow_map(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.forward_s).map(|(v, c)| c.eval(*v)).collect()
    }

    fn newton(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x: Vec<f64> = y.iter().zip(&self.inverse_s).map(|(v, c)| c.eval(*v)).collect();
        for _ in 0..100 {
            let s = self.flow_map(&x);
            let r: Vec<f64> = s.iter().zip(y).map(|(a, b)| a - b).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-13 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Ok(x);
            }
            // diagonal Jacobian for a separable flow
            let mut lambda = 1.0;
            let step: Vec<f64> = (0..x.len())
                .map(|i| r[i] / self.forward_s[i].derivative(x[i]).max(1e-300))
                .collect();
            loop {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a - lambda * d).collect();
                let rt: f64 = self
                    .flow_map(&trial)
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if rt < norm || lambda < 1e-6 {
                    x = trial;
                    break;
                }
                lambda *= 0.5;
            }
        }
        Err(Error::NonConvergence {
            what: "flow inversion",
            iterations: 100,
            residual: f64::NAN,
        })
    }
}

impl TransportMap for HeatflowMap {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Heatflow
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(invalid("dimension mismatch"));
        }
        if self.dim() == 1 {
            Ok(vec![self.inverse_s[0].eval(y[0])])
        } else {
            self.newton(y)
        }
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let x = self.forward(y)?;
        let mut j = DMatrix::zeros(d, d);
        for i in 0..d {
            j[(i, i)] = if d == 1 {
                self.inverse_s[0].derivative(y[0])
            } else {
                1.0 / self.forward_s[i].derivative(x[i])
            };
        }
        Ok(j)
    }

    fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.flow_map(x))
    }
}

/// Transport-equation consistency along a 1-D flow: `S_t` pushes `nu` to
/// `nu_t = P_t(e^{-U}) gamma / Z_t`, so `F_nu(x) = F_{nu_t}(S_t(x))` for every
/// seed and every recorded time. Reports the largest CDF discrepancy over
/// the snapshots (at most `max_seeds` seeds per snapshot, evenly spaced).
pub fn pushforward_consistency(fs: &FlowState, max_seeds: usize) -> Result<CheckEntry> {
    let u = &fs.potential;
    if u.dim() != 1 {
        return Err(Error::Unsupported("push-forward check in dimension > 1".into()));
    }
    if fs.trajectory.is_empty() {
        return Err(invalid("flow was integrated without recorded snapshots"));
    }
    let gh = GaussHermite::new(fs.quadrature_order)?;
    let stride = fs.seeds.len().div_ceil(max_seeds.max(1)).max(1);
    let picked: Vec<usize> = (0..fs.seeds.len()).step_by(stride).collect();
    let tol = crate::quadrature::Tolerance::new(1e-13, 1e-11);
    let cutoff = 12.0;
    let cdf_at = |t: f64, x: f64| -> Result<(f64, f64)> {
        let dens = |y: f64| -> f64 {
            match smoothed(u, 0, &gh, t, y) {
                Ok(s) => (-s.value).exp() * crate::quadrature::normal_pdf(y),
                Err(_) => 0.0,
            }
        };
        let x = x.clamp(-cutoff, cutoff);
        let left = crate::quadrature::integrate(dens, -cutoff, x, tol)?;
        let right = crate::quadrature::integrate(dens, x, cutoff, tol)?;
        Ok((left, left + right))
    };
    let mut worst: f64 = 0.0;
    let mut at_t = 0.0;
    for snap in &fs.trajectory {
        for &k in &picked {
            let (l0, z0) = cdf_at(0.0, fs.seeds[k][0])?;
            let (lt, zt) = cdf_at(snap.t, snap.positions[k][0])?;
            let err = (l0 / z0 - lt / zt).abs();
            if err > worst {
                worst = err;
                at_t = snap.t;
            }
        }
    }
    Ok(CheckEntry::compare_abs(
        format!("flow_pushforward[{:?}]", u.coords),
        theorem::FLOW_TRANSPORT,
        worst,
        0.0,
        Comparison::AtMost,
        1e-4,
    )
    .with_inputs(&format!("{:?}|dt={}|m={}", u.coords, fs.step, fs.quadrature_order))
    .with_detail("snapshots", fs.trajectory.len() as f64)
    .with_detail("worst_t", at_t))
}

/// Smallest eigenvalue of `D^2 U_t` over `t_grid x x_grid`, with the
/// Hessian from second differences of `U_t` (Richardson-extrapolated).
/// Points are per-coordinate values; the Hessian of a separable `U_t` is
/// diagonal.
pub fn logconcavity_probe(
    u: &FlowPotential,
    t_grid: &[f64],
    x_grid: &[f64],
    gh_order: usize,
) -> Result<CheckEntry> {
    if t_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    let gh = GaussHermite::new(gh_order)?;
    let h = 1e-3;
    let mut min_eig = f64::INFINITY;
    let mut argmin = (0.0, 0.0);
    for &t in t_grid {
        for &x in x_grid {
            for i in 0..u.dim() {
                let v = |z: f64| smoothed(u, i, &gh, t, z).map(|s| s.value);
                let c = v(x)?;
                let d_h = (v(x + h)? + v(x - h)? - 2.0 * c) / (h * h);
                let d_2h = (v(x + 2.0 * h)? + v(x - 2.0 * h)? - 2.0 * c) / (4.0 * h * h);
                let second = (4.0 * d_h - d_2h) / 3.0;
                if second < min_eig {
                    min_eig = second;
                    argmin = (t, x);
                }
            }
        }
    }
    Ok(CheckEntry::compare_abs(
        format!("logconcavity_probe[{:?}]", u.coords),
        theorem::HEAT_FLOW,
        min_eig,
        0.0,
        Comparison::AtLeast,
        PROBE_TOL,
    )
    .with_inputs(&format!("{:?}|t={t_grid:?}|x={x_grid:?}|m={gh_order}", u.coords))
    .with_detail("argmin_t", argmin.0)
    .with_detail("argmin_x", argmin.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    fn gh() -> GaussHermite {
        GaussHermite::new(64).unwrap()
    }

    #[test]
    fn mehler_gaussian_closed_form() {
        // h = e^{-a x^2}: P_t h(x) = exp(-a c^2 x^2 / (1 + 2 a s^2)) / sqrt(1 + 2 a s^2)
        let g = gh();
        for &(a, t, x) in &[(0.3, 0.5, 1.2), (1.5, 0.1, -0.7), (0.8, 2.0, 2.0)] {
            let (c, s) = ou_coefficients(t);
            let q = 1.0 + 2.0 * a * s * s;
            let exact = (-a * c * c * x * x / q).exp() / q.sqrt();
            let v = ou_apply(&g, |z| (-a * z * z).exp(), t, x);
            assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        }
        assert_eq!(ou_apply(&g, |z| z * z + 1.0, 0.0, 3.0), 10.0);
        // ergodicity: t = 40 gives E h(Y) for every x
        let far = ou_apply(&g, |z| (-z * z).exp(), 40.0, 3.0);
        assert!((far - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quartic_smoothing_matches_adaptive_quadrature() {
        let g = gh();
        let u = FlowPotential::new(vec![(0.0, 0.25)]).unwrap();
        for &(t, x) in &[(0.05, 0.3), (0.5, 1.7), (3.0, -2.0)] {
            let (c, s) = ou_coefficients(t);
            let f = |y: f64| {
                let z = c * x + s * y;
                (-0.25 * z.powi(4) - 0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt()
            };
            let p = integrate(f, -40.0, 40.0, Tolerance::new(1e-16, 1e-13)).unwrap();
            let sm = smoothed(&u, 0, &g, t, x).unwrap();
            // e^{-z^4} is entire of order four, so the 64-node rule converges
            // slowly once the smoothing is wide
            assert!((sm.value + p.ln()).abs() < 5e-8, "t={t} x={x}");
        }
    }

    #[test]
    fn semigroup_property() {
        let g = gh();
        let h = |z: f64| (-(0.25 * z.powi(4) + 0.1 * z * z)).exp();
        for &(s, t, x) in &[(0.3, 0.4, 0.5), (1.0, 0.2, -1.5)] {
            let direct = ou_apply(&g, h, s + t, x);
            let nested = ou_apply(&g, |z| ou_apply(&g, h, s, z), t, x);
            assert!((direct - nested).abs() < 1e-8, "{direct} vs {nested}");
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let g = gh();
        let u = FlowPotential::new(vec![(0.1, 0.25)]).unwrap();
        let (t, x, h) = (0.7, 0.9, 1e-4);
        let s = smoothed(&u, 0, &g, t, x).unwrap();
        let v = |z| smoothed(&u, 0, &g, t, z).unwrap();
        assert!(((v(x + h).value - v(x - h).value) / (2.0 * h) - s.d1).abs() < 1e-7);
        assert!(((v(x + h).d1 - v(x - h).d1) / (2.0 * h) - s.d2).abs() < 1e-7);
    }

    #[test]
    fn velocity_examples() {
        let g = gh();
        let zero = FlowPotential::zero(2);
        assert_eq!(velocity(&zero, &g, 0.3, &[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        let u = FlowPotential::new(vec![(0.2, 0.25)]).unwrap();
        let v0 = velocity(&u, &g, 0.0, &[1.5]).unwrap()[0];
        assert!((v0 - (0.4 * 1.5 + 1.5f64.powi(3))).abs() < 1e-14);
        // Gaussian target sigma: U = (1/sigma^2 - 1) x^2/2 = a x^2 gives
        // U_t' = 2 a c^2 x / (1 + 2 a s^2)
        let sigma: f64 = 0.5;
        let a = 0.5 * (1.0 / (sigma * sigma) - 1.0);
        let u = FlowPotential::new(vec![(a, 0.0)]).unwrap();
        for &(t, x) in &[(0.2, 1.0), (1.0, -0.5), (4.0, 2.0)] {
            let (c, s) = ou_coefficients(t);
            let exact = 2.0 * a * c * c * x / (1.0 + 2.0 * a * s * s);
            let v = velocity(&u, &g, t, &[x]).unwrap()[0];
            assert!((v - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn gaussian_flow_doubles() {
        let u = FlowPotential::from_target(&[(4.0, 0.0)]).unwrap();
        let seeds: Vec<Vec<f64>> = (0..21).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
        let cfg = FlowConfig {
            t_max: 15.0,
            dt: 2.5e-3,
            ..FlowConfig::default()
        };
        let fs = integrate_flow(&u, &seeds, cfg).unwrap();
        for (x, s) in fs.seeds.iter().zip(&fs.positions) {
            assert!((s[0] - 2.0 * x[0]).abs() < 1e-9, "{x:?} -> {s:?}");
        }
        assert!(fs.residual_velocity < FLOW_TOL);
        let t = inverse_flow_map(&fs).unwrap();
        assert!((t.forward(&[1.0]).unwrap()[0] - 0.5).abs() < 1e-8);
        assert!((t.jacobian(&[0.3]).unwrap()[(0, 0)] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn identity_flow_and_two_d_inverse() {
        let fs = integrate_flow(
            &FlowPotential::zero(1),
            &[vec![-1.0], vec![0.0], vec![1.0]],
            FlowConfig {
                t_max: 1.0,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        assert_eq!(fs.positions, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let u = FlowPotential::from_target(&[(4.0, 0.0), (1.0, 0.25)]).unwrap();
        let mut seeds = Vec::new();
        for i in 0..15 {
            for j in 0..15 {
                seeds.push(vec![-1.4 + 0.2 * i as f64, -1.4 + 0.2 * j as f64]);
            }
        }
        let fs = integrate_flow(
            &u,
            &seeds,
            FlowConfig {
                dt: 0.05,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let t = inverse_flow_map(&fs).unwrap();
        let y = [0.4, 0.9];
        let x = t.forward(&y).unwrap();
        let back = t.inverse(&x).unwrap();
        assert!((back[0] - y[0]).abs() < 1e-10 && (back[1] - y[1]).abs() < 1e-10);
        // step 0.05 leaves an RK4 error of a few 1e-6
        assert!((x[0] - 0.2).abs() < 1e-5, "{x:?}");
    }

    #[test]
    fn probe_examples() {
        let ts = [0.0, 0.5, 2.0];
        let xs: Vec<f64> = (0..21).map(|k| -2.0 + 0.2 * k as f64).collect();
        let quad = FlowPotential::new(vec![(0.75, 0.0)]).unwrap();
        let e = logconcavity_probe(&quad, &ts, &xs, 64).unwrap();
        assert!(e.passed());
        let quart = FlowPotential::new(vec![(0.0, 0.25)]).unwrap();
        let e = logconcavity_probe(&quart, &ts, &xs, 64).unwrap();
        assert!(e.passed(), "{}", e.computed);
        let flat = FlowPotential::zero(1);
        let e = logconcavity_probe(&flat, &ts, &xs, 64).unwrap();
        assert!(e.computed.abs() < 1e-6);
    }

    #[test]
    fn quartic_flow_matches_monotone_map() {
        use crate::measures::{add_potentials, make_density, make_standard_gaussian, Potential};
        use crate::transport1d::monotone_map;
        let u = FlowPotential::from_target(&[(1.0, 0.25)]).unwrap();
        let seeds: Vec<Vec<f64>> = (0..=260).map(|k| vec![-2.6 + 0.02 * k as f64]).collect();
        let fs = integrate_flow(
            &u,
            &seeds,
            FlowConfig {
                record_every: 100,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        assert!(fs.residual_velocity < FLOW_TOL);
        let t = inverse_flow_map(&fs).unwrap();
        let w = add_potentials(
            &Potential::gaussian(1, 1.0).unwrap(),
            &Potential::coord_quartic(vec![0.25]).unwrap(),
        )
        .unwrap();
        let target = make_density(w, 1.0).unwrap();
        let mono = monotone_map(&make_standard_gaussian(1).unwrap(), &target).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=80 {
            let y = -4.0 + 0.1 * k as f64;
            worst = worst.max((t.forward(&[y]).unwrap()[0] - mono.apply(y).unwrap()).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        let e = pushforward_consistency(&fs, 9).unwrap();
        assert!(e.passed(), "{}", e.computed);
    }

    #[test]
    fn family_whitelist() {
        assert!(FlowPotential::new(vec![(-0.6, 0.0)]).is_err());
        assert!(FlowPotential::new(vec![(0.0, -1.0)]).is_err());
        assert!(FlowPotential::new(vec![(-3.0, 0.1)]).is_ok());
    }
}
