//! Certification diagnostics for transport maps: Lipschitz estimates,
//! second-difference quotients of the potential, Hölder and concentration
//! moduli, L^p bounds on second derivatives, and the scaling law for
//! uniform targets.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid_ot::{solve_entropic, BarycentricMap, EntropicConfig};
use crate::map::{operator_norm, TransportMap};
use crate::measures::{
    audit_convexity_with_tol, make_uniform, second_difference, ConvexBody, MeasureKind, MeasureSpec,
    Modulus,
    Potential,
};
use crate::quadrature::gauss_legendre_10;
use crate::report::{theorem, CheckEntry, Comparison, Status};
use crate::rng;
use crate::transport1d::MonotoneMap;

/// Relative slack on audited moduli (rounding in second differences of
/// normalized potentials).
pub const MODULUS_AUDIT_TOL: f64 = 1e-8;
/// Default decay threshold for `delta_2 Phi / t^2`.
pub const DECAY_TOL: f64 = 1e-6;
/// Random unit directions added to the coordinate basis in `d >= 2`.
pub const RANDOM_DIRECTIONS: usize = 8;

/// Coordinate basis, plus `RANDOM_DIRECTIONS` uniform directions when
/// `d >= 2`.
pub fn directions(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    if d >= 2 {
        let mut r = rng::stream(seed, "directions");
        for _ in 0..RANDOM_DIRECTIONS {
            out.push(rng::unit_vector(&mut r, d));
        }
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pair sources for pairwise Lipschitz estimates.
#[derive(Clone, Debug, PartialEq)]
pub enum PairSampler {
    /// Both points uniform in the box.
    Uniform(Vec<(f64, f64)>),
    /// First point uniform in the box, second at a uniform distance in
    /// `(0, radius]` along a uniform direction (clipped to the box).
    Local { window: Vec<(f64, f64)>, radius: f64 },
}

impl PairSampler {
    /// `n` pairs from the stream `(seed, "pairs")`. The first `n` pairs of a
    /// larger draw are the pairs of a smaller one.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut r = rng::stream(seed, "pairs");
        let point = |r: &mut rand_chacha::ChaCha8Rng, w: &[(f64, f64)]| -> Vec<f64> {
            w.iter().map(|&(lo, hi)| lo + (hi - lo) * r.random::<f64>()).collect()
        };
        (0..n)
            .map(|_| match self {
                PairSampler::Uniform(w) => {
                    let x = point(&mut r, w);
                    (x, point(&mut r, w))
                }
                PairSampler::Local { window, radius } => {
                    let x = point(&mut r, window);
                    let dir = rng::unit_vector(&mut r, window.len());
                    let s = radius * (1.0 - r.random::<f64>());
                    let y = x
                        .iter()
                        .zip(&dir)
                        .zip(window)
                        .map(|((a, d), &(lo, hi))| (a + s * d).clamp(lo, hi))
                        .collect();
                    (x, y)
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseLipschitz {
    pub value: f64,
    pub pairs: usize,
    /// coincident pairs, not counted
    pub skipped: usize,
}

/// `max |T(x) - T(y)| / |x - y|` over the pairs, a lower bound for the
/// Lipschitz constant.
pub fn lipschitz_pairwise(
    map: &dyn TransportMap,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<PairwiseLipschitz> {
    if pairs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let quotients = pairs
        .par_iter()
        .map(|(x, y)| {
            let d = dist(x, y);
            if d == 0.0 {
                return Ok(None);
            }
            let (tx, ty) = (map.forward(x)?, map.forward(y)?);
            Ok(Some(dist(&tx, &ty) / d))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = quotients.iter().filter(|q| q.is_none()).count();
    let value = quotients.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
    Ok(PairwiseLipschitz {
        value,
        pairs: pairs.len() - skipped,
        skipped,
    })
}

// offsets in node units; with their negatives they cover the 24-neighbourhood
// directions up to symmetry
const NEIGHBOUR_OFFSETS: [(i64, i64); 6] = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2)];

/// Pairwise estimate for an entropic map over neighbouring interior source
/// nodes (the boundary margin is excluded).
pub fn entropic_lipschitz(map: &BarycentricMap) -> Result<PairwiseLipschitz> {
    let src = &map.coupling().source;
    let vals = map.node_values()?;
    let (n0, n1) = src.shape();
    let m = map.boundary_margin() as i64;
    let (n0, n1) = (n0 as i64, n1 as i64);
    let inside = |a: i64, b: i64| a >= m && b >= m && a < n0 - m && b < n1 - m;
    let mut value: f64 = 0.0;
    let mut pairs = 0;
    for i0 in m..n0 - m {
        for i1 in m..n1 - m {
            let i = src.index(i0 as usize, i1 as usize);
            for (d0, d1) in NEIGHBOUR_OFFSETS {
                let (j0, j1) = (i0 + d0, i1 + d1);
                if !inside(j0, j1) {
                    continue;
                }
                let j = src.index(j0 as usize, j1 as usize);
                let q = dist(&vals[i], &vals[j]) / dist(&src.node(i), &src.node(j));
                value = value.max(q);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::EmptySamples);
    }
    Ok(PairwiseLipschitz {
        value,
        pairs,
        skipped: 0,
    })
}

/// `sup ||DT(x)||` (spectral norm) over the grid.
pub fn jacobian_opnorm_sup(map: &dyn TransportMap, grid: &[Vec<f64>]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    let norms = grid
        .par_iter()
        .map(|x| {
            let j = map.jacobian(x)?;
            if j.iter().any(|v| !v.is_finite()) {
                return Err(Error::OutOfDomain { point: x.clone() });
            }
            Ok(operator_norm(&j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Source nodes of an entropic map outside the boundary margin, with their
/// weights renormalized to a probability.
pub fn entropic_nodes(map: &BarycentricMap) -> Vec<(Vec<f64>, f64)> {
    let src = &map.coupling().source;
    let idx = map.interior_nodes();
    let total: f64 = idx.iter().map(|&i| src.weights[i]).sum();
    idx.iter()
        .map(|&i| (src.node(i).to_vec(), src.weights[i] / total))
        .collect()
}

/// `sup ||DT||` over the interior nodes of an entropic map.
pub fn entropic_jacobian_sup(map: &BarycentricMap) -> Result<f64> {
    let pts: Vec<Vec<f64>> = entropic_nodes(map).into_iter().map(|p| p.0).collect();
    jacobian_opnorm_sup(map, &pts)
}

/// Samples of `(Phi(x + t e) + Phi(x - t e) - 2 Phi(x)) / t^2`.
pub fn second_diff_quotient(
    map: &dyn TransportMap,
    e: &[f64],
    t: f64,
    grid: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if !map.has_potential() {
        return Err(Error::Unsupported(format!(
            "potential of a {} map",
            map.provenance().label()
        )));
    }
    if !(t > 0.0) || e.len() != map.dim() {
        return Err(invalid("need t > 0 and a direction of the map's dimension"));
    }
    grid.par_iter()
        .map(|x| {
            let plus: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + t * b).collect();
            let minus: Vec<f64> = x.iter().zip(e).map(|(a, b)| a - t * b).collect();
            let d = map.potential(&plus)? + map.potential(&minus)? - 2.0 * map.potential(x)?;
            Ok(d / (t * t))
        })
        .collect()
}

/// The contraction statement that applies to a pair, with its bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionClaim {
    pub theorem: &'static str,
    pub bound: f64,
}

/// Which contraction estimate the hypotheses support, audited on `points`:
/// `D^2 V <= C` and `D^2 W >= K` give `sqrt(C/K)`; a Gaussian source
/// `e^{-Q}` and a target `e^{-Q-P}` with `P` convex give 1. `None` when
/// neither applies. Model measures `nu_A -> nu_B` with `B >= A` give 1.
pub fn contraction_claim(
    source: &MeasureSpec,
    target: &MeasureSpec,
    points: &[Vec<f64>],
) -> Option<ContractionClaim> {
    // nu_B is the image of nu_A under an increasing contraction for B >= A
    if let (MeasureKind::ModelNu { a }, MeasureKind::ModelNu { a: b }) = (&source.kind, &target.kind) {
        return (b >= a).then_some(ContractionClaim {
            theorem: theorem::MODEL_IMAGE,
            bound: 1.0,
        });
    }
    let (v, w) = (source.potential()?, target.potential()?);
    if points.is_empty() || v.dim() != w.dim() {
        return None;
    }
    let scaling = match (v.directional_upper_bound, w.convexity_lower_bound) {
        (Some(c), Some(k)) if k > 0.0 => {
            let audited = points.iter().all(|x| {
                w.domain().contains(x)
                    && w.min_hessian_eigenvalue(x) >= k - AUDIT_SLACK
                    && v.hessian(x).symmetric_eigenvalues().max() <= c + AUDIT_SLACK
            });
            audited.then(|| ContractionClaim {
                theorem: theorem::CONTRACTION,
                bound: (c / k).sqrt(),
            })
        }
        _ => None,
    };
    if let Some(c) = scaling {
        if c.bound <= 1.0 {
            return Some(c);
        }
    }
    // e^{-Q} with Q quadratic: constant Hessian; then P = W - V convex
    let h0 = v.hessian(&points[0]);
    let anisotropic = points.iter().all(|x| {
        let hv = v.hessian(x);
        (&hv - &h0).amax() <= AUDIT_SLACK
            && w.domain().contains(x)
            && (w.hessian(x) - hv).symmetric_eigenvalues().min() >= -AUDIT_SLACK
    });
    if anisotropic {
        return Some(ContractionClaim {
            theorem: theorem::ANISOTROPIC_CONTRACTION,
            bound: 1.0,
        });
    }
    scaling
}

const AUDIT_SLACK: f64 = 1e-8;

/// `computed <= bound + tol` for a Lipschitz estimate; diagnostic when no
/// contraction statement covers the pair.
pub fn lipschitz_entry(
    name: impl Into<String>,
    computed: f64,
    claim: Option<ContractionClaim>,
    tol: f64,
    inputs: &str,
) -> CheckEntry {
    match claim {
        Some(c) => CheckEntry::compare_abs(name, c.theorem, computed, c.bound, Comparison::AtMost, tol)
            .with_inputs(inputs),
        None => CheckEntry::compare_abs(name, theorem::CONTRACTION, computed, 1.0, Comparison::AtMost, tol)
            .with_inputs(inputs)
            .with_status(Status::Diagnostic)
            .with_note("hypotheses of the contraction estimates not met: value reported only"),
    }
}

/// Decay of `delta_2 Phi` at infinity for a 1-D map, along `x_list`
/// (ordered by increasing `|x|`). Affine maps have constant quotients and are
/// outside the lemma's setting; a quotient still above `decay_tol` at the
/// end of the list is inconclusive, a growing tail is a failure.
pub fn incremental_decay_check(
    map: &MonotoneMap,
    t: f64,
    x_list: &[f64],
    decay_tol: f64,
) -> Result<CheckEntry> {
    if x_list.len() < 2 {
        return Err(invalid("decay check needs at least two points"));
    }
    let grid: Vec<Vec<f64>> = x_list.iter().map(|&x| vec![x]).collect();
    let q = second_diff_quotient(map, &[1.0], t, &grid)?;
    let last = q[q.len() - 1];
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmax = q.iter().position(|v| *v == max).unwrap_or(0);
    // quotients of a smooth potential carry roughly 1e-9 of noise
    let noise = 1e-9 * (1.0 + max.abs());
    let tail_decreasing = q[argmax..].windows(2).all(|w| w[1] <= w[0] + noise);
    let mut e = CheckEntry::compare_abs(
        format!("incremental_decay[{}->{},t={t}]", map.source_name(), map.target_name()),
        theorem::DECAY_LEMMA,
        last,
        decay_tol,
        Comparison::AtMost,
        0.0,
    )
    .with_inputs(&format!(
        "{}|{}|t={t}|x={x_list:?}",
        map.source_name(),
        map.target_name()
    ))
    .with_detail("max_quotient", max)
    .with_detail("argmax_x", x_list[argmax])
    .with_detail("tail_decreasing", if tail_decreasing { 1.0 } else { 0.0 });
    if max - min <= noise {
        e = e
            .with_status(Status::NotApplicable)
            .with_note("quotient constant along the list: affine map");
    } else if !tail_decreasing {
        e = e.with_status(Status::Fail).with_note("quotient grows beyond its maximum");
    } else if last > decay_tol {
        e = e
            .with_status(Status::Inconclusive)
            .with_note("decreasing, but still above the threshold at the end of the list");
    }
    Ok(e)
}

fn radii() -> Vec<f64> {
    (1..=40).map(|k| 0.05 * k as f64).collect()
}

/// Worst ratio `second_difference(p, x, y) / |y|^k` over points and the
/// offsets `r e` (r in (0, 2], e in `dirs`): the max if `upper`, else the
/// min.
fn modulus_ratio(
    p: &Potential,
    points: &[Vec<f64>],
    dirs: &[Vec<f64>],
    bound: &dyn Fn(f64) -> f64,
    upper: bool,
) -> Result<f64> {
    let mut worst = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
    for x in points {
        for e in dirs {
            for r in radii() {
                let y: Vec<f64> = e.iter().map(|v| r * v).collect();
                let ratio = match second_difference(p, x, &y) {
                    Ok(v) => v / bound(r),
                    Err(Error::OutOfDomain { .. }) => continue,
                    Err(err) => return Err(err),
                };
                worst = if upper { worst.max(ratio) } else { worst.min(ratio) };
            }
        }
    }
    if !worst.is_finite() {
        return Err(Error::EmptySamples);
    }
    Ok(worst)
}

/// Hölder estimate `delta_2 Phi <= 2 (A_p/A_q)^{1/(q+1)} t^{1+alpha}`,
/// `alpha = (p+1)/(q+1)`, after auditing `delta_2 V <= A_p |y|^{p+1}` and
/// `delta_2 W >= A_q |y|^{q+1}` on `audit_points`.
pub struct HolderInputs<'a> {
    pub source: &'a Potential,
    pub a_p: f64,
    pub p: f64,
    pub target: &'a Potential,
    pub a_q: f64,
    pub q: f64,
}

pub fn holder_modulus_check(
    map: &dyn TransportMap,
    h: &HolderInputs,
    t_list: &[f64],
    x_grid: &[Vec<f64>],
    audit_points: &[Vec<f64>],
    seed: u64,
) -> Result<CheckEntry> {
    if t_list.is_empty() || x_grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    let alpha = (h.p + 1.0) / (h.q + 1.0);
    let bound = 2.0 * (h.a_p / h.a_q).powf(1.0 / (h.q + 1.0));
    let name = format!("holder[p={},A_p={},q={},A_q={}]", h.p, h.a_p, h.q, h.a_q);
    let inputs = format!(
        "{}|{}|{name}|t={t_list:?}|n={}",
        h.source.name(),
        h.target.name(),
        x_grid.len()
    );
    let dirs = directions(map.dim(), seed);
    let v_ratio = modulus_ratio(h.source, audit_points, &dirs, &|r| h.a_p * r.powf(h.p + 1.0), true)?;
    let w_ratio = modulus_ratio(h.target, audit_points, &dirs, &|r| h.a_q * r.powf(h.q + 1.0), false)?;
    if v_ratio > 1.0 + MODULUS_AUDIT_TOL || w_ratio < 1.0 - MODULUS_AUDIT_TOL {
        return Ok(CheckEntry::compare(&name, theorem::HOLDER, f64::NAN, bound, Comparison::AtMost, 0.0)
            .with_status(Status::PreconditionFailed)
            .with_inputs(&inputs)
            .with_detail("source_modulus_ratio", v_ratio)
            .with_detail("target_modulus_ratio", w_ratio)
            .with_note("declared moduli fail the audit"));
    }
    let mut worst: f64 = 0.0;
    let mut at_t = t_list[0];
    for e in &dirs {
        for &t in t_list {
            let q = second_diff_quotient(map, e, t, x_grid)?;
            // q = delta_2 Phi / t^2
            let s = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * t * t / t.powf(1.0 + alpha);
            if s > worst {
                worst = s;
                at_t = t;
            }
        }
    }
    Ok(
        CheckEntry::compare(&name, theorem::HOLDER, worst, bound, Comparison::AtMost, 1e-9)
            .with_inputs(&inputs)
            .with_seed(seed)
            .with_detail("alpha", alpha)
            .with_detail("worst_t", at_t)
            .with_detail("source_modulus_ratio", v_ratio)
            .with_detail("target_modulus_ratio", w_ratio),
    )
}

/// `|T(x) - T(y)| <= 8 delta^{-1}(4 |x - y|^2)`, after auditing
/// `delta_2 V <= |y|^2` and `delta_2 W >= delta(|y|)` on `audit_points`.
#[allow(clippy::too_many_arguments)]
pub fn ms_modulus_check(
    map: &dyn TransportMap,
    source: &Potential,
    target: &Potential,
    delta: &Modulus,
    pairs: &[(Vec<f64>, Vec<f64>)],
    audit_points: &[Vec<f64>],
    seed: u64,
) -> Result<CheckEntry> {
    if pairs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let name = format!("ms_modulus[{:?}]", delta.terms);
    let inputs = format!(
        "{}|{}|{:?}|pairs={}",
        source.name(),
        target.name(),
        delta.terms,
        pairs.len()
    );
    let dirs = directions(map.dim(), seed);
    let v_ratio = modulus_ratio(source, audit_points, &dirs, &|r| r * r, true)?;
    let w_ratio = modulus_ratio(target, audit_points, &dirs, &|r| delta.eval(r), false)?;
    if !delta.is_strictly_increasing()
        || v_ratio > 1.0 + MODULUS_AUDIT_TOL
        || w_ratio < 1.0 - MODULUS_AUDIT_TOL
    {
        return Ok(
            CheckEntry::compare_abs(&name, theorem::MS_CONCENTRATION, f64::NAN, 0.0, Comparison::AtMost, 0.0)
                .with_status(Status::PreconditionFailed)
                .with_inputs(&inputs)
                .with_detail("source_modulus_ratio", v_ratio)
                .with_detail("target_modulus_ratio", w_ratio)
                .with_note("modulus audit failed or modulus not invertible"),
        );
    }
    let gaps = pairs
        .par_iter()
        .map(|(x, y)| {
            let d = dist(x, y);
            let lhs = dist(&map.forward(x)?, &map.forward(y)?);
            Ok((lhs - 8.0 * delta.inverse(4.0 * d * d)?, lhs, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = gaps.iter().cloned().fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| {
        if b.0 > a.0 {
            b
        } else {
            a
        }
    });
    Ok(
        CheckEntry::compare_abs(&name, theorem::MS_CONCENTRATION, worst.0, 0.0, Comparison::AtMost, 1e-12)
            .with_inputs(&inputs)
            .with_seed(seed)
            .with_detail("worst_lhs", worst.1)
            .with_detail("worst_distance", worst.2),
    )
}

/// Unit vectors over which the sup on the right-hand side is taken: both
/// signs in 1-D, 720 angles in 2-D, basis plus 2000 random directions above.
fn sphere_directions(d: usize, seed: u64) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..720)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / 720.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut out = directions(d, seed);
            let mut r = rng::stream(seed, "sphere");
            out.extend((0..2000).map(|_| rng::unit_vector(&mut r, d)));
            out
        }
    }
}

/// `|grad f(x + t h) - grad f(x)| <= (2/t) sup_v (f(x + 2tv) + f(x - 2tv) - 2 f(x))`
/// at each sample `(x, h)`. The sup is taken over a finite direction set,
/// which can only lower the right-hand side.
pub fn sodin_lemma_check(
    f: &Potential,
    t: f64,
    samples: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> Result<CheckEntry> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(t > 0.0) {
        return Err(invalid("t must be positive"));
    }
    let name = format!("sodin[{},t={t}]", f.name());
    let inputs = format!("{}|t={t}|n={}", f.name(), samples.len());
    let pts: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
    let audit = audit_convexity_with_tol(f, 0.0, &pts, 1e-9)?;
    if !audit.passed() {
        return Ok(
            CheckEntry::compare_abs(&name, theorem::SODIN, f64::NAN, 0.0, Comparison::AtMost, 0.0)
                .with_status(Status::PreconditionFailed)
                .with_inputs(&inputs)
                .with_detail("min_hessian_eigenvalue", audit.computed)
                .with_note("f is not convex on the samples"),
        );
    }
    let dirs = sphere_directions(f.dim(), seed);
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for (x, h) in samples {
        let xh: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + t * b).collect();
        let lhs = (f.gradient(&xh) - f.gradient(x)).norm();
        let mut sup: f64 = 0.0;
        for v in &dirs {
            let y: Vec<f64> = v.iter().map(|c| 2.0 * t * c).collect();
            sup = sup.max(second_difference(f, x, &y)?);
        }
        let rhs = 2.0 / t * sup;
        if lhs - rhs > worst.0 {
            worst = (lhs - rhs, lhs, rhs);
        }
    }
    let scale = 1e-12 * (1.0 + worst.1.abs() + worst.2.abs());
    Ok(
        CheckEntry::compare_abs(&name, theorem::SODIN, worst.0, 0.0, Comparison::AtMost, scale)
            .with_inputs(&inputs)
            .with_seed(seed)
            .with_detail("worst_lhs", worst.1)
            .with_detail("worst_rhs", worst.2),
    )
}

/// `(integral |g|^p dmu)^{1/p}` for a 1-D probability `mu` on `window`,
/// or the sup of `|g|` over a 4001-point grid when `p` is infinite.
const LP_PANEL: f64 = 0.05;
const SUP_TRUNCATION: f64 = 8.0;

fn lp_norm_1d<G: Fn(f64) -> Result<f64> + Sync>(
    g: G,
    mu: &MeasureSpec,
    window: (f64, f64),
    p: f64,
) -> Result<f64> {
    if p.is_infinite() {
        let (lo, hi) = window;
        let vals = (0..=4000)
            .into_par_iter()
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / 4000.0;
                if mu.density_1d(x) > 0.0 {
                    g(x).map(|v| v.abs())
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(vals.into_iter().fold(0.0, f64::max));
    }
    // Fixed composite rule: the integrand carries finite-difference noise
    // at the 1e-12 level, which stalls an adaptive scheme.
    let (lo, hi) = window;
    let panels = (((hi - lo) / LP_PANEL).ceil() as usize).max(1);
    let width = (hi - lo) / panels as f64;
    let parts = (0..panels)
        .into_par_iter()
        .map(|k| {
            let a = lo + width * k as f64;
            let failure = std::cell::RefCell::new(None);
            let v = gauss_legendre_10(
                |x| match g(x) {
                    Ok(v) => v.abs().powf(p) * mu.density_1d(x),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                },
                a,
                a + width,
            );
            failure.into_inner().map_or(Ok(v), Err)
        })
        .collect::<Result<Vec<_>>>()?;
    let v: f64 = parts.into_iter().sum();
    Ok(v.powf(1.0 / p))
}

/// Both L^p bounds for a 1-D map from `source = e^{-V}` to a target with
/// `W'' >= k`: `k ||(T')^2||_p <= ||(V'')_+||_p` and, for finite `p`,
/// `k ||(T')^2||_p <= (p+1)/2 ||(V')^2||_p`. Infinite `p` is allowed.
pub fn lp_norm_check(
    map: &dyn TransportMap,
    source: &MeasureSpec,
    k: f64,
    p_list: &[f64],
) -> Result<Vec<CheckEntry>> {
    if map.dim() != 1 || source.dim() != 1 {
        return Err(Error::Unsupported("L^p check in dimension > 1".into()));
    }
    let v = source
        .potential()
        .ok_or_else(|| invalid("L^p check needs a source density e^{-V}"))?;
    if !(k > 0.0) {
        return Err(invalid("convexity constant must be positive"));
    }
    let (mlo, mhi) = map.domain()[0];
    let sb = source.truncated_box(crate::transport1d::CDF_TRUNCATION)[0];
    let window = (mlo.max(sb.0), mhi.min(sb.1));
    // The essential sup ignores the far tail, where the truncated tables
    // send the last sliver of source mass across the empty target tail.
    let eb = source.truncated_box(SUP_TRUNCATION)[0];
    let sup_window = (mlo.max(eb.0), mhi.min(eb.1));
    let phi_ee_sq = |x: f64| -> Result<f64> {
        let d = map.jacobian(&[x])?[(0, 0)];
        Ok(d * d)
    };
    let v_ee = |x: f64| Ok(v.hessian(&[x])[(0, 0)].max(0.0));
    let v_e_sq = |x: f64| Ok(v.gradient(&[x])[0].powi(2));
    let mut out = Vec::new();
    for &p in p_list {
        if !(p >= 1.0) {
            return Err(invalid(format!("L^p exponent {p} below 1")));
        }
        let w = if p.is_infinite() { sup_window } else { window };
        let lhs = k * lp_norm_1d(phi_ee_sq, source, w, p)?;
        let rhs = lp_norm_1d(v_ee, source, w, p)?;
        let tag = if p.is_infinite() { "inf".to_string() } else { format!("{p}") };
        let inputs = format!("{}|{}|K={k}|p={tag}", source.name, v.name());
        out.push(
            CheckEntry::compare(
                format!("lp_hessian[p={tag}]"),
                theorem::LP_ESTIMATE,
                lhs,
                rhs,
                Comparison::AtMost,
                1e-8,
            )
            .with_inputs(&inputs),
        );
        if p.is_finite() {
            let rhs2 = 0.5 * (p + 1.0) * lp_norm_1d(v_e_sq, source, window, p)?;
            out.push(
                CheckEntry::compare(
                    format!("lp_gradient[p={tag}]"),
                    theorem::LP_ESTIMATE,
                    lhs,
                    rhs2,
                    Comparison::AtMost,
                    1e-8,
                )
                .with_inputs(&inputs),
            );
        }
    }
    Ok(out)
}

/// Largest eigenvalue of `(A)_+` for a symmetric `A`.
fn positive_part_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].max(0.0);
    }
    a.clone().symmetric_eigenvalues().max().max(0.0)
}

/// `k (sum w ||DT||^{2r})^{1/r} <= (sum w ||(D^2 V)_+||^r)^{1/r}` over the
/// weighted nodes, each `r` in `r_list`, with relative slack `budget`.
pub fn operator_norm_lp_check(
    map: &dyn TransportMap,
    v: &Potential,
    k: f64,
    r_list: &[f64],
    nodes: &[(Vec<f64>, f64)],
    budget: f64,
) -> Result<Vec<CheckEntry>> {
    if nodes.is_empty() {
        return Err(Error::EmptySamples);
    }
    if r_list.iter().any(|r| !(*r >= 1.0)) || !(k > 0.0) {
        return Err(invalid("need r >= 1 and k > 0"));
    }
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    let norms = nodes
        .par_iter()
        .map(|(x, w)| {
            let j = map.jacobian(x)?;
            Ok((operator_norm(&j), positive_part_norm(&v.hessian(x)), w / total))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(r_list
        .iter()
        .map(|&r| {
            let lhs = k * norms.iter().map(|(j, _, w)| w * j.powf(2.0 * r)).sum::<f64>().powf(1.0 / r);
            let rhs = norms.iter().map(|(_, h, w)| w * h.powf(r)).sum::<f64>().powf(1.0 / r);
            CheckEntry::compare(
                format!("lp_operator_norm[r={r}]"),
                theorem::LP_OPERATOR,
                lhs,
                rhs,
                Comparison::AtMost,
                budget,
            )
            .with_inputs(&format!(
                "{}|{}|K={k}|r={r}|n={}",
                map.provenance().label(),
                v.name(),
                nodes.len()
            ))
        })
        .collect())
}

/// Lipschitz constants of the entropic maps `gamma -> uniform(s K)` for
/// each `s` (the scale 1 run is added if missing) compared with
/// `s * lip(K)`: one entry per `s`, passing when the ratio is within
/// `rel_tol` of `s`.
pub fn body_scaling_check(
    body: &ConvexBody,
    s_list: &[f64],
    base: &EntropicConfig,
    rel_tol: f64,
) -> Result<Vec<CheckEntry>> {
    if body.dim() != 2 || !body.symmetric() {
        return Err(invalid("scaling check needs a symmetric planar body"));
    }
    if s_list.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("scales must be positive"));
    }
    let source = crate::measures::make_standard_gaussian(2)?;
    let lip_at = |s: f64| -> Result<f64> {
        let b = body.scaled(s)?;
        let bb = b.bounding_box();
        let mut cfg = base.clone();
        cfg.target_box = [bb[0], bb[1]];
        let (map, _) = solve_entropic(&source, &make_uniform(b)?, &cfg)?;
        Ok(entropic_lipschitz(&map)?.value)
    };
    let mut scales: Vec<f64> = s_list.to_vec();
    if !scales.contains(&1.0) {
        scales.push(1.0);
    }
    let lips = scales.iter().map(|&s| lip_at(s)).collect::<Result<Vec<_>>>()?;
    let reference = lips[scales.iter().position(|s| *s == 1.0).unwrap()];
    Ok(s_list
        .iter()
        .map(|&s| {
            let lip = lips[scales.iter().position(|v| *v == s).unwrap()];
            CheckEntry::compare(
                format!("body_scaling[{},s={s}]", body.label()),
                theorem::SET_IMAGE,
                lip / reference,
                s,
                Comparison::Near,
                rel_tol * s,
            )
            .with_inputs(&format!("{}|s={s}|n={}|eps={}", body.label(), base.grid_n, base.eps_end))
            .with_detail("lipschitz", lip)
            .with_detail("lipschitz_unit", reference)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::LinearMap;
    use crate::measures::{add_potentials, make_density, make_gaussian, make_model_nu, make_quartic, make_standard_gaussian};
    use crate::radial::RadialMap;
    use crate::measures::ScalarProfile;
    use crate::transport1d::monotone_map;

    fn line(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64]).collect()
    }

    fn quartic_map() -> MonotoneMap {
        monotone_map(&make_standard_gaussian(1).unwrap(), &make_quartic(1, 0.25).unwrap()).unwrap()
    }

    #[test]
    fn contraction_claims() {
        let g = make_standard_gaussian(1).unwrap();
        let pts = line(-4.0, 4.0, 81);
        let c = contraction_claim(&g, &make_gaussian(1, 0.5).unwrap(), &pts).unwrap();
        assert_eq!((c.theorem, c.bound), (theorem::CONTRACTION, 0.5));
        let c = contraction_claim(&g, &make_quartic(1, 1.0).unwrap(), &pts).unwrap();
        assert_eq!((c.theorem, c.bound), (theorem::CONTRACTION, 1.0));
        let q = crate::measures::parse_spec("family = anisotropic\nprecision = 1, 4\n").unwrap();
        let t = crate::measures::parse_spec(
            "family = anisotropic\nprecision = 1, 4\nradial_quartic = 0.125\n",
        )
        .unwrap();
        let grid = crate::measures::audit_grid(&[(-3.0, 3.0), (-3.0, 3.0)], 13);
        let c = contraction_claim(&q, &t, &grid).unwrap();
        assert_eq!((c.theorem, c.bound), (theorem::ANISOTROPIC_CONTRACTION, 1.0));
        assert!(contraction_claim(&make_quartic(1, 1.0).unwrap(), &g, &pts).is_none());
        let (n1, n2) = (make_model_nu(1.0).unwrap(), make_model_nu(2.0).unwrap());
        assert_eq!(contraction_claim(&n1, &n2, &[]).unwrap().theorem, theorem::MODEL_IMAGE);
        assert!(contraction_claim(&n2, &n1, &[]).is_none());
        let e = lipschitz_entry("x", 1.5, None, 0.0, "");
        assert_eq!(e.status, Status::Diagnostic);
    }

    #[test]
    fn lipschitz_of_linear_maps() {
        let id = LinearMap::identity(2);
        let pairs = PairSampler::Uniform(vec![(-1.0, 1.0); 2]).sample(100, 1);
        assert!((lipschitz_pairwise(&id, &pairs).unwrap().value - 1.0).abs() < 1e-15);
        let half = LinearMap::scaling(&[0.5]);
        let pairs = PairSampler::Uniform(vec![(-1.0, 1.0)]).sample(100, 1);
        assert!((lipschitz_pairwise(&half, &pairs).unwrap().value - 0.5).abs() < 1e-15);
        let dup = vec![(vec![0.0], vec![0.0]), (vec![0.0], vec![1.0])];
        let est = lipschitz_pairwise(&half, &dup).unwrap();
        assert_eq!((est.pairs, est.skipped), (1, 1));
        let grid = crate::measures::audit_grid(&[(-1.0, 1.0), (-1.0, 1.0)], 5);
        let m = LinearMap::scaling(&[0.5, 0.8]);
        assert!((jacobian_opnorm_sup(&m, &grid).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn radial_unit_profile_has_unit_jacobian() {
        let m = RadialMap::new(ScalarProfile::constant(1.0), 2, 4.0, 400).unwrap();
        let grid = crate::measures::audit_grid(&[(-2.0, 2.0), (-2.0, 2.0)], 9);
        assert!((jacobian_opnorm_sup(&m, &grid).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pairs_are_nested() {
        let s = PairSampler::Local {
            window: vec![(-3.0, 3.0)],
            radius: 0.1,
        };
        let small = s.sample(50, 9);
        let big = s.sample(500, 9);
        assert_eq!(&big[..50], &small[..]);
        let m = quartic_map();
        let a = lipschitz_pairwise(&m, &small).unwrap().value;
        let b = lipschitz_pairwise(&m, &big).unwrap().value;
        assert!(b >= a);
    }

    #[test]
    fn quartic_pairwise_below_jacobian_sup() {
        let m = quartic_map();
        let pairs = PairSampler::Local {
            window: vec![(-8.0, 8.0)],
            radius: 0.5,
        }
        .sample(20_000, 3);
        let lip = lipschitz_pairwise(&m, &pairs).unwrap().value;
        let jac = jacobian_opnorm_sup(&m, &line(-8.0, 8.0, 4001)).unwrap();
        assert!(lip <= jac + 1e-6, "{lip} vs {jac}");
        assert!(jac <= 1.0 + 1e-6);
        assert!(lip > 0.9 * jac);
    }

    #[test]
    fn second_difference_quotients() {
        let id = LinearMap::identity(1);
        for q in second_diff_quotient(&id, &[1.0], 0.3, &line(-2.0, 2.0, 9)).unwrap() {
            assert!((q - 1.0).abs() < 1e-12);
        }
        let half = LinearMap::scaling(&[0.5]);
        for q in second_diff_quotient(&half, &[1.0], 0.3, &line(-2.0, 2.0, 9)).unwrap() {
            assert!((q - 0.5).abs() < 1e-12);
        }
        let m = quartic_map();
        let grid = line(-4.0, 4.0, 401);
        let q = second_diff_quotient(&m, &[1.0], 1e-2, &grid).unwrap();
        let sup_q = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sup_t = jacobian_opnorm_sup(&m, &grid).unwrap();
        assert!((sup_q - sup_t).abs() < 1e-3, "{sup_q} vs {sup_t}");
    }

    #[test]
    fn decay_lemma_examples() {
        let xs: Vec<f64> = (0..=16).map(|k| 0.5 * k as f64).collect();
        let g = make_standard_gaussian(1).unwrap();
        let lin = monotone_map(&g, &make_gaussian(1, 0.5).unwrap()).unwrap();
        let e = incremental_decay_check(&lin, 0.5, &xs, DECAY_TOL).unwrap();
        assert_eq!(e.status, Status::NotApplicable);
        let unif = crate::measures::make_uniform(ConvexBody::cube(1.0, 1).unwrap()).unwrap();
        let u = monotone_map(&g, &unif).unwrap();
        let e = incremental_decay_check(&u, 0.5, &xs, DECAY_TOL).unwrap();
        assert_eq!(e.status, Status::Pass, "{e:?}");
        let q = quartic_map();
        let tail: Vec<f64> = (0..=10).map(|k| 3.0 + 0.5 * k as f64).collect();
        let e = incremental_decay_check(&q, 0.5, &tail, DECAY_TOL).unwrap();
        assert_eq!(e.details["tail_decreasing"], 1.0);
        assert_ne!(e.status, Status::Fail);
    }

    #[test]
    fn holder_examples() {
        let v = crate::measures::Potential::gaussian(1, 1.0).unwrap();
        let audit = line(-3.0, 3.0, 31);
        let grid = line(-4.0, 4.0, 161);
        let id = LinearMap::identity(1);
        let h = HolderInputs {
            source: &v,
            a_p: 1.0,
            p: 1.0,
            target: &v,
            a_q: 1.0,
            q: 1.0,
        };
        let e = holder_modulus_check(&id, &h, &[0.1, 0.5, 1.0], &grid, &audit, 1).unwrap();
        assert!(e.passed());
        assert!((e.computed - 1.0).abs() < 1e-9 && (e.bound - 2.0).abs() < 1e-15);
        let w = crate::measures::Potential::coord_quartic(vec![1.0]).unwrap();
        let target = make_density(w.clone(), 1.0).unwrap();
        let m = monotone_map(&make_standard_gaussian(1).unwrap(), &target).unwrap();
        let h = HolderInputs {
            source: &v,
            a_p: 1.0,
            p: 1.0,
            target: target.potential().unwrap(),
            a_q: 2.0,
            q: 3.0,
        };
        let e = holder_modulus_check(&m, &h, &[0.1, 0.5, 1.0], &grid, &audit, 1).unwrap();
        assert!(e.passed(), "{e:?}");
        assert!((e.bound - 2.0 * 0.5f64.powf(0.25)).abs() < 1e-12);
        // claiming A_q = 3 breaks the audit at x = 0
        let h = HolderInputs { a_q: 3.0, ..h };
        let e = holder_modulus_check(&m, &h, &[0.1], &grid, &audit, 1).unwrap();
        assert_eq!(e.status, Status::PreconditionFailed);
    }

    #[test]
    fn ms_modulus_examples() {
        let v = crate::measures::Potential::gaussian(1, 1.0).unwrap();
        let audit = line(-3.0, 3.0, 31);
        let pairs = PairSampler::Uniform(vec![(-4.0, 4.0)]).sample(2000, 5);
        let sq = Modulus::power(1.0, 2);
        let e = ms_modulus_check(&LinearMap::identity(1), &v, &v, &sq, &pairs, &audit, 5).unwrap();
        assert!(e.passed());
        let w = add_potentials(&v, &crate::measures::Potential::coord_quartic(vec![1.0]).unwrap()).unwrap();
        let target = make_density(w, 1.0).unwrap();
        let m = monotone_map(&make_standard_gaussian(1).unwrap(), &target).unwrap();
        let e = ms_modulus_check(&m, &v, target.potential().unwrap(), &sq, &pairs, &audit, 5).unwrap();
        assert!(e.passed());
        assert!(e.computed < 0.0 && e.details["worst_lhs"] < 16.0 * e.details["worst_distance"]);
        let big = Modulus::power(5.0, 2);
        let e = ms_modulus_check(&m, &v, target.potential().unwrap(), &big, &pairs, &audit, 5).unwrap();
        assert_eq!(e.status, Status::PreconditionFailed);
    }

    #[test]
    fn sodin_examples() {
        let quad = crate::measures::Potential::quadratic(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let e = sodin_lemma_check(&quad, 0.5, &[(vec![0.3], vec![1.0])], 1).unwrap();
        assert!((e.details["worst_lhs"] - 0.5).abs() < 1e-15);
        assert!((e.details["worst_rhs"] - 4.0).abs() < 1e-12);
        let x4 = crate::measures::Potential::coord_quartic(vec![1.0]).unwrap();
        let e = sodin_lemma_check(&x4, 0.5, &[(vec![1.0], vec![1.0])], 1).unwrap();
        assert!((e.details["worst_lhs"] - 9.5).abs() < 1e-12);
        assert!((e.details["worst_rhs"] - 56.0).abs() < 1e-12);
        assert!(e.passed());
        let aff = crate::measures::Potential::linear(vec![1.0, -2.0]).unwrap();
        let e = sodin_lemma_check(&aff, 0.5, &[(vec![0.1, 0.2], vec![0.6, 0.8])], 1).unwrap();
        assert!(e.passed() && e.details["worst_lhs"] == 0.0);
    }

    #[test]
    fn lp_sharpness_and_quartic_slack() {
        let g = make_standard_gaussian(1).unwrap();
        let m = monotone_map(&g, &make_gaussian(1, 0.5).unwrap()).unwrap();
        let ps = [1.0, 2.0, 4.0, f64::INFINITY];
        let es = lp_norm_check(&m, &g, 4.0, &ps).unwrap();
        assert_eq!(es.len(), 7);
        for e in es.iter().filter(|e| e.name.starts_with("lp_hessian")) {
            assert!((e.computed - 1.0).abs() < 1e-9 && (e.bound - 1.0).abs() < 1e-9, "{e:?}");
        }
        let p1 = es.iter().find(|e| e.name == "lp_gradient[p=1]").unwrap();
        assert!((p1.bound - 1.0).abs() < 1e-9);
        let q = quartic_map();
        for e in lp_norm_check(&q, &g, 1.0, &ps).unwrap() {
            assert!(e.passed() && e.computed < e.bound, "{e:?}");
        }
    }

    #[test]
    fn operator_norm_closed_form() {
        let v = crate::measures::Potential::gaussian(2, 1.0).unwrap();
        let gh = crate::quadrature::GaussHermite::new(20).unwrap();
        let mut nodes = Vec::new();
        for (a, wa) in gh.nodes.iter().zip(&gh.weights) {
            for (b, wb) in gh.nodes.iter().zip(&gh.weights) {
                nodes.push((vec![*a, *b], wa * wb));
            }
        }
        let half = LinearMap::scaling(&[0.5, 0.5]);
        for e in operator_norm_lp_check(&half, &v, 4.0, &[1.0, 2.0], &nodes, 1e-12).unwrap() {
            assert!((e.computed - 1.0).abs() < 1e-12 && (e.bound - 1.0).abs() < 1e-12);
            assert!(e.passed());
        }
        let id = LinearMap::identity(2);
        let e = &operator_norm_lp_check(&id, &v, 1.0, &[1.0], &nodes, 1e-12).unwrap()[0];
        assert!(e.passed() && (e.computed - 1.0).abs() < 1e-12);
    }
}
