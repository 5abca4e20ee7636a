use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Centrally symmetric convex sets used as supports and as test sets.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexBody {
    /// `[-h, h]^d`
    Cube { halfwidth: f64, dim: usize },
    /// `sum (x_i / a_i)^2 <= 1`
    Ellipsoid { semi_axes: Vec<f64> },
    /// `|x_axis| <= h`, unbounded in the other coordinates.
    Strip { halfwidth: f64, axis: usize, dim: usize },
    WholeSpace { dim: usize },
}

impl ConvexBody {
    pub fn square(halfwidth: f64) -> Result<Self> {
        Self::cube(halfwidth, 2)
    }

    pub fn cube(halfwidth: f64, dim: usize) -> Result<Self> {
        if !(halfwidth > 0.0) || dim == 0 {
            return Err(invalid("cube needs positive halfwidth and dim >= 1"));
        }
        Ok(ConvexBody::Cube { halfwidth, dim })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::ball(radius, 2)
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        Self::ellipsoid(vec![radius; dim])
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.is_empty() || semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("ellipsoid needs positive semi-axes"));
        }
        Ok(ConvexBody::Ellipsoid { semi_axes })
    }

    pub fn strip(halfwidth: f64, axis: usize, dim: usize) -> Result<Self> {
        if !(halfwidth > 0.0) || axis >= dim {
            return Err(invalid("strip needs positive halfwidth and axis < dim"));
        }
        Ok(ConvexBody::Strip {
            halfwidth,
            axis,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Cube { dim, .. }
            | ConvexBody::Strip { dim, .. }
            | ConvexBody::WholeSpace { dim } => *dim,
            ConvexBody::Ellipsoid { semi_axes } => semi_axes.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ConvexBody::Cube { halfwidth, .. } => x.iter().all(|v| v.abs() <= *halfwidth),
            ConvexBody::Ellipsoid { semi_axes } => {
                x.iter().zip(semi_axes).map(|(v, a)| (v / a).powi(2)).sum::<f64>() <= 1.0
            }
            ConvexBody::Strip {
                halfwidth, axis, ..
            } => x[*axis].abs() <= *halfwidth,
            ConvexBody::WholeSpace { .. } => true,
        }
    }

    /// Minkowski gauge: the least `s >= 0` with `x` in `s K`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        match self {
            ConvexBody::Cube { halfwidth, .. } => {
                x.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / halfwidth
            }
            ConvexBody::Ellipsoid { semi_axes } => x
                .iter()
                .zip(semi_axes)
                .map(|(v, a)| (v / a).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexBody::Strip {
                halfwidth, axis, ..
            } => x[*axis].abs() / halfwidth,
            ConvexBody::WholeSpace { .. } => 0.0,
        }
    }

    /// Distance from the origin to the boundary along the unit vector `dir`.
    pub fn radial_function(&self, dir: &[f64]) -> f64 {
        match self {
            ConvexBody::Cube { halfwidth, .. } => dir
                .iter()
                .map(|u| halfwidth / u.abs())
                .fold(f64::INFINITY, f64::min),
            ConvexBody::Ellipsoid { semi_axes } => {
                1.0 / dir
                    .iter()
                    .zip(semi_axes)
                    .map(|(u, a)| (u / a).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
            ConvexBody::Strip {
                halfwidth, axis, ..
            } => halfwidth / dir[*axis].abs(),
            ConvexBody::WholeSpace { .. } => f64::INFINITY,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ConvexBody::Cube { halfwidth, dim } => 2.0 * halfwidth * (*dim as f64).sqrt(),
            ConvexBody::Ellipsoid { semi_axes } => {
                2.0 * semi_axes.iter().cloned().fold(0.0, f64::max)
            }
            ConvexBody::Strip { .. } | ConvexBody::WholeSpace { .. } => f64::INFINITY,
        }
    }

    pub fn symmetric(&self) -> bool {
        true
    }

    pub fn volume(&self) -> Option<f64> {
        match self {
            ConvexBody::Cube { halfwidth, dim } => Some((2.0 * halfwidth).powi(*dim as i32)),
            ConvexBody::Ellipsoid { semi_axes } => {
                let d = semi_axes.len() as f64;
                let unit = PI.powf(d / 2.0) / gamma_half_integer(semi_axes.len() + 2);
                Some(unit * semi_axes.iter().product::<f64>())
            }
            _ => None,
        }
    }

    /// Image of the body under `x -> s x`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        Ok(match self {
            ConvexBody::Cube { halfwidth, dim } => ConvexBody::Cube {
                halfwidth: halfwidth * s,
                dim: *dim,
            },
            ConvexBody::Ellipsoid { semi_axes } => ConvexBody::Ellipsoid {
                semi_axes: semi_axes.iter().map(|a| a * s).collect(),
            },
            ConvexBody::Strip {
                halfwidth,
                axis,
                dim,
            } => ConvexBody::Strip {
                halfwidth: halfwidth * s,
                axis: *axis,
                dim: *dim,
            },
            ConvexBody::WholeSpace { dim } => ConvexBody::WholeSpace { dim: *dim },
        })
    }

    /// Smallest axis-aligned box containing the body (unbounded sides are
    /// infinite).
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            ConvexBody::Cube { halfwidth, dim } => vec![(-halfwidth, *halfwidth); *dim],
            ConvexBody::Ellipsoid { semi_axes } => semi_axes.iter().map(|a| (-a, *a)).collect(),
            ConvexBody::Strip {
                halfwidth,
                axis,
                dim,
            } => (0..*dim)
                .map(|i| {
                    if i == *axis {
                        (-halfwidth, *halfwidth)
                    } else {
                        (f64::NEG_INFINITY, f64::INFINITY)
                    }
                })
                .collect(),
            ConvexBody::WholeSpace { dim } => vec![(f64::NEG_INFINITY, f64::INFINITY); *dim],
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConvexBody::Cube { halfwidth, dim } => format!("cube(h={halfwidth},d={dim})"),
            ConvexBody::Ellipsoid { semi_axes } => format!("ellipsoid{semi_axes:?}"),
            ConvexBody::Strip {
                halfwidth, axis, ..
            } => format!("strip(|x{}|<={halfwidth})", axis + 1),
            ConvexBody::WholeSpace { dim } => format!("R^{dim}"),
        }
    }
}

// Gamma(k/2) for integer k >= 1.
fn gamma_half_integer(k: usize) -> f64 {
    match k {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn membership_matches_radial_function() {
        let bodies = [
            ConvexBody::square(1.0).unwrap(),
            ConvexBody::disk(0.7).unwrap(),
            ConvexBody::ellipsoid(vec![2.0, 0.5]).unwrap(),
            ConvexBody::strip(1.0, 0, 2).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for body in &bodies {
            for _ in 0..500 {
                let x: [f64; 2] = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let dir = [x[0] / r, x[1] / r];
                let radial = body.radial_function(&dir);
                // skip points too close to the boundary for the comparison
                if (r - radial).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(body.contains(&x), r <= radial, "{body:?} at {x:?}");
            }
        }
    }

    #[test]
    fn midpoint_convexity_spot_check() {
        let body = ConvexBody::ellipsoid(vec![1.5, 0.25]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut members = Vec::new();
        while members.len() < 200 {
            let x: [f64; 2] = [rng.random_range(-1.5..1.5), rng.random_range(-0.25..0.25)];
            if body.contains(&x) {
                members.push(x);
            }
        }
        for pair in members.chunks(2) {
            let mid = [
                0.5 * (pair[0][0] + pair[1][0]),
                0.5 * (pair[0][1] + pair[1][1]),
            ];
            assert!(body.contains(&mid));
        }
    }

    #[test]
    fn volumes_and_scaling() {
        assert_eq!(ConvexBody::square(1.0).unwrap().volume(), Some(4.0));
        let disk = ConvexBody::disk(1.0).unwrap();
        assert!((disk.volume().unwrap() - PI).abs() < 1e-14);
        let big = disk.scaled(2.0).unwrap();
        assert!((big.volume().unwrap() - 4.0 * PI).abs() < 1e-13);
        assert_eq!(big.diameter(), 4.0);
        assert!(ConvexBody::strip(1.0, 0, 2).unwrap().volume().is_none());
        let ball3 = ConvexBody::ball(1.0, 3).unwrap();
        assert!((ball3.volume().unwrap() - 4.0 * PI / 3.0).abs() < 1e-13);
    }
}
