//! The common interface of every constructed transport map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Monotone1d,
    Radial,
    Entropic,
    Heatflow,
    Linear,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Monotone1d => "monotone1d",
            Provenance::Radial => "radial",
            Provenance::Entropic => "entropic",
            Provenance::Heatflow => "heatflow",
            Provenance::Linear => "linear",
        }
    }
}

/// An evaluable map `T` with Jacobian access; inverse and convex potential
/// (`grad Phi = T`) where the construction provides them.
pub trait TransportMap: Send + Sync {
    fn dim(&self) -> usize;

    fn provenance(&self) -> Provenance;

    /// Box on which the map may be evaluated.
    fn domain(&self) -> Vec<(f64, f64)>;

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>;

    fn inverse(&self, _y: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Unsupported(format!(
            "inverse of a {} map",
            self.provenance().label()
        )))
    }

    /// Convex potential `Phi` with `grad Phi = T`, up to an additive constant.
    fn potential(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::Unsupported(format!(
            "potential of a {} map",
            self.provenance().label()
        )))
    }

    fn has_potential(&self) -> bool {
        false
    }

    /// Margin (in node spacings) excluded from grid statistics.
    fn boundary_margin(&self) -> usize {
        0
    }
}

/// `x -> A x + b`, with `Phi(x) = x^T A x / 2 + <b, x>` when `A` is
/// symmetric.
#[derive(Clone, Debug)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
    domain: Vec<(f64, f64)>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(invalid("linear map needs a square matrix and matching offset"));
        }
        let d = matrix.nrows();
        Ok(LinearMap {
            matrix,
            offset,
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY); d],
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::scaling(&vec![1.0; d])
    }

    pub fn scaling(diag: &[f64]) -> Self {
        let d = diag.len();
        LinearMap {
            matrix: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            offset: DVector::zeros(d),
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY); d],
        }
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Self {
        self.domain = domain;
        self
    }
}

impl TransportMap for LinearMap {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Linear
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = &self.matrix * DVector::from_column_slice(x) + &self.offset;
        Ok(y.iter().copied().collect())
    }

    fn jacobian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }

    fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let lu = self.matrix.clone().lu();
        let rhs = DVector::from_column_slice(y) - &self.offset;
        lu.solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or(Error::NotInvertible(0.0))
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        let v = DVector::from_column_slice(x);
        Ok(0.5 * v.dot(&(&self.matrix * &v)) + self.offset.dot(&v))
    }

    fn has_potential(&self) -> bool {
        (&self.matrix - self.matrix.transpose()).amax() == 0.0
    }
}

/// Spectral norm of a small matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().singular_values().max()
}

/// Samples `(x, T(x), T'(x))` on a 1-D grid as CSV.
pub fn export_1d_csv(map: &dyn TransportMap, grid: &[f64]) -> Result<String> {
    if map.dim() != 1 {
        return Err(invalid("1-D export needs a 1-D map"));
    }
    let mut out = String::from("x,T,dT\n");
    for &x in grid {
        let t = map.forward(&[x])?[0];
        let dt = map.jacobian(&[x])?[(0, 0)];
        let _ = writeln!(out, "{x:e},{t:e},{dt:e}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_basics() {
        let m = LinearMap::scaling(&[0.5, 0.8]);
        assert_eq!(m.forward(&[2.0, 1.0]).unwrap(), vec![1.0, 0.8]);
        assert_eq!(m.inverse(&[1.0, 0.8]).unwrap(), vec![2.0, 1.0]);
        assert!((operator_norm(&m.jacobian(&[0.0, 0.0]).unwrap()) - 0.8).abs() < 1e-15);
        assert!(m.has_potential());
        assert_eq!(m.potential(&[2.0, 0.0]).unwrap(), 1.0);
    }
}
