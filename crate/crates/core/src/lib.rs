//! Transport maps between log-concave (and some infinite) measures, built by
//! four independent routes, plus numerical certification of the contraction,
//! Lipschitz, Hölder and L^p estimates they satisfy.
//!
//! | module | route / role |
//! |--------|--------------|
//! | [`transport1d`] | exact monotone map by CDF inversion (the 1-D oracle) |
//! | [`radial`] | exact radial map from Lebesgue measure to `Psi(r) dx` |
//! | [`grid_ot`] | entropic OT on 2-D grids, barycentric map |
//! | [`heatflow`] | Ornstein–Uhlenbeck heat-flow transport |
//! | [`verify`] | Lipschitz / second-difference / L^p certification |
//! | [`inequalities`] | Monte Carlo and quadrature checks of Gaussian inequalities |

// `!(x > 0.0)` is the NaN-rejecting form used throughout for argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid_ot;
pub mod heatflow;
pub mod inequalities;
pub mod interp;
pub mod map;
pub mod measures;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod rng;
pub mod roots;
pub mod transport1d;
pub mod verify;

pub use error::{Error, Result};
