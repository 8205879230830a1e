//! Verification engine for the geometry of foliations under adiabatic limits:
//! exact frame models, spectral torus models, Clifford modules, the sub-Dirac
//! operator with its Lichnerowicz identity, and Chern–Weil forms.

pub mod almost;
pub mod chern_weil;
pub mod clifford;
pub mod eigen;
pub mod exact;
pub mod frame;
pub mod grid;
pub mod model_io;
pub mod random_models;
pub mod report;
pub mod spectral;
pub mod subdirac;
pub mod trig;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("denominator vanishes at t = {0}")]
    Pole(String),
    #[error("antisymmetry violated by bracket ({i}, {j}, {k})")]
    Antisymmetry { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails on triple ({i}, {j}, {k})")]
    Jacobi { i: usize, j: usize, k: usize },
    #[error("leaf distribution not closed: [e{i}, e{j}] has a component along e{k}")]
    NonIntegrable { i: usize, j: usize, k: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("limit diverges at entry {entry} with pole order {pole_order}")]
    DivergentLimit { entry: String, pole_order: usize },
    #[error("metric block not positive definite at grid point {point:?}")]
    NonSpd { point: Vec<usize> },
    #[error("resolution {n} too coarse for bandwidth {bandwidth}: need N >= 4*bandwidth + 1")]
    Aliasing { n: usize, bandwidth: usize },
    #[error("unsupported dimension: {0}")]
    Dimension(String),
    #[error("{0}")]
    Precondition(String),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
