//! Simulation laboratory for sparse signal recovery over fading
//! multiple-access channels.
//!
//! Sensors scale their readings by a sparse Gaussian projection, the
//! coherent sum passes through independent Rayleigh fading, and the fusion
//! centre recovers the sparse reading vector by `l1` minimization. The crate
//! covers the generative model ([`model`]), the distributional and
//! concentration tools for the resulting sub-exponential matrix ([`stats`]),
//! measurement-count formulas ([`bounds`]), transmission-probability and
//! energy design ([`design`]), recovery engines ([`solver`]) and a seeded
//! Monte Carlo runner ([`harness`]).
//!
//! All numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! harness and the command-line tool use.

pub mod bounds;
pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod seed;
pub mod solver;
pub mod stats;

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating point scalar used throughout the numerical modules.
///
/// Implemented for `f32` and `f64`. Elementary functions come from
/// [`RealField`]; conversions from literals go through `num_traits`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every finite `f64` maps to some value of
    /// the supported types, so this never fails for them.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion from f64")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion from usize")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type SparseSignal = model::SparseSignal<f64>;
pub type NetworkConfig = model::NetworkConfig<f64>;
pub type MeasurementEnsemble = model::MeasurementEnsemble<f64>;
pub type MixtureLaw = stats::MixtureLaw<f64>;
pub type EnsembleExtremes = stats::EnsembleExtremes<f64>;
pub type BoundInputs = bounds::BoundInputs<f64>;
pub type BoundReport = bounds::BoundReport<f64>;
pub type DesignProblem = design::DesignProblem<f64>;
pub type SolverSettings = solver::SolverSettings<f64>;
pub type Solution = solver::Solution<f64>;
pub type RecoveryResult = solver::RecoveryResult<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
