//! Recovery engines.
//!
//! * [`basis_pursuit`]: `min |x|_1` subject to `B x = y`, solved as a linear
//!   program by a primal-dual interior point method.
//! * [`bpdn`]: `min |x|_1` subject to `|y - B x|_2 <= eps`, solved as a
//!   second-order cone program by a log-barrier method.
//! * [`recovery_certificate`]: the dual certificate that guarantees exact
//!   recovery of a given sign pattern.
//! * [`brute_force_oracle`]: exhaustive support enumeration for tiny problems.

mod bp;
mod bpdn;
mod certificate;
mod linalg;
mod oracle;

use nalgebra::{DMatrix, DVector};

pub use bp::basis_pursuit;
pub use bpdn::{bpdn, noise_radius};
pub use certificate::{certificate_vector, recovery_certificate, Certificate};
pub use oracle::{
    brute_force_oracle, brute_force_oracle_with_budget, enumeration_size, OracleSolution,
    DEFAULT_ENUMERATION_BUDGET,
};

use crate::model::SparseSignal;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T: Real> {
    /// Target duality gap, relative to `max(1, |x|_1)`.
    pub gap_tol: T,
    /// Outer iterations: primal-dual steps for basis pursuit, barrier
    /// updates for BPDN.
    pub max_iter: usize,
    /// Newton steps per barrier stage (BPDN).
    pub max_newton: usize,
    /// Armijo fraction for the backtracking line search.
    pub ls_alpha: T,
    /// Step shrink factor for the backtracking line search.
    pub ls_beta: T,
    pub max_backtrack: usize,
    /// Barrier parameter growth per stage.
    pub mu: T,
    /// Diagonal regularization of the Newton systems, relative to their
    /// largest diagonal entry.
    pub reg_floor: T,
    /// Relative error below which a recovery counts as exact.
    pub exact_threshold: T,
    /// Relative pivot size below which a matrix is declared rank deficient.
    pub rank_tol: T,
    /// Relative residual above which `B x = y` is declared inconsistent.
    pub feasibility_tol: T,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::lit(1e-8),
            max_iter: 100,
            max_newton: 50,
            ls_alpha: T::lit(0.01),
            ls_beta: T::lit(0.5),
            max_backtrack: 32,
            mu: T::lit(10.0),
            reg_floor: T::lit(1e-12),
            exact_threshold: T::lit(1e-4),
            rank_tol: T::lit(1e-10),
            feasibility_tol: T::lit(1e-6),
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gap_tol", self.gap_tol),
            ("exact_threshold", self.exact_threshold),
            ("rank_tol", self.rank_tol),
            ("feasibility_tol", self.feasibility_tol),
            ("ls_alpha", self.ls_alpha),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if !(self.ls_beta > T::zero() && self.ls_beta < T::one()) {
            return Err(Error::param("ls_beta must lie in (0, 1)"));
        }
        if !(self.mu > T::one()) {
            return Err(Error::param("mu must exceed 1"));
        }
        if !(self.reg_floor >= T::zero()) {
            return Err(Error::param("reg_floor must be nonnegative"));
        }
        if self.max_iter == 0 || self.max_newton == 0 || self.max_backtrack == 0 {
            return Err(Error::param("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    /// Iteration cap reached; the best iterate is returned.
    IterationCap,
    /// Line search or factorization failed before the gap target; the last
    /// accepted iterate is returned.
    Stalled,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationCap => "iteration_cap",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// Raw solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T: Real> {
    pub x_hat: DVector<T>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Final duality gap (surrogate gap for basis pursuit, barrier gap for
    /// BPDN).
    pub gap: T,
    /// `|B x_hat - y|_2`
    pub residual: T,
}

impl<T: Real> Solution<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// A solution scored against the generating signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult<T: Real> {
    pub x_hat: DVector<T>,
    /// `|x - x_hat|_2 / |x|_2`; the absolute error when `x = 0`.
    pub relative_error: T,
    pub exact: bool,
    /// `None` when the support columns are rank deficient.
    pub certificate: Option<Certificate<T>>,
    pub iterations: usize,
    pub gap: T,
    pub status: SolveStatus,
}

impl<T: Real> RecoveryResult<T> {
    pub fn assess(
        solution: Solution<T>,
        truth: &SparseSignal<T>,
        b: &DMatrix<T>,
        settings: &SolverSettings<T>,
    ) -> Result<Self> {
        if solution.x_hat.len() != truth.len() {
            return Err(Error::dim("estimate and signal lengths differ"));
        }
        let relative_error = relative_error(truth.values(), &solution.x_hat);
        let certificate = match recovery_certificate(b, truth, settings.rank_tol) {
            Ok(c) => Some(c),
            Err(Error::RankDeficient(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            exact: relative_error < settings.exact_threshold,
            relative_error,
            certificate,
            iterations: solution.iterations,
            gap: solution.gap,
            status: solution.status,
            x_hat: solution.x_hat,
        })
    }
}

pub fn relative_error<T: Real>(x: &DVector<T>, x_hat: &DVector<T>) -> T {
    let err = (x - x_hat).norm();
    let scale = x.norm();
    if scale.is_zero() {
        err
    } else {
        err / scale
    }
}

fn check_system<T: Real>(b: &DMatrix<T>, y: &DVector<T>) -> Result<()> {
    if b.nrows() != y.len() {
        return Err(Error::dim(format!(
            "matrix has {} rows but y has length {}",
            b.nrows(),
            y.len()
        )));
    }
    if b.ncols() == 0 {
        return Err(Error::dim("matrix has no columns"));
    }
    Ok(())
}
