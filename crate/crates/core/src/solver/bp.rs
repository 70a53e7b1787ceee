//! Equality-constrained `l1` minimization.
//!
//! The problem is posed as the linear program
//!
//! ```text
//! min sum(u)  s.t.  x - u <= 0,  -x - u <= 0,  A x = b
//! ```
//!
//! and solved with a primal-dual interior point method: Newton steps on the
//! perturbed KKT conditions, a step to the boundary scaled by 0.99, and a
//! backtracking search on the norm of the KKT residual. The Newton system is
//! reduced to the `M x M` normal equations `A diag(1/sigma) A^T dv = w`.

use nalgebra::{DMatrix, DVector};

use super::linalg::{reduce_rows, regularized_cholesky, weighted_gram};
use super::{check_system, SolveStatus, Solution, SolverSettings};
use crate::{Error, Real, Result};

/// Solves `min |x|_1` subject to `B x = y`.
///
/// Rank-deficient or overdetermined systems are first reduced to an
/// equivalent system with independent rows; an inconsistent `y` is an
/// [`Error::Infeasible`]. Running out of iterations is not an error: the
/// best iterate is returned with [`SolveStatus::IterationCap`].
pub fn basis_pursuit<T: Real>(
    b: &DMatrix<T>,
    y: &DVector<T>,
    settings: &SolverSettings<T>,
) -> Result<Solution<T>> {
    settings.validate()?;
    check_system(b, y)?;
    let n = b.ncols();
    if y.iter().all(|v| v.is_zero()) {
        return Ok(Solution {
            x_hat: DVector::zeros(n),
            status: SolveStatus::Converged,
            iterations: 0,
            gap: T::zero(),
            residual: T::zero(),
        });
    }
    let reduced = reduce_rows(b, y, settings.rank_tol, settings.feasibility_tol)?;
    let x0 = start_point(&reduced.a, &reduced.rhs, settings)?;
    let mut sol = primal_dual(&reduced.a, &reduced.rhs, x0, settings);
    sol.residual = (b * &sol.x_hat - y).norm();
    Ok(sol)
}

fn start_point<T: Real>(
    a: &DMatrix<T>,
    rhs: &DVector<T>,
    settings: &SolverSettings<T>,
) -> Result<DVector<T>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let chol = regularized_cholesky(a * a.transpose(), settings.reg_floor)
        .ok_or_else(|| Error::RankDeficient("normal equations are singular".into()))?;
    Ok(a.tr_mul(&chol.solve(rhs)))
}

struct Iterate<T: Real> {
    x: DVector<T>,
    u: DVector<T>,
    v: DVector<T>,
    atv: DVector<T>,
    lam1: DVector<T>,
    lam2: DVector<T>,
    f1: DVector<T>,
    f2: DVector<T>,
    rpri: DVector<T>,
}

impl<T: Real> Iterate<T> {
    /// Norm of the stacked dual, centrality and primal residuals.
    fn residual_norm(&self, inv_tau: T) -> T {
        let mut acc = T::zero();
        for j in 0..self.x.len() {
            let rdx = self.lam1[j] - self.lam2[j] + self.atv[j];
            let rdu = T::one() - self.lam1[j] - self.lam2[j];
            let rc1 = -self.lam1[j] * self.f1[j] - inv_tau;
            let rc2 = -self.lam2[j] * self.f2[j] - inv_tau;
            acc += rdx * rdx + rdu * rdu + rc1 * rc1 + rc2 * rc2;
        }
        (acc + self.rpri.norm_squared()).sqrt()
    }

    fn surrogate_gap(&self) -> T {
        -(self.f1.dot(&self.lam1) + self.f2.dot(&self.lam2))
    }
}

fn primal_dual<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    x0: DVector<T>,
    st: &SolverSettings<T>,
) -> Solution<T> {
    let n = x0.len();
    let one = T::one();
    let two_n = T::count(2 * n);
    let xmax = x0.amax();
    let u = x0.map(|v| T::lit(0.95) * v.abs() + T::lit(0.1) * xmax);
    let f1 = &x0 - &u;
    let f2 = -&x0 - &u;
    let lam1 = f1.map(|f| -one / f);
    let lam2 = f2.map(|f| -one / f);
    let v = -(a * (&lam1 - &lam2));
    let atv = a.tr_mul(&v);
    let rpri = a * &x0 - b;
    let mut it = Iterate {
        x: x0,
        u,
        v,
        atv,
        lam1,
        lam2,
        f1,
        f2,
        rpri,
    };
    let mut sdg = it.surrogate_gap();
    let mut tau = st.mu * two_n / sdg;
    let mut resnorm = it.residual_norm(one / tau);
    let target = |x: &DVector<T>| st.gap_tol * one.max(x.lp_norm(1));

    let mut iterations = 0;
    let mut status = SolveStatus::IterationCap;
    while iterations < st.max_iter {
        if sdg <= target(&it.x) {
            status = SolveStatus::Converged;
            break;
        }
        let inv_tau = one / tau;
        // Newton direction
        let mut w1 = DVector::zeros(n);
        let mut w2 = DVector::zeros(n);
        let mut sig1 = DVector::zeros(n);
        let mut sig2 = DVector::zeros(n);
        let mut inv_sigx = DVector::zeros(n);
        for j in 0..n {
            let (f1, f2) = (it.f1[j], it.f2[j]);
            w1[j] = -inv_tau * (-one / f1 + one / f2) - it.atv[j];
            w2[j] = -one - inv_tau * (one / f1 + one / f2);
            sig1[j] = -it.lam1[j] / f1 - it.lam2[j] / f2;
            sig2[j] = it.lam1[j] / f1 - it.lam2[j] / f2;
            // sig1 - sig2^2 / sig1 without the cancellation near the boundary
            let sigx = T::lit(4.0) * it.lam1[j] * it.lam2[j] / (f1 * f2 * sig1[j]);
            inv_sigx[j] = one / sigx;
        }
        let mut tmp = DVector::zeros(n);
        for j in 0..n {
            tmp[j] = inv_sigx[j] * (w1[j] - w2[j] * sig2[j] / sig1[j]);
        }
        let w1p = &it.rpri + a * &tmp;
        let chol = match regularized_cholesky(weighted_gram(a, &inv_sigx), st.reg_floor) {
            Some(c) => c,
            None => {
                status = SolveStatus::Stalled;
                break;
            }
        };
        let dv = chol.solve(&w1p);
        let atdv = a.tr_mul(&dv);
        let mut dx = DVector::zeros(n);
        let mut du = DVector::zeros(n);
        let mut dlam1 = DVector::zeros(n);
        let mut dlam2 = DVector::zeros(n);
        for j in 0..n {
            dx[j] = (w1[j] - w2[j] * sig2[j] / sig1[j] - atdv[j]) * inv_sigx[j];
            du[j] = (w2[j] - sig2[j] * dx[j]) / sig1[j];
            let (f1, f2) = (it.f1[j], it.f2[j]);
            dlam1[j] = it.lam1[j] / f1 * (-dx[j] + du[j]) - it.lam1[j] - inv_tau / f1;
            dlam2[j] = it.lam2[j] / f2 * (dx[j] + du[j]) - it.lam2[j] - inv_tau / f2;
        }
        let adx = a * &dx;

        // largest step keeping multipliers positive and constraints strict
        let mut s = one;
        for j in 0..n {
            if dlam1[j] < T::zero() {
                s = s.min(-it.lam1[j] / dlam1[j]);
            }
            if dlam2[j] < T::zero() {
                s = s.min(-it.lam2[j] / dlam2[j]);
            }
            let d1 = dx[j] - du[j];
            if d1 > T::zero() {
                s = s.min(-it.f1[j] / d1);
            }
            let d2 = -dx[j] - du[j];
            if d2 > T::zero() {
                s = s.min(-it.f2[j] / d2);
            }
        }
        s *= T::lit(0.99);

        let mut accepted = None;
        for _ in 0..st.max_backtrack {
            let x = &it.x + &dx * s;
            let u = &it.u + &du * s;
            let cand = Iterate {
                f1: &x - &u,
                f2: -&x - &u,
                x,
                u,
                v: &it.v + &dv * s,
                atv: &it.atv + &atdv * s,
                lam1: &it.lam1 + &dlam1 * s,
                lam2: &it.lam2 + &dlam2 * s,
                rpri: &it.rpri + &adx * s,
            };
            let r = cand.residual_norm(inv_tau);
            if r <= (one - st.ls_alpha * s) * resnorm {
                accepted = Some(cand);
                break;
            }
            s *= st.ls_beta;
        }
        let Some(next) = accepted else {
            status = SolveStatus::Stalled;
            break;
        };
        it = next;
        iterations += 1;
        sdg = it.surrogate_gap();
        tau = st.mu * two_n / sdg;
        resnorm = it.residual_norm(one / tau);
    }
    if status == SolveStatus::IterationCap && sdg <= target(&it.x) {
        status = SolveStatus::Converged;
    }
    Solution {
        x_hat: it.x,
        status,
        iterations,
        gap: sdg,
        residual: T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::model::sampling::normal;

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(m, n, |_, _| normal(&mut rng, 1.0))
    }

    #[test]
    fn identity_returns_y() {
        let y = DVector::from_vec(vec![3.0, 0.0, -12.0, 0.5, 0.0]);
        let sol = basis_pursuit(&DMatrix::identity(5, 5), &y, &SolverSettings::default()).unwrap();
        assert!((&sol.x_hat - &y).amax() < 1e-9);
        assert!(sol.converged());
    }

    #[test]
    fn single_spike() {
        let b = gaussian(5, 8, 1);
        let mut x = DVector::zeros(8);
        x[3] = -14.0;
        let y = &b * &x;
        let sol = basis_pursuit(&b, &y, &SolverSettings::default()).unwrap();
        assert!((sol.x_hat - &x).norm() / x.norm() < 1e-6);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let b = gaussian(4, 9, 2);
        let sol = basis_pursuit(&b, &DVector::zeros(4), &SolverSettings::default()).unwrap();
        assert_eq!(sol.x_hat, DVector::zeros(9));
    }

    #[test]
    fn inconsistent_overdetermined_system_is_infeasible() {
        let b = gaussian(6, 3, 3);
        let y = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        assert!(matches!(
            basis_pursuit(&b, &y, &SolverSettings::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn consistent_overdetermined_system_is_solved() {
        let b = gaussian(6, 3, 4);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        let sol = basis_pursuit(&b, &(&b * &x), &SolverSettings::default()).unwrap();
        assert!((sol.x_hat - x).amax() < 1e-7);
    }

    #[test]
    fn dimension_mismatch() {
        let b = gaussian(3, 5, 5);
        assert!(matches!(
            basis_pursuit(&b, &DVector::zeros(4), &SolverSettings::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let b = gaussian(10, 30, 6);
        let mut x = DVector::zeros(30);
        x[1] = 5.0;
        x[7] = -3.0;
        let st = SolverSettings {
            max_iter: 2,
            ..SolverSettings::default()
        };
        let sol = basis_pursuit(&b, &(&b * &x), &st).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationCap);
        assert_eq!(sol.iterations, 2);
        assert_eq!(sol.x_hat.len(), 30);
    }

    #[test]
    fn works_in_single_precision() {
        let y = DVector::from_vec(vec![2.0f32, -1.0, 0.0]);
        let st = SolverSettings {
            gap_tol: 1e-5,
            ..SolverSettings::default()
        };
        let sol = basis_pursuit(&DMatrix::identity(3, 3), &y, &st).unwrap();
        assert!((sol.x_hat - y).amax() < 1e-4);
    }
}
