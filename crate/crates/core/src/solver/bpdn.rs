//! Noise-aware `l1` minimization as a second-order cone program.
//!
//! ```text
//! min sum(u)  s.t.  |x| <= u,  |A x - b|_2 <= eps
//! ```
//!
//! is solved by the log-barrier method: for an increasing sequence of barrier
//! weights `tau`, Newton's method minimizes
//!
//! ```text
//! tau * sum(u) - sum(log(u - x)) - sum(log(u + x)) - log((eps^2 - |A x - b|^2) / 2)
//! ```
//!
//! The duality gap after a stage is `(2N + 1) / tau`.

use nalgebra::{DMatrix, DVector};

use super::linalg::{pinv_solve, regularized_cholesky};
use super::{basis_pursuit, check_system, SolveStatus, Solution, SolverSettings};
use crate::{Error, Real, Result};

/// Noise radius `sigma_v sqrt(M) sqrt(1 + 2 sqrt(2) / sqrt(M))`, which
/// bounds `|v|_2` for `v ~ Normal(0, sigma_v^2 I_M)` with high probability.
pub fn noise_radius<T: Real>(sigma_v: T, m: usize) -> T {
    let mf = T::count(m);
    let root_m = mf.sqrt();
    sigma_v * root_m * (T::one() + T::lit(2.0 * std::f64::consts::SQRT_2) / root_m).sqrt()
}

/// Solves `min |x|_1` subject to `|y - B x|_2 <= eps`.
///
/// `eps = 0` is delegated to [`basis_pursuit`]. When `|y|_2 <= eps` the zero
/// vector is optimal and is returned directly. If even the least-squares fit
/// leaves a residual of at least `eps` the problem has no strictly feasible
/// point and [`Error::Infeasible`] is returned.
pub fn bpdn<T: Real>(
    b: &DMatrix<T>,
    y: &DVector<T>,
    eps: T,
    settings: &SolverSettings<T>,
) -> Result<Solution<T>> {
    settings.validate()?;
    check_system(b, y)?;
    if !(eps >= T::zero()) {
        return Err(Error::param(format!("noise radius {eps} is negative")));
    }
    if eps.is_zero() {
        return basis_pursuit(b, y, settings);
    }
    let n = b.ncols();
    if y.norm() <= eps {
        return Ok(Solution {
            x_hat: DVector::zeros(n),
            status: SolveStatus::Converged,
            iterations: 0,
            gap: T::zero(),
            residual: y.norm(),
        });
    }
    let x0 = pinv_solve(b, y, settings.rank_tol);
    let r0 = (b * &x0 - y).norm();
    if r0 >= eps {
        return Err(Error::Infeasible(format!(
            "least-squares residual {r0} is not below the noise radius {eps}"
        )));
    }
    let mut sol = log_barrier(b, y, eps, x0, settings);
    sol.residual = (b * &sol.x_hat - y).norm();
    Ok(sol)
}

struct Barrier<'a, T: Real> {
    a: &'a DMatrix<T>,
    ata: DMatrix<T>,
    b: &'a DVector<T>,
    eps2: T,
}

impl<T: Real> Barrier<'_, T> {
    /// Barrier objective scaled by `1/tau`; `None` outside the domain.
    fn value(&self, x: &DVector<T>, u: &DVector<T>, r: &DVector<T>, tau: T) -> Option<T> {
        let fe = T::lit(0.5) * (r.norm_squared() - self.eps2);
        if !(fe < T::zero()) {
            return None;
        }
        let mut logs = (-fe).ln();
        let mut sum_u = T::zero();
        for j in 0..x.len() {
            let f1 = x[j] - u[j];
            let f2 = -x[j] - u[j];
            if !(f1 < T::zero() && f2 < T::zero()) {
                return None;
            }
            logs += (-f1).ln() + (-f2).ln();
            sum_u += u[j];
        }
        Some(sum_u - logs / tau)
    }
}

fn log_barrier<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    eps: T,
    x0: DVector<T>,
    st: &SolverSettings<T>,
) -> Solution<T> {
    let n = x0.len();
    let one = T::one();
    let dual_count = T::count(2 * n + 1);
    let bar = Barrier {
        a,
        ata: a.tr_mul(a),
        b,
        eps2: eps * eps,
    };
    let xmax = x0.amax();
    let mut x = x0;
    let mut u = x.map(|v| T::lit(0.95) * v.abs() + T::lit(0.1) * xmax);
    let l1 = x.lp_norm(1);
    let mut tau = if l1 > T::zero() {
        (dual_count / l1).max(one)
    } else {
        one
    };
    let mut iterations = 0;
    let mut status = SolveStatus::IterationCap;
    for _ in 0..st.max_iter {
        let (nx, nu, steps, ok) = newton(&bar, x, u, tau, st);
        x = nx;
        u = nu;
        iterations += steps;
        let gap = dual_count / tau;
        if gap <= st.gap_tol * one.max(x.lp_norm(1)) {
            status = if ok { SolveStatus::Converged } else { SolveStatus::Stalled };
            break;
        }
        if !ok {
            status = SolveStatus::Stalled;
            break;
        }
        tau *= st.mu;
    }
    Solution {
        x_hat: x,
        status,
        iterations,
        gap: dual_count / tau,
        residual: T::zero(),
    }
}

/// Newton iterations at fixed `tau`. Returns the iterate, the number of
/// steps and whether the stage ended normally (decrement below tolerance or
/// step cap) rather than in a failed line search.
fn newton<T: Real>(
    bar: &Barrier<'_, T>,
    mut x: DVector<T>,
    mut u: DVector<T>,
    tau: T,
    st: &SolverSettings<T>,
) -> (DVector<T>, DVector<T>, usize, bool) {
    let n = x.len();
    let one = T::one();
    let two = T::lit(2.0);
    let inv_tau = one / tau;
    let mut r = bar.a * &x - bar.b;
    let Some(mut f) = bar.value(&x, &u, &r, tau) else {
        return (x, u, 0, false);
    };
    let mut steps = 0;
    while steps < st.max_newton {
        let fe = T::lit(0.5) * (r.norm_squared() - bar.eps2);
        let atr = bar.a.tr_mul(&r);
        let mut ntgz = DVector::zeros(n);
        let mut ntgu = DVector::zeros(n);
        let mut sig11 = DVector::zeros(n);
        let mut sig12 = DVector::zeros(n);
        let mut h = bar.ata.clone() * (-one / fe);
        for j in 0..n {
            let f1 = x[j] - u[j];
            let f2 = -x[j] - u[j];
            ntgz[j] = one / f1 - one / f2 + atr[j] / fe;
            ntgu[j] = -tau - one / f1 - one / f2;
            let (q1, q2) = (one / (f1 * f1), one / (f2 * f2));
            sig11[j] = q1 + q2;
            sig12[j] = -q1 + q2;
            h[(j, j)] += sig11[j] - sig12[j] * sig12[j] / sig11[j];
        }
        let inv_fe2 = one / (fe * fe);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += inv_fe2 * atr[i] * atr[j];
            }
        }
        let w1p = DVector::from_fn(n, |j, _| ntgz[j] - sig12[j] / sig11[j] * ntgu[j]);
        let Some(chol) = regularized_cholesky(h, st.reg_floor) else {
            return (x, u, steps, false);
        };
        let dx = chol.solve(&w1p);
        let adx = bar.a * &dx;
        let du = DVector::from_fn(n, |j, _| (ntgu[j] - sig12[j] * dx[j]) / sig11[j]);

        // gradient of the scaled objective, for the Armijo test
        let mut slope = T::zero();
        for j in 0..n {
            slope += -inv_tau * (ntgz[j] * dx[j] + ntgu[j] * du[j]);
        }
        let decrement = -slope;
        if decrement / two <= T::lit(0.1) * st.gap_tol * one.max(u.sum()) {
            return (x, u, steps, true);
        }

        let mut smax = one;
        for j in 0..n {
            let f1 = x[j] - u[j];
            let f2 = -x[j] - u[j];
            let d1 = dx[j] - du[j];
            if d1 > T::zero() {
                smax = smax.min(-f1 / d1);
            }
            let d2 = -dx[j] - du[j];
            if d2 > T::zero() {
                smax = smax.min(-f2 / d2);
            }
        }
        let aqe = adx.norm_squared();
        let bqe = two * r.dot(&adx);
        let cqe = r.norm_squared() - bar.eps2;
        if aqe > T::zero() {
            let root = (-bqe + (bqe * bqe - T::lit(4.0) * aqe * cqe).sqrt()) / (two * aqe);
            smax = smax.min(root);
        }
        let mut s = T::lit(0.99) * smax;

        let mut accepted = false;
        for _ in 0..st.max_backtrack {
            let xp = &x + &dx * s;
            let up = &u + &du * s;
            let rp = &r + &adx * s;
            if let Some(fp) = bar.value(&xp, &up, &rp, tau) {
                if fp <= f + st.ls_alpha * s * slope {
                    x = xp;
                    u = up;
                    r = rp;
                    f = fp;
                    accepted = true;
                    break;
                }
            }
            s *= st.ls_beta;
        }
        steps += 1;
        if !accepted {
            return (x, u, steps, false);
        }
    }
    (x, u, steps, true)
}
