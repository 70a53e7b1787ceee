//! Measurement-count formulas.
//!
//! The absolute constants (`c'`, `c1`, `c1'`, `C0`) are never fixed by the
//! theory, so every function takes them as arguments. Results are real
//! numbers; callers round up.

use nalgebra::{DMatrix, DVector};

use crate::design::psi;
use crate::model::{NetworkConfig, SparseSignal};
use crate::solver::certificate_vector;
use crate::stats::EnsembleExtremes;
use crate::{Error, Real, Result};

/// Arguments of the sparse-measurement bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs<T: Real> {
    pub k: usize,
    pub n: usize,
    /// Failure budget of the off-support correlation event.
    pub epsilon: T,
    /// Failure budget of the conditioning event on `B_S`.
    pub epsilon_prime: T,
    pub c_prime: T,
    pub extremes: EnsembleExtremes<T>,
    /// Peak-to-total energy ratio `|b_S|_inf / |b_S|_2`.
    pub r: T,
}

impl<T: Real> BoundInputs<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: T| {
            if v > T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("epsilon_prime", self.epsilon_prime)?;
        if self.k == 0 {
            return Err(Error::Degenerate("bound undefined for k = 0".into()));
        }
        if self.n == 0 {
            return Err(Error::param("dimension N must be positive"));
        }
        if !(self.c_prime > T::zero()) {
            return Err(Error::param("c' must be positive"));
        }
        if !(self.r > T::zero() && self.r <= T::one()) {
            return Err(Error::param(format!("R must lie in (0, 1], got {}", self.r)));
        }
        let e = &self.extremes;
        if !(e.eta_min > T::zero() && e.eta_tilde_min > T::zero()) {
            return Err(Error::param("ensemble extremes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T: Real> {
    pub m1: T,
    pub m2: T,
    /// `max(m1, m2)`.
    pub m_required: T,
    /// `eta_min <= eta_max^{3/2} / eta_tilde_max`.
    pub m1_dominates: bool,
    /// R used for `m2`.
    pub r: T,
    /// `nu_max^2 / nu_min^2`, when a channel vector is known.
    pub c1: Option<T>,
    /// `c1^2`.
    pub c2: Option<T>,
    pub psi: Option<T>,
    pub scaling_notes: String,
}

fn log_term<T: Real>(n: usize, eps: T) -> T {
    (T::lit(2.0) * T::count(n) / eps).ln()
}

fn conditioning_term<T: Real>(k: usize, eps_prime: T, c_prime: T) -> T {
    ((T::count(k) / eps_prime).ln() / (T::lit(2.0) * c_prime)).sqrt()
}

/// Evaluates `M1`, `M2` and the dominance condition.
///
/// ```text
/// M1 = (eta_max/eta_min) 2k (sqrt(eta_max/eta_min) sqrt(ln(2N/eps)) + q)^2
/// M2 = (eta_max/eta_min) 2k ((eta~_max/sqrt(eta_min)) R ln(2N/eps) + q)^2
/// q  = sqrt(ln(k/eps') / (2c'))
/// ```
pub fn theorem1_bounds<T: Real>(inputs: &BoundInputs<T>) -> Result<BoundReport<T>> {
    inputs.validate()?;
    let e = &inputs.extremes;
    let ratio = e.eta_max / e.eta_min;
    let lead = ratio * T::lit(2.0) * T::count(inputs.k);
    let ln = log_term(inputs.n, inputs.epsilon);
    let q = conditioning_term(inputs.k, inputs.epsilon_prime, inputs.c_prime);
    let m1 = lead * (ratio.sqrt() * ln.sqrt() + q).powi(2);
    let m2 = lead * (e.eta_tilde_max / e.eta_min.sqrt() * inputs.r * ln + q).powi(2);
    let m1_dominates = e.eta_min <= e.eta_max * e.eta_max.sqrt() / e.eta_tilde_max;
    Ok(BoundReport {
        m1,
        m2,
        m_required: m1.max(m2),
        m1_dominates,
        r: inputs.r,
        c1: None,
        c2: None,
        psi: None,
        scaling_notes: scaling_notes(m1_dominates),
    })
}

fn scaling_notes(m1_dominates: bool) -> String {
    if m1_dominates {
        "M1 dominant: O((eta_max/eta_min)^2 k ln(2N/eps))".into()
    } else {
        "M2 dominant: O(sqrt(eta_max eta~_max^2 / eta_min^2) k ln(2N/eps))".into()
    }
}

/// Bounds for a network, with `R` resolved by two passes of the analytic
/// estimate: `M` is evaluated at `R = 1`, `R` is recomputed at that `M`, and
/// the bounds are evaluated again.
pub fn bound_report<T: Real>(
    cfg: &NetworkConfig<T>,
    k: usize,
    epsilon: T,
    epsilon_prime: T,
    c_prime: T,
) -> Result<BoundReport<T>> {
    let mut inputs = BoundInputs {
        k,
        n: cfg.n(),
        epsilon,
        epsilon_prime,
        c_prime,
        extremes: cfg.extremes(),
        r: T::one(),
    };
    let first = theorem1_bounds(&inputs)?;
    let m = first.m_required.ceil().to_usize().unwrap_or(usize::MAX).max(1);
    inputs.r = estimate_r_analytic(k, m)?;
    let mut report = theorem1_bounds(&inputs)?;
    report.c1 = Some(c1(cfg.nu())?);
    report.c2 = Some(c2(cfg.nu())?);
    report.psi = Some(psi(cfg.gamma(), cfg.nu())?);
    Ok(report)
}

/// `sqrt(k / 2M)`, clamped to 1.
pub fn estimate_r_analytic<T: Real>(k: usize, m: usize) -> Result<T> {
    if k == 0 || m == 0 {
        return Err(Error::param("R estimate needs k >= 1 and M >= 1"));
    }
    Ok((T::count(k) / (T::lit(2.0) * T::count(m))).sqrt().min(T::one()))
}

/// `|b_S|_inf / |b_S|_2` for the certificate vector of a realized matrix.
pub fn estimate_r_empirical<T: Real>(
    b: &DMatrix<T>,
    x: &SparseSignal<T>,
    rank_tol: T,
) -> Result<T> {
    if x.sparsity() == 0 {
        return Err(Error::Degenerate("R undefined for an empty support".into()));
    }
    let b_s = certificate_vector(b, x.support(), &x.sign_pattern(), rank_tol)?;
    Ok(b_s.amax() / b_s.norm())
}

/// `C0 (k / sqrt(gamma)) ln(2N/eps)` for identical nodes.
pub fn corollary_iid_bound<T: Real>(k: usize, n: usize, gamma: T, epsilon: T, c0: T) -> Result<T> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if !(epsilon > T::zero() && epsilon < T::one()) || n == 0 {
        return Err(Error::param("need N >= 1 and epsilon in (0, 1)"));
    }
    Ok(c0 * T::count(k) / gamma.sqrt() * log_term(n, epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityScaling {
    /// `k = o(N)`.
    Sublinear,
    /// `k` proportional to `N`.
    Linear,
}

/// How the expected number of active nodes `gamma k` scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling<T: Real> {
    /// `gamma k = tau0`.
    Constant(T),
    /// `gamma k = eps~ N` with `0 < eps~ < k/N`.
    Linear(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Regime<T: Real> {
    pub sparsity: SparsityScaling,
    pub coupling: Coupling<T>,
}

/// Looks up the scaling of the required `M` for one cell of the regime
/// table.
pub fn table1_regime<T: Real>(sparsity: SparsityScaling, coupling: Coupling<T>) -> Table1Regime<T> {
    Table1Regime { sparsity, coupling }
}

impl<T: Real> Table1Regime<T> {
    pub fn expression(&self) -> &'static str {
        match (self.coupling, self.sparsity) {
            (Coupling::Constant(_), SparsityScaling::Sublinear) => "k^{3/2} ln N",
            (Coupling::Constant(_), SparsityScaling::Linear) => "N^{3/2} ln N",
            (Coupling::Linear(_), SparsityScaling::Sublinear) => "k^{3/2}/sqrt(eps~ N) ln N",
            (Coupling::Linear(_), SparsityScaling::Linear) => "N/sqrt(eps~) ln N",
        }
    }

    /// Evaluates the scaling expression at `(k, N)`.
    pub fn evaluate(&self, k: usize, n: usize) -> Result<T> {
        if k == 0 || n == 0 || k > n {
            return Err(Error::param(format!("need 1 <= k <= N, got k={k}, N={n}")));
        }
        let (kf, nf) = (T::count(k), T::count(n));
        let ln_n = nf.ln();
        let three_halves = T::lit(1.5);
        Ok(match (self.coupling, self.sparsity) {
            (Coupling::Constant(tau0), sparsity) => {
                if !(tau0 > T::zero() && tau0 <= kf) {
                    return Err(Error::domain(format!("tau0 must lie in (0, k], got {tau0}")));
                }
                match sparsity {
                    SparsityScaling::Sublinear => kf.powf(three_halves) * ln_n,
                    SparsityScaling::Linear => nf.powf(three_halves) * ln_n,
                }
            }
            (Coupling::Linear(eps), sparsity) => {
                if !(eps > T::zero() && eps < kf / nf) {
                    return Err(Error::domain(format!(
                        "eps~ must lie in (0, k/N) = (0, {}), got {eps}",
                        kf / nf
                    )));
                }
                match sparsity {
                    SparsityScaling::Sublinear => kf.powf(three_halves) / (eps * nf).sqrt() * ln_n,
                    SparsityScaling::Linear => nf / eps.sqrt() * ln_n,
                }
            }
        })
    }
}

/// Arguments of the bound for matrices with general independent
/// sub-exponential entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubexpInputs<T: Real> {
    pub k: usize,
    pub n: usize,
    /// Smallest eigenvalue of `Sigma_B^T Sigma_B`.
    pub lambda_min: T,
    /// Largest sub-exponential norm of the entries.
    pub rho_max: T,
    /// Almost-sure bound on the squared row norm of `B_S`.
    pub t0: T,
    pub r1: T,
    pub eps1: T,
    pub eps1_prime: T,
    pub c1: T,
    pub c1_prime: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubexpBound<T: Real> {
    pub beta1: T,
    pub m: T,
}

/// ```text
/// beta1 = min((1/rho) sqrt(c1 / ln(2N/eps1)), c1 / (rho R1 ln(2N/eps1)))
/// M     = (1/lambda_min) (sqrt(k)/beta1 + sqrt(T0 ln(k/eps1') / c1'))^2
/// ```
pub fn general_subexp_bound<T: Real>(p: &SubexpInputs<T>) -> Result<SubexpBound<T>> {
    if p.lambda_min == T::zero() {
        return Err(Error::Degenerate("singular second-moment matrix".into()));
    }
    let positive = [
        ("lambda_min", p.lambda_min),
        ("rho_max", p.rho_max),
        ("T0", p.t0),
        ("c1", p.c1),
        ("c1'", p.c1_prime),
    ];
    if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > T::zero())) {
        return Err(Error::param(format!("{name} must be positive, got {v}")));
    }
    if !(p.r1 > T::zero() && p.r1 <= T::one()) {
        return Err(Error::param(format!("R1 must lie in (0, 1], got {}", p.r1)));
    }
    for (name, v) in [("eps1", p.eps1), ("eps1'", p.eps1_prime)] {
        if !(v > T::zero() && v < T::one()) {
            return Err(Error::param(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if p.k == 0 || p.n == 0 {
        return Err(Error::Degenerate("bound undefined for k = 0 or N = 0".into()));
    }
    let ln = log_term(p.n, p.eps1);
    let first = (p.c1 / ln).sqrt() / p.rho_max;
    let second = p.c1 / (p.rho_max * p.r1 * ln);
    let beta1 = first.min(second);
    let tail = (p.t0 * (T::count(p.k) / p.eps1_prime).ln() / p.c1_prime).sqrt();
    let m = (T::count(p.k).sqrt() / beta1 + tail).powi(2) / p.lambda_min;
    Ok(SubexpBound { beta1, m })
}

/// Predicted and realized extreme singular values of an `M x k` matrix
/// with independent rows of common second moment `Sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularEnvelope<T: Real> {
    pub s_min: T,
    pub s_max: T,
    pub s_min_pred: T,
    pub s_max_pred: T,
    /// Both realized values lie inside `[s_min_pred, s_max_pred]`.
    pub holds: bool,
}

/// Checks `|Sigma|^{1/2} sqrt(M) - t sqrt(T0) <= s_min <= s_max <= |Sigma|^{1/2} sqrt(M) + t sqrt(T0)`.
pub fn singular_value_envelope<T: Real>(
    a: &DMatrix<T>,
    second_moment: &DMatrix<T>,
    t0: T,
    t: T,
) -> Result<SingularEnvelope<T>> {
    let k = a.ncols();
    if second_moment.nrows() != k || second_moment.ncols() != k {
        return Err(Error::dim(format!(
            "second moment is {}x{}, matrix has {k} columns",
            second_moment.nrows(),
            second_moment.ncols()
        )));
    }
    if k == 0 || a.nrows() == 0 {
        return Err(Error::dim("empty matrix"));
    }
    if t0 < T::zero() || t < T::zero() {
        return Err(Error::param("T0 and t must be nonnegative"));
    }
    let sigma_norm = second_moment.clone().symmetric_eigen().eigenvalues.amax();
    let centre = sigma_norm.sqrt() * T::count(a.nrows()).sqrt();
    let half = t * t0.sqrt();
    let sv: DVector<T> = a.singular_values();
    // a tall matrix has exactly k singular values; a wide one has fewer,
    // and its missing ones are zero
    let s_min = if a.nrows() >= k { sv.min() } else { T::zero() };
    let s_max = sv.max();
    let (lo, hi) = (centre - half, centre + half);
    Ok(SingularEnvelope {
        s_min,
        s_max,
        s_min_pred: lo,
        s_max_pred: hi,
        holds: lo <= s_min && s_max <= hi,
    })
}

fn nu_ratio<T: Real>(nu: &[T]) -> Result<T> {
    if nu.is_empty() {
        return Err(Error::Empty("channel scale vector".into()));
    }
    if let Some(v) = nu.iter().find(|v| !(**v > T::zero())) {
        return Err(Error::param(format!("channel scales must be positive, got {v}")));
    }
    let max = nu.iter().fold(T::zero(), |m, &v| m.max(v));
    let min = nu.iter().fold(max, |m, &v| m.min(v));
    Ok((max / min).powi(2))
}

/// `nu_max^2 / nu_min^2`: fading penalty with matched sparse projections.
pub fn c1<T: Real>(nu: &[T]) -> Result<T> {
    nu_ratio(nu)
}

/// `(nu_max^2 / nu_min^2)^2`: fading penalty with dense projections.
pub fn c2<T: Real>(nu: &[T]) -> Result<T> {
    Ok(nu_ratio(nu)?.powi(2))
}
