//! Dense helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Real, Result};

/// Cholesky factorization of a symmetric positive (semi)definite matrix
/// after adding `floor * max(diag)` to the diagonal.
pub(crate) fn regularized_cholesky<T: Real>(
    mut h: DMatrix<T>,
    floor: T,
) -> Option<Cholesky<T, Dyn>> {
    let n = h.nrows();
    let max_diag = (0..n).fold(T::zero(), |acc, i| acc.max(h[(i, i)]));
    if !(max_diag > T::zero()) || !max_diag.is_finite() {
        return None;
    }
    let shift = floor * max_diag;
    for i in 0..n {
        h[(i, i)] += shift;
    }
    Cholesky::new(h)
}

/// `B diag(d) B^T`.
pub(crate) fn weighted_gram<T: Real>(b: &DMatrix<T>, d: &DVector<T>) -> DMatrix<T> {
    let mut scaled = b.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    scaled * b.transpose()
}

/// An equivalent equality system with full row rank.
pub(crate) struct Reduced<T: Real> {
    pub a: DMatrix<T>,
    pub rhs: DVector<T>,
}

/// Rewrites `B x = y` as an equivalent system with linearly independent rows.
///
/// When `B B^T` factors with a reasonable condition the system is returned
/// as is. Otherwise `B = U S V^T` is truncated to its numerical rank `r` and
/// the system becomes `S_r V_r^T x = U_r^T y`; if `y` has a component
/// outside the range of `B` larger than `feasibility_tol * max(1, |y|)` the
/// system is inconsistent.
pub(crate) fn reduce_rows<T: Real>(
    b: &DMatrix<T>,
    y: &DVector<T>,
    rank_tol: T,
    feasibility_tol: T,
) -> Result<Reduced<T>> {
    let (m, n) = b.shape();
    if m <= n {
        let gram = b * b.transpose();
        if let Some(chol) = Cholesky::new(gram) {
            let l = chol.l_dirty();
            let (lo, hi) = (0..m).fold((T::max_value().unwrap(), T::zero()), |(lo, hi), i| {
                let d = l[(i, i)];
                (lo.min(d), hi.max(d))
            });
            if m == 0 || lo > rank_tol.sqrt() * hi {
                return Ok(Reduced {
                    a: b.clone(),
                    rhs: y.clone(),
                });
            }
        }
    }
    let svd = b.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let s_max = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rank_tol * s_max)
        .collect();
    if keep.is_empty() {
        if y.norm() > feasibility_tol * T::one().max(y.norm()) {
            return Err(Error::Infeasible("matrix is zero but y is not".into()));
        }
        return Ok(Reduced {
            a: DMatrix::zeros(0, n),
            rhs: DVector::zeros(0),
        });
    }
    let r = keep.len();
    let mut a = DMatrix::zeros(r, n);
    let mut rhs = DVector::zeros(r);
    let mut projected = DVector::zeros(m);
    for (row, &i) in keep.iter().enumerate() {
        let ui = u.column(i);
        let c = ui.dot(y);
        rhs[row] = c;
        projected += ui * c;
        a.row_mut(row)
            .copy_from(&(v_t.row(i) * svd.singular_values[i]));
    }
    let outside = (y - projected).norm();
    if outside > feasibility_tol * T::one().max(y.norm()) {
        return Err(Error::Infeasible(format!(
            "y has a component of norm {outside} outside the range of B"
        )));
    }
    Ok(Reduced { a, rhs })
}

/// Least-squares solution of minimum norm for any shape, via the SVD.
pub(crate) fn pinv_solve<T: Real>(b: &DMatrix<T>, y: &DVector<T>, rank_tol: T) -> DVector<T> {
    let svd = b.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = rank_tol * s_max;
    match svd.solve(y, eps) {
        Ok(x) => x,
        Err(_) => DVector::zeros(b.ncols()),
    }
}

/// QR factor of a tall matrix with a rank check on the diagonal of `R`.
pub(crate) struct TallQr<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
}

pub(crate) fn tall_qr<T: Real>(a: DMatrix<T>, rank_tol: T) -> Result<TallQr<T>> {
    let (m, k) = a.shape();
    if k > m {
        return Err(Error::RankDeficient(format!(
            "{k} columns cannot be independent in dimension {m}"
        )));
    }
    let scale = a.norm();
    let qr = a.qr();
    let r = qr.r();
    for i in 0..k {
        if !(r[(i, i)].abs() > rank_tol * scale) {
            return Err(Error::RankDeficient(format!(
                "pivot {i} is {} against matrix norm {scale}",
                r[(i, i)].abs()
            )));
        }
    }
    Ok(TallQr { q: qr.q(), r })
}

impl<T: Real> TallQr<T> {
    /// Least-squares coefficients `R^{-1} Q^T y`.
    pub fn solve(&self, y: &DVector<T>) -> DVector<T> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("nonsingular R after rank check")
    }

    /// `Q R^{-T} s`, the columns' dual vector for the sign pattern `s`.
    pub fn dual(&self, s: &DVector<T>) -> DVector<T> {
        let z = self
            .r
            .tr_solve_upper_triangular(s)
            .expect("nonsingular R after rank check");
        &self.q * z
    }
}
