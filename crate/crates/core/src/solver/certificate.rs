use nalgebra::{DMatrix, DVector};

use super::linalg::tall_qr;
use crate::model::SparseSignal;
use crate::{Error, Real, Result};

/// Outcome of the exact-recovery certificate for one sign pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T: Real> {
    /// `max_{l not in S} |<b_l, b_S>|` with `b_S = (B_S^+)^T sgn(x^S)`.
    pub max_correlation: T,
    /// `max_correlation < 1`: basis pursuit then recovers `x` exactly.
    pub holds: bool,
}

fn support_columns<T: Real>(b: &DMatrix<T>, support: &[usize]) -> Result<DMatrix<T>> {
    if let Some(&bad) = support.iter().find(|&&j| j >= b.ncols()) {
        return Err(Error::dim(format!(
            "support index {bad} out of range for {} columns",
            b.ncols()
        )));
    }
    Ok(b.select_columns(support))
}

/// `b_S = (B_S^+)^T s = B_S (B_S^T B_S)^{-1} s`, computed from a QR
/// factorization of `B_S`. Fails with [`Error::RankDeficient`] when a pivot
/// of `R` falls below `rank_tol * |B_S|_F`.
pub fn certificate_vector<T: Real>(
    b: &DMatrix<T>,
    support: &[usize],
    signs: &DVector<T>,
    rank_tol: T,
) -> Result<DVector<T>> {
    if signs.len() != support.len() {
        return Err(Error::dim("sign pattern and support differ in length"));
    }
    if support.is_empty() {
        return Ok(DVector::zeros(b.nrows()));
    }
    let bs = support_columns(b, support)?;
    let qr = tall_qr(bs, rank_tol)?;
    Ok(qr.dual(signs))
}

/// Checks `|<(B_S)^+ b_l, sgn(x^S)>| < 1` for every column `l` off the
/// support of `x`.
pub fn recovery_certificate<T: Real>(
    b: &DMatrix<T>,
    x: &SparseSignal<T>,
    rank_tol: T,
) -> Result<Certificate<T>> {
    if x.len() != b.ncols() {
        return Err(Error::dim(format!(
            "signal length {} against {} columns",
            x.len(),
            b.ncols()
        )));
    }
    let b_s = certificate_vector(b, x.support(), &x.sign_pattern(), rank_tol)?;
    let mut on_support = vec![false; b.ncols()];
    for &j in x.support() {
        on_support[j] = true;
    }
    let max_correlation = b
        .column_iter()
        .enumerate()
        .filter(|(j, _)| !on_support[*j])
        .map(|(_, col)| col.dot(&b_s).abs())
        .fold(T::zero(), |acc, c| acc.max(c));
    Ok(Certificate {
        max_correlation,
        holds: max_correlation < T::one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns_always_certify() {
        let b = DMatrix::<f64>::identity(4, 4);
        let x = SparseSignal::from_values(DVector::from_vec(vec![0.0, 5.0, -2.0, 0.0]));
        let c = recovery_certificate(&b, &x, 1e-10).unwrap();
        assert!(c.max_correlation < 1e-15);
        assert!(c.holds);
    }

    #[test]
    fn duplicated_column_fails() {
        let b = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let x = SparseSignal::from_values(DVector::from_vec(vec![5.0, 0.0]));
        let c = recovery_certificate(&b, &x, 1e-10).unwrap();
        assert!((c.max_correlation - 1.0).abs() < 1e-15);
        assert!(!c.holds);
    }

    #[test]
    fn dual_vector_reproduces_signs_on_support() {
        let b = DMatrix::from_row_slice(3, 4, &[
            1.0, 0.2, -0.3, 0.5, //
            0.1, 1.0, 0.4, -0.2, //
            -0.2, 0.3, 1.0, 0.1,
        ]);
        let x = SparseSignal::from_values(DVector::from_vec(vec![3.0, 0.0, -1.0, 0.0]));
        let bs = certificate_vector(&b, x.support(), &x.sign_pattern(), 1e-10).unwrap();
        // B_S^T b_S = sgn(x^S)
        let back = b.select_columns(x.support()).tr_mul(&bs);
        assert!((back - x.sign_pattern()).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_support_is_reported() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 1.0, 3.0, 6.0, 0.0]);
        let x = SparseSignal::from_values(DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!(matches!(
            recovery_certificate(&b, &x, 1e-10),
            Err(Error::RankDeficient(_))
        ));
        // more support columns than rows
        let wide = DMatrix::from_element(2, 4, 1.0);
        let x = SparseSignal::from_values(DVector::from_vec(vec![1.0, 1.0, 1.0, 0.0]));
        assert!(matches!(
            recovery_certificate(&wide, &x, 1e-10),
            Err(Error::RankDeficient(_))
        ));
    }
}
