//! Exhaustive support enumeration, the ground truth for tiny instances.

use nalgebra::{DMatrix, DVector};

use super::check_system;
use super::linalg::tall_qr;
use crate::{Error, Real, Result};

/// Candidate supports allowed by default: all supports of size at most 3 in
/// dimension 20.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1 + 20 + 190 + 1140;

/// Sparsest consistent solution found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T: Real> {
    pub x_hat: DVector<T>,
    pub support: Vec<usize>,
    /// No other support of the same size fits `y`.
    pub unique: bool,
    pub supports_checked: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Number of supports of size `0..=k_max` in dimension `n`.
pub fn enumeration_size(n: usize, k_max: usize) -> u128 {
    (0..=k_max.min(n)).map(|k| binomial(n, k)).sum()
}

/// [`brute_force_oracle_with_budget`] with [`DEFAULT_ENUMERATION_BUDGET`].
pub fn brute_force_oracle<T: Real>(
    b: &DMatrix<T>,
    y: &DVector<T>,
    k_max: usize,
) -> Result<OracleSolution<T>> {
    brute_force_oracle_with_budget(b, y, k_max, DEFAULT_ENUMERATION_BUDGET)
}

/// Fits `y` by least squares on every support of size at most `k_max` and
/// returns the sparsest one with residual at most `1e-8 * max(1, |y|)`.
/// Ties are broken by the smaller `l1` norm, then by the lexicographically
/// smaller support. Supports with dependent columns are skipped.
pub fn brute_force_oracle_with_budget<T: Real>(
    b: &DMatrix<T>,
    y: &DVector<T>,
    k_max: usize,
    budget: u128,
) -> Result<OracleSolution<T>> {
    check_system(b, y)?;
    let n = b.ncols();
    let needed = enumeration_size(n, k_max);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let tol = T::lit(1e-8) * T::one().max(y.norm());
    let mut checked = 0usize;
    for size in 0..=k_max.min(n) {
        let mut best: Option<(T, Vec<usize>, DVector<T>)> = None;
        let mut consistent = 0usize;
        for support in Combinations::new(n, size) {
            checked += 1;
            let (coef, residual) = if size == 0 {
                (DVector::zeros(0), y.norm())
            } else {
                match tall_qr(b.select_columns(&support), T::lit(1e-10)) {
                    Ok(qr) => {
                        let c = qr.solve(y);
                        let r = (b.select_columns(&support) * &c - y).norm();
                        (c, r)
                    }
                    Err(_) => continue,
                }
            };
            if residual > tol {
                continue;
            }
            consistent += 1;
            let l1 = coef.lp_norm(1);
            if best.as_ref().is_none_or(|(b1, _, _)| l1 < *b1) {
                best = Some((l1, support, coef));
            }
        }
        if let Some((_, support, coef)) = best {
            let mut x_hat = DVector::zeros(n);
            for (c, &j) in coef.iter().zip(&support) {
                x_hat[j] = *c;
            }
            return Ok(OracleSolution {
                x_hat,
                support,
                unique: consistent == 1,
                supports_checked: checked,
            });
        }
    }
    Err(Error::Infeasible(format!(
        "no support of size at most {k_max} reproduces y"
    )))
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sampling::normal;
    use crate::seed::rng_from_seed;

    #[test]
    fn combinations_enumerate_in_order() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        assert_eq!(enumeration_size(20, 3), DEFAULT_ENUMERATION_BUDGET);
        assert_eq!(enumeration_size(12, 2), 79);
    }

    #[test]
    fn zero_measurements() {
        let b = DMatrix::from_element(3, 5, 1.0);
        let sol = brute_force_oracle(&b, &DVector::zeros(3), 2).unwrap();
        assert!(sol.support.is_empty());
        assert_eq!(sol.x_hat, DVector::zeros(5));
        assert!(sol.unique);
    }

    #[test]
    fn recovers_generating_support() {
        let mut rng = rng_from_seed(4);
        let b = DMatrix::from_fn(8, 12, |_, _| normal(&mut rng, 1.0));
        let mut x = DVector::zeros(12);
        x[2] = 13.0;
        x[7] = -11.0;
        let sol = brute_force_oracle(&b, &(&b * &x), 3).unwrap();
        assert_eq!(sol.support, vec![2, 7]);
        assert!(sol.unique);
        assert!((sol.x_hat - x).amax() < 1e-9);
    }

    #[test]
    fn refuses_large_enumerations() {
        let b = DMatrix::from_element(3, 30, 1.0);
        assert!(matches!(
            brute_force_oracle(&b, &DVector::zeros(3), 3),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn ambiguous_supports_are_flagged() {
        // columns 0 and 1 are identical: two 1-sparse fits
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0]);
        let y = DVector::from_vec(vec![3.0, 6.0]);
        let sol = brute_force_oracle(&b, &y, 2).unwrap();
        assert_eq!(sol.support, vec![0]);
        assert!(!sol.unique);
    }

    #[test]
    fn no_consistent_support() {
        let mut rng = rng_from_seed(5);
        let b = DMatrix::from_fn(6, 8, |_, _| normal(&mut rng, 1.0));
        let y = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        assert!(matches!(brute_force_oracle(&b, &y, 1), Err(Error::Infeasible(_))));
    }
}
