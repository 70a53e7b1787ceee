use nalgebra::DVector;
use rand::Rng;

use crate::{Error, Real, Result};

/// A `k`-sparse vector together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal<T: Real> {
    values: DVector<T>,
    support: Vec<usize>,
}

impl<T: Real> SparseSignal<T> {
    /// Builds a signal from dense values; the support is read off the
    /// nonzero entries.
    pub fn from_values(values: DVector<T>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, _)| i)
            .collect();
        Self { values, support }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_values(DVector::zeros(n))
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    /// Ascending support indices.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// `sgn(x^S)`: signs of the entries on the support, in support order.
    pub fn sign_pattern(&self) -> DVector<T> {
        DVector::from_iterator(
            self.support.len(),
            self.support.iter().map(|&i| self.values[i].signum()),
        )
    }

    pub fn norm(&self) -> T {
        self.values.norm()
    }
}

/// Draws a `k`-sparse signal of length `n`.
///
/// The support is uniform over `k`-subsets, magnitudes are uniform in
/// `[lo, hi]` and signs are independent fair coin flips.
pub fn generate_signal<T: Real, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    lo: T,
    hi: T,
    rng: &mut R,
) -> Result<SparseSignal<T>> {
    if k > n {
        return Err(Error::dim(format!("sparsity {k} exceeds length {n}")));
    }
    if !(lo > T::zero() && lo < hi) {
        return Err(Error::param(format!(
            "magnitude range must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
    let mut values = DVector::zeros(n);
    for &i in &support {
        let magnitude = T::lit(rng.random_range(lo64..=hi64));
        values[i] = if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        };
    }
    Ok(SparseSignal { values, support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn draws_exactly_k_nonzeros_in_range() {
        let mut rng = rng_from_seed(11);
        let x = generate_signal(100, 10, 10.0f64, 20.0, &mut rng).unwrap();
        assert_eq!(x.sparsity(), 10);
        assert_eq!(x.values().iter().filter(|v| **v != 0.0).count(), 10);
        for &i in x.support() {
            let m = x.values()[i].abs();
            assert!((10.0..=20.0).contains(&m));
        }
        assert!(x.support().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_support() {
        let mut rng = rng_from_seed(1);
        let x = generate_signal::<f64, _>(5, 0, 10.0, 20.0, &mut rng).unwrap();
        assert_eq!(x.sparsity(), 0);
        assert_eq!(x.values(), &DVector::zeros(5));
        assert_eq!(x.sign_pattern().len(), 0);
    }

    #[test]
    fn full_support() {
        let mut rng = rng_from_seed(2);
        let x = generate_signal::<f32, _>(8, 8, 10.0, 20.0, &mut rng).unwrap();
        assert_eq!(x.support(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn rejects_k_above_n() {
        let mut rng = rng_from_seed(3);
        let err = generate_signal::<f64, _>(4, 5, 1.0, 2.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn rejects_bad_range() {
        let mut rng = rng_from_seed(3);
        assert!(generate_signal::<f64, _>(4, 2, 0.0, 2.0, &mut rng).is_err());
        assert!(generate_signal::<f64, _>(4, 2, 3.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn sign_pattern_matches_support_values() {
        let x = SparseSignal::from_values(DVector::from_vec(vec![0.0, -3.0, 0.0, 2.5]));
        assert_eq!(x.support(), &[1, 3]);
        assert_eq!(x.sign_pattern().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn support_is_roughly_uniform() {
        // Each index should be chosen with probability k/n = 0.3.
        let mut rng = rng_from_seed(5);
        let (n, k, reps) = (10, 3, 20_000);
        let mut hits = vec![0usize; n];
        for _ in 0..reps {
            let x = generate_signal::<f64, _>(n, k, 1.0, 2.0, &mut rng).unwrap();
            for &i in x.support() {
                hits[i] += 1;
            }
        }
        let p = k as f64 / n as f64;
        let sd = (reps as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - reps as f64 * p).abs() < 4.0 * sd);
        }
    }
}
