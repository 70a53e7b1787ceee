use nalgebra::{DMatrix, DVector};

use super::sampling;
use super::{NetworkConfig, SparseSignal};
use crate::seed::rng_from_seed;
use crate::{Error, Real, Result};

/// One realization of the measurement process.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble<T: Real> {
    /// Sparse Gaussian projection, `M x N`.
    pub a: DMatrix<T>,
    /// Channel amplitudes, `M x N`, all nonnegative.
    pub h: DMatrix<T>,
    /// Effective matrix `H ⊙ A`.
    pub b: DMatrix<T>,
    pub y: DVector<T>,
    pub v: DVector<T>,
    pub seed: u64,
}

impl<T: Real> MeasurementEnsemble<T> {
    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn n(&self) -> usize {
        self.b.ncols()
    }
}

fn check_dims<T: Real>(x: &SparseSignal<T>, cfg: &NetworkConfig<T>) -> Result<()> {
    if x.len() != cfg.n() {
        return Err(Error::dim(format!(
            "signal has length {} but the network has {} nodes",
            x.len(),
            cfg.n()
        )));
    }
    Ok(())
}

/// Draws `A`, `H` and the noise from `seed` and forms `y = (H ⊙ A) x + v`.
///
/// Entries are drawn row by row; for each `(i, j)` the activation coin, the
/// Gaussian coefficient and the Rayleigh amplitude are consumed in that
/// order, then the `M` noise samples. The result is a pure function of
/// `(seed, cfg, x)`.
pub fn generate_ensemble<T: Real>(
    x: &SparseSignal<T>,
    cfg: &NetworkConfig<T>,
    seed: u64,
) -> Result<MeasurementEnsemble<T>> {
    check_dims(x, cfg)?;
    let (m, n) = (cfg.m(), cfg.n());
    let mut rng = rng_from_seed(seed);
    let mut a = DMatrix::zeros(m, n);
    let mut h = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let active = sampling::bernoulli(&mut rng, cfg.gamma()[j].as_f64());
            let coef = sampling::normal(&mut rng, cfg.sigma()[j]);
            h[(i, j)] = sampling::rayleigh(&mut rng, cfg.nu()[j]);
            if active {
                a[(i, j)] = coef;
            }
        }
    }
    let b = h.component_mul(&a);
    finish(x, cfg, a, h, b, &mut rng, seed)
}

/// Same draws as [`generate_ensemble`] for `A` and the noise, but with an
/// ideal channel: `H` is all ones and `B = A`.
pub fn awgn_ensemble<T: Real>(
    x: &SparseSignal<T>,
    cfg: &NetworkConfig<T>,
    seed: u64,
) -> Result<MeasurementEnsemble<T>> {
    check_dims(x, cfg)?;
    let (m, n) = (cfg.m(), cfg.n());
    let mut rng = rng_from_seed(seed);
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let active = sampling::bernoulli(&mut rng, cfg.gamma()[j].as_f64());
            let coef = sampling::normal(&mut rng, cfg.sigma()[j]);
            // keep the stream aligned with the fading generator
            let _: T = sampling::rayleigh(&mut rng, cfg.nu()[j]);
            if active {
                a[(i, j)] = coef;
            }
        }
    }
    let h = DMatrix::from_element(m, n, T::one());
    let b = a.clone();
    finish(x, cfg, a, h, b, &mut rng, seed)
}

fn finish<T: Real>(
    x: &SparseSignal<T>,
    cfg: &NetworkConfig<T>,
    a: DMatrix<T>,
    h: DMatrix<T>,
    b: DMatrix<T>,
    rng: &mut crate::seed::SimRng,
    seed: u64,
) -> Result<MeasurementEnsemble<T>> {
    let std_dev = cfg.sigma_v2().sqrt();
    let v = DVector::from_fn(cfg.m(), |_, _| sampling::normal(rng, std_dev));
    let y = &b * x.values() + &v;
    Ok(MeasurementEnsemble {
        a,
        h,
        b,
        y,
        v,
        seed,
    })
}
