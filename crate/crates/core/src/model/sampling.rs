//! Scalar samplers shared by the generators and the validation routines.
//!
//! Draws are made in `f64` and converted, so an `f32` run sees the same
//! random stream as an `f64` run with the same seed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Real;

#[inline]
pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R, std_dev: T) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z) * std_dev
}

/// Rayleigh draw by inversion, `h = scale * sqrt(-2 ln u)` with `u` in (0, 1].
#[inline]
pub fn rayleigh<T: Real, R: Rng + ?Sized>(rng: &mut R, scale: T) -> T {
    let u = 1.0 - rng.random::<f64>();
    T::lit((-2.0 * u.ln()).sqrt()) * scale
}

#[inline]
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// One entry of `B`: `h * a` with probability `gamma`, else zero.
#[inline]
pub fn mixture_entry<T: Real, R: Rng + ?Sized>(rng: &mut R, gamma: T, sigma: T, nu: T) -> T {
    let active = bernoulli(rng, gamma.as_f64());
    let a = normal(rng, sigma);
    let h = rayleigh(rng, nu);
    if active {
        a * h
    } else {
        T::zero()
    }
}
