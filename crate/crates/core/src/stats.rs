//! Distributional laws of the effective matrix entries and the concentration
//! tools built on them.
//!
//! An active entry of `B` is the product of a `Normal(0, sigma^2)` coefficient
//! and a `Rayleigh(nu)` amplitude, which is Laplace with scale
//! `sigma_bar = sigma * nu`. With the transmission coin included the entry
//! follows [`MixtureLaw`]: Laplace mass `gamma` plus an atom `1 - gamma` at
//! zero.

use rand::Rng;

use crate::model::sampling;
use crate::{Error, Real, Result};

/// Density of `h * a` for `a ~ Normal(0, sigma_a^2)`, `h ~ Rayleigh(nu_h)`:
/// Laplace with scale `sigma_a * nu_h`.
pub fn laplace_product_pdf<T: Real>(w: T, sigma_a: T, nu_h: T) -> Result<T> {
    if !(sigma_a > T::zero() && nu_h > T::zero()) {
        return Err(Error::param(format!(
            "scales must be positive, got sigma_a = {sigma_a}, nu_h = {nu_h}"
        )));
    }
    let scale = sigma_a * nu_h;
    Ok((-w.abs() / scale).exp() / (T::lit(2.0) * scale))
}

/// CDF of the zero-mean Laplace law with the given scale.
pub fn laplace_cdf<T: Real>(w: T, scale: T) -> T {
    let half = T::lit(0.5);
    if w < T::zero() {
        half * (w / scale).exp()
    } else {
        T::one() - half * (-w / scale).exp()
    }
}

/// Law of one entry of `B` for a node with activation probability `gamma`
/// and Laplace scale `sigma_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureLaw<T: Real> {
    gamma: T,
    sigma_bar: T,
}

impl<T: Real> MixtureLaw<T> {
    pub fn new(gamma: T, sigma_bar: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::param(format!("gamma = {gamma} outside (0, 1]")));
        }
        if !(sigma_bar > T::zero()) {
            return Err(Error::param(format!("sigma_bar = {sigma_bar} must be positive")));
        }
        Ok(Self { gamma, sigma_bar })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn sigma_bar(&self) -> T {
        self.sigma_bar
    }

    /// Absolutely continuous part of the density (the Laplace component
    /// weighted by `gamma`); the remaining mass sits at zero.
    pub fn density(&self, u: T) -> T {
        self.gamma * (-u.abs() / self.sigma_bar).exp() / (T::lit(2.0) * self.sigma_bar)
    }

    /// Mass of the atom at zero.
    pub fn atom(&self) -> T {
        T::one() - self.gamma
    }

    pub fn cdf(&self, u: T) -> T {
        let step = if u >= T::zero() { self.atom() } else { T::zero() };
        self.gamma * laplace_cdf(u, self.sigma_bar) + step
    }

    /// `Pr(|u| > t)`: one at `t = 0`, `gamma * exp(-t / sigma_bar)` beyond.
    pub fn tail(&self, t: T) -> Result<T> {
        if t < T::zero() {
            return Err(Error::domain(format!("tail threshold t = {t} is negative")));
        }
        if t.is_zero() {
            return Ok(T::one());
        }
        Ok(self.gamma * (-t / self.sigma_bar).exp())
    }

    /// Exact moment generating function `1 + gamma s^2 t^2 / (1 - s^2 t^2)`,
    /// finite for `|t| < 1 / sigma_bar`.
    pub fn mgf(&self, t: T) -> Result<T> {
        let limit = T::one() / self.sigma_bar;
        if t.abs() >= limit {
            return Err(Error::Divergence {
                t: t.abs().as_f64(),
                limit: limit.as_f64(),
            });
        }
        let st2 = self.sigma_bar * self.sigma_bar * t * t;
        Ok(T::one() + self.gamma * st2 / (T::one() - st2))
    }

    /// Second moment `2 gamma sigma_bar^2`.
    pub fn second_moment(&self) -> T {
        T::lit(2.0) * self.gamma * self.sigma_bar * self.sigma_bar
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if !sampling::bernoulli(rng, self.gamma.as_f64()) {
            return T::zero();
        }
        // Laplace by inversion of the two-sided exponential
        let u = rng.random::<f64>() - 0.5;
        let mag = -(1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln();
        T::lit(mag.copysign(u)) * self.sigma_bar
    }
}

/// Free-function form of [`MixtureLaw::tail`].
pub fn mixture_tail<T: Real>(t: T, law: &MixtureLaw<T>) -> Result<T> {
    law.tail(t)
}

/// Free-function form of [`MixtureLaw::mgf`].
pub fn mgf_exact<T: Real>(t: T, law: &MixtureLaw<T>) -> Result<T> {
    law.mgf(t)
}

/// Extreme node parameters entering the concentration bounds and the
/// measurement-count formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleExtremes<T: Real> {
    /// `max_j gamma_j sigma_bar_j^2`
    pub eta_max: T,
    /// `min_j gamma_j sigma_bar_j^2`
    pub eta_min: T,
    /// `max_j sigma_bar_j`
    pub eta_tilde_max: T,
    /// `min_j sigma_bar_j`
    pub eta_tilde_min: T,
}

impl<T: Real> EnsembleExtremes<T> {
    pub fn from_nodes(gamma: &[T], sigma_bar: &[T]) -> Result<Self> {
        if gamma.len() != sigma_bar.len() {
            return Err(Error::dim("gamma and sigma_bar lengths differ"));
        }
        let laws = gamma
            .iter()
            .zip(sigma_bar)
            .map(|(&g, &s)| MixtureLaw::new(g, s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_laws(&laws)
    }

    pub fn from_laws(laws: &[MixtureLaw<T>]) -> Result<Self> {
        let first = laws.first().ok_or_else(|| Error::Empty("no node laws".into()))?;
        let eta = |l: &MixtureLaw<T>| l.gamma * l.sigma_bar * l.sigma_bar;
        let mut out = Self {
            eta_max: eta(first),
            eta_min: eta(first),
            eta_tilde_max: first.sigma_bar,
            eta_tilde_min: first.sigma_bar,
        };
        for l in &laws[1..] {
            out.eta_max = out.eta_max.max(eta(l));
            out.eta_min = out.eta_min.min(eta(l));
            out.eta_tilde_max = out.eta_tilde_max.max(l.sigma_bar);
            out.eta_tilde_min = out.eta_tilde_min.min(l.sigma_bar);
        }
        Ok(out)
    }

    /// Identical nodes.
    pub fn iid(gamma: T, sigma_bar: T) -> Result<Self> {
        Self::from_laws(&[MixtureLaw::new(gamma, sigma_bar)?])
    }
}

/// `exp(eta_max t^2)` on `|t| <= 1 / eta_tilde_max`.
///
/// This is the moment bound as stated for the mixture law. It is not a true
/// upper bound on [`MixtureLaw::mgf`]: the exact value is
/// `1 + gamma s (1 + s + s^2 + ...)` with `s = sigma_bar^2 t^2`, whose
/// second-order coefficient `gamma` exceeds the `gamma^2 / 2` of the
/// exponential, so the exact MGF is strictly larger for every `t != 0`.
/// Within the window the ratio exact/bound stays below `4/3`.
pub fn mgf_bound<T: Real>(t: T, extremes: &EnsembleExtremes<T>) -> Result<T> {
    let limit = T::one() / extremes.eta_tilde_max;
    if t.abs() > limit {
        return Err(Error::domain(format!(
            "|t| = {} exceeds 1/eta_tilde_max = {limit}",
            t.abs()
        )));
    }
    Ok((extremes.eta_max * t * t).exp())
}

/// Bernstein-type tail bound for `|sum_i alpha_i u_i|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinBound<T: Real> {
    /// `2 exp(-min(t^2 / (4 eta_max |a|_2^2), t / (2 eta_tilde_max |a|_inf)))`
    pub raw: T,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: T,
}

pub fn bernstein_bound<T: Real>(
    t: T,
    alpha: &[T],
    extremes: &EnsembleExtremes<T>,
) -> Result<BernsteinBound<T>> {
    if !(t > T::zero()) {
        return Err(Error::domain(format!("threshold t = {t} must be positive")));
    }
    let l2sq = alpha.iter().fold(T::zero(), |acc, &a| acc + a * a);
    let linf = alpha.iter().fold(T::zero(), |acc, &a| acc.max(a.abs()));
    if linf.is_zero() {
        return Err(Error::Degenerate("weight vector alpha is zero".into()));
    }
    let quadratic = t * t / (T::lit(4.0) * extremes.eta_max * l2sq);
    let linear = t / (T::lit(2.0) * extremes.eta_tilde_max * linf);
    let raw = T::lit(2.0) * (-quadratic.min(linear)).exp();
    Ok(BernsteinBound {
        raw,
        clamped: raw.min(T::one()),
    })
}

/// Estimates `sup_p (E|x|^p)^(1/p) / p` over integer `p` in `1..=p_max` from
/// samples.
pub fn subexp_norm_estimate<T: Real>(samples: &[T], p_max: u32) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    if p_max == 0 {
        return Err(Error::param("p_max must be at least 1"));
    }
    // Normalise by the largest magnitude so high powers do not overflow.
    let scale = samples.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if scale.is_zero() {
        return Ok(T::zero());
    }
    let n = T::count(samples.len());
    let mut best = T::zero();
    for p in 1..=p_max {
        let pf = T::lit(f64::from(p));
        let moment = samples
            .iter()
            .fold(T::zero(), |acc, &x| acc + (x.abs() / scale).powi(p as i32))
            / n;
        best = best.max(moment.powf(T::one() / pf) * scale / pf);
    }
    Ok(best)
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and a
/// continuous CDF. Sorts `samples` in place.
pub fn ks_statistic<T: Real>(samples: &mut [T], cdf: impl Fn(T) -> T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).expect("samples contain NaN"));
    let n = T::count(samples.len());
    let mut d = T::zero();
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = T::count(i) / n;
        let hi = T::count(i + 1) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d)
}

/// Fraction of samples with `|x| >= t`.
pub fn empirical_tail<T: Real>(samples: &[T], t: T) -> T {
    let hits = samples.iter().filter(|x| x.abs() >= t).count();
    T::count(hits) / T::count(samples.len().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn product_pdf_values() {
        assert_relative_eq!(laplace_product_pdf(0.0, 1.0, 1.0).unwrap(), 0.5);
        assert_relative_eq!(
            laplace_product_pdf(2.0, 1.0, 2.0).unwrap(),
            0.25 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            laplace_product_pdf(2.0f32, 1.0, 2.0).unwrap(),
            0.091_969_86,
            max_relative = 1e-6
        );
        assert!(laplace_product_pdf(1.0, 0.0, 1.0).is_err());
        assert!(laplace_product_pdf(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn tail_values() {
        let law = MixtureLaw::new(0.3, 2.0).unwrap();
        assert_eq!(law.tail(0.0).unwrap(), 1.0);
        let iid = MixtureLaw::new(1.0, 2.0).unwrap();
        assert_relative_eq!(iid.tail(2.0).unwrap(), (-1.0f64).exp());
        assert!(matches!(law.tail(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn empirical_tail_matches_closed_form() {
        let law = MixtureLaw::new(0.4, 1.5).unwrap();
        let mut rng = rng_from_seed(3);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        for mult in [0.5, 1.0, 2.0] {
            let t = mult * law.sigma_bar();
            let p = law.tail(t).unwrap();
            let emp = empirical_tail(&samples, t);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 3.0 * sd, "t = {t}: {emp} vs {p}");
        }
    }

    #[test]
    fn mgf_values_and_divergence() {
        let law = MixtureLaw::new(1.0, 1.0).unwrap();
        assert_eq!(law.mgf(0.0).unwrap(), 1.0);
        assert_relative_eq!(law.mgf(0.5).unwrap(), 4.0 / 3.0, max_relative = 1e-15);
        let sparse = MixtureLaw::new(0.1, 1.0).unwrap();
        assert_relative_eq!(
            sparse.mgf(0.3).unwrap(),
            1.0 + 0.1 * 0.09 / 0.91,
            max_relative = 1e-15
        );
        assert!(matches!(law.mgf(1.0), Err(Error::Divergence { .. })));
        assert!(matches!(law.mgf(-1.2), Err(Error::Divergence { .. })));
    }

    #[test]
    fn mgf_bound_at_zero_and_window() {
        let e = EnsembleExtremes::iid(1.0, 1.0).unwrap();
        assert_eq!(mgf_bound(0.0, &e).unwrap(), 1.0);
        assert_eq!(mgf_bound(0.0, &e).unwrap(), MixtureLaw::new(1.0, 1.0).unwrap().mgf(0.0).unwrap());
        assert!(mgf_bound(1.01, &e).is_err());
    }

    #[test]
    fn mgf_bound_undershoots_exact_mgf_away_from_zero() {
        // The documented looseness: exact 4/3 against exp(0.25) ~ 1.284, and
        // 1.00989 against exp(0.009) ~ 1.00904.
        let e = EnsembleExtremes::iid(1.0, 1.0).unwrap();
        let exact = MixtureLaw::new(1.0, 1.0).unwrap().mgf(0.5).unwrap();
        assert!(exact > mgf_bound(0.5, &e).unwrap());
        let e = EnsembleExtremes::iid(0.1, 1.0).unwrap();
        let exact = MixtureLaw::new(0.1, 1.0).unwrap().mgf(0.3).unwrap();
        assert!(exact > mgf_bound(0.3, &e).unwrap());
        // but never by more than a factor 4/3 inside the window |t| <= 1/(2 sigma_bar)
        for g in [0.05, 0.3, 1.0] {
            let law = MixtureLaw::new(g, 2.0).unwrap();
            let e = EnsembleExtremes::from_laws(&[law]).unwrap();
            for i in 0..=20 {
                let t = 0.25 * i as f64 / 20.0;
                assert!(law.mgf(t).unwrap() <= 4.0 / 3.0 * mgf_bound(t, &e).unwrap());
            }
        }
    }

    #[test]
    fn bernstein_single_variable() {
        let e = EnsembleExtremes::iid(1.0, 1.0).unwrap();
        let b = bernstein_bound(1.0, &[1.0], &e).unwrap();
        assert_relative_eq!(b.raw, 2.0 * (-0.25f64).exp(), max_relative = 1e-15);
        assert_eq!(b.clamped, 1.0);
        let tail = MixtureLaw::new(1.0, 1.0).unwrap().tail(1.0).unwrap();
        assert!(tail <= b.raw);
        let tiny = bernstein_bound(1e-9, &[1.0], &e).unwrap();
        assert!((tiny.raw - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_rejects_degenerate_input() {
        let e = EnsembleExtremes::iid(1.0, 1.0).unwrap();
        assert!(matches!(
            bernstein_bound(1.0, &[0.0, 0.0], &e),
            Err(Error::Degenerate(_))
        ));
        assert!(bernstein_bound(0.0, &[1.0], &e).is_err());
    }

    #[test]
    fn subexp_norm_of_constant() {
        let est = subexp_norm_estimate(&[-3.0; 10], 10).unwrap();
        assert_relative_eq!(est, 3.0, max_relative = 1e-12);
        assert!(subexp_norm_estimate::<f64>(&[], 3).is_err());
        assert!(subexp_norm_estimate(&[1.0], 0).is_err());
    }

    #[test]
    fn subexp_norm_of_laplace() {
        // E|x|^p = p! for Laplace(1); (p!)^(1/p) / p peaks at p = 1 with value 1.
        let law = MixtureLaw::new(1.0, 1.0).unwrap();
        let mut rng = rng_from_seed(9);
        let samples: Vec<f64> = (0..1_000_000).map(|_| law.sample(&mut rng)).collect();
        let est = subexp_norm_estimate(&samples, 10).unwrap();
        assert!((est - 1.0).abs() < 0.05, "estimate {est}");
    }

    #[test]
    fn laplace_moments() {
        let law = MixtureLaw::new(1.0, 2.0).unwrap();
        let mut rng = rng_from_seed(10);
        let n = 200_000;
        let s: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let m1 = s.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let m2 = s.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let tol = 4.0 / (n as f64).sqrt();
        assert!((m1 / 2.0 - 1.0).abs() < tol);
        assert!((m2 / 8.0 - 1.0).abs() < 2.0 * tol);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let mut s: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                if p < 0.5 { (2.0 * p).ln() } else { -(2.0 - 2.0 * p).ln() }
            })
            .collect();
        let d = ks_statistic(&mut s, |w| laplace_cdf(w, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mixture_mass_is_one(g in 0.01f64..=1.0, s in 0.1f64..10.0) {
            let law = MixtureLaw::new(g, s).unwrap();
            // Laplace part integrates to gamma in closed form.
            prop_assert!((law.cdf(1e9 * s) - 1.0).abs() < 1e-12);
            prop_assert!(law.cdf(-1e9 * s).abs() < 1e-12);
            prop_assert!((law.cdf(0.0) - law.cdf(-1e-300) - law.atom()).abs() < 1e-12);
        }

        #[test]
        fn bernstein_monotone_and_sign_symmetric(
            alpha in proptest::collection::vec(-3.0f64..3.0, 1..20),
            t1 in 0.01f64..50.0,
            dt in 0.0f64..50.0,
            g in 0.05f64..=1.0,
            s in 0.2f64..5.0,
        ) {
            prop_assume!(alpha.iter().any(|a| a.abs() > 1e-6));
            let e = EnsembleExtremes::iid(g, s).unwrap();
            let b1 = bernstein_bound(t1, &alpha, &e).unwrap();
            let b2 = bernstein_bound(t1 + dt, &alpha, &e).unwrap();
            prop_assert!(b2.raw <= b1.raw);
            let neg: Vec<f64> = alpha.iter().map(|a| -a).collect();
            prop_assert_eq!(bernstein_bound(t1, &neg, &e).unwrap(), b1);
        }

        #[test]
        fn subexp_norm_is_positively_homogeneous(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..50),
            c in 0.1f64..10.0,
        ) {
            let a = subexp_norm_estimate(&xs, 10).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let b = subexp_norm_estimate(&scaled, 10).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + c * a));
        }
    }
}
