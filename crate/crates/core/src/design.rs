//! Transmission-probability and energy design.

use crate::{Error, Real, Result};

fn check_positive<T: Real>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Empty(format!("{name} vector")));
    }
    match v.iter().find(|x| !(**x > T::zero())) {
        Some(bad) => Err(Error::param(format!("{name} entries must be positive, got {bad}"))),
        None => Ok(()),
    }
}

/// Inhomogeneity factor of the dominant `M2` term when all nodes share
/// `sigma_a`:
///
/// ```text
/// Psi = sqrt(max(gamma nu^2) max(nu^2) / min(gamma nu^2)^2)
/// ```
pub fn psi<T: Real>(gamma: &[T], nu: &[T]) -> Result<T> {
    if gamma.len() != nu.len() {
        return Err(Error::dim(format!(
            "gamma has {} entries, nu has {}",
            gamma.len(),
            nu.len()
        )));
    }
    check_positive("gamma", gamma)?;
    check_positive("nu", nu)?;
    if let Some(g) = gamma.iter().find(|g| **g > T::one()) {
        return Err(Error::param(format!("gamma entries must not exceed 1, got {g}")));
    }
    let weighted: Vec<T> = gamma.iter().zip(nu).map(|(&g, &v)| g * v * v).collect();
    let w_max = weighted.iter().fold(T::zero(), |m, &w| m.max(w));
    let w_min = weighted.iter().fold(w_max, |m, &w| m.min(w));
    let nu2_max = nu.iter().fold(T::zero(), |m, &v| m.max(v * v));
    Ok((w_max * nu2_max).sqrt() / w_min)
}

/// Nodes sharing one amplitude variance and one per-node energy cap.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem<T: Real> {
    nu: Vec<T>,
    sigma_a2: T,
    energy_per_node: T,
    total_energy: Option<T>,
}

impl<T: Real> DesignProblem<T> {
    pub fn new(nu: Vec<T>, sigma_a2: T, energy_per_node: T) -> Result<Self> {
        check_positive("nu", &nu)?;
        if !(sigma_a2 > T::zero()) {
            return Err(Error::param(format!("sigma_a^2 must be positive, got {sigma_a2}")));
        }
        if !(energy_per_node > T::zero()) {
            return Err(Error::param(format!(
                "per-node energy must be positive, got {energy_per_node}"
            )));
        }
        Ok(Self { nu, sigma_a2, energy_per_node, total_energy: None })
    }

    /// Builds a problem from per-node caps, which must all be equal.
    pub fn from_caps(nu: Vec<T>, sigma_a2: T, caps: &[T]) -> Result<Self> {
        if caps.len() != nu.len() {
            return Err(Error::dim("one energy cap per node required"));
        }
        let first = *caps.first().ok_or_else(|| Error::Empty("energy caps".into()))?;
        if caps.iter().any(|&c| c != first) {
            return Err(Error::param("heterogeneous per-node energy caps are not supported"));
        }
        Self::new(nu, sigma_a2, first)
    }

    pub fn with_total_energy(mut self, total: T) -> Result<Self> {
        if !(total >= T::zero()) {
            return Err(Error::param("total energy must be nonnegative"));
        }
        self.total_energy = Some(total);
        Ok(self)
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn sigma_a2(&self) -> T {
        self.sigma_a2
    }

    pub fn total_energy(&self) -> Option<T> {
        self.total_energy
    }

    /// Largest transmission probability the energy cap allows,
    /// `min(1, E / sigma_a^2)`.
    pub fn gamma_bar(&self) -> T {
        T::one().min(self.energy_per_node / self.sigma_a2)
    }
}

/// `gamma_j = gamma_bar nu_min^2 / nu_j^2`, in the caller's node order.
///
/// This equalizes `gamma_j nu_j^2` across nodes, which minimizes `Psi`; the
/// best node transmits with probability `gamma_bar`.
pub fn optimal_gamma<T: Real>(problem: &DesignProblem<T>) -> Vec<T> {
    let nu_min = problem.nu.iter().fold(problem.nu[0], |m, &v| m.min(v));
    let gamma_bar = problem.gamma_bar();
    problem
        .nu
        .iter()
        .map(|&v| (gamma_bar * (nu_min / v).powi(2)).min(gamma_bar))
        .collect()
}

/// Energy spent by the network over `M` transmissions, `M gamma N sigma_a^2`.
pub fn required_energy<T: Real>(m: usize, gamma: T, n: usize, sigma_a2: T) -> T {
    T::count(m) * gamma * T::count(n) * sigma_a2
}

/// Largest common `gamma` whose corollary measurement count fits a total
/// energy budget:
///
/// ```text
/// gamma* = min(1, E_total / (C0 sigma_a^2 k N ln(2N/eps)))^2
/// ```
pub fn max_gamma_under_budget<T: Real>(
    total_energy: T,
    c0: T,
    sigma_a2: T,
    k: usize,
    n: usize,
    epsilon: T,
) -> Result<T> {
    if !(total_energy > T::zero() && c0 > T::zero() && sigma_a2 > T::zero()) {
        return Err(Error::param("energy, C0 and sigma_a^2 must be positive"));
    }
    if k == 0 || n == 0 || !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::param("need k, N >= 1 and epsilon in (0, 1)"));
    }
    let scale = c0 * sigma_a2 * T::count(k) * T::count(n)
        * (T::lit(2.0) * T::count(n) / epsilon).ln();
    Ok(T::one().min(total_energy / scale).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::corollary_iid_bound;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn psi_identical_channels() {
        assert_eq!(psi(&[1.0; 4], &[2.0; 4]).unwrap(), 1.0);
        let v = psi(&[0.25f64; 3], &[1.5; 3]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn psi_errors() {
        assert!(matches!(psi(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
        assert!(psi(&[0.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(psi(&[1.5, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn optimal_gamma_by_hand() {
        let p = DesignProblem::new(vec![1.0, 2.0, 4.0], 1.0, 0.5).unwrap();
        assert_eq!(p.gamma_bar(), 0.5);
        assert_eq!(optimal_gamma(&p), vec![0.5, 0.125, 0.03125]);
        // caller order is kept
        let p = DesignProblem::new(vec![4.0, 1.0, 2.0], 2.0, 1.0).unwrap();
        assert_eq!(optimal_gamma(&p), vec![0.03125, 0.5, 0.125]);
        let p = DesignProblem::new(vec![3.0; 5], 1.0, 7.0).unwrap();
        assert_eq!(optimal_gamma(&p), vec![1.0; 5]);
    }

    #[test]
    fn optimal_psi_closed_form() {
        let nu = vec![1.0f64, 10.0];
        let g = optimal_gamma(&DesignProblem::new(nu.clone(), 1.0, 1.0).unwrap());
        assert!((psi(&g, &nu).unwrap() - 10.0).abs() < 1e-12);
        let nu = vec![2.0, 3.0, 7.0];
        let p = DesignProblem::new(nu.clone(), 1.0, 0.3).unwrap();
        let expect = (49.0 / (0.3 * 4.0f64)).sqrt();
        assert!((psi(&optimal_gamma(&p), &nu).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn grid_search_two_nodes() {
        let nu = [1.0, 10.0];
        let best = psi(&optimal_gamma(&DesignProblem::new(nu.to_vec(), 1.0, 1.0).unwrap()), &nu)
            .unwrap();
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.01).collect();
        let mut grid_min = f64::INFINITY;
        for &a in &grid {
            for &b in &grid {
                grid_min = grid_min.min(psi(&[a, b], &nu).unwrap());
            }
        }
        assert!(best <= grid_min + 1e-12);
        // the optimum (1, 0.01) lies on the grid
        assert!((grid_min - best).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_caps_rejected() {
        assert!(DesignProblem::from_caps(vec![1.0, 2.0], 1.0, &[1.0, 2.0]).is_err());
        let p = DesignProblem::from_caps(vec![1.0, 2.0], 2.0, &[1.0, 1.0]).unwrap();
        assert_eq!(p.gamma_bar(), 0.5);
    }

    #[test]
    fn energy_formulas() {
        assert_eq!(required_energy(100, 0.2, 100, 1.0), 2000.0);
        assert_eq!(required_energy(100, 0.0, 100, 1.0), 0.0);
        assert_eq!(required_energy(200, 0.2, 100, 1.0), 4000.0);
        let scale = 10.0 * 100.0 * 20000f64.ln();
        assert_eq!(max_gamma_under_budget(1e12, 1.0, 1.0, 10, 100, 0.01).unwrap(), 1.0);
        let g = max_gamma_under_budget(scale / 2.0, 1.0, 1.0, 10, 100, 0.01).unwrap();
        assert!((g - 0.25).abs() < 1e-12);
    }

    #[test]
    fn budget_closes_the_loop() {
        for budget in [1e3, 5e3, 2e4, 1e5, 1e7] {
            let g = max_gamma_under_budget(budget, 1.0, 1.0, 10, 100, 0.01).unwrap();
            let m = corollary_iid_bound(10, 100, g, 0.01, 1.0).unwrap();
            let spent = m * g * 100.0;
            assert!(spent <= budget * (1.0 + 1e-12), "budget {budget}: spent {spent}");
        }
    }

    #[test]
    fn random_search_never_beats_design() {
        let mut rng = rng_from_seed(77);
        for _ in 0..50 {
            let nu: Vec<f64> = (0..6).map(|_| rng.random_range(1.0..10.0)).collect();
            let best = psi(&optimal_gamma(&DesignProblem::new(nu.clone(), 1.0, 1.0).unwrap()), &nu)
                .unwrap();
            for _ in 0..200 {
                let g: Vec<f64> = (0..6).map(|_| 1.0 - rng.random::<f64>()).collect();
                assert!(best <= psi(&g, &nu).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn design_equalizes_and_is_scale_free(
            nu in prop::collection::vec(0.5f64..20.0, 1..20),
            c in 0.1f64..10.0,
            cap in 0.05f64..3.0,
        ) {
            let p = DesignProblem::new(nu.clone(), 1.0, cap).unwrap();
            let g = optimal_gamma(&p);
            let w: Vec<f64> = g.iter().zip(&nu).map(|(g, v)| g * v * v).collect();
            let (lo, hi) = w.iter().fold((f64::MAX, 0f64), |(l, h), &x| (l.min(x), h.max(x)));
            prop_assert!(hi - lo <= 1e-12 * hi);
            prop_assert!(g.iter().all(|&x| x > 0.0 && x <= p.gamma_bar()));
            let scaled: Vec<f64> = nu.iter().map(|v| v * c).collect();
            let g2 = optimal_gamma(&DesignProblem::new(scaled, 1.0, cap).unwrap());
            for (a, b) in g.iter().zip(&g2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!(psi(&g, &nu).unwrap() >= 1.0 - 1e-12);
        }
    }
}
