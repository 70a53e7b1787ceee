use crate::stats::EnsembleExtremes;
use crate::{Error, Real, Result};

/// Per-node transmission parameters and the channel dimensions.
///
/// Node `j` transmits in a given slot with probability `gamma[j]`, scales its
/// reading by a `Normal(0, sigma[j]^2)` coefficient and reaches the fusion
/// centre through a `Rayleigh(nu[j])` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig<T: Real> {
    m: usize,
    gamma: Vec<T>,
    sigma: Vec<T>,
    nu: Vec<T>,
    sigma_v2: T,
    energy_cap: Option<Vec<T>>,
    total_energy: Option<T>,
}

impl<T: Real> NetworkConfig<T> {
    pub fn new(m: usize, gamma: Vec<T>, sigma: Vec<T>, nu: Vec<T>, sigma_v2: T) -> Result<Self> {
        let n = gamma.len();
        if sigma.len() != n || nu.len() != n {
            return Err(Error::dim(format!(
                "per-node vectors differ in length: gamma {}, sigma {}, nu {}",
                n,
                sigma.len(),
                nu.len()
            )));
        }
        if n == 0 {
            return Err(Error::dim("network has no nodes"));
        }
        if m == 0 {
            return Err(Error::dim("at least one MAC transmission is required"));
        }
        for (j, &g) in gamma.iter().enumerate() {
            if !(g > T::zero() && g <= T::one()) {
                return Err(Error::param(format!("gamma[{j}] = {g} outside (0, 1]")));
            }
        }
        for (j, (&s, &v)) in sigma.iter().zip(&nu).enumerate() {
            if !(s > T::zero()) || !(v > T::zero()) {
                return Err(Error::param(format!(
                    "node {j}: sigma = {s} and nu = {v} must be positive"
                )));
            }
        }
        if !(sigma_v2 >= T::zero()) {
            return Err(Error::param(format!("noise variance {sigma_v2} is negative")));
        }
        Ok(Self {
            m,
            gamma,
            sigma,
            nu,
            sigma_v2,
            energy_cap: None,
            total_energy: None,
        })
    }

    /// Identical nodes: every node shares `gamma`, `sigma` and `nu`.
    pub fn uniform(n: usize, m: usize, gamma: T, sigma: T, nu: T, sigma_v2: T) -> Result<Self> {
        Self::new(m, vec![gamma; n], vec![sigma; n], vec![nu; n], sigma_v2)
    }

    /// Attaches per-node average-power caps; requires `gamma_j sigma_j^2 <= E_j`.
    pub fn with_energy_cap(mut self, caps: Vec<T>) -> Result<Self> {
        if caps.len() != self.n() {
            return Err(Error::dim(format!(
                "{} energy caps for {} nodes",
                caps.len(),
                self.n()
            )));
        }
        for (j, &cap) in caps.iter().enumerate() {
            if !(cap >= T::zero()) {
                return Err(Error::param(format!("energy cap {j} is negative")));
            }
            let power = self.gamma[j] * self.sigma[j] * self.sigma[j];
            if power > cap {
                return Err(Error::param(format!(
                    "node {j}: average power {power} exceeds cap {cap}"
                )));
            }
        }
        self.energy_cap = Some(caps);
        Ok(self)
    }

    pub fn with_total_energy(mut self, total: T) -> Result<Self> {
        if !(total >= T::zero()) {
            return Err(Error::param("total energy budget is negative"));
        }
        self.total_energy = Some(total);
        Ok(self)
    }

    pub fn with_m(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::dim("at least one MAC transmission is required"));
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_noise(mut self, sigma_v2: T) -> Result<Self> {
        if !(sigma_v2 >= T::zero()) {
            return Err(Error::param(format!("noise variance {sigma_v2} is negative")));
        }
        self.sigma_v2 = sigma_v2;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn sigma_v2(&self) -> T {
        self.sigma_v2
    }

    pub fn energy_cap(&self) -> Option<&[T]> {
        self.energy_cap.as_deref()
    }

    pub fn total_energy(&self) -> Option<T> {
        self.total_energy
    }

    /// Laplace scale of node `j`'s active entries, `sigma_j * nu_j`.
    pub fn sigma_bar(&self, j: usize) -> T {
        self.sigma[j] * self.nu[j]
    }

    pub fn sigma_bars(&self) -> Vec<T> {
        (0..self.n()).map(|j| self.sigma_bar(j)).collect()
    }

    pub fn extremes(&self) -> EnsembleExtremes<T> {
        EnsembleExtremes::from_nodes(&self.gamma, &self.sigma_bars())
            .expect("validated configuration has positive node parameters")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_gamma() {
        assert!(NetworkConfig::uniform(3, 2, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(NetworkConfig::uniform(3, 2, 1.5, 1.0, 1.0, 0.0).is_err());
        assert!(NetworkConfig::uniform(3, 2, 1.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn rejects_nonpositive_scales_and_mismatched_lengths() {
        assert!(NetworkConfig::uniform(3, 2, 0.5, 0.0, 1.0, 0.0).is_err());
        assert!(NetworkConfig::uniform(3, 2, 0.5, 1.0, -1.0, 0.0).is_err());
        assert!(NetworkConfig::new(2, vec![0.5; 3], vec![1.0; 2], vec![1.0; 3], 0.0).is_err());
        assert!(NetworkConfig::uniform(3, 2, 0.5, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn energy_cap_enforces_average_power() {
        let cfg = NetworkConfig::uniform(2, 4, 0.5, 2.0, 1.0, 0.0).unwrap();
        // gamma * sigma^2 = 2
        assert!(cfg.clone().with_energy_cap(vec![2.0, 2.0]).is_ok());
        assert!(cfg.with_energy_cap(vec![2.0, 1.9]).is_err());
    }

    #[test]
    fn extremes_follow_node_parameters() {
        let cfg =
            NetworkConfig::new(5, vec![1.0, 0.25], vec![1.0, 2.0], vec![3.0, 1.0], 0.0).unwrap();
        // sigma_bar = [3, 2]; gamma * sigma_bar^2 = [9, 1]
        let e = cfg.extremes();
        assert_eq!(e.eta_max, 9.0);
        assert_eq!(e.eta_min, 1.0);
        assert_eq!(e.eta_tilde_max, 3.0);
        assert_eq!(e.eta_tilde_min, 2.0);
    }
}
