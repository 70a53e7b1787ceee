//! Seeded Monte Carlo experiments.
//!
//! Every trial draws one scenario (signal, channel scales, random
//! transmission probabilities, a measurement stream of `max(m_grid)` rows
//! and a unit noise stream) from a seed derived from the master seed, the
//! experiment id and the trial index. All series and grid points of the
//! trial are evaluated on that scenario: the matrix for `M` rows is the
//! first `M` rows of the stream, and the noise at level `sigma_v^2` is the
//! unit stream scaled by `sigma_v`. Comparisons between curves are
//! therefore paired, and the output does not depend on scheduling.

mod curves;
mod phase;
mod validate;

use std::fmt;
use std::str::FromStr;

pub use curves::{run_experiment, CurvePoint};
pub use phase::{certificate_phase_diagram, PhaseCell};
pub use validate::{validate_statistics, ValidationRow};

use crate::config::Config;
use crate::io::Table;
use crate::solver::SolverSettings;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    /// Error against `M` for several uniform `gamma`, iid fading and AWGN.
    Fig1MseVsM,
    /// Same comparison on a fine `gamma` grid.
    Fig2MseVsGamma,
    /// Error against `M` with nonidentical fading and uniform `gamma`.
    Fig3NonIid,
    /// Matched, dense and random transmission probabilities under
    /// nonidentical fading.
    Fig4OptGamma,
    /// Noisy measurements recovered by BPDN.
    Fig5Noise,
    BernsteinValidate,
    PdfValidate,
    CertificatePhase,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::Fig1MseVsM,
        Self::Fig2MseVsGamma,
        Self::Fig3NonIid,
        Self::Fig4OptGamma,
        Self::Fig5Noise,
        Self::BernsteinValidate,
        Self::PdfValidate,
        Self::CertificatePhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fig1MseVsM => "fig1_mse_vs_M",
            Self::Fig2MseVsGamma => "fig2_mse_vs_gamma",
            Self::Fig3NonIid => "fig3_noniid",
            Self::Fig4OptGamma => "fig4_opt_gamma",
            Self::Fig5Noise => "fig5_noise",
            Self::BernsteinValidate => "bernstein_validate",
            Self::PdfValidate => "pdf_validate",
            Self::CertificatePhase => "certificate_phase",
        }
    }

    pub fn is_curve(self) -> bool {
        matches!(
            self,
            Self::Fig1MseVsM
                | Self::Fig2MseVsGamma
                | Self::Fig3NonIid
                | Self::Fig4OptGamma
                | Self::Fig5Noise
        )
    }

    pub fn is_validation(self) -> bool {
        matches!(self, Self::BernsteinValidate | Self::PdfValidate)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|id| id.as_str()).collect();
                Error::param(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    /// `H` all ones, `B = A`.
    Awgn,
    /// Rayleigh scale `sqrt(nu_h2)` at every node.
    IidFading,
    /// Per-node scales drawn uniformly from `[nu_min, nu_max]` for each
    /// trial and sorted ascending.
    NonIdFading,
}

impl ChannelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Awgn => "awgn",
            Self::IidFading => "iid",
            Self::NonIdFading => "nonid",
        }
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(Self::Awgn),
            "iid" => Ok(Self::IidFading),
            "nonid" => Ok(Self::NonIdFading),
            _ => Err(Error::param(format!("unknown channel {s:?}; expected awgn, iid or nonid"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    /// The same probability at every node.
    Uniform(f64),
    /// `gamma_j = nu_min^2 / nu_j^2`, the matched design with `gamma_bar = 1`.
    Optimal,
    /// Independent uniform draws on `(0, 1]` per node and trial.
    Random,
}

impl GammaPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Uniform(_) => "uniform",
            Self::Optimal => "optimal",
            Self::Random => "random",
        }
    }
}

/// One curve: a channel model paired with a transmission policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series {
    pub channel: ChannelMode,
    pub policy: GammaPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub n: usize,
    pub k: usize,
    pub m_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub noise_grid: Vec<f64>,
    /// Sparsity levels of the certificate phase diagram.
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub sigma_a2: f64,
    pub nu_h2: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub signal_lo: f64,
    pub signal_hi: f64,
    /// Sample budget of the validation experiments.
    pub samples: usize,
    /// Rows used for the isotropy check.
    pub rows: usize,
    /// Channel of the certificate phase diagram.
    pub channel: ChannelMode,
    pub settings: SolverSettings<f64>,
}

/// Keys read by [`ExperimentSpec::from_config`].
pub const SPEC_KEYS: &[&str] = &[
    "experiment",
    "n",
    "k",
    "m_grid",
    "gamma_grid",
    "noise_grid",
    "k_grid",
    "trials",
    "seed",
    "sigma_a2",
    "nu_h2",
    "nu_min",
    "nu_max",
    "signal_lo",
    "signal_hi",
    "samples",
    "rows",
    "channel",
    "gap_tol",
    "max_iter",
    "exact_threshold",
];

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_601;

fn steps(from: usize, to: usize, by: usize) -> Vec<usize> {
    (from..=to).step_by(by).collect()
}

impl ExperimentSpec {
    /// Defaults for `id`.
    pub fn new(id: ExperimentId) -> Self {
        let mut spec = Self {
            id,
            n: 100,
            k: 10,
            m_grid: steps(10, 100, 10),
            gamma_grid: vec![1.0],
            noise_grid: vec![0.0],
            k_grid: vec![1, 2, 5, 10, 20],
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            sigma_a2: 1.0,
            nu_h2: 1.0,
            nu_min: 1.0,
            nu_max: 10.0,
            signal_lo: 10.0,
            signal_hi: 20.0,
            samples: 1_000_000,
            rows: 100_000,
            channel: ChannelMode::IidFading,
            settings: SolverSettings::default(),
        };
        match id {
            ExperimentId::Fig1MseVsM => spec.gamma_grid = vec![0.1, 0.3, 0.5, 1.0],
            ExperimentId::Fig2MseVsGamma => {
                spec.m_grid = vec![20, 30, 40, 50, 60, 70, 80];
                spec.gamma_grid = vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
            }
            ExperimentId::Fig3NonIid => spec.gamma_grid = vec![0.5, 1.0],
            ExperimentId::Fig4OptGamma => {}
            ExperimentId::Fig5Noise => spec.noise_grid = vec![0.1, 0.5, 1.0, 2.0],
            ExperimentId::BernsteinValidate => {
                spec.n = 50;
                spec.nu_max = 2.0;
                spec.gamma_grid = vec![0.5];
            }
            ExperimentId::PdfValidate => spec.gamma_grid = vec![0.5],
            ExperimentId::CertificatePhase => {
                spec.n = 50;
                spec.m_grid = vec![5, 10, 20, 30, 40, 50];
                spec.trials = 100;
            }
        }
        spec
    }

    /// Defaults for the `experiment` key, overridden by the other keys.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_known(SPEC_KEYS)?;
        let id: ExperimentId = cfg.require::<String>("experiment")?.parse()?;
        let mut spec = Self::new(id);
        spec.n = cfg.get_or("n", spec.n)?;
        spec.k = cfg.get_or("k", spec.k)?;
        if let Some(v) = cfg.list("m_grid")? {
            spec.m_grid = v;
        }
        if let Some(v) = cfg.list("gamma_grid")? {
            spec.gamma_grid = v;
        }
        if let Some(v) = cfg.list("noise_grid")? {
            spec.noise_grid = v;
        }
        if let Some(v) = cfg.list("k_grid")? {
            spec.k_grid = v;
        }
        spec.trials = cfg.get_or("trials", spec.trials)?;
        spec.seed = cfg.get_or("seed", spec.seed)?;
        spec.sigma_a2 = cfg.get_or("sigma_a2", spec.sigma_a2)?;
        spec.nu_h2 = cfg.get_or("nu_h2", spec.nu_h2)?;
        spec.nu_min = cfg.get_or("nu_min", spec.nu_min)?;
        spec.nu_max = cfg.get_or("nu_max", spec.nu_max)?;
        spec.signal_lo = cfg.get_or("signal_lo", spec.signal_lo)?;
        spec.signal_hi = cfg.get_or("signal_hi", spec.signal_hi)?;
        spec.samples = cfg.get_or("samples", spec.samples)?;
        spec.rows = cfg.get_or("rows", spec.rows)?;
        if let Some(c) = cfg.str("channel") {
            spec.channel = c.parse()?;
        }
        spec.settings.gap_tol = cfg.get_or("gap_tol", spec.settings.gap_tol)?;
        spec.settings.max_iter = cfg.get_or("max_iter", spec.settings.max_iter)?;
        spec.settings.exact_threshold =
            cfg.get_or("exact_threshold", spec.settings.exact_threshold)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.n == 0 || self.k > self.n {
            return fail(format!("need 1 <= N and k <= N, got N={}, k={}", self.n, self.k));
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return fail("m_grid must be nonempty with positive entries".into());
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return fail("gamma_grid must be nonempty with entries in (0, 1]".into());
        }
        if self.noise_grid.is_empty() || self.noise_grid.iter().any(|&s| !(s >= 0.0)) {
            return fail("noise_grid must be nonempty with nonnegative entries".into());
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| k == 0 || k > self.n) {
            return fail("k_grid must be nonempty with entries in [1, N]".into());
        }
        if !(self.sigma_a2 > 0.0 && self.nu_h2 > 0.0) {
            return fail("sigma_a2 and nu_h2 must be positive".into());
        }
        if !(self.nu_min > 0.0 && self.nu_min <= self.nu_max) {
            return fail("need 0 < nu_min <= nu_max".into());
        }
        if !(self.signal_lo > 0.0 && self.signal_lo < self.signal_hi) {
            return fail("need 0 < signal_lo < signal_hi".into());
        }
        if self.samples == 0 || self.rows == 0 {
            return fail("samples and rows must be positive".into());
        }
        self.settings.validate()
    }

    /// Curves drawn by a figure experiment, in output order.
    pub fn series(&self) -> Vec<Series> {
        let uniform = |channel| {
            self.gamma_grid
                .iter()
                .map(move |&g| Series { channel, policy: GammaPolicy::Uniform(g) })
        };
        let nonid = |policy| Series { channel: ChannelMode::NonIdFading, policy };
        match self.id {
            ExperimentId::Fig1MseVsM | ExperimentId::Fig2MseVsGamma => uniform(ChannelMode::Awgn)
                .chain(uniform(ChannelMode::IidFading))
                .collect(),
            ExperimentId::Fig3NonIid => uniform(ChannelMode::Awgn)
                .chain(uniform(ChannelMode::NonIdFading))
                .collect(),
            ExperimentId::Fig4OptGamma => uniform(ChannelMode::Awgn)
                .chain(uniform(ChannelMode::NonIdFading))
                .chain([nonid(GammaPolicy::Optimal), nonid(GammaPolicy::Random)])
                .collect(),
            ExperimentId::Fig5Noise => {
                vec![nonid(GammaPolicy::Optimal), nonid(GammaPolicy::Random)]
            }
            _ => Vec::new(),
        }
    }

    /// Sidecar entries describing the run.
    pub fn describe(&self, table: &mut Table) {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let ulist = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        table.meta("experiment", self.id);
        table.meta("seed", self.seed);
        table.meta("trials", self.trials);
        table.meta("n", self.n);
        table.meta("k", self.k);
        table.meta("m_grid", ulist(&self.m_grid));
        table.meta("gamma_grid", list(&self.gamma_grid));
        table.meta("noise_grid", list(&self.noise_grid));
        table.meta("k_grid", ulist(&self.k_grid));
        table.meta("sigma_a2", self.sigma_a2);
        table.meta("nu_h2", self.nu_h2);
        table.meta("nu_range", format!("{},{}", self.nu_min, self.nu_max));
        table.meta("signal_range", format!("{},{}", self.signal_lo, self.signal_hi));
        table.meta("samples", self.samples);
        table.meta("rows", self.rows);
        table.meta("channel", self.channel.as_str());
        table.meta("gap_tol", self.settings.gap_tol);
        table.meta("max_iter", self.settings.max_iter);
        table.meta("exact_threshold", self.settings.exact_threshold);
    }
}

/// Runs any experiment and returns its table with sidecar entries.
pub fn run(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let mut table = match spec.id {
        id if id.is_curve() => curves::curve_table(spec, &run_experiment(spec)?)?,
        id if id.is_validation() => validate::validation_table(&validate_statistics(spec)?)?,
        _ => phase::phase_table(&certificate_phase_diagram(spec)?)?,
    };
    spec.describe(&mut table);
    Ok(table)
}
