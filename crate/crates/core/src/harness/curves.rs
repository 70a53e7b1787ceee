use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::{ChannelMode, ExperimentSpec, GammaPolicy, Series};
use crate::design::{optimal_gamma, DesignProblem};
use crate::io::Table;
use crate::model::{awgn_ensemble, generate_ensemble, generate_signal, sampling, NetworkConfig};
use crate::seed::{derive_seed, rng_from_seed, tag};
use crate::solver::{basis_pursuit, bpdn, noise_radius, relative_error, SolveStatus};
use crate::{Error, Result};

/// Aggregate over the trials of one grid point of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub channel: ChannelMode,
    pub policy: GammaPolicy,
    /// Upper end of the channel-scale range, for nonidentical fading.
    pub nu_max: Option<f64>,
    pub m: usize,
    pub sigma_v2: f64,
    pub trials: usize,
    /// Mean of `|x - x_hat|_2 / |x|_2`.
    pub mean_error: f64,
    pub std_error: f64,
    pub exact_rate: f64,
    /// Solves stopped by the iteration cap or a stalled line search.
    pub nonconverged: usize,
    /// Solves that returned an error; counted with `x_hat = 0`.
    pub failed: usize,
    /// Transmission probability averaged over nodes and trials.
    pub mean_gamma: f64,
}

impl CurvePoint {
    /// `nan` for policies without a single probability.
    pub fn gamma(&self) -> f64 {
        match self.policy {
            GammaPolicy::Uniform(g) => g,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    error: f64,
    exact: bool,
    converged: bool,
    failed: bool,
}

/// Per-trial draws shared by every series and grid point.
struct Scenario {
    x: crate::model::SparseSignal<f64>,
    nu: Vec<f64>,
    random_gamma: Vec<f64>,
    matrix_seed: u64,
    unit_noise: DVector<f64>,
}

fn scenario(spec: &ExperimentSpec, trial: usize, m_max: usize) -> Result<Scenario> {
    let base = derive_seed(spec.seed, &[tag(spec.id.as_str()), trial as u64]);
    let stream = |label: &str| rng_from_seed(derive_seed(base, &[tag(label)]));
    let x = generate_signal(spec.n, spec.k, spec.signal_lo, spec.signal_hi, &mut stream("signal"))?;
    let mut rng = stream("nu");
    let mut nu: Vec<f64> = if spec.nu_min < spec.nu_max {
        (0..spec.n).map(|_| rng.random_range(spec.nu_min..=spec.nu_max)).collect()
    } else {
        vec![spec.nu_min; spec.n]
    };
    nu.sort_by(f64::total_cmp);
    let mut rng = stream("gamma");
    let random_gamma = (0..spec.n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let mut rng = stream("noise");
    let unit_noise = DVector::from_fn(m_max, |_, _| sampling::normal(&mut rng, 1.0));
    Ok(Scenario {
        x,
        nu,
        random_gamma,
        matrix_seed: derive_seed(base, &[tag("matrix")]),
        unit_noise,
    })
}

fn network(spec: &ExperimentSpec, sc: &Scenario, series: Series, m: usize) -> Result<NetworkConfig<f64>> {
    let n = spec.n;
    let nu = match series.channel {
        ChannelMode::NonIdFading => sc.nu.clone(),
        _ => vec![spec.nu_h2.sqrt(); n],
    };
    let gamma = match series.policy {
        GammaPolicy::Uniform(g) => vec![g; n],
        GammaPolicy::Random => sc.random_gamma.clone(),
        // E / sigma_a^2 = 1, so gamma_bar = 1
        GammaPolicy::Optimal => optimal_gamma(&DesignProblem::new(nu.clone(), spec.sigma_a2, spec.sigma_a2)?),
    };
    NetworkConfig::new(m, gamma, vec![spec.sigma_a2.sqrt(); n], nu, 0.0)
}

fn solve(spec: &ExperimentSpec, b: &DMatrix<f64>, y: &DVector<f64>, sigma_v2: f64, x: &DVector<f64>) -> Outcome {
    let st = &spec.settings;
    let res = if sigma_v2 == 0.0 {
        basis_pursuit(b, y, st)
    } else {
        bpdn(b, y, noise_radius(sigma_v2.sqrt(), b.nrows()), st)
    };
    match res {
        Ok(sol) => {
            let error = relative_error(x, &sol.x_hat);
            Outcome {
                error,
                exact: error < st.exact_threshold,
                converged: sol.status == SolveStatus::Converged,
                failed: false,
            }
        }
        Err(_) => Outcome { error: relative_error(x, &DVector::zeros(x.len())), exact: false, converged: false, failed: true },
    }
}

/// Evaluates one trial at every (series, noise, M) point, in output order.
fn run_trial(spec: &ExperimentSpec, series: &[Series], trial: usize) -> Result<(Vec<Outcome>, Vec<f64>)> {
    let m_max = *spec.m_grid.iter().max().expect("validated grid");
    let sc = scenario(spec, trial, m_max)?;
    let mut out = Vec::with_capacity(series.len() * spec.noise_grid.len() * spec.m_grid.len());
    let mut mean_gamma = Vec::with_capacity(series.len());
    for &s in series {
        let cfg = network(spec, &sc, s, m_max)?;
        mean_gamma.push(cfg.gamma().iter().sum::<f64>() / spec.n as f64);
        let ens = match s.channel {
            ChannelMode::Awgn => awgn_ensemble(&sc.x, &cfg, sc.matrix_seed)?,
            _ => generate_ensemble(&sc.x, &cfg, sc.matrix_seed)?,
        };
        for &sigma_v2 in &spec.noise_grid {
            for &m in &spec.m_grid {
                let b = ens.b.rows(0, m).into_owned();
                let y = &b * sc.x.values() + sc.unit_noise.rows(0, m) * sigma_v2.sqrt();
                out.push(solve(spec, &b, &y, sigma_v2, sc.x.values()));
            }
        }
    }
    Ok((out, mean_gamma))
}

/// Runs a figure experiment. Trials run in parallel; aggregation follows
/// trial order, so the result is identical for any thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    if !spec.id.is_curve() {
        return Err(Error::param(format!("{} is not a curve experiment", spec.id)));
    }
    let series = spec.series();
    let per_trial: Vec<(Vec<Outcome>, Vec<f64>)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &series, t))
        .collect::<Result<_>>()?;

    let trials = spec.trials as f64;
    let mut points = Vec::new();
    let mut idx = 0;
    for (si, s) in series.iter().enumerate() {
        let mean_gamma = per_trial.iter().map(|(_, g)| g[si]).sum::<f64>() / trials;
        for &sigma_v2 in &spec.noise_grid {
            for &m in &spec.m_grid {
                let outcomes = per_trial.iter().map(|(o, _)| o[idx]);
                let (mut sum, mut sum2, mut exact, mut nonconv, mut failed) = (0.0, 0.0, 0, 0, 0);
                for o in outcomes {
                    sum += o.error;
                    sum2 += o.error * o.error;
                    exact += usize::from(o.exact);
                    nonconv += usize::from(!o.converged && !o.failed);
                    failed += usize::from(o.failed);
                }
                let mean = sum / trials;
                let var = if spec.trials > 1 {
                    ((sum2 - trials * mean * mean) / (trials - 1.0)).max(0.0)
                } else {
                    0.0
                };
                points.push(CurvePoint {
                    channel: s.channel,
                    policy: s.policy,
                    nu_max: (s.channel == ChannelMode::NonIdFading).then_some(spec.nu_max),
                    m,
                    sigma_v2,
                    trials: spec.trials,
                    mean_error: mean,
                    std_error: (var / trials).sqrt(),
                    exact_rate: exact as f64 / trials,
                    nonconverged: nonconv,
                    failed,
                    mean_gamma,
                });
                idx += 1;
            }
        }
    }
    Ok(points)
}

pub(super) const CURVE_COLUMNS: [&str; 13] = [
    "channel",
    "policy",
    "gamma",
    "nu_max",
    "sigma_v2",
    "m",
    "trials",
    "mean_error",
    "std_error",
    "exact_rate",
    "nonconverged",
    "failed",
    "mean_gamma",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| v.to_string())
}

pub(super) fn curve_table(spec: &ExperimentSpec, points: &[CurvePoint]) -> Result<Table> {
    let mut t = Table::new(CURVE_COLUMNS);
    for p in points {
        let gamma = match p.policy {
            GammaPolicy::Uniform(g) => Some(g),
            _ => None,
        };
        t.push(vec![
            p.channel.as_str().into(),
            p.policy.as_str().into(),
            opt(gamma),
            opt(p.nu_max),
            p.sigma_v2.to_string(),
            p.m.to_string(),
            p.trials.to_string(),
            p.mean_error.to_string(),
            p.std_error.to_string(),
            p.exact_rate.to_string(),
            p.nonconverged.to_string(),
            p.failed.to_string(),
            p.mean_gamma.to_string(),
        ])?;
    }
    t.meta("solver", if spec.noise_grid.iter().all(|&s| s == 0.0) {
        "basis pursuit (primal-dual interior point)"
    } else {
        "basis pursuit when sigma_v2 = 0, otherwise BPDN (log barrier) with eps_v = sigma_v sqrt(M) sqrt(1 + 2 sqrt(2)/sqrt(M))"
    });
    t.meta("column.channel", "awgn: B = A; iid: Rayleigh scale sqrt(nu_h2); nonid: scales uniform on [nu_min, nu_max], sorted");
    t.meta("column.policy", "uniform: gamma at every node; optimal: gamma_j = nu_min^2/nu_j^2; random: uniform on (0, 1] per node and trial");
    t.meta("column.gamma", "transmission probability of a uniform policy, NA otherwise");
    t.meta("column.nu_max", "upper channel-scale bound for nonid, NA otherwise");
    t.meta("column.sigma_v2", "receiver noise variance");
    t.meta("column.m", "number of MAC transmissions (rows of B)");
    t.meta("column.mean_error", "mean over trials of |x - x_hat|_2 / |x|_2");
    t.meta("column.std_error", "sample standard deviation of the error over sqrt(trials)");
    t.meta("column.exact_rate", "fraction of trials with error below exact_threshold");
    t.meta("column.nonconverged", "solves ended by the iteration cap or a stalled line search; their last iterate is scored");
    t.meta("column.failed", "solves that returned an error; scored as x_hat = 0");
    t.meta("column.mean_gamma", "transmission probability averaged over nodes and trials");
    t.meta("seeding", "trial seed = derive(master, experiment, trial); all series, M and noise levels of a trial share its draws");
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentId;

    fn small(id: ExperimentId) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(id);
        s.n = 20;
        s.k = 2;
        s.m_grid = vec![6, 12, 20];
        s.trials = 6;
        s
    }

    #[test]
    fn determined_dense_system_is_exact() {
        let mut s = small(ExperimentId::Fig1MseVsM);
        s.gamma_grid = vec![1.0];
        s.m_grid = vec![20];
        let pts = run_experiment(&s).unwrap();
        assert_eq!(pts.len(), 2);
        for p in &pts {
            assert_eq!(p.exact_rate, 1.0, "{p:?}");
            assert!(p.mean_error < 1e-6);
        }
    }

    #[test]
    fn points_follow_series_noise_m_order() {
        let mut s = small(ExperimentId::Fig5Noise);
        s.noise_grid = vec![0.1, 1.0];
        let pts = run_experiment(&s).unwrap();
        assert_eq!(pts.len(), 2 * 2 * 3);
        assert_eq!(pts[0].policy, GammaPolicy::Optimal);
        assert_eq!((pts[0].sigma_v2, pts[0].m), (0.1, 6));
        assert_eq!((pts[4].sigma_v2, pts[4].m), (1.0, 12));
        assert_eq!(pts[6].policy, GammaPolicy::Random);
        assert!(pts.iter().all(|p| p.nu_max == Some(10.0)));
        assert!(pts.iter().all(|p| p.std_error >= 0.0 && (0.0..=1.0).contains(&p.exact_rate)));
    }

    #[test]
    fn optimal_policy_matches_design() {
        let s = small(ExperimentId::Fig4OptGamma);
        let m_max = 20;
        let sc = scenario(&s, 0, m_max).unwrap();
        let cfg = network(&s, &sc, Series { channel: ChannelMode::NonIdFading, policy: GammaPolicy::Optimal }, m_max).unwrap();
        let nu0 = sc.nu[0];
        assert!(sc.nu.windows(2).all(|w| w[0] <= w[1]));
        for (g, v) in cfg.gamma().iter().zip(&sc.nu) {
            assert!((g - nu0 * nu0 / (v * v)).abs() < 1e-15);
        }
        assert_eq!(cfg.gamma()[0], 1.0);
    }

    #[test]
    fn table_shape() {
        let s = small(ExperimentId::Fig3NonIid);
        let pts = run_experiment(&s).unwrap();
        let t = curve_table(&s, &pts).unwrap();
        assert_eq!(t.rows.len(), pts.len());
        assert_eq!(t.columns.len(), CURVE_COLUMNS.len());
        assert!(t.rows.iter().any(|r| r[2] == "0.5"));
    }
}
