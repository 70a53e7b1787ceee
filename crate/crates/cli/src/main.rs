//! `sparsemac`: generate ensembles, recover signals, evaluate bounds and
//! designs, and run the Monte Carlo experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sparsemac::bounds::{bound_report, corollary_iid_bound};
use sparsemac::config::{Config, NETWORK_KEYS};
use sparsemac::design::{max_gamma_under_budget, optimal_gamma, psi, DesignProblem};
use sparsemac::harness::{self, ExperimentId, ExperimentSpec};
use sparsemac::io::{self, Table};
use sparsemac::model::{awgn_ensemble, generate_ensemble, generate_signal};
use sparsemac::seed::{derive_seed, rng_from_seed, tag};
use sparsemac::solver::{basis_pursuit, bpdn, noise_radius, RecoveryResult, SolveStatus};
use sparsemac::{Error, SolverSettings, SparseSignal};

#[derive(Parser)]
#[command(name = "sparsemac", version, about = "Sparse recovery over fading multiple-access channels")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (directory for `gen`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a signal and an ensemble and dump A, H, B, y, v and x as CSV.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Use an ideal channel (H = 1) instead of Rayleigh fading
        #[arg(long)]
        awgn: bool,
    },
    /// Recover x from B and y by basis pursuit, or BPDN when noise is given.
    Recover {
        #[command(flatten)]
        common: Common,
        /// Measurement matrix CSV (otherwise generated from --config)
        #[arg(long, requires = "y")]
        b: Option<PathBuf>,
        /// Measurement vector CSV
        #[arg(long, requires = "b")]
        y: Option<PathBuf>,
        /// True signal CSV, for the error and the certificate
        #[arg(long)]
        x: Option<PathBuf>,
        /// Noise radius; 0 selects basis pursuit
        #[arg(long)]
        eps: Option<f64>,
        /// Noise variance; sets the radius by the sqrt(M)-rule
        #[arg(long, conflicts_with = "eps")]
        sigma_v2: Option<f64>,
    },
    /// Run a figure experiment or the certificate phase diagram.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate the measurement bounds for a network.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Matched transmission probabilities for given channel scales.
    Design {
        #[command(flatten)]
        common: Common,
        /// Channel scales, comma separated (or `nu` in the config)
        #[arg(long, value_delimiter = ',')]
        nu: Option<Vec<f64>>,
        /// Channel scales from a CSV file
        #[arg(long, conflicts_with = "nu")]
        nu_file: Option<PathBuf>,
    },
    /// Run the statistical validation experiments.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment id (overrides `experiment` in the config)
    #[arg(long)]
    experiment: Option<String>,
    /// Trials per grid point, or samples for validation experiments
    #[arg(long)]
    trials: Option<usize>,
}

fn load(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let meta = table.write(p).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {} and {}", p.display(), meta.display());
        }
        None => print!("{}", table.to_csv_string()?),
    }
    Ok(())
}

fn experiment_spec(common: &Common, run: &RunArgs, validation: bool) -> Result<ExperimentSpec> {
    let mut cfg = load(common)?;
    if let Some(id) = &run.experiment {
        cfg.set("experiment", id);
    }
    if !cfg.contains("experiment") {
        cfg.set("experiment", if validation { "pdf_validate" } else { "fig1_mse_vs_M" });
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", seed);
    }
    let id: ExperimentId = cfg.require::<String>("experiment")?.parse()?;
    if id.is_validation() != validation {
        bail!("{id} belongs to `{}`", if validation { "sweep" } else { "validate" });
    }
    if let Some(n) = run.trials {
        cfg.set(if validation { "samples" } else { "trials" }, n);
    }
    Ok(ExperimentSpec::from_config(&cfg)?)
}

fn run_spec(common: &Common, run: &RunArgs, validation: bool) -> Result<ExitCode> {
    let spec = experiment_spec(common, run, validation)?;
    let table = harness::run(&spec)?;
    emit(&table, common.out.as_deref())?;
    if validation {
        let failed = table.metadata.iter().any(|(k, v)| k == "failures" && v != "0");
        if failed {
            eprintln!("some validation checks failed");
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

const GEN_KEYS: &[&str] = &["k", "signal_lo", "signal_hi", "seed"];

fn generated(cfg: &Config, seed: u64, awgn: bool) -> Result<(SparseSignal, sparsemac::MeasurementEnsemble)> {
    let net = cfg.network_config()?;
    let k: usize = cfg.require("k")?;
    let lo = cfg.get_or("signal_lo", 10.0)?;
    let hi = cfg.get_or("signal_hi", 20.0)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[tag("signal")]));
    let x = generate_signal(net.n(), k, lo, hi, &mut rng)?;
    let ens_seed = derive_seed(seed, &[tag("matrix")]);
    let ens = if awgn {
        awgn_ensemble(&x, &net, ens_seed)?
    } else {
        generate_ensemble(&x, &net, ens_seed)?
    };
    Ok((x, ens))
}

fn seed_of(common: &Common, cfg: &Config) -> Result<u64> {
    Ok(match common.seed {
        Some(s) => s,
        None => cfg.get_or("seed", harness::DEFAULT_SEED)?,
    })
}

fn gen(common: &Common, awgn: bool) -> Result<ExitCode> {
    let cfg = load(common)?;
    cfg.check_known(&[NETWORK_KEYS, GEN_KEYS].concat())?;
    let seed = seed_of(common, &cfg)?;
    let (x, ens) = generated(&cfg, seed, awgn)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("ensemble"));
    let extra = vec![
        ("channel".to_string(), if awgn { "awgn" } else { "fading" }.to_string()),
        ("sigma_v2".to_string(), cfg.get_or("sigma_v2", 0.0)?.to_string()),
    ];
    io::dump_ensemble(&dir, &ens, &x, &extra)?;
    eprintln!("wrote ensemble to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

/// Exit status: 0 converged, 2 iteration cap or stalled, 3 infeasible.
fn recover(
    common: &Common,
    b: Option<&Path>,
    y: Option<&Path>,
    x: Option<&Path>,
    eps: Option<f64>,
    sigma_v2: Option<f64>,
) -> Result<ExitCode> {
    let cfg = load(common)?;
    let (b, y, truth, noise) = match (b, y) {
        (Some(b), Some(y)) => {
            let truth = x.map(io::read_vector_csv).transpose()?;
            (io::read_matrix_csv(b)?, io::read_vector_csv(y)?, truth, None)
        }
        _ => {
            if common.config.is_none() {
                bail!("give --b and --y, or --config to generate an instance");
            }
            cfg.check_known(&[NETWORK_KEYS, GEN_KEYS].concat())?;
            let (x, ens) = generated(&cfg, seed_of(common, &cfg)?, false)?;
            let s2 = cfg.get_or("sigma_v2", 0.0)?;
            (ens.b, ens.y, Some(x.values().clone()), Some(s2))
        }
    };
    let radius = match (eps, sigma_v2.or(noise)) {
        (Some(e), _) => e,
        (None, Some(s2)) if s2 > 0.0 => noise_radius(s2.sqrt(), b.nrows()),
        _ => 0.0,
    };
    let settings = SolverSettings::default();
    let result = if radius > 0.0 {
        bpdn(&b, &y, radius, &settings)
    } else {
        basis_pursuit(&b, &y, &settings)
    };
    let sol = match result {
        Ok(sol) => sol,
        Err(e @ Error::Infeasible(_)) => {
            eprintln!("infeasible: {e}");
            return Ok(ExitCode::from(3));
        }
        Err(e) => return Err(e.into()),
    };
    let mut t = Table::new([
        "status",
        "iterations",
        "gap",
        "residual",
        "eps",
        "relative_error",
        "exact",
        "certificate_holds",
        "max_correlation",
        "x_hat",
    ]);
    let na = || "NA".to_string();
    let (err, exact, holds, corr) = match &truth {
        Some(x) => {
            let signal = SparseSignal::from_values(x.clone());
            let r = RecoveryResult::assess(sol.clone(), &signal, &b, &settings)?;
            let (h, c) = r.certificate.map_or((na(), na()), |c| {
                (c.holds.to_string(), c.max_correlation.to_string())
            });
            (r.relative_error.to_string(), r.exact.to_string(), h, c)
        }
        None => (na(), na(), na(), na()),
    };
    let x_hat: Vec<String> = sol.x_hat.iter().map(|v| v.to_string()).collect();
    t.push(vec![
        sol.status.as_str().into(),
        sol.iterations.to_string(),
        sol.gap.to_string(),
        sol.residual.to_string(),
        radius.to_string(),
        err,
        exact,
        holds,
        corr,
        x_hat.join(" "),
    ])?;
    t.meta("m", b.nrows());
    t.meta("n", b.ncols());
    t.meta("solver", if radius > 0.0 { "bpdn" } else { "basis_pursuit" });
    t.meta("column.x_hat", "space-separated estimate");
    emit(&t, common.out.as_deref())?;
    Ok(match sol.status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        _ => ExitCode::from(2),
    })
}

const BOUND_KEYS: &[&str] = &["k", "epsilon", "epsilon_prime", "c_prime", "c0"];

fn bounds(common: &Common) -> Result<ExitCode> {
    let cfg = load(common)?;
    cfg.check_known(&[NETWORK_KEYS, BOUND_KEYS].concat())?;
    let net = cfg.network_config()?;
    let k: usize = cfg.require("k")?;
    let eps = cfg.get_or("epsilon", 0.01)?;
    let eps_p = cfg.get_or("epsilon_prime", 0.01)?;
    let c_prime = cfg.get_or("c_prime", 1.0)?;
    let c0 = cfg.get_or("c0", 1.0)?;
    let rep = bound_report(&net, k, eps, eps_p, c_prime)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    let gamma = net.gamma();
    let common_gamma = gamma.iter().all(|&g| g == gamma[0]).then_some(gamma[0]);
    let corollary = match common_gamma {
        Some(g) => Some(corollary_iid_bound(k, net.n(), g, eps, c0)?),
        None => None,
    };
    let mut t = Table::new([
        "m1", "m2", "m_required", "m1_dominates", "r", "c1", "c2", "psi", "corollary", "notes",
    ]);
    t.push(vec![
        rep.m1.to_string(),
        rep.m2.to_string(),
        rep.m_required.to_string(),
        rep.m1_dominates.to_string(),
        rep.r.to_string(),
        opt(rep.c1),
        opt(rep.c2),
        opt(rep.psi),
        opt(corollary),
        rep.scaling_notes.clone(),
    ])?;
    t.meta("n", net.n());
    t.meta("k", k);
    t.meta("epsilon", eps);
    t.meta("epsilon_prime", eps_p);
    t.meta("c_prime", c_prime);
    t.meta("c0", c0);
    t.meta("r_rule", "sqrt(k / 2M), M from a first pass with R = 1");
    t.meta("column.corollary", "C0 k / sqrt(gamma) ln(2N/eps), only for a common gamma");
    emit(&t, common.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

const DESIGN_KEYS: &[&str] = &["nu", "sigma_a2", "energy_cap", "total_energy", "k", "n", "epsilon", "c0"];

fn design(common: &Common, nu: Option<Vec<f64>>, nu_file: Option<&Path>) -> Result<ExitCode> {
    let cfg = load(common)?;
    cfg.check_known(DESIGN_KEYS)?;
    let nu = match (nu, nu_file) {
        (Some(v), _) => v,
        (None, Some(p)) => io::read_vector_csv(p)?.iter().copied().collect(),
        (None, None) => cfg
            .list::<f64>("nu")?
            .context("channel scales required: --nu, --nu-file or `nu` in the config")?,
    };
    let sigma_a2 = cfg.get_or("sigma_a2", 1.0)?;
    let energy = cfg.get_or("energy_cap", sigma_a2)?;
    let problem = DesignProblem::new(nu.clone(), sigma_a2, energy)?;
    let gamma = optimal_gamma(&problem);
    let mut t = Table::new(["node", "nu", "gamma"]);
    for (j, (v, g)) in nu.iter().zip(&gamma).enumerate() {
        t.push(vec![j.to_string(), v.to_string(), g.to_string()])?;
    }
    t.meta("gamma_bar", problem.gamma_bar());
    t.meta("psi_optimal", psi(&gamma, &nu)?);
    t.meta("psi_uniform_gamma_bar", psi(&vec![problem.gamma_bar(); nu.len()], &nu)?);
    if let Some(total) = cfg.get::<f64>("total_energy")? {
        let k: usize = cfg.require("k")?;
        let n = cfg.get_or("n", nu.len())?;
        let eps = cfg.get_or("epsilon", 0.01)?;
        let c0 = cfg.get_or("c0", 1.0)?;
        t.meta("gamma_budget", max_gamma_under_budget(total, c0, sigma_a2, k, n, eps)?);
    }
    emit(&t, common.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let res = match &cli.command {
        Command::Gen { common, awgn } => gen(common, *awgn),
        Command::Recover { common, b, y, x, eps, sigma_v2 } => {
            recover(common, b.as_deref(), y.as_deref(), x.as_deref(), *eps, *sigma_v2)
        }
        Command::Sweep { common, run } => run_spec(common, run, false),
        Command::Bounds { common } => bounds(common),
        Command::Design { common, nu, nu_file } => design(common, nu.clone(), nu_file.as_deref()),
        Command::Validate { common, run } => run_spec(common, run, true),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
