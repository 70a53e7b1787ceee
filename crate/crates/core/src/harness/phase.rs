use rand::Rng;
use rayon::prelude::*;

use super::{ChannelMode, ExperimentId, ExperimentSpec};
use crate::io::Table;
use crate::model::{awgn_ensemble, generate_ensemble, generate_signal, NetworkConfig};
use crate::seed::{derive_seed, rng_from_seed, tag};
use crate::solver::{basis_pursuit, recovery_certificate, relative_error};
use crate::{Error, Result};

/// Certificate and recovery frequencies for one `(k, M)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub certificate_rate: f64,
    pub recovery_rate: f64,
    /// Trials where `B_S` had dependent columns; the certificate counts as
    /// failed for them.
    pub rank_deficient: usize,
    /// Trials certified but not recovered. Always zero for a sound solver.
    pub violations: usize,
}

#[derive(Clone, Copy)]
struct CellOutcome {
    certified: bool,
    recovered: bool,
    rank_deficient: bool,
}

/// Runs the phase diagram over `k_grid x m_grid` using `spec.channel` and
/// the uniform probability `gamma_grid[0]`. Cells with `k > M` are skipped.
/// For each `(k, trial)` one signal and one measurement stream are drawn
/// and truncated to every `M`.
pub fn certificate_phase_diagram(spec: &ExperimentSpec) -> Result<Vec<PhaseCell>> {
    spec.validate()?;
    if spec.id != ExperimentId::CertificatePhase {
        return Err(Error::param(format!("{} is not a phase diagram", spec.id)));
    }
    let m_max = *spec.m_grid.iter().max().expect("validated grid");
    let gamma = spec.gamma_grid[0];
    let root = tag(spec.id.as_str());
    let mut cells = Vec::new();
    for &k in &spec.k_grid {
        let ms: Vec<usize> = spec.m_grid.iter().copied().filter(|&m| m >= k).collect();
        if ms.is_empty() {
            continue;
        }
        let per_trial: Vec<Vec<CellOutcome>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<CellOutcome>> {
                let base = derive_seed(spec.seed, &[root, k as u64, t as u64]);
                let stream = |l: &str| rng_from_seed(derive_seed(base, &[tag(l)]));
                let x = generate_signal(spec.n, k, spec.signal_lo, spec.signal_hi, &mut stream("signal"))?;
                let nu = match spec.channel {
                    ChannelMode::NonIdFading => {
                        let mut rng = stream("nu");
                        let mut nu: Vec<f64> = (0..spec.n)
                            .map(|_| rng.random_range(spec.nu_min..=spec.nu_max))
                            .collect();
                        nu.sort_by(f64::total_cmp);
                        nu
                    }
                    _ => vec![spec.nu_h2.sqrt(); spec.n],
                };
                let cfg = NetworkConfig::new(
                    m_max,
                    vec![gamma; spec.n],
                    vec![spec.sigma_a2.sqrt(); spec.n],
                    nu,
                    0.0,
                )?;
                let seed = derive_seed(base, &[tag("matrix")]);
                let ens = match spec.channel {
                    ChannelMode::Awgn => awgn_ensemble(&x, &cfg, seed)?,
                    _ => generate_ensemble(&x, &cfg, seed)?,
                };
                Ok(ms
                    .iter()
                    .map(|&m| {
                        let b = ens.b.rows(0, m).into_owned();
                        let y = &b * x.values();
                        let cert = recovery_certificate(&b, &x, spec.settings.rank_tol);
                        let recovered = basis_pursuit(&b, &y, &spec.settings)
                            .map(|s| relative_error(x.values(), &s.x_hat) < spec.settings.exact_threshold)
                            .unwrap_or(false);
                        CellOutcome {
                            certified: cert.as_ref().is_ok_and(|c| c.holds),
                            recovered,
                            rank_deficient: matches!(cert, Err(Error::RankDeficient(_))),
                        }
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (i, &m) in ms.iter().enumerate() {
            let (mut c, mut r, mut d, mut v) = (0, 0, 0, 0);
            for o in per_trial.iter().map(|o| o[i]) {
                c += usize::from(o.certified);
                r += usize::from(o.recovered);
                d += usize::from(o.rank_deficient);
                v += usize::from(o.certified && !o.recovered);
            }
            let n = spec.trials as f64;
            cells.push(PhaseCell {
                k,
                m,
                trials: spec.trials,
                certificate_rate: c as f64 / n,
                recovery_rate: r as f64 / n,
                rank_deficient: d,
                violations: v,
            });
        }
    }
    Ok(cells)
}

pub(super) fn phase_table(cells: &[PhaseCell]) -> Result<Table> {
    let mut t = Table::new([
        "k",
        "m",
        "trials",
        "certificate_rate",
        "recovery_rate",
        "rank_deficient",
        "violations",
    ]);
    for c in cells {
        t.push(vec![
            c.k.to_string(),
            c.m.to_string(),
            c.trials.to_string(),
            c.certificate_rate.to_string(),
            c.recovery_rate.to_string(),
            c.rank_deficient.to_string(),
            c.violations.to_string(),
        ])?;
    }
    t.meta("column.certificate_rate", "fraction of trials with max off-support correlation below 1");
    t.meta("column.recovery_rate", "fraction of trials recovered by basis pursuit below exact_threshold");
    t.meta("column.rank_deficient", "trials whose support columns were dependent");
    t.meta("column.violations", "trials certified but not recovered");
    t.meta("skipped", "cells with k > M");
    Ok(t)
}
