use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::{ExperimentId, ExperimentSpec};
use crate::io::Table;
use crate::model::sampling;
use crate::seed::{derive_seed, rng_from_seed, tag};
use crate::stats::{bernstein_bound, ks_statistic, laplace_cdf, EnsembleExtremes, MixtureLaw};
use crate::{Error, Result};

/// One check of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub check: String,
    /// Free-form coordinates of the check (parameters, grid point).
    pub point: String,
    pub value: f64,
    /// Reference value or bound the statistic is compared with.
    pub reference: f64,
    pub threshold: f64,
    pub pass: bool,
}

const BATCH: usize = 1 << 15;

/// Sample counts per batch; batches are seeded independently, so the
/// result does not depend on how they are scheduled.
fn batches(total: usize) -> Vec<(usize, usize)> {
    (0..total.div_ceil(BATCH))
        .map(|b| (b, BATCH.min(total - b * BATCH)))
        .collect()
}

/// Runs `pdf_validate` or `bernstein_validate`.
pub fn validate_statistics(spec: &ExperimentSpec) -> Result<Vec<ValidationRow>> {
    spec.validate()?;
    match spec.id {
        ExperimentId::PdfValidate => pdf_checks(spec),
        ExperimentId::BernsteinValidate => bernstein_checks(spec),
        id => Err(Error::param(format!("{id} is not a validation experiment"))),
    }
}

fn pdf_checks(spec: &ExperimentSpec) -> Result<Vec<ValidationRow>> {
    let sigma_a = spec.sigma_a2.sqrt();
    let nu = spec.nu_h2.sqrt();
    let sigma_bar = sigma_a * nu;
    let n = spec.samples as f64;
    let root = tag("pdf_validate");

    // products h * a of active entries
    let mut w: Vec<f64> = batches(spec.samples)
        .into_par_iter()
        .flat_map_iter(|(b, len)| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[root, tag("product"), b as u64]));
            (0..len)
                .map(|_| {
                    let a: f64 = sampling::normal(&mut rng, sigma_a);
                    let h: f64 = sampling::rayleigh(&mut rng, nu);
                    a * h
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mean_abs = w.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ks = ks_statistic(&mut w, |t| laplace_cdf(t, sigma_bar))?;
    let point = format!("sigma_a={sigma_a},nu={nu},samples={}", spec.samples);
    // 0.005 at 10^6 samples, widened for smaller budgets
    let ks_tol = 0.005f64.max(1.95 / n.sqrt());
    let abs_tol = sigma_bar * 0.005f64.max(5.0 / n.sqrt());
    let var_tol = sigma_bar.powi(2) * 0.02f64.max(4.5 * 20f64.sqrt() / n.sqrt());
    let mut rows = vec![
        ValidationRow {
            check: "ks_laplace".into(),
            point: point.clone(),
            value: ks,
            reference: 0.0,
            threshold: ks_tol,
            pass: ks < ks_tol,
        },
        ValidationRow {
            check: "mean_abs".into(),
            point: point.clone(),
            value: mean_abs,
            reference: sigma_bar,
            threshold: abs_tol,
            pass: (mean_abs - sigma_bar).abs() <= abs_tol,
        },
        ValidationRow {
            check: "variance".into(),
            point,
            value: var,
            reference: 2.0 * sigma_bar * sigma_bar,
            threshold: var_tol,
            pass: (var - 2.0 * sigma_bar * sigma_bar).abs() <= var_tol,
        },
    ];

    // tails of the mixture, including the atom at zero
    let gamma = spec.gamma_grid[0];
    let law = MixtureLaw::new(gamma, sigma_bar)?;
    let u: Vec<f64> = batches(spec.samples)
        .into_par_iter()
        .flat_map_iter(|(b, len)| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[root, tag("mixture"), b as u64]));
            (0..len)
                .map(|_| sampling::mixture_entry(&mut rng, gamma, sigma_a, nu))
                .collect::<Vec<_>>()
        })
        .collect();
    for factor in [0.5, 1.0, 2.0] {
        let t = factor * sigma_bar;
        let p = law.tail(t)?;
        let emp = u.iter().filter(|v| v.abs() > t).count() as f64 / n;
        let tol = 3.0 * (p * (1.0 - p) / n).sqrt();
        rows.push(ValidationRow {
            check: "mixture_tail".into(),
            point: format!("gamma={gamma},t={t}"),
            value: emp,
            reference: p,
            threshold: tol,
            pass: (emp - p).abs() <= tol,
        });
    }

    rows.extend(isotropy(spec, gamma, sigma_a, nu)?);
    Ok(rows)
}

/// Second moment of rows of `B / sqrt(2 gamma sigma_bar^2)` against the
/// identity, for identical nodes.
fn isotropy(spec: &ExperimentSpec, gamma: f64, sigma_a: f64, nu: f64) -> Result<Vec<ValidationRow>> {
    let d = spec.n;
    let scale = 1.0 / (2.0 * gamma * (sigma_a * nu).powi(2)).sqrt();
    let chunk = 1024;
    let root = tag("isotropy");
    let parts: Vec<DMatrix<f64>> = batches(spec.rows)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[root, b as u64]));
            let mut acc = DMatrix::zeros(d, d);
            let mut done = 0;
            while done < len {
                let r = chunk.min(len - done);
                let x = DMatrix::from_fn(r, d, |_, _| {
                    sampling::mixture_entry(&mut rng, gamma, sigma_a, nu) * scale
                });
                acc += x.tr_mul(&x);
                done += r;
            }
            acc
        })
        .collect();
    let mut sum = DMatrix::zeros(d, d);
    for p in parts {
        sum += p;
    }
    let rows = spec.rows as f64;
    let dev = sum / rows - DMatrix::identity(d, d);
    let max_entry = dev.amax();
    let spectral = dev.clone().symmetric_eigen().eigenvalues.amax();
    let mut max_off = 0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_off = max_off.max(dev[(i, j)].abs());
            }
        }
    }
    let point = format!("gamma={gamma},dim={d},rows={}", spec.rows);
    Ok(vec![
        ValidationRow {
            check: "isotropy_max_entry".into(),
            point: point.clone(),
            value: max_entry,
            reference: 0.0,
            threshold: 0.05,
            pass: max_entry <= 0.05,
        },
        ValidationRow {
            check: "isotropy_off_diagonal".into(),
            point: point.clone(),
            value: max_off,
            reference: 0.0,
            threshold: 5.0 / rows.sqrt(),
            pass: max_off < 5.0 / rows.sqrt(),
        },
        // spectral deviation grows like sqrt(dim/rows); reported only
        ValidationRow {
            check: "isotropy_spectral".into(),
            point,
            value: spectral,
            reference: 0.0,
            threshold: f64::INFINITY,
            pass: true,
        },
    ])
}

/// Nodes, weight vectors and thresholds of the Bernstein check.
pub(crate) struct BernsteinSetup {
    pub gamma: Vec<f64>,
    pub sigma: f64,
    pub nu: Vec<f64>,
    pub alphas: Vec<DVector<f64>>,
    /// Thresholds as multiples of the standard deviation of the sum.
    pub t_factors: Vec<f64>,
}

impl BernsteinSetup {
    pub fn extremes(&self) -> Result<EnsembleExtremes<f64>> {
        let sb: Vec<f64> = self.nu.iter().map(|v| v * self.sigma).collect();
        EnsembleExtremes::from_nodes(&self.gamma, &sb)
    }

    /// Standard deviation of `sum alpha_j u_j`.
    pub fn std_dev(&self, alpha: &DVector<f64>) -> f64 {
        alpha
            .iter()
            .zip(self.gamma.iter().zip(&self.nu))
            .map(|(a, (g, v))| a * a * g * 2.0 * (v * self.sigma).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Node laws drawn once from the master seed: `gamma_j` uniform on
/// `[gamma_grid[0], 1]` and `nu_j` uniform on `[nu_min, nu_max]`. The
/// weights are a unit coordinate vector, the normalized all-ones vector and
/// Gaussian vectors (two of them sparsified).
pub(crate) fn bernstein_setup(spec: &ExperimentSpec, n_alpha: usize) -> BernsteinSetup {
    let mut rng = rng_from_seed(derive_seed(spec.seed, &[tag("bernstein_nodes")]));
    let n = spec.n;
    let g_lo = spec.gamma_grid[0];
    let gamma = (0..n)
        .map(|_| if g_lo < 1.0 { rng.random_range(g_lo..=1.0) } else { 1.0 })
        .collect();
    let nu = (0..n)
        .map(|_| if spec.nu_min < spec.nu_max { rng.random_range(spec.nu_min..=spec.nu_max) } else { spec.nu_min })
        .collect();
    let mut alphas = vec![
        DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        DVector::from_element(n, 1.0 / (n as f64).sqrt()),
    ];
    while alphas.len() < n_alpha {
        let sparse = alphas.len() % 4 == 0;
        alphas.push(DVector::from_fn(n, |_, _| {
            let v: f64 = sampling::normal(&mut rng, 1.0);
            if sparse && rng.random::<f64>() < 0.8 {
                0.0
            } else {
                v
            }
        }));
    }
    alphas.truncate(n_alpha);
    BernsteinSetup {
        gamma,
        sigma: spec.sigma_a2.sqrt(),
        nu,
        alphas,
        t_factors: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0],
    }
}

/// Exceedance counts `#{|sum alpha u| > t}` for every (alpha, t) pair,
/// alpha-major.
pub(crate) fn bernstein_counts(spec: &ExperimentSpec, setup: &BernsteinSetup) -> Vec<u64> {
    let thresholds: Vec<Vec<f64>> = setup
        .alphas
        .iter()
        .map(|a| {
            let s = setup.std_dev(a);
            setup.t_factors.iter().map(|f| f * s).collect()
        })
        .collect();
    let n = spec.n;
    let width = setup.alphas.len() * setup.t_factors.len();
    let root = tag("bernstein_validate");
    let parts: Vec<Vec<u64>> = batches(spec.samples)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[root, b as u64]));
            let mut counts = vec![0u64; width];
            let mut u = vec![0.0; n];
            for _ in 0..len {
                for (j, uj) in u.iter_mut().enumerate() {
                    *uj = sampling::mixture_entry(&mut rng, setup.gamma[j], setup.sigma, setup.nu[j]);
                }
                for (ai, a) in setup.alphas.iter().enumerate() {
                    let s = a.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>().abs();
                    for (ti, &t) in thresholds[ai].iter().enumerate() {
                        counts[ai * setup.t_factors.len() + ti] += u64::from(s > t);
                    }
                }
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; width];
    for p in parts {
        for (t, c) in total.iter_mut().zip(p) {
            *t += c;
        }
    }
    total
}

fn bernstein_checks(spec: &ExperimentSpec) -> Result<Vec<ValidationRow>> {
    let setup = bernstein_setup(spec, 10);
    let extremes = setup.extremes()?;
    let counts = bernstein_counts(spec, &setup);
    let mut rows = Vec::new();
    for (ai, a) in setup.alphas.iter().enumerate() {
        let s = setup.std_dev(a);
        for (ti, f) in setup.t_factors.iter().enumerate() {
            let t = f * s;
            let bound = bernstein_bound(t, a.as_slice(), &extremes)?.raw;
            let emp = counts[ai * setup.t_factors.len() + ti] as f64 / spec.samples as f64;
            rows.push(ValidationRow {
                check: "bernstein_tail".into(),
                point: format!("alpha={ai},t={t}"),
                value: emp,
                reference: bound,
                threshold: bound,
                pass: emp <= bound,
            });
        }
    }
    Ok(rows)
}

pub(super) fn validation_table(rows: &[ValidationRow]) -> Result<Table> {
    let mut t = Table::new(["check", "point", "value", "reference", "threshold", "pass"]);
    for r in rows {
        t.push(vec![
            r.check.clone(),
            r.point.clone(),
            r.value.to_string(),
            r.reference.to_string(),
            r.threshold.to_string(),
            r.pass.to_string(),
        ])?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    t.meta("checks", rows.len());
    t.meta("failures", failed);
    t.meta("column.value", "observed statistic");
    t.meta("column.reference", "analytic value, or the bound for bernstein_tail");
    t.meta("column.threshold", "allowed deviation from reference (ks_laplace: largest allowed statistic; bernstein_tail: the bound itself)");
    t.meta("column.pass", "statistic within threshold");
    Ok(t)
}
