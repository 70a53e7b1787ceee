use nalgebra::DVector;
use proptest::prelude::*;

use sparsemac::bounds::bound_report;
use sparsemac::config::Config;
use sparsemac::harness::{self, ExperimentId, ExperimentSpec};
use sparsemac::io;
use sparsemac::model::{generate_ensemble, generate_signal};
use sparsemac::seed::rng_from_seed;
use sparsemac::solver::{basis_pursuit, bpdn, noise_radius, relative_error, RecoveryResult};
use sparsemac::{SolverSettings, SparseSignal};

const NETWORK: &str = "
# twelve nodes, two channel classes
n = 12
m = 10
gamma = 1
sigma_a2 = 1
nu = 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2
";

#[test]
fn config_to_recovery() {
    let cfg = Config::parse(NETWORK).unwrap();
    let net = cfg.network_config().unwrap();
    assert_eq!(net.n(), 12);
    let x = generate_signal(12, 2, 10.0, 20.0, &mut rng_from_seed(3)).unwrap();
    let ens = generate_ensemble(&x, &net, 11).unwrap();
    let settings = SolverSettings::default();
    let sol = basis_pursuit(&ens.b, &ens.y, &settings).unwrap();
    let res = RecoveryResult::assess(sol, &x, &ens.b, &settings).unwrap();
    if res.certificate.is_some_and(|c| c.holds) {
        assert!(res.exact);
    }
    assert!(res.relative_error.is_finite());
}

#[test]
fn noisy_recovery_stays_in_the_ball() {
    let net = Config::parse(NETWORK).unwrap().network_config().unwrap().with_m(12).unwrap().with_noise(0.01).unwrap();
    let x = generate_signal(12, 1, 10.0, 20.0, &mut rng_from_seed(5)).unwrap();
    let ens = generate_ensemble(&x, &net, 8).unwrap();
    let eps = noise_radius(0.1, 12);
    let sol = bpdn(&ens.b, &ens.y, eps, &SolverSettings::default()).unwrap();
    assert!((&ens.y - &ens.b * &sol.x_hat).norm() <= eps * (1.0 + 1e-6));
    assert!(relative_error(x.values(), &sol.x_hat) < 0.05);
}

#[test]
fn dumped_ensemble_reads_back() {
    let net = Config::parse(NETWORK).unwrap().network_config().unwrap();
    let x = generate_signal(12, 3, 10.0, 20.0, &mut rng_from_seed(1)).unwrap();
    let ens = generate_ensemble(&x, &net, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::dump_ensemble(dir.path(), &ens, &x, &[]).unwrap();
    let b = io::read_matrix_csv(&dir.path().join("B.csv")).unwrap();
    let y = io::read_vector_csv(&dir.path().join("y.csv")).unwrap();
    assert_eq!(b, ens.b);
    assert_eq!(y, ens.y);
    let x_back = io::read_vector_csv(&dir.path().join("x.csv")).unwrap();
    assert_eq!(SparseSignal::from_values(x_back).support(), x.support());
}

#[test]
fn bounds_from_config() {
    let cfg = Config::parse("n = 100\nm = 50\ngamma = 1\nsigma = 1\nnu = 1\n").unwrap();
    let rep = bound_report(&cfg.network_config().unwrap(), 10, 0.01, 0.01, 1.0).unwrap();
    assert!((rep.m1 - 501.09).abs() < 0.01);
    assert_eq!(rep.m_required, rep.m1.max(rep.m2));
    assert_eq!(rep.c1, Some(1.0));
}

#[test]
fn experiment_table_and_sidecar() {
    let cfg = Config::parse("experiment = fig3_noniid\nn = 30\nk = 2\nm_grid = 10, 20\ntrials = 4\n").unwrap();
    let spec = ExperimentSpec::from_config(&cfg).unwrap();
    assert_eq!(spec.id, ExperimentId::Fig3NonIid);
    let table = harness::run(&spec).unwrap();
    // awgn and nonid, two gammas, two M
    assert_eq!(table.rows.len(), 2 * 2 * 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.csv");
    let meta = table.write(&path).unwrap();
    let text = std::fs::read_to_string(meta).unwrap();
    assert!(text.contains("experiment: fig3_noniid"));
    assert!(text.lines().any(|l| l.starts_with("seed: ")));
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("channel,policy,gamma"));
}

#[test]
fn unknown_keys_are_rejected() {
    let cfg = Config::parse("experiment = fig1_mse_vs_M\ntrails = 3\n").unwrap();
    assert!(ExperimentSpec::from_config(&cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_spike_recovered_from_square_system(seed in any::<u64>(), pos in 0usize..8, val in 1.0f64..50.0) {
        let net = Config::parse("n = 8\nm = 8\ngamma = 1\nsigma = 1\nnu = 1\n").unwrap().network_config().unwrap();
        let mut v = DVector::zeros(8);
        v[pos] = val;
        let x = SparseSignal::from_values(v);
        let ens = generate_ensemble(&x, &net, seed).unwrap();
        let sol = basis_pursuit(&ens.b, &ens.y, &SolverSettings::default()).unwrap();
        prop_assert!(relative_error(x.values(), &sol.x_hat) < 1e-6);
    }

    #[test]
    fn same_seed_same_ensemble(seed in any::<u64>(), gamma in 0.05f64..=1.0) {
        let cfg = Config::parse(&format!("n = 6\nm = 5\ngamma = {gamma}\nsigma = 1\nnu = 1\n")).unwrap();
        let net = cfg.network_config().unwrap();
        let x = generate_signal(6, 2, 1.0, 2.0, &mut rng_from_seed(seed)).unwrap();
        let a = generate_ensemble(&x, &net, seed).unwrap();
        let b = generate_ensemble(&x, &net, seed).unwrap();
        prop_assert_eq!(&a.b, &b.b);
        prop_assert_eq!(&a.y, &b.y);
        prop_assert!(a.h.iter().all(|&h| h >= 0.0));
        prop_assert!(a.b.iter().zip(a.a.iter()).all(|(&bij, &aij)| (aij == 0.0) == (bij == 0.0)));
    }
}
