//! End-to-end checks across model construction, propagation, measurement,
//! sweeps and serialization.

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use spinbath::experiment::plot::plot_export;
use spinbath::experiment::{run_with_workers, ExperimentConfig, Mode, ResultTable, RowKind};
use spinbath::hamiltonian::build_ring_model;
use spinbath::observe::{measure, reduce_to_system};
use spinbath::propagate::Propagator;
use spinbath::spectrum::diagonalize;
use spinbath::stats::Summary;
use spinbath::theory::ExactGibbs;
use spinbath::{Method, Part, C64};

/// The ensemble average of reduced thermal pure states is the reduced Gibbs state.
#[test]
fn thermal_pure_states_average_to_the_gibbs_state() {
    let beta = 1.0;
    let m = build_ring_model(2, 8, -1.0, 5, 6, 1.0).unwrap();
    let hs = diagonalize(&m, Part::System).unwrap();
    let exact = ExactGibbs::new(&m).unwrap().reduced_state(beta, &hs).unwrap();
    let prop = Propagator::chebyshev(&m);

    let n = 500;
    let samples: Vec<DMatrix<C64>> = (0..n)
        .map(|seed| {
            let psi = prop.thermal_state(beta, seed).unwrap().state;
            reduce_to_system(&psi, 2, &hs).unwrap().entries().clone()
        })
        .collect();
    for r in 0..4 {
        for c in 0..4 {
            for part in [|z: C64| z.re, |z: C64| z.im] {
                let v: Vec<f64> = samples.iter().map(|s| part(s[(r, c)])).collect();
                let s = Summary::of(&v).unwrap();
                let target = part(exact.entries()[(r, c)]);
                assert!(
                    s.z_score(target) < 4.5 || (s.mean - target).abs() < 1e-12,
                    "element ({r},{c}): {} vs {target}, z = {}",
                    s.mean,
                    s.z_score(target)
                );
            }
        }
    }
    let gibbs = measure(&exact, &hs, beta).unwrap();
    assert_abs_diff_eq!(gibbs.delta_at_beta, 0.0, epsilon = 0.05);
}

/// Chebyshev and exact propagation produce the same thermal state.
#[test]
fn propagation_methods_agree_on_thermal_states() {
    let m = build_ring_model(3, 5, -1.0, 7, 8, 0.8).unwrap();
    let cheb = Propagator::new(&m, Method::Chebyshev).unwrap();
    let exact = Propagator::new(&m, Method::Exact).unwrap();
    for beta in [0.0, 0.5, 4.0, 40.0] {
        let a = cheb.thermal_state(beta, 3).unwrap();
        let b = exact.thermal_state(beta, 3).unwrap();
        assert!(a.state.max_abs_diff(&b.state).unwrap() < 1e-11);
        assert_abs_diff_eq!(a.log_norm_factor, b.log_norm_factor, epsilon = 1e-10);
    }
    let psi = cheb.thermal_state(1.0, 4).unwrap().state;
    let a = cheb.evolve(&psi, 7.5).unwrap();
    let b = exact.evolve(&psi, 7.5).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-11);
}

const CONFIG: &str = "\
# small coupled sweep
mode = theory_overlay
model = ring
j_system = -1
coupling_seed = 3
env_seed = 4
n_sys_list = 2
n_env_list = 4, 5
beta_list = 0, 0.9
lambda_list = 0, 0.5
n_realizations = 25
master_seed = 99
";

#[test]
fn config_file_to_table_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    std::fs::write(&conf, CONFIG).unwrap();
    let cfg = ExperimentConfig::from_file(&conf).unwrap();
    assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);

    let table = run_with_workers(&cfg, 2).unwrap();
    assert!(table.all_ok());
    let csv_path = dir.path().join("out.csv");
    table.write(&csv_path).unwrap();
    let back = ResultTable::read(&csv_path).unwrap();
    assert_eq!(back.to_csv(), table.to_csv());
    assert_eq!(back.mode, Mode::TheoryOverlay);
    assert_eq!(plot_export(&back), plot_export(&table));

    // 2 sizes × 2 couplings × 2 temperatures
    assert_eq!(table.select(RowKind::Aggregate, "sigma").count(), 8);
    assert_eq!(table.select(RowKind::Theory, "sigma2_full").count(), 8);
    for row in table.select(RowKind::Aggregate, "sigma") {
        assert_eq!(row.n, 25);
    }
}

#[test]
fn sweeps_are_extensible_without_recomputation() {
    let base = ExperimentConfig::parse(CONFIG).unwrap();
    let mut wider = base.clone();
    wider.beta_list = vec![0.0, 0.9, 2.0];
    let a = run_with_workers(&base, 1).unwrap();
    let b = run_with_workers(&wider, 3).unwrap();
    // point indices shift, but a realization of the same point index reuses its seed
    let first_a: Vec<f64> = a
        .select(RowKind::Sample, "sigma")
        .filter(|r| r.point.index == 0)
        .map(|r| r.value)
        .collect();
    let first_b: Vec<f64> = b
        .select(RowKind::Sample, "sigma")
        .filter(|r| r.point.index == 0)
        .map(|r| r.value)
        .collect();
    assert_eq!(first_a, first_b);
}

#[test]
fn config_errors_carry_line_numbers() {
    let bad = CONFIG.replace("n_realizations = 25", "n_realizations = many");
    let err = ExperimentConfig::parse(&bad).unwrap_err();
    assert!(err.to_string().contains("line 11"), "{err}");
    let unknown = format!("{CONFIG}temperature = 3\n");
    assert!(ExperimentConfig::parse(&unknown).unwrap_err().to_string().contains("line 13"));
}
