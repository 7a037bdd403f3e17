//! Built-in acceptance suite.
//!
//! Each criterion runs a fixed, seeded experiment and compares it with an
//! exact formula, an independent dense oracle or a fitted scaling exponent.
//! A criterion that cannot be evaluated is reported as failed with the error.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::experiment::config::{ExperimentConfig, Mode, ModelSpec};
use crate::experiment::runner::run_with_workers;
use crate::experiment::table::{ResultTable, Row, RowKind};
use crate::hamiltonian::{build_chain_model, build_ring_model, EnvTopology, Part, SpinModel};
use crate::observe;
use crate::oracle;
use crate::propagate::{random_state, Method, Propagator};
use crate::spectrum;
use crate::state::StateVector;
use crate::stats::{self, Summary};
use crate::theory::{self, ExactGibbs};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {:<40} {verdict}  {}", self.id, self.name, self.detail)
    }
}

pub const NAMES: [&str; 9] = [
    "infinite-temperature ensemble values",
    "sigma temperature dependence",
    "delta temperature dependence",
    "nondegenerate system ground state",
    "first-order symmetry traces",
    "propagator oracle equivalence",
    "stationarity of thermal pure states",
    "coupled-regime exponents",
    "moment and normalization diagnostics",
];

/// Runs criterion `id` (1 to 9).
pub fn run_criterion(id: usize, workers: usize) -> CriterionOutcome {
    let res = match id {
        1 => infinite_temperature(workers),
        2 => sigma_temperature(workers),
        3 => delta_temperature(workers),
        4 => nondegenerate_ground(workers),
        5 => symmetry_traces(),
        6 => propagator_oracle(),
        7 => stationarity(workers),
        8 => coupled_exponents(),
        9 => diagnostics(workers),
        _ => panic!("no criterion {id}"),
    };
    let name = NAMES[id - 1];
    match res {
        Ok((passed, detail)) => CriterionOutcome { id, name, passed, detail },
        Err(e) => CriterionOutcome {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_all(workers: usize) -> Vec<CriterionOutcome> {
    (1..=9).map(|id| run_criterion(id, workers)).collect()
}

type Check = Result<(bool, String)>;

const MASTER_SEED: u64 = 20240601;

fn chain(j: f64) -> ModelSpec {
    ModelSpec::Chain {
        j_iso: j,
        omega_iso: 1.0,
        delta_iso: 1.0,
    }
}

fn aggregate<'a>(t: &'a ResultTable, point: usize, q: &'a str) -> Result<&'a Row> {
    t.find(point, RowKind::Aggregate, q)
        .ok_or_else(|| crate::Error::InvalidModel(format!("missing aggregate `{q}` at point {point}")))
}

fn theory_row<'a>(t: &'a ResultTable, point: usize, q: &'a str) -> Result<&'a Row> {
    t.find(point, RowKind::Theory, q)
        .ok_or_else(|| crate::Error::InvalidModel(format!("missing theory `{q}` at point {point}")))
}

fn z(row: &Row, target: f64) -> f64 {
    Summary {
        mean: row.value,
        stddev: 0.0,
        stderr: row.stderr.unwrap_or(0.0),
        n: row.n,
    }
    .z_score(target)
}

fn failures_of(t: &ResultTable) -> Option<String> {
    t.failures().next().map(|r| format!("sweep point {} failed: {}", r.point.index, r.status))
}

/// Exact `E(σ²)` and `E(δ²)` of random states.
fn infinite_temperature(workers: usize) -> Check {
    let mut c = ExperimentConfig::new(Mode::StaticMeasure, chain(1.0));
    c.n_sys_list = vec![2, 3];
    c.n_env_list = vec![6, 8];
    c.beta_list = vec![0.0];
    c.lambda_list = vec![1.0];
    c.n_realizations = Some(2000);
    c.master_seed = MASTER_SEED;
    let t = run_with_workers(&c, workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let mut worst: f64 = 0.0;
    for (k, p) in crate::experiment::runner::sweep_points(&c).iter().enumerate() {
        let (s2, d2) = theory::infinite_temperature_scaling(1 << p.n_sys, 1 << p.n_env);
        worst = worst.max(z(aggregate(&t, k, "sigma2")?, s2));
        worst = worst.max(z(aggregate(&t, k, "delta_beta2")?, d2));
    }
    Ok((worst < 3.0, format!("max z = {worst:.2} over 4 sizes")))
}

fn low_temperature_grid() -> Vec<f64> {
    // 12 temperatures log-spaced over T/J ∈ [0.02, 10], as inverse temperatures
    (0..12)
        .map(|k| {
            let t = (0.02f64.ln() + (10f64.ln() - 0.02f64.ln()) * k as f64 / 11.0).exp();
            1.0 / t
        })
        .collect()
}

fn uncoupled_chain_sweep(workers: usize) -> Result<(ExperimentConfig, ResultTable)> {
    let mut c = ExperimentConfig::new(Mode::TheoryOverlay, chain(1.0));
    c.n_sys_list = vec![4];
    c.n_env_list = vec![8];
    c.beta_list = low_temperature_grid();
    c.lambda_list = vec![0.0];
    c.n_realizations = Some(1000);
    c.method = Method::Exact;
    c.master_seed = MASTER_SEED + 2;
    let t = run_with_workers(&c, workers)?;
    Ok((c, t))
}

fn sigma_temperature(workers: usize) -> Check {
    let (c, t) = uncoupled_chain_sweep(workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let mut worst: f64 = 0.0;
    for k in 0..c.beta_list.len() {
        let rms = aggregate(&t, k, "sigma_rms")?;
        worst = worst.max(z(rms, theory_row(&t, k, "sigma_rms")?.value));
    }
    // index 0 is the lowest temperature
    let plateau = aggregate(&t, 0, "sigma_rms")?.value;
    let ok = worst < 3.0 && (plateau - 0.21).abs() <= 0.01;
    Ok((ok, format!("max z = {worst:.2}, plateau sqrt E(sigma^2) = {plateau:.4}")))
}

fn delta_temperature(workers: usize) -> Check {
    let (c, t) = uncoupled_chain_sweep(workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let mut worst: f64 = 0.0;
    for k in 0..c.beta_list.len() {
        let d2 = aggregate(&t, k, "delta_beta2")?;
        worst = worst.max(z(d2, theory_row(&t, k, "delta2_full")?.value));
    }
    let model = c.build_model(4, 8, 0.0)?;
    let g_s = spectrum::eigenvalues(&model, Part::System)?.ground_degeneracy();
    let g_e = spectrum::eigenvalues(&model, Part::Environment)?.ground_degeneracy();
    let (_, limit) = theory::low_temperature_limits(g_s, g_e, model.dim_system(), model.dim_env());

    // The environment gap is 0.076, so T = 0.02 is not yet the ground manifold.
    // At β = 1000 the closed form must reach the limit, and the sampled states
    // are Haar-random in the M = g_S g_E dimensional ground manifold, for which
    // E(δ²) = (g_S - 1)/(g_S (M + 1)) exactly.
    let mut deep = c.clone();
    deep.beta_list = vec![1000.0];
    deep.n_realizations = Some(10_000);
    deep.master_seed = MASTER_SEED + 3;
    let t = run_with_workers(&deep, workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let predicted = theory_row(&t, 0, "delta2_full")?.value;
    let rel_theory = (predicted - limit).abs() / limit;
    let measured = aggregate(&t, 0, "delta_beta2")?;
    let manifold = (g_s as f64 - 1.0) / (g_s as f64 * ((g_s * g_e) as f64 + 1.0));
    let z_manifold = z(measured, manifold);
    let rel_sample = (measured.value - limit).abs() / limit;
    let ok = worst < 3.0 && g_s == 5 && g_e == 9 && rel_theory < 0.01 && z_manifold < 3.0;
    Ok((
        ok,
        format!(
            "max z = {worst:.2}; g_S = {g_s}, g_E = {g_e}; beta = 1000: theory {predicted:.5e} vs limit {limit:.5e} (rel {rel_theory:.1e}); sampled {:.5e} ± {:.1e}, ground-manifold value {manifold:.5e} (z = {z_manifold:.2}), {:.1}% below the limit",
            measured.value,
            measured.stderr.unwrap_or(0.0),
            100.0 * rel_sample
        ),
    ))
}

fn nondegenerate_ground(workers: usize) -> Check {
    let mut c = ExperimentConfig::new(Mode::StaticMeasure, chain(-1.0));
    c.n_sys_list = vec![4];
    c.n_env_list = vec![8];
    c.beta_list = vec![50.0];
    c.lambda_list = vec![0.0];
    c.method = Method::Exact;
    c.master_seed = MASTER_SEED + 4;
    let t = run_with_workers(&c, workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let g_s = spectrum::eigenvalues(&c.build_model(4, 8, 0.0)?, Part::System)?.ground_degeneracy();
    let sigma = aggregate(&t, 0, "sigma")?;
    let max = t
        .select(RowKind::Sample, "sigma")
        .map(|r| r.value)
        .fold(0.0, f64::max);
    Ok((
        g_s == 1 && sigma.value < 1e-3,
        format!("g_S = {g_s}, mean sigma = {:.3e}, max over {} states = {max:.3e}", sigma.value, sigma.n),
    ))
}

/// Ten ring and ten chain models with random couplings and sizes.
fn symmetry_models() -> Result<Vec<SpinModel>> {
    use rand::Rng;
    let mut rng = crate::rng::seeded(MASTER_SEED + 5);
    let mut out = Vec::new();
    for k in 0..10u64 {
        let ns = rng.random_range(2..=4);
        let ne = rng.random_range(2..=12 - ns);
        let topology = if k % 2 == 0 {
            EnvTopology::Chain
        } else {
            EnvTopology::FullyConnected
        };
        let j = rng.random_range(-1.5..1.5);
        let lambda = rng.random_range(0.1..1.5);
        out.push(crate::hamiltonian::build_ring_model_with(
            ns,
            ne,
            j,
            rng.random(),
            rng.random(),
            lambda,
            topology,
        )?);
    }
    for _ in 0..10 {
        let ns = rng.random_range(1..=4);
        let ne = rng.random_range(1..=12 - ns);
        let (j, o, d) = (
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        );
        out.push(build_chain_model(ns, ne, j, o, d, rng.random_range(0.1..1.5))?);
    }
    Ok(out)
}

fn symmetry_traces() -> Check {
    let models = symmetry_models()?;
    let mut worst: f64 = 0.0;
    for (k, m) in models.iter().enumerate() {
        let beta = 0.3 + 0.2 * k as f64;
        let t = theory::first_order_symmetry_trace(m, beta)?;
        worst = worst.max(t.relative_a()).max(t.relative_b());
    }
    let broken = models[0].with_coupling_shift(0.3);
    let b = theory::first_order_symmetry_trace(&broken, 0.7)?;
    let broken_rel = b.relative_a().max(b.relative_b());
    Ok((
        worst < 1e-10 && broken_rel > 1e-3,
        format!("max relative trace {worst:.1e} over {} models, symmetry-broken {broken_rel:.1e}", models.len()),
    ))
}

/// `e^{z H}ψ` from a real symmetric eigendecomposition.
fn eigen_exp(values: &[f64], vectors: &DMatrix<f64>, z: C64, psi: &StateVector) -> StateVector {
    let n = values.len();
    let re = DMatrix::from_iterator(n, 1, psi.iter().map(|c| c.re));
    let im = DMatrix::from_iterator(n, 1, psi.iter().map(|c| c.im));
    let (cr, ci) = (vectors.tr_mul(&re), vectors.tr_mul(&im));
    let mut fr = DMatrix::zeros(n, 1);
    let mut fi = DMatrix::zeros(n, 1);
    for k in 0..n {
        let w = C64::new(cr[k], ci[k]) * (z * values[k]).exp();
        fr[k] = w.re;
        fi[k] = w.im;
    }
    let (or, oi) = (vectors * fr, vectors * fi);
    StateVector::from_amplitudes((0..n).map(|k| C64::new(or[k], oi[k])).collect())
}

fn propagator_oracle() -> Check {
    let mut worst: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let models = [build_ring_model(4, 4, -1.0, 3, 4, 1.0)?, build_chain_model(4, 6, 1.0, -0.7, 0.45, 0.8)?];
    for (k, m) in models.iter().enumerate() {
        let dense = oracle::dense_hamiltonian_embedded(m, Part::Full);
        let real = dense.map(|c| c.re);
        let imag = dense.map(|c| c.im).amax();
        if imag > 0.0 {
            return Ok((false, format!("Hamiltonian of model {k} is not real")));
        }
        let dim = m.dim();
        let psi = random_state(dim, MASTER_SEED + 6 + k as u64);
        let prop = Propagator::chebyshev(m);
        // N = 8 against scaling and squaring Padé, N = 10 against a symmetric eigensolver
        let eig = (dim > 256).then(|| {
            let e = real.clone().symmetric_eigen();
            (e.eigenvalues.as_slice().to_vec(), e.eigenvectors)
        });
        let values = match &eig {
            Some((v, _)) => v.clone(),
            None => oracle::eigenvalues(&dense),
        };
        let e0 = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let e1 = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = e1 - e0;
        let shifted = &dense - DMatrix::<C64>::identity(dim, dim) * C64::new(e0, 0.0);
        let exact = |z: C64, shift: f64| match &eig {
            Some((v, vec)) => {
                let shifted_values: Vec<f64> = v.iter().map(|e| e - shift).collect();
                eigen_exp(&shifted_values, vec, z, &psi)
            }
            None if shift == 0.0 => oracle::exp_apply(&dense, z, &psi),
            None => oracle::exp_apply(&shifted, z, &psi),
        };
        for scale in [1.0, 10.0, 100.0] {
            let t = scale / width;
            let cheb = prop.evolve(&psi, t)?;
            worst = worst.max(cheb.max_abs_diff(&exact(C64::new(0.0, -t), 0.0))?);
            worst_norm = worst_norm.max((cheb.norm() - 1.0).abs());

            // e^{-β(H - E_0)/2} ψ keeps every element of order one
            let beta = scale / width;
            let (mut v, log_scale) = prop.imaginary_time(&psi, beta / 2.0)?;
            v.scale(C64::new((log_scale + beta * e0 / 2.0).exp(), 0.0));
            worst = worst.max(v.max_abs_diff(&exact(C64::new(-beta / 2.0, 0.0), e0))?);
        }
    }
    Ok((
        worst < 1e-10 && worst_norm < 1e-12,
        format!("max elementwise deviation {worst:.1e}, max norm drift {worst_norm:.1e}"),
    ))
}

fn ring(lambda: f64) -> Result<SpinModel> {
    build_ring_model(4, 8, -1.0, 1, 2, lambda)
}

fn stationarity(workers: usize) -> Check {
    let beta = 0.9;
    let model = ring(1.0)?;
    let hs = spectrum::diagonalize(&model, Part::System)?;
    let psi = Propagator::chebyshev(&model).thermal_state(beta, MASTER_SEED + 7)?.state;
    let trace = observe::trace_time_series(&model, &psi, 300.0, 0.5, &hs)?;
    let s = observe::time_average(&trace, 0.0).expect("nonempty trace");
    let max_dev = trace.iter().map(|p| (p.sigma - s.mean).abs()).fold(0.0, f64::max);
    let stationary = max_dev < 5.0 * s.stddev;

    let mut c = ExperimentConfig::new(Mode::StaticMeasure, ModelSpec::from_model(&ring(0.0)?));
    c.n_sys_list = vec![4];
    c.n_env_list = vec![8];
    c.beta_list = vec![beta];
    c.lambda_list = vec![0.0];
    c.n_realizations = Some(100);
    c.method = Method::Exact;
    c.master_seed = MASTER_SEED + 8;
    let t = run_with_workers(&c, workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let b = aggregate(&t, 0, "b")?;
    let zb = z(b, beta);
    Ok((
        stationary && zb < 3.0,
        format!(
            "sigma mean {:.4e}, std {:.2e}, max deviation {:.2} std; b = {:.4} ± {:.4} (z = {zb:.2})",
            s.mean,
            s.stddev,
            max_dev / s.stddev,
            b.value,
            b.stderr.unwrap_or(0.0)
        ),
    ))
}

fn gibbs_sigma(model: &SpinModel, betas: &[f64]) -> Result<Vec<f64>> {
    let hs = spectrum::diagonalize(model, Part::System)?;
    let g = ExactGibbs::new(model)?;
    betas
        .iter()
        .map(|&b| Ok(observe::sigma(&g.reduced_state(b, &hs)?)))
        .collect()
}

fn coupled_exponents() -> Check {
    let base = build_ring_model(2, 10, -1.0, 1, 2, 1.0)?;
    let lambdas = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut by_lambda = Vec::new();
    for &l in &lambdas {
        by_lambda.push(gibbs_sigma(&base.with_lambda(l), &[0.9])?[0]);
    }
    let betas = [0.15, 0.3, 0.45, 0.6, 0.75, 0.9];
    let by_beta = gibbs_sigma(&base, &betas)?;
    let el = stats::power_law_exponent(&lambdas, &by_lambda).unwrap_or(f64::NAN);
    let eb = stats::power_law_exponent(&betas, &by_beta).unwrap_or(f64::NAN);
    Ok((
        (el - 2.0).abs() <= 0.5 && (eb - 3.0).abs() <= 0.8,
        format!("exponent in lambda {el:.3}, in beta {eb:.3}"),
    ))
}

fn diagnostics(workers: usize) -> Check {
    let mut c = ExperimentConfig::new(Mode::MomentCheck, chain(1.0));
    c.n_sys_list = vec![2];
    c.n_env_list = vec![2];
    c.n_realizations = Some(10_000);
    c.master_seed = MASTER_SEED + 9;
    let t = run_with_workers(&c, workers)?;
    let mut worst: f64 = 0.0;
    for q in ["moment_x", "moment_x2", "moment_xy"] {
        worst = worst.max(z(aggregate(&t, 0, q)?, theory_row(&t, 0, q)?.value));
    }

    let mut c = ExperimentConfig::new(Mode::NormalizationDiag, chain(1.0));
    c.n_sys_list = vec![4];
    c.n_env_list = (2..=10).collect();
    c.beta_list = vec![1.0];
    c.n_realizations = Some(1000);
    c.master_seed = MASTER_SEED + 10;
    let t = run_with_workers(&c, workers)?;
    if let Some(f) = failures_of(&t) {
        return Ok((false, f));
    }
    let medians: Vec<f64> = t.select(RowKind::Aggregate, "diff_median").map(|r| r.value).collect();
    let monotone = medians.len() == 9 && medians.windows(2).all(|w| w[1] < w[0]);
    Ok((
        worst < 3.0 && monotone,
        format!(
            "moment max z = {worst:.2}; median diff D=2^6: {:.2e} -> D=2^14: {:.2e}, decreasing: {monotone}",
            medians.first().copied().unwrap_or(f64::NAN),
            medians.last().copied().unwrap_or(f64::NAN)
        ),
    ))
}
