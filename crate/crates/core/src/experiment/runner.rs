//! Executes an [`ExperimentConfig`] into a [`ResultTable`].
//!
//! Sweep points are the Cartesian product `n_sys × n_env × λ × β` in that
//! order. Realization `r` of point `p` draws its state from
//! `derive_seed(master_seed, p, r)`, so results do not depend on the worker
//! count or on which other points are in the sweep. Failures are recorded as
//! rows and never abort the sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::config::{Estimator, ExperimentConfig, Mode};
use crate::experiment::table::{ResultTable, Row, SweepPoint};
use crate::hamiltonian::{Part, SpinModel};
use crate::observe::{self, InitialState};
use crate::propagate::{self, Propagator};
use crate::rng::derive_seed;
use crate::spectrum::{self, SpectrumSummary};
use crate::stats::{self, Summary};
use crate::theory::{self, ExactGibbs, PredictionInputs};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SPINBATH_WORKERS";

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|n: &usize| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &n_sys in &config.n_sys_list {
        for &n_env in &config.n_env_list {
            for &lambda in &config.lambda_list {
                for &beta in &config.beta_list {
                    out.push(SweepPoint {
                        index: out.len(),
                        n_sys,
                        n_env,
                        lambda,
                        beta,
                    });
                }
            }
        }
    }
    out
}

pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    run_with_workers(config, workers_from_env())
}

pub fn run_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidModel(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

/// Everything shared by the points of one `(n_sys, n_env, λ)` group.
struct Context {
    model: SpinModel,
    hs: Option<SpectrumSummary>,
    propagator: Option<Propagator>,
    env_propagator: Option<Propagator>,
    gibbs: Option<ExactGibbs>,
    inputs: Option<PredictionInputs>,
}

impl Context {
    fn build(config: &ExperimentConfig, p: &SweepPoint) -> Result<Self> {
        let model = config.build_model(p.n_sys, p.n_env, p.lambda)?;
        let mut ctx = Context {
            model,
            hs: None,
            propagator: None,
            env_propagator: None,
            gibbs: None,
            inputs: None,
        };
        let sampling = matches!(config.mode, Mode::StaticMeasure | Mode::TheoryOverlay | Mode::TimeTrace);
        if sampling {
            ctx.hs = Some(spectrum::diagonalize(&ctx.model, Part::System)?);
            if config.estimator == Estimator::Gibbs && config.mode != Mode::TimeTrace {
                ctx.gibbs = Some(ExactGibbs::new(&ctx.model)?);
            } else {
                ctx.propagator = Some(Propagator::new(&ctx.model, config.method)?);
                if config.initial_state == InitialState::Ududy {
                    let m = &ctx.model;
                    let env = SpinModel::new(m.n_env(), 0, m.env_bonds().to_vec(), vec![], vec![], 0.0)?;
                    ctx.env_propagator = Some(Propagator::new(&env, config.method)?);
                }
            }
        }
        if config.mode == Mode::TheoryOverlay {
            ctx.inputs = Some(PredictionInputs::from_model(&ctx.model, 0.0)?);
        }
        Ok(ctx)
    }

    fn hs(&self) -> &SpectrumSummary {
        self.hs.as_ref().expect("sampling modes diagonalize H_S")
    }

    fn initial_state(&self, config: &ExperimentConfig, beta: f64, seed: u64) -> Result<crate::StateVector> {
        let prop = self.propagator.as_ref().expect("sampling modes build a propagator");
        match config.initial_state {
            InitialState::X => Ok(prop.thermal_state(beta, seed)?.state),
            InitialState::Ududy => {
                let env = self
                    .env_propagator
                    .as_ref()
                    .expect("built for UDUDY")
                    .thermal_state(beta, seed)?
                    .state;
                let m = &self.model;
                let sys = crate::StateVector::basis(m.dim_system(), observe::alternating_system_index(m.n_system()));
                Ok(crate::StateVector::product(&sys, &env))
            }
        }
    }
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(config.mode);
    type Key = (usize, usize, u64);
    let mut cached: Option<(Key, std::result::Result<Context, String>)> = None;
    for p in sweep_points(config) {
        let key = (p.n_sys, p.n_env, p.lambda.to_bits());
        if cached.as_ref().map(|(k, _)| *k) != Some(key) {
            cached = Some((key, Context::build(config, &p).map_err(|e| e.to_string())));
        }
        let rows = match &cached.as_ref().expect("just filled").1 {
            Ok(ctx) => run_point(config, ctx, &p),
            Err(msg) => vec![Row::failure(p, None, msg)],
        };
        table.rows.extend(rows);
    }
    Ok(table)
}

fn run_point(config: &ExperimentConfig, ctx: &Context, p: &SweepPoint) -> Vec<Row> {
    let res = match config.mode {
        Mode::StaticMeasure | Mode::TheoryOverlay => static_measure(config, ctx, p),
        Mode::TimeTrace => time_trace(config, ctx, p),
        Mode::SymmetryCheck => symmetry_check(ctx, p),
        Mode::NormalizationDiag => normalization_diag(config, ctx, p),
        Mode::MomentCheck => Ok(moment_check(config, ctx, p)),
    };
    res.unwrap_or_else(|e| vec![Row::failure(*p, None, &e.to_string())])
}

const MEASURES: [&str; 4] = ["sigma", "delta", "b", "delta_beta"];

/// Aggregates of the per-realization values `v[q][r]` of each quantity `q`.
fn summarize(p: &SweepPoint, names: &[&str], values: &[Vec<f64>], rows: &mut Vec<Row>) {
    for (name, v) in names.iter().zip(values) {
        if let Some(s) = Summary::of(v) {
            rows.push(Row::aggregate(*p, name, s.mean, Some(s.stderr), s.n));
        }
        // second moments and their root, which the predictions refer to
        if matches!(*name, "sigma" | "delta" | "delta_beta") {
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            if let Some(s) = Summary::of(&sq) {
                let rms = s.mean.sqrt();
                let rms_err = if rms > 0.0 { s.stderr / (2.0 * rms) } else { 0.0 };
                rows.push(Row::aggregate(*p, &format!("{name}2"), s.mean, Some(s.stderr), s.n));
                rows.push(Row::aggregate(*p, &format!("{name}_rms"), rms, Some(rms_err), s.n));
            }
        }
    }
}

fn static_measure(config: &ExperimentConfig, ctx: &Context, p: &SweepPoint) -> Result<Vec<Row>> {
    let hs = ctx.hs();
    let mut rows = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); MEASURES.len()];
    if let Some(g) = &ctx.gibbs {
        let r = observe::measure(&g.reduced_state(p.beta, hs)?, hs, p.beta)?;
        let v = [r.sigma, r.delta, r.b, r.delta_at_beta];
        for (k, name) in MEASURES.iter().enumerate() {
            rows.push(Row::sample(*p, 0, name, v[k]));
            values[k].push(v[k]);
        }
    } else {
        let n = config.realizations_for(ctx.model.n_spins());
        let results: Vec<Result<observe::MeasureReport>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(config.master_seed, p.index as u64, r as u64);
                let psi = ctx.initial_state(config, p.beta, seed)?;
                observe::measure_state(&psi, ctx.model.n_system(), hs, p.beta)
            })
            .collect();
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok(m) => {
                    let v = [m.sigma, m.delta, m.b, m.delta_at_beta];
                    for (k, name) in MEASURES.iter().enumerate() {
                        rows.push(Row::sample(*p, r, name, v[k]));
                        values[k].push(v[k]);
                    }
                }
                Err(e) => rows.push(Row::failure(*p, Some(r), &e.to_string())),
            }
        }
    }
    summarize(p, &MEASURES, &values, &mut rows);

    if let Some(inputs) = &ctx.inputs {
        let inp = inputs.at_beta(p.beta)?;
        let s2 = theory::sigma2_full(&inp);
        rows.push(Row::theory(*p, "sigma2_full", s2));
        rows.push(Row::theory(*p, "sigma2_leading", theory::sigma2_leading(&inp)));
        rows.push(Row::theory(*p, "sigma_rms", s2.sqrt()));
        let d2 = theory::delta2_full(&inp, 0.0);
        rows.push(Row::theory(*p, "delta2_full", d2));
        rows.push(Row::theory(*p, "delta2_leading", theory::delta2_leading(&inp)));
        rows.push(Row::theory(*p, "delta_rms", d2.sqrt()));
        if let Some(s) = Summary::of(&values[2]) {
            rows.push(Row::theory(*p, "delta2_full_fit", theory::delta2_full(&inp, s.mean - p.beta)));
        }
    }
    Ok(rows)
}

fn time_trace(config: &ExperimentConfig, ctx: &Context, p: &SweepPoint) -> Result<Vec<Row>> {
    let hs = ctx.hs();
    let prop = ctx.propagator.as_ref().expect("built for time traces");
    let n = config.realizations_for(ctx.model.n_spins());
    let traces: Vec<Result<Vec<observe::TracePoint>>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.master_seed, p.index as u64, r as u64);
            let psi = ctx.initial_state(config, p.beta, seed)?;
            observe::trace_with(prop, ctx.model.n_system(), &psi, config.t_max, config.dt, hs)
        })
        .collect();
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (r, tr) in traces.into_iter().enumerate() {
        let tr = match tr {
            Ok(tr) => tr,
            Err(e) => {
                rows.push(Row::failure(*p, Some(r), &e.to_string()));
                continue;
            }
        };
        for pt in &tr {
            for (name, v) in [("sigma", pt.sigma), ("delta", pt.delta), ("b", pt.b)] {
                rows.push(Row::sample(*p, r, name, v).at_time(pt.t));
            }
        }
        if let Some(s) = observe::time_average(&tr, config.t_burn) {
            let window: Vec<f64> = tr.iter().filter(|x| x.t >= config.t_burn).map(|x| x.sigma).collect();
            let max_dev = window.iter().map(|v| (v - s.mean).abs()).fold(0.0, f64::max);
            rows.push(Row::aggregate(*p, "sigma_time_mean", s.mean, Some(s.stderr), s.n).with_realization(r));
            rows.push(Row::aggregate(*p, "sigma_time_std", s.stddev, None, s.n).with_realization(r));
            rows.push(Row::aggregate(*p, "sigma_max_dev", max_dev, None, s.n).with_realization(r));
            means.push(s.mean);
        }
    }
    if let Some(s) = Summary::of(&means) {
        rows.push(Row::aggregate(*p, "sigma_time_mean", s.mean, Some(s.stderr), s.n));
    }
    Ok(rows)
}

fn symmetry_check(ctx: &Context, p: &SweepPoint) -> Result<Vec<Row>> {
    let t = theory::first_order_symmetry_trace(&ctx.model, p.beta)?;
    Ok(vec![
        Row::theory(*p, "trace_a", t.trace_a),
        Row::theory(*p, "trace_b", t.trace_b),
        Row::theory(*p, "relative_a", t.relative_a()),
        Row::theory(*p, "relative_b", t.relative_b()),
    ])
}

fn normalization_diag(config: &ExperimentConfig, ctx: &Context, p: &SweepPoint) -> Result<Vec<Row>> {
    let n = config.realizations_for(ctx.model.n_spins());
    let seed = derive_seed(config.master_seed, p.index as u64, 0);
    let diffs = propagate::normalization_diagnostic(&ctx.model, p.beta, n, seed)?;
    let mut rows: Vec<Row> = diffs
        .iter()
        .enumerate()
        .map(|(r, d)| Row::sample(*p, r, "diff", *d))
        .collect();
    if let Some(s) = Summary::of(&diffs) {
        rows.push(Row::aggregate(*p, "diff", s.mean, Some(s.stderr), s.n));
    }
    if let Some(m) = stats::median(&diffs) {
        rows.push(Row::aggregate(*p, "diff_median", m, None, diffs.len()));
    }
    Ok(rows)
}

/// Moments of `x = |d_0|²` and `y = |d_1|²` over random states, against
/// `E x = 1/D`, `E x² = 2/(D(D+1))`, `E xy = 1/(D(D+1))`.
fn moment_check(config: &ExperimentConfig, ctx: &Context, p: &SweepPoint) -> Vec<Row> {
    let dim = ctx.model.dim();
    let n = config.realizations_for(ctx.model.n_spins());
    let samples: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|r| {
            let d = propagate::random_state(dim, derive_seed(config.master_seed, p.index as u64, r as u64));
            let x = d[0].norm_sqr();
            let y = if dim > 1 { d[1].norm_sqr() } else { 0.0 };
            [x, x * x, x * y]
        })
        .collect();
    let names = ["moment_x", "moment_x2", "moment_xy"];
    let mut rows = Vec::new();
    for (r, s) in samples.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            rows.push(Row::sample(*p, r, name, s[k]));
        }
    }
    let cols: Vec<Vec<f64>> = (0..3).map(|k| samples.iter().map(|s| s[k]).collect()).collect();
    summarize(p, &names, &cols, &mut rows);
    let d = dim as f64;
    let expected = [1.0 / d, 2.0 / (d * (d + 1.0)), 1.0 / (d * (d + 1.0))];
    for (name, e) in names.iter().zip(expected) {
        rows.push(Row::theory(*p, name, e));
    }
    rows
}
