//! Reduced density matrix of the system and the measures `σ`, `δ` and `b`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::SpinModel;
use crate::propagate::{Method, Propagator};
use crate::spectrum::SpectrumSummary;
use crate::state::StateVector;
use crate::stats::Summary;

/// Diagonal entries below this are floored before taking logarithms.
pub const DIAGONAL_FLOOR: f64 = 1e-300;

/// System energies closer than this fraction of the spectral width count as
/// equal in the `b` fit.
pub const ENERGY_EQUALITY_TOLERANCE: f64 = 1e-9;

/// Default burn-in time for time averages.
pub const DEFAULT_T_BURN: f64 = 300.0;

/// `ρ̃ = Tr_E |ψ⟩⟨ψ|` expressed in the eigenbasis of `H_S`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensityMatrix {
    entries: DMatrix<C64>,
}

impl ReducedDensityMatrix {
    /// Wraps a matrix already expressed in the `H_S` eigenbasis.
    pub fn from_entries(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }
}

fn eigenvectors(hs: &SpectrumSummary) -> Result<&DMatrix<f64>> {
    hs.eigenvectors()
        .ok_or_else(|| Error::InvalidModel("the H_S spectrum needs eigenvectors".into()))
}

/// Traces out the environment (all bits above the lowest `n_system`) and
/// rotates the result into the eigenbasis of `H_S`.
pub fn reduce_to_system(state: &StateVector, n_system: usize, hs: &SpectrumSummary) -> Result<ReducedDensityMatrix> {
    let ds = 1usize << n_system;
    let v = eigenvectors(hs)?;
    if v.nrows() != ds {
        return Err(Error::DimensionMismatch {
            expected: ds,
            found: v.nrows(),
        });
    }
    if !state.dim().is_multiple_of(ds) || state.dim() < ds {
        return Err(Error::DimensionMismatch {
            expected: ds,
            found: state.dim(),
        });
    }
    let de = state.dim() / ds;
    let amps = state.amplitudes();
    // rotate c(s, p) into the eigenbasis first: c̃(i, p) = Σ_s V_si c(s, p)
    let re = DMatrix::from_iterator(ds, de, amps.iter().map(|c| c.re));
    let im = DMatrix::from_iterator(ds, de, amps.iter().map(|c| c.im));
    let (rr, ri) = (v.tr_mul(&re), v.tr_mul(&im));
    // ρ̃ = c̃ c̃†
    let real = &rr * rr.transpose() + &ri * ri.transpose();
    let imag = &ri * rr.transpose() - &rr * ri.transpose();
    let entries = DMatrix::from_fn(ds, ds, |i, j| C64::new(real[(i, j)], imag[(i, j)]));
    Ok(ReducedDensityMatrix { entries })
}

/// `σ = (Σ_{i<j} |ρ̃_ij|²)^{1/2}`.
pub fn sigma(rdm: &ReducedDensityMatrix) -> f64 {
    let n = rdm.dim();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..j {
            acc += rdm.entries[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Outcome of the `b` fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BFit {
    pub b: f64,
    /// Some diagonal entry was below [`DIAGONAL_FLOOR`] and was replaced by it.
    pub floored: bool,
}

/// Average of `(ln ρ̃_ii - ln ρ̃_jj) / (E_j - E_i)` over all pairs with
/// distinct system energies.
pub fn fit_b(rdm: &ReducedDensityMatrix, hs: &SpectrumSummary) -> Result<BFit> {
    let e = hs.eigenvalues();
    if e.len() != rdm.dim() {
        return Err(Error::DimensionMismatch {
            expected: rdm.dim(),
            found: e.len(),
        });
    }
    let tol = ENERGY_EQUALITY_TOLERANCE * hs.width();
    let mut floored = false;
    let logs: Vec<f64> = rdm
        .diagonal()
        .into_iter()
        .map(|d| {
            if d < DIAGONAL_FLOOR {
                floored = true;
                DIAGONAL_FLOOR.ln()
            } else {
                d.ln()
            }
        })
        .collect();
    let (mut sum, mut pairs) = (0.0, 0usize);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let gap = e[j] - e[i];
            if gap.abs() > tol {
                sum += (logs[i] - logs[j]) / gap;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::UndefinedFit);
    }
    Ok(BFit {
        b: sum / pairs as f64,
        floored,
    })
}

/// Gibbs weights `e^{-bE_i} / Σ e^{-bE_j}` for any real `b`.
pub fn gibbs_weights(energies: &[f64], b: f64) -> Vec<f64> {
    let shift = energies
        .iter()
        .map(|e| -b * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = energies.iter().map(|e| (-b * e - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// `δ = (Σ_i (ρ̃_ii - e^{-bE_i}/Z)²)^{1/2}`.
pub fn delta(rdm: &ReducedDensityMatrix, hs: &SpectrumSummary, b: f64) -> f64 {
    let w = gibbs_weights(hs.eigenvalues(), b);
    rdm.diagonal()
        .iter()
        .zip(&w)
        .map(|(d, g)| (d - g).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureReport {
    pub sigma: f64,
    /// `δ` evaluated at the fitted `b`.
    pub delta: f64,
    pub b: f64,
    pub beta_ref: f64,
    /// `δ` evaluated at `b = beta_ref`.
    pub delta_at_beta: f64,
    pub floored: bool,
}

pub fn measure(rdm: &ReducedDensityMatrix, hs: &SpectrumSummary, beta_ref: f64) -> Result<MeasureReport> {
    let fit = fit_b(rdm, hs)?;
    Ok(MeasureReport {
        sigma: sigma(rdm),
        delta: delta(rdm, hs, fit.b),
        b: fit.b,
        beta_ref,
        delta_at_beta: delta(rdm, hs, beta_ref),
        floored: fit.floored,
    })
}

/// Reduces `state` and evaluates all measures.
pub fn measure_state(state: &StateVector, n_system: usize, hs: &SpectrumSummary, beta_ref: f64) -> Result<MeasureReport> {
    measure(&reduce_to_system(state, n_system, hs)?, hs, beta_ref)
}

/// Initial states of the entirety.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialState {
    /// Canonical thermal pure state of the full `H`.
    #[default]
    X,
    /// System in `↑↓↑↓...`, environment in a canonical thermal pure state of `H_E`.
    Ududy,
}

/// System basis index of `↑↓↑↓...`: even sites up.
pub fn alternating_system_index(n_system: usize) -> usize {
    (0..n_system).step_by(2).map(|b| 1usize << b).sum()
}

impl InitialState {
    pub fn prepare(&self, model: &SpinModel, beta: f64, seed: u64, method: Method) -> Result<StateVector> {
        match self {
            InitialState::X => Ok(Propagator::new(model, method)?.thermal_state(beta, seed)?.state),
            InitialState::Ududy => {
                if model.n_env() == 0 {
                    return Err(Error::InvalidModel("the UDUDY state needs an environment".into()));
                }
                let env_only = SpinModel::new(model.n_env(), 0, model.env_bonds().to_vec(), vec![], vec![], 0.0)?;
                let env = Propagator::new(&env_only, method)?.thermal_state(beta, seed)?.state;
                let sys = StateVector::basis(model.dim_system(), alternating_system_index(model.n_system()));
                Ok(StateVector::product(&sys, &env))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub sigma: f64,
    pub delta: f64,
    pub b: f64,
}

/// Measures at `t = 0, dt, 2dt, ...` up to `t_max` under `e^{-iHt}`.
pub fn trace_time_series(
    model: &SpinModel,
    initial_state: &StateVector,
    t_max: f64,
    dt: f64,
    hs: &SpectrumSummary,
) -> Result<Vec<TracePoint>> {
    trace_with(&Propagator::chebyshev(model), model.n_system(), initial_state, t_max, dt, hs)
}

pub fn trace_with(
    propagator: &Propagator,
    n_system: usize,
    initial_state: &StateVector,
    t_max: f64,
    dt: f64,
    hs: &SpectrumSummary,
) -> Result<Vec<TracePoint>> {
    if !(dt > 0.0 && t_max >= 0.0) {
        return Err(Error::InvalidModel(format!("invalid time grid: t_max={t_max}, dt={dt}")));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let mut psi = initial_state.clone();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            psi = propagator.evolve(&psi, dt)?;
        }
        let r = measure_state(&psi, n_system, hs, f64::NAN)?;
        out.push(TracePoint {
            t: k as f64 * dt,
            sigma: r.sigma,
            delta: r.delta,
            b: r.b,
        });
    }
    Ok(out)
}

/// Mean and spread of `σ(t)` over samples with `t ≥ t_burn`.
pub fn time_average(points: &[TracePoint], t_burn: f64) -> Option<Summary> {
    let v: Vec<f64> = points.iter().filter(|p| p.t >= t_burn).map(|p| p.sigma).collect();
    Summary::of(&v)
}
