//! Random and canonical thermal pure states, and their real- and
//! imaginary-time evolution.
//!
//! A [`Propagator`] evaluates `e^{-iHt}ψ` and `e^{-τH}ψ` either by a
//! matrix-free Chebyshev expansion or exactly from dense eigendecompositions.
//! Imaginary-time results carry their scale as a logarithm so that
//! `⟨Ψ₀|e^{-βH}|Ψ₀⟩` never overflows.

pub mod chebyshev;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use chebyshev::{ChebyshevPlan, DEFAULT_MAX_ORDER, DEFAULT_TOLERANCE};

use crate::error::{Error, Result};
use crate::hamiltonian::{energy_bounds, Part, SpinModel, SpinOperator};
use crate::rng;
use crate::spectrum::{self, SpectrumSummary};
use crate::state::StateVector;

/// Haar-random normalized state: independent Gaussian real and imaginary
/// parts for each amplitude, then normalized.
pub fn random_state(dim: usize, seed: u64) -> StateVector {
    let mut rng = rng::seeded(seed);
    let amps = (0..dim)
        .map(|_| {
            let (re, im) = rng::box_muller(&mut rng);
            C64::new(re, im)
        })
        .collect();
    let mut s = StateVector::from_amplitudes(amps);
    s.normalize();
    s
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// Matrix-free Chebyshev expansion over rigorous spectral bounds.
    #[default]
    Chebyshev,
    /// Dense eigendecomposition; factorized into `H_S` and `H_E` when the
    /// coupling vanishes.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalStateRequest {
    pub beta: f64,
    pub seed: u64,
    pub method: Method,
}

impl ThermalStateRequest {
    pub fn new(beta: f64, seed: u64, method: Method) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self { beta, seed, method })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(())
}

/// Normalized `e^{-βH/2}|Ψ₀⟩` together with `ln ⟨Ψ₀|e^{-βH}|Ψ₀⟩`.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub state: StateVector,
    pub log_norm_factor: f64,
}

impl ThermalState {
    /// `⟨Ψ₀|e^{-βH}|Ψ₀⟩`; infinite when it exceeds the double range.
    pub fn norm_factor(&self) -> f64 {
        self.log_norm_factor.exp()
    }
}

#[derive(Clone, Debug)]
struct Eigenbasis {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Eigenbasis {
    fn of(model: &SpinModel, part: Part) -> Result<Self> {
        let s = spectrum::diagonalize(model, part)?;
        Ok(Self::from_summary(&s))
    }

    fn from_summary(s: &SpectrumSummary) -> Self {
        Self {
            values: s.eigenvalues().to_vec(),
            vectors: s.eigenvectors().expect("eigenvectors requested").clone(),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Chebyshev {
        op: SpinOperator,
        e_min: f64,
        e_max: f64,
    },
    Dense(Eigenbasis),
    Decoupled {
        system: Eigenbasis,
        env: Eigenbasis,
    },
}

/// Largest `τ (e_max - e_min)` covered by one imaginary-time Chebyshev series.
pub const MAX_IMAGINARY_STEP: f64 = 8.0;

/// Evaluates exponentials of the full Hamiltonian of one model.
#[derive(Clone, Debug)]
pub struct Propagator {
    kind: Kind,
    dim: usize,
    tolerance: f64,
    max_order: usize,
}

/// Splits a complex vector or matrix into real and imaginary parts.
fn split(data: &[C64], rows: usize, cols: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_iterator(rows, cols, data.iter().map(|c| c.re)),
        DMatrix::from_iterator(rows, cols, data.iter().map(|c| c.im)),
    )
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> StateVector {
    StateVector::from_amplitudes(
        re.iter()
            .zip(im.iter())
            .map(|(r, i)| C64::new(*r, *i))
            .collect(),
    )
}

impl Propagator {
    pub fn new(model: &SpinModel, method: Method) -> Result<Self> {
        match method {
            Method::Chebyshev => Ok(Self::chebyshev(model)),
            Method::Exact if model.is_decoupled() => Self::decoupled(model),
            Method::Exact => Self::dense(model),
        }
    }

    pub fn chebyshev(model: &SpinModel) -> Self {
        let (e_min, e_max) = energy_bounds(model);
        Self {
            kind: Kind::Chebyshev {
                op: model.operator(Part::Full),
                e_min,
                e_max,
            },
            dim: model.dim(),
            tolerance: DEFAULT_TOLERANCE,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    /// Exact propagation from a dense diagonalization of the full `H`.
    pub fn dense(model: &SpinModel) -> Result<Self> {
        Ok(Self {
            kind: Kind::Dense(Eigenbasis::of(model, Part::Full)?),
            dim: model.dim(),
            tolerance: DEFAULT_TOLERANCE,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    /// Exact propagation for `λ H_SE = 0` from the spectra of `H_S` and `H_E`.
    pub fn decoupled(model: &SpinModel) -> Result<Self> {
        if !model.is_decoupled() {
            return Err(Error::InvalidModel(
                "the factorized propagator needs a vanishing coupling".into(),
            ));
        }
        Ok(Self {
            kind: Kind::Decoupled {
                system: Eigenbasis::of(model, Part::System)?,
                env: Eigenbasis::of(model, Part::Environment)?,
            },
            dim: model.dim(),
            tolerance: DEFAULT_TOLERANCE,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    /// Decoupled propagator reusing already computed spectra of `H_S` and `H_E`.
    pub fn from_part_spectra(system: &SpectrumSummary, env: &SpectrumSummary) -> Result<Self> {
        if system.eigenvectors().is_none() || env.eigenvectors().is_none() {
            return Err(Error::InvalidModel("part spectra need eigenvectors".into()));
        }
        Ok(Self {
            kind: Kind::Decoupled {
                system: Eigenbasis::from_summary(system),
                env: Eigenbasis::from_summary(env),
            },
            dim: system.dim() * env.dim(),
            tolerance: DEFAULT_TOLERANCE,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `e^{-iHt} ψ`.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        psi.check_dim(self.dim)?;
        if t == 0.0 {
            return Ok(psi.clone());
        }
        match &self.kind {
            Kind::Chebyshev { op, e_min, e_max } => {
                let plan = ChebyshevPlan::real_time(*e_min, *e_max, t, self.tolerance, self.max_order)?;
                let mut out = plan.apply_series(op, psi)?;
                out.scale(plan.log_prefactor.exp());
                Ok(out)
            }
            _ => Ok(self.apply_spectral(psi, |e| C64::new(0.0, -e * t).exp())),
        }
    }

    /// `e^{-τH} ψ = e^{s} v`, returned as `(v, s)`.
    pub fn imaginary_time(&self, psi: &StateVector, tau: f64) -> Result<(StateVector, f64)> {
        psi.check_dim(self.dim)?;
        check_beta(2.0 * tau)?;
        if tau == 0.0 {
            return Ok((psi.clone(), 0.0));
        }
        match &self.kind {
            Kind::Chebyshev { op, e_min, e_max } => {
                // The series is accurate relative to e^{-τ(E - e_min)} at the lower
                // bound, so a loose bound costs e^{-τ(E_0 - e_min)} in relative
                // precision. Short renormalized steps cap that loss per step.
                let steps = (tau * (e_max - e_min) / MAX_IMAGINARY_STEP).ceil().max(1.0) as usize;
                let plan =
                    ChebyshevPlan::imaginary_time(*e_min, *e_max, tau / steps as f64, self.tolerance, self.max_order)?;
                let mut v = plan.apply_series(op, psi)?;
                let mut log_scale = plan.log_prefactor.re;
                for _ in 1..steps {
                    let norm = v.normalize();
                    log_scale += norm.ln();
                    v = plan.apply_series(op, &v)?;
                    log_scale += plan.log_prefactor.re;
                }
                Ok((v, log_scale))
            }
            _ => {
                let e0 = self.ground_energy();
                let v = self.apply_spectral(psi, |e| C64::new((-tau * (e - e0)).exp(), 0.0));
                Ok((v, -tau * e0))
            }
        }
    }

    /// Normalized `e^{-βH/2} ψ` and `ln ⟨ψ|e^{-βH}|ψ⟩`.
    pub fn project(&self, psi: &StateVector, beta: f64) -> Result<ThermalState> {
        check_beta(beta)?;
        if beta == 0.0 {
            return Ok(ThermalState {
                state: psi.clone(),
                log_norm_factor: psi.norm_sqr().ln(),
            });
        }
        let (mut state, log_scale) = self.imaginary_time(psi, beta / 2.0)?;
        let norm = state.normalize();
        Ok(ThermalState {
            state,
            log_norm_factor: 2.0 * (log_scale + norm.ln()),
        })
    }

    /// Canonical thermal state from the random state with the given seed.
    pub fn thermal_state(&self, beta: f64, seed: u64) -> Result<ThermalState> {
        self.project(&random_state(self.dim, seed), beta)
    }

    fn ground_energy(&self) -> f64 {
        match &self.kind {
            Kind::Dense(b) => b.values[0],
            Kind::Decoupled { system, env } => system.values[0] + env.values[0],
            Kind::Chebyshev { e_min, .. } => *e_min,
        }
    }

    /// `f(H) ψ` from an exact eigendecomposition.
    fn apply_spectral(&self, psi: &StateVector, f: impl Fn(f64) -> C64) -> StateVector {
        match &self.kind {
            Kind::Dense(b) => {
                let (re, im) = split(psi.amplitudes(), psi.dim(), 1);
                let v = &b.vectors;
                let (cr, ci) = (v.tr_mul(&re), v.tr_mul(&im));
                let mut nr = DMatrix::zeros(cr.nrows(), 1);
                let mut ni = DMatrix::zeros(cr.nrows(), 1);
                for k in 0..cr.nrows() {
                    let z = C64::new(cr[k], ci[k]) * f(b.values[k]);
                    nr[k] = z.re;
                    ni[k] = z.im;
                }
                join(&(v * nr), &(v * ni))
            }
            Kind::Decoupled { system, env } => {
                let ds = system.values.len();
                let de = env.values.len();
                // column-major (D_S × D_E) view: entry (s, e) is amplitude s + D_S e
                let (re, im) = split(psi.amplitudes(), ds, de);
                let (vs, ve) = (&system.vectors, &env.vectors);
                let mut tr = vs.tr_mul(&re) * ve;
                let mut ti = vs.tr_mul(&im) * ve;
                for p in 0..de {
                    for i in 0..ds {
                        let z = C64::new(tr[(i, p)], ti[(i, p)]) * f(system.values[i] + env.values[p]);
                        tr[(i, p)] = z.re;
                        ti[(i, p)] = z.im;
                    }
                }
                join(&(vs * tr * ve.transpose()), &(vs * ti * ve.transpose()))
            }
            Kind::Chebyshev { .. } => unreachable!("spectral application needs an eigenbasis"),
        }
    }
}

/// Canonical thermal pure state `e^{-βH/2}|Ψ₀⟩ / ⟨Ψ₀|e^{-βH}|Ψ₀⟩^{1/2}` with
/// `|Ψ₀⟩ = random_state(D, seed)`.
pub fn canonical_thermal_state(model: &SpinModel, request: &ThermalStateRequest) -> Result<ThermalState> {
    check_beta(request.beta)?;
    Propagator::new(model, request.method)?.thermal_state(request.beta, request.seed)
}

/// `e^{-iHt} ψ` for the full Hamiltonian of `model`.
pub fn evolve_real_time(model: &SpinModel, state: &StateVector, t: f64, method: Method) -> Result<StateVector> {
    Propagator::new(model, method)?.evolve(state, t)
}

/// Deviations `|Σ_k |d_k|² p_k - 1/D|` of random states from their mean,
/// with `p_k = p_i^{(S)} p_p^{(E)}` the Gibbs weights of the uncoupled parts.
pub fn normalization_diagnostic(model: &SpinModel, beta: f64, n_realizations: usize, seed: u64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let ps = spectrum::eigenvalues(model, Part::System)?.thermo().probabilities(beta);
    let pe = spectrum::eigenvalues(model, Part::Environment)?.thermo().probabilities(beta);
    let dim = ps.len() * pe.len();
    let inv_d = 1.0 / dim as f64;
    Ok((0..n_realizations)
        .map(|r| {
            let d = random_state(dim, rng::derive_seed(seed, 0, r as u64));
            let mut acc = 0.0;
            for (p, pp) in pe.iter().enumerate() {
                for (i, pi) in ps.iter().enumerate() {
                    // Σ|d|² = 1, so subtracting 1/D termwise leaves the sum unchanged
                    acc += d[i + ps.len() * p].norm_sqr() * (pi * pp - inv_d);
                }
            }
            acc.abs()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_chain_model, build_ring_model, Bond, Coupling};
    use crate::oracle;

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.max_abs_diff(b).unwrap()
    }

    #[test]
    fn random_state_is_normalized_and_deterministic() {
        let a = random_state(64, 5);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        assert_eq!(a, random_state(64, 5));
        assert_ne!(a, random_state(64, 6));
        let one = random_state(1, 3);
        assert!((one[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_returns_the_random_state() {
        let m = build_ring_model(2, 3, -1.0, 1, 2, 1.0).unwrap();
        for method in [Method::Chebyshev, Method::Exact] {
            let r = canonical_thermal_state(&m, &ThermalStateRequest::new(0.0, 9, method).unwrap()).unwrap();
            assert_eq!(r.state, random_state(m.dim(), 9));
            assert!(r.log_norm_factor.abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_beta_is_rejected() {
        assert!(matches!(ThermalStateRequest::new(-1.0, 0, Method::Exact), Err(Error::InvalidBeta(_))));
        assert!(ThermalStateRequest::new(f64::NAN, 0, Method::Exact).is_err());
    }

    #[test]
    fn thermal_state_matches_dense_exponential() {
        let m = build_ring_model(2, 2, -1.0, 3, 4, 1.0).unwrap();
        let h = oracle::dense_hamiltonian(&m, Part::Full);
        let psi0 = random_state(m.dim(), 21);
        let mut reference = oracle::exp_apply(&h, C64::new(-0.5, 0.0), &psi0);
        let norm2 = reference.norm_sqr();
        reference.normalize();
        for method in [Method::Chebyshev, Method::Exact] {
            let r = Propagator::new(&m, method).unwrap().project(&psi0, 1.0).unwrap();
            assert!(max_diff(&r.state, &reference) < 1e-10, "{method:?}");
            assert!((r.norm_factor() - norm2).abs() < 1e-10 * norm2);
        }
    }

    #[test]
    fn chebyshev_and_exact_agree() {
        let m = build_ring_model(3, 5, -1.0, 8, 9, 0.7).unwrap();
        let cheb = Propagator::new(&m, Method::Chebyshev).unwrap();
        let exact = Propagator::new(&m, Method::Exact).unwrap();
        for beta in [0.5, 3.0, 20.0] {
            let a = cheb.thermal_state(beta, 4).unwrap();
            let b = exact.thermal_state(beta, 4).unwrap();
            assert!(max_diff(&a.state, &b.state) < 1e-10);
            assert!((a.log_norm_factor - b.log_norm_factor).abs() < 1e-10);
        }
        let psi = random_state(m.dim(), 77);
        for t in [0.3, 7.0] {
            let a = cheb.evolve(&psi, t).unwrap();
            let b = exact.evolve(&psi, t).unwrap();
            assert!(max_diff(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn decoupled_matches_dense() {
        let m = build_ring_model(2, 4, 1.0, 1, 2, 0.0).unwrap();
        let fac = Propagator::decoupled(&m).unwrap();
        let dense = Propagator::dense(&m).unwrap();
        let psi = random_state(m.dim(), 3);
        assert!(max_diff(&fac.evolve(&psi, 2.5).unwrap(), &dense.evolve(&psi, 2.5).unwrap()) < 1e-12);
        let a = fac.project(&psi, 4.0).unwrap();
        let b = dense.project(&psi, 4.0).unwrap();
        assert!(max_diff(&a.state, &b.state) < 1e-12);
        assert!((a.log_norm_factor - b.log_norm_factor).abs() < 1e-12);
        assert!(Propagator::decoupled(&m.with_lambda(1.0)).is_err());
    }

    #[test]
    fn pair_with_ising_coupling_has_analytic_phases() {
        let m = SpinModel::new(1, 1, vec![], vec![], vec![Bond::new(0, 0, Coupling::new(0.0, 0.0, 1.0))], 1.0)
            .unwrap();
        // -Sz Sz: ↑↓ and ↓↑ sit at +1/4, ↑↑ and ↓↓ at -1/4
        let psi = StateVector::from_amplitudes(vec![C64::new(0.5, 0.0); 4]);
        let t = 3.3;
        let out = evolve_real_time(&m, &psi, t, Method::Chebyshev).unwrap();
        for (k, amp) in out.iter().enumerate() {
            let e = if k == 0 || k == 3 { -0.25 } else { 0.25 };
            let expected = C64::new(0.0, -e * t).exp() * 0.5;
            assert!((amp - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn real_time_is_unitary_and_composes() {
        let m = build_ring_model(4, 8, -1.0, 5, 6, 1.0).unwrap();
        let p = Propagator::chebyshev(&m);
        let psi = random_state(m.dim(), 8);
        let long = p.evolve(&psi, 100.0).unwrap();
        assert!((long.norm() - 1.0).abs() < 1e-12);
        let split = p.evolve(&p.evolve(&psi, 1.7).unwrap(), 2.6).unwrap();
        let whole = p.evolve(&psi, 4.3).unwrap();
        assert!(max_diff(&split, &whole) < 1e-9);
        assert_eq!(p.evolve(&psi, 0.0).unwrap(), psi);
        let back = p.evolve(&p.evolve(&psi, 5.0).unwrap(), -5.0).unwrap();
        assert!(max_diff(&back, &psi) < 1e-11);
    }

    #[test]
    fn imaginary_time_semigroup() {
        let m = build_ring_model(2, 5, 1.0, 3, 3, 1.0).unwrap();
        let p = Propagator::chebyshev(&m);
        let psi = random_state(m.dim(), 2);
        let two_step = p.project(&p.project(&psi, 1.2).unwrap().state, 2.1).unwrap();
        let one_step = p.project(&psi, 3.3).unwrap();
        assert!(max_diff(&two_step.state, &one_step.state) < 1e-9);
    }

    #[test]
    fn order_overflow_is_an_error() {
        let m = build_ring_model(2, 3, 1.0, 3, 3, 1.0).unwrap();
        let p = Propagator::chebyshev(&m).with_max_order(10);
        let psi = random_state(m.dim(), 2);
        assert!(matches!(p.evolve(&psi, 1e3), Err(Error::ChebyshevOrder { .. })));
        assert!(matches!(p.project(&psi, 1e3), Err(Error::ChebyshevOrder { .. })));
    }

    #[test]
    fn thermal_energy_tracks_canonical_average() {
        let m = build_ring_model(2, 8, -1.0, 1, 2, 1.0).unwrap();
        let t = spectrum::eigenvalues(&m, Part::Full).unwrap().thermo();
        let p = Propagator::chebyshev(&m);
        let op = m.operator(Part::Full);
        let beta = 1.0;
        let energies: Vec<f64> = (0..20)
            .map(|s| {
                let st = p.thermal_state(beta, s).unwrap().state;
                st.inner(&op.apply(&st).unwrap()).unwrap().re
            })
            .collect();
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        // typicality: the spread is O(D^{-1/2}) times the energy scale
        assert!((mean - t.internal_energy(beta)).abs() < 0.1);
    }

    #[test]
    fn normalization_diagnostic_behaviour() {
        let m = build_chain_model(2, 4, 1.0, 1.0, 1.0, 0.0).unwrap();
        let zero = normalization_diagnostic(&m, 0.0, 5, 1).unwrap();
        assert!(zero.iter().all(|d| *d == 0.0));
        let a = normalization_diagnostic(&m, 1.0, 3, 4).unwrap();
        assert_eq!(a, normalization_diagnostic(&m, 1.0, 3, 4).unwrap());
        assert!(a.iter().all(|d| *d > 0.0));
    }
}
