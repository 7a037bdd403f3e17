//! Closed-form predictions for `E(σ²)` and `E(δ²)` of the uncoupled
//! entirety, their limits, and the first-order symmetry traces.
//!
//! The free-energy exponentials reduce to Gibbs power sums,
//! `e^{-nβ(F(nβ) - F(β))} = Z(nβ)/Z(β)^n = Σ_k p_k^n`, written `r_n` below.
//! Differences such as `1 - r_2` and `r_2 - r_3` are accumulated from the
//! complementary weights `q_k = 1 - p_k` so that no catastrophic cancellation
//! occurs at low temperature.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{Part, SpinModel};
use crate::observe::ReducedDensityMatrix;
use crate::spectrum::{self, SpectrumSummary, ThermoFunctions};

#[derive(Clone, Debug)]
pub struct PredictionInputs {
    pub thermo_s: ThermoFunctions,
    pub thermo_e: ThermoFunctions,
    pub d_s: usize,
    pub d_e: usize,
    pub beta: f64,
}

impl PredictionInputs {
    pub fn new(thermo_s: ThermoFunctions, thermo_e: ThermoFunctions, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidBeta(beta));
        }
        Ok(Self {
            d_s: thermo_s.dim(),
            d_e: thermo_e.dim(),
            thermo_s,
            thermo_e,
            beta,
        })
    }

    /// Diagonalizes `H_S` and `H_E` of `model`.
    pub fn from_model(model: &SpinModel, beta: f64) -> Result<Self> {
        let ts = spectrum::eigenvalues(model, Part::System)?.thermo();
        let te = spectrum::eigenvalues(model, Part::Environment)?.thermo();
        Self::new(ts, te, beta)
    }

    pub fn at_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.thermo_s.clone(), self.thermo_e.clone(), beta)
    }

    fn d(&self) -> f64 {
        (self.d_s * self.d_e) as f64
    }

    fn system(&self) -> Moments {
        Moments::new(&self.thermo_s.probabilities(self.beta), &self.exclusion_s())
    }

    fn env(&self) -> Moments {
        Moments::new(&self.thermo_e.probabilities(self.beta), &self.exclusion_e())
    }

    fn exclusion_s(&self) -> Vec<f64> {
        complement_weights(&self.thermo_s, self.beta)
    }

    fn exclusion_e(&self) -> Vec<f64> {
        complement_weights(&self.thermo_e, self.beta)
    }
}

/// `q_k = Σ_{j≠k} p_j`, from prefix and suffix sums of the weights.
fn complement_weights(t: &ThermoFunctions, beta: f64) -> Vec<f64> {
    let e0 = t.ground_energy();
    let w: Vec<f64> = t.eigenvalues().iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    exclusion_sums(&w).into_iter().map(|v| v / z).collect()
}

/// `out[k] = Σ_{j≠k} v_j` without subtracting.
fn exclusion_sums(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut prefix = vec![0.0; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + v[k];
    }
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + v[k];
    }
    (0..n).map(|k| prefix[k] + suffix[k + 1]).collect()
}

/// Gibbs power sums of one part.
struct Moments {
    r2: f64,
    r3: f64,
    /// `1 - r2`
    one_minus_r2: f64,
    /// `r2 - r3`
    r2_minus_r3: f64,
    /// `r2 - 2 r3 + r2²`
    x: f64,
    /// `Σ (p_k - 1/n)² = r2 - 1/n`
    r2_minus_uniform: f64,
}

impl Moments {
    fn new(p: &[f64], q: &[f64]) -> Self {
        let n = p.len() as f64;
        let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
        let others = exclusion_sums(&p2);
        let mut m = Moments {
            r2: 0.0,
            r3: 0.0,
            one_minus_r2: 0.0,
            r2_minus_r3: 0.0,
            x: 0.0,
            r2_minus_uniform: 0.0,
        };
        for k in 0..p.len() {
            m.r2 += p2[k];
            m.r3 += p2[k] * p[k];
            m.one_minus_r2 += p[k] * q[k];
            m.r2_minus_r3 += p2[k] * q[k];
            // p²q² + p² Σ_{j≠k} p_j²
            m.x += p2[k] * q[k] * q[k] + p2[k] * others[k];
            m.r2_minus_uniform += (p[k] - 1.0 / n).powi(2);
        }
        m
    }
}

/// `E(σ²) ≈ D/(2(D+1)) (1 - r_S2) r_E2`, the estimate from the approximate
/// thermal state.
pub fn sigma2_leading(inputs: &PredictionInputs) -> f64 {
    let d = inputs.d();
    let (s, e) = (inputs.system(), inputs.env());
    d / (2.0 * (d + 1.0)) * s.one_minus_r2 * e.r2
}

/// Second-order expansion of `E(σ²)` around `|d|² = 1/D`.
pub fn sigma2_full(inputs: &PredictionInputs) -> f64 {
    let d = inputs.d();
    let (s, e) = (inputs.system(), inputs.env());
    0.5 * e.r2 * s.one_minus_r2 - 2.0 * d / (d + 1.0) * e.r3 * s.r2_minus_r3
        + 1.5 * d / (d + 1.0) * e.r2 * e.r2 * s.r2 * s.one_minus_r2
}

/// `E(δ²) ≈ D/(D+1) r_S2 (r_E2 - 1/D)`.
pub fn delta2_leading(inputs: &PredictionInputs) -> f64 {
    let d = inputs.d();
    let (s, e) = (inputs.system(), inputs.env());
    let de = inputs.d_e as f64;
    // r_E2 - 1/D = (r_E2 - 1/D_E) + (1/D_E - 1/D)
    d / (d + 1.0) * s.r2 * (e.r2_minus_uniform + (1.0 / de - 1.0 / d))
}

/// Second-order expansion of `E(δ²)` in `|d|²` and `Δb = b - β`.
///
/// The `C_S(2β)/(4β²)` factor is the energy variance of `H_S` at `2β`, which
/// stays finite at `β = 0`.
pub fn delta2_full(inputs: &PredictionInputs, delta_b: f64) -> f64 {
    let d = inputs.d();
    let (s, e) = (inputs.system(), inputs.env());
    let b = inputs.beta;
    let ts = &inputs.thermo_s;
    let fluct = ts.energy_variance(2.0 * b) + (ts.internal_energy(2.0 * b) - ts.internal_energy(b)).powi(2);
    d / (d + 1.0) * e.r2 * s.x + s.r2 * fluct * delta_b * delta_b
}

/// `β → ∞` limits of `E(σ²)` and `E(δ²)` (at `Δb = 0`) for ground-state
/// degeneracies `g_S`, `g_E`.
pub fn low_temperature_limits(g_s: usize, g_e: usize, d_s: usize, d_e: usize) -> (f64, f64) {
    let (gs, ge) = (g_s as f64, g_e as f64);
    let d = (d_s * d_e) as f64;
    let sigma2 = (gs - 1.0) / (2.0 * gs * ge) * (1.0 - d / ((d + 1.0) * gs * ge));
    let delta2 = (gs - 1.0) / (gs * gs * ge) * d / (d + 1.0);
    (sigma2, delta2)
}

/// `β = 0` values `E(σ²) = (D_S-1)/(2(D+1))` and `E(δ²) = (D_S-1)/(D_S(D+1))`.
pub fn infinite_temperature_scaling(d_s: usize, d_e: usize) -> (f64, f64) {
    let ds = d_s as f64;
    let d = (d_s * d_e) as f64;
    ((ds - 1.0) / (2.0 * (d + 1.0)), (ds - 1.0) / (ds * (d + 1.0)))
}

/// First-order-in-`λ` traces that must vanish for the `O(λ)` corrections to
/// `E(σ²)` and `E(δ²)` to drop out, with the magnitudes they are compared to.
///
/// All Boltzmann factors are taken relative to the ground energies of `H_S`
/// and `H_E`; both traces and scales carry the same overall factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryTraces {
    /// `Tr(H_SE e^{-βH_E} e^{-βH_S})`
    pub trace_a: f64,
    /// `Z_S(β) Tr(e^{-βH_S} e^{-2βH_E} H_SE) - Tr(e^{-2β(H_S+H_E)} H_SE)`
    pub trace_b: f64,
    pub scale_a: f64,
    pub scale_b: f64,
}

impl SymmetryTraces {
    pub fn relative_a(&self) -> f64 {
        self.trace_a.abs() / self.scale_a
    }

    pub fn relative_b(&self) -> f64 {
        self.trace_b.abs() / self.scale_b
    }
}

/// `e^{-x (H - E_0)}` as a dense matrix.
fn boltzmann_matrix(s: &SpectrumSummary, x: f64) -> DMatrix<f64> {
    let v = s.eigenvectors().expect("diagonalize returns eigenvectors");
    let e0 = s.ground_energy();
    let mut scaled = v.clone();
    for (k, e) in s.eigenvalues().iter().enumerate() {
        scaled.column_mut(k).scale_mut((-x * (e - e0)).exp());
    }
    scaled * v.transpose()
}

pub fn first_order_symmetry_trace(model: &SpinModel, beta: f64) -> Result<SymmetryTraces> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let ss = spectrum::diagonalize(model, Part::System)?;
    let se = spectrum::diagonalize(model, Part::Environment)?;
    let (ms1, ms2) = (boltzmann_matrix(&ss, beta), boltzmann_matrix(&ss, 2.0 * beta));
    let (me1, me2) = (boltzmann_matrix(&se, beta), boltzmann_matrix(&se, 2.0 * beta));
    let (ts, te) = (ss.thermo(), se.thermo());
    let zs1 = ts.shifted_z(beta);

    let hse = model.operator(Part::Interaction);
    let ds = model.dim_system();
    let (mut a, mut b1, mut b2) = (0.0, 0.0, 0.0);
    // Tr(H M) = Σ H[r, c] M[c, r] over the nonzero elements of H_SE
    hse.for_each_element(|r, c, h| {
        let (sr, er) = (r % ds, r / ds);
        let (sc, ec) = (c % ds, c / ds);
        a += h * ms1[(sc, sr)] * me1[(ec, er)];
        b1 += h * ms1[(sc, sr)] * me2[(ec, er)];
        b2 += h * ms2[(sc, sr)] * me2[(ec, er)];
    });
    let (lo, hi) = hse.spectral_bounds();
    let norm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    Ok(SymmetryTraces {
        trace_a: a,
        trace_b: zs1 * b1 - b2,
        scale_a: norm * zs1 * te.shifted_z(beta),
        scale_b: norm * te.shifted_z(2.0 * beta) * (zs1 * zs1 + ts.shifted_z(2.0 * beta)),
    })
}

/// Exact Gibbs state `e^{-βH}/Z` of the full Hamiltonian, reduced to the
/// system. This is the state a typical pure state approaches as `D → ∞`.
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    n_system: usize,
}

impl ExactGibbs {
    pub fn new(model: &SpinModel) -> Result<Self> {
        if model.dim() > spectrum::DEFAULT_MAX_DIM {
            return Err(Error::TooLarge {
                dim: model.dim(),
                cap: spectrum::DEFAULT_MAX_DIM,
            });
        }
        let (values, vectors) = spectrum::eigh(&model.operator(Part::Full).to_dense())?;
        Ok(Self {
            values,
            vectors,
            n_system: model.n_system(),
        })
    }

    /// `Tr_E e^{-βH}/Z` in the eigenbasis `hs` of `H_S`.
    pub fn reduced_state(&self, beta: f64, hs: &SpectrumSummary) -> Result<ReducedDensityMatrix> {
        let ds = 1usize << self.n_system;
        let dim = self.values.len();
        let de = dim / ds;
        let e0 = self.values[0];
        let w: Vec<f64> = self.values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut b = self.vectors.clone();
        for (k, wk) in w.iter().enumerate() {
            b.column_mut(k).scale_mut((wk / z).sqrt());
        }
        let mut rho = DMatrix::<f64>::zeros(ds, ds);
        for e in 0..de {
            let block = b.rows(e * ds, ds);
            rho += block * block.transpose();
        }
        let v = hs
            .eigenvectors()
            .ok_or_else(|| Error::InvalidModel("the H_S spectrum needs eigenvectors".into()))?;
        let rotated = v.tr_mul(&rho) * v;
        ReducedDensityMatrix::from_entries(rotated.map(|x| C64::new(x, 0.0)))
    }
}

/// CSV of the four predictions over `betas` for fixed part spectra.
pub fn prediction_table(thermo_s: &ThermoFunctions, thermo_e: &ThermoFunctions, betas: &[f64]) -> Result<String> {
    let mut out = String::from("beta,sigma2_leading,sigma2_full,delta2_leading,delta2_full\n");
    for &beta in betas {
        let inp = PredictionInputs::new(thermo_s.clone(), thermo_e.clone(), beta)?;
        let _ = writeln!(
            out,
            "{beta:e},{:e},{:e},{:e},{:e}",
            sigma2_leading(&inp),
            sigma2_full(&inp),
            delta2_leading(&inp),
            delta2_full(&inp, 0.0)
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_chain_model, build_ring_model};
    use crate::spectrum::SpectrumSummary;

    fn inputs(es: Vec<f64>, ee: Vec<f64>, beta: f64) -> PredictionInputs {
        PredictionInputs::new(
            SpectrumSummary::from_eigenvalues(es).thermo(),
            SpectrumSummary::from_eigenvalues(ee).thermo(),
            beta,
        )
        .unwrap()
    }

    fn chain_inputs(j: f64, beta: f64) -> PredictionInputs {
        PredictionInputs::from_model(&build_chain_model(4, 8, j, 1.0, 1.0, 0.0).unwrap(), beta).unwrap()
    }

    /// Direct transcription with `Z(nβ)/Z(β)^n`, valid where no cancellation occurs.
    fn naive(inp: &PredictionInputs) -> (f64, f64, f64, f64) {
        let b = inp.beta;
        let r = |t: &ThermoFunctions, n: f64| (t.ln_z(n * b) - n * t.ln_z(b)).exp();
        let (s2, s3, e2, e3) = (r(&inp.thermo_s, 2.0), r(&inp.thermo_s, 3.0), r(&inp.thermo_e, 2.0), r(&inp.thermo_e, 3.0));
        let d = inp.d();
        let sl = d / (2.0 * (d + 1.0)) * (1.0 - s2) * e2;
        let sf = 0.5 * e2 * (1.0 - s2) - 2.0 * d / (d + 1.0) * e3 * (s2 - s3) + 1.5 * d / (d + 1.0) * e2 * e2 * s2 * (1.0 - s2);
        let dl = d / (d + 1.0) * s2 * (e2 - 1.0 / d);
        let df = d / (d + 1.0) * e2 * (s2 - 2.0 * s3 + s2 * s2);
        (sl, sf, dl, df)
    }

    #[test]
    fn matches_naive_transcription_at_moderate_beta() {
        for beta in [0.0, 0.2, 1.0, 3.0] {
            let inp = chain_inputs(1.0, beta);
            let (sl, sf, dl, df) = naive(&inp);
            assert!((sigma2_leading(&inp) - sl).abs() < 1e-12 * sl.abs().max(1e-3));
            assert!((sigma2_full(&inp) - sf).abs() < 1e-12 * sf.abs().max(1e-3));
            assert!((delta2_leading(&inp) - dl).abs() < 1e-12 * dl.abs().max(1e-3));
            assert!((delta2_full(&inp, 0.0) - df).abs() < 1e-12 * df.abs().max(1e-3));
        }
    }

    #[test]
    fn infinite_temperature_values() {
        let inp = chain_inputs(1.0, 0.0);
        let (s2, d2) = infinite_temperature_scaling(16, 256);
        assert!((sigma2_full(&inp) - s2).abs() < 1e-15);
        assert!((delta2_full(&inp, 0.0) - d2).abs() < 1e-15);
        assert!((delta2_leading(&inp) - d2).abs() < 1e-15);
        assert!((s2 - 15.0 / (2.0 * 4097.0)).abs() < 1e-18);
        assert_eq!(infinite_temperature_scaling(2, 2).0, 0.1);
        assert_eq!(infinite_temperature_scaling(1, 64), (0.0, 0.0));
    }

    #[test]
    fn two_level_system_by_hand() {
        // system {0, 1}, environment {0, 0}
        let beta: f64 = 0.8;
        let inp = inputs(vec![0.0, 1.0], vec![0.0, 0.0], beta);
        let z = 1.0 + (-beta).exp();
        let s2 = (1.0 + (-2.0 * beta).exp()) / (z * z);
        let d = 4.0;
        let expected = d / (2.0 * (d + 1.0)) * (1.0 - s2) * 0.5;
        assert!((sigma2_leading(&inp) - expected).abs() < 1e-15);
    }

    #[test]
    fn low_temperature_limit_of_ferromagnetic_chain() {
        let (s2, d2) = low_temperature_limits(5, 9, 16, 256);
        assert!((s2.sqrt() - 0.21).abs() < 0.005);
        // the environment gap is 0.076, so β = 1000 is deep in the ground manifold
        let inp = chain_inputs(1.0, 1000.0);
        assert!((sigma2_full(&inp) - s2).abs() < 1e-10 * s2);
        assert!((delta2_full(&inp, 0.0) - d2).abs() < 1e-10 * d2);
        let inp = chain_inputs(1.0, 5000.0);
        assert!((sigma2_full(&inp) - s2).abs() < 1e-12 * s2);
        let shallow = chain_inputs(1.0, 50.0);
        assert!(sigma2_full(&shallow) < s2);
    }

    #[test]
    fn nondegenerate_system_limits_vanish() {
        assert_eq!(low_temperature_limits(1, 7, 16, 256), (0.0, 0.0));
        let inp = chain_inputs(-1.0, 200.0);
        assert!(sigma2_full(&inp).abs() < 1e-20);
        assert!(delta2_full(&inp, 0.0).abs() < 1e-20);
        let (s2, _) = low_temperature_limits(1_000_000, 3, 1 << 20, 1 << 10);
        assert!((s2 - 1.0 / 6.0).abs() < 1e-5);
    }

    #[test]
    fn leading_and_full_agree_for_large_dimension() {
        let m = build_ring_model(2, 8, -1.0, 3, 4, 0.0).unwrap();
        for beta in [0.0, 0.5, 1.0, 2.0] {
            let inp = PredictionInputs::from_model(&m, beta).unwrap();
            let (l, f) = (sigma2_leading(&inp), sigma2_full(&inp));
            assert!((f - l).abs() / f < 0.05, "beta {beta}: {l} vs {f}");
        }
    }

    #[test]
    fn delta_b_term_is_finite_at_zero_beta() {
        let inp = chain_inputs(1.0, 0.0);
        let base = delta2_full(&inp, 0.0);
        let shifted = delta2_full(&inp, 0.1);
        assert!(shifted.is_finite() && shifted > base);
        let var0 = inp.thermo_s.energy_variance(0.0);
        assert!((shifted - base - (1.0 / 16.0) * var0 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn symmetry_traces_vanish_and_detect_breaking() {
        for (k, m) in [
            build_ring_model(3, 5, -1.0, 1, 2, 1.0).unwrap(),
            build_chain_model(4, 4, 1.0, 1.0, 0.7, 1.0).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            for beta in [0.0, 0.9, 4.0] {
                let t = first_order_symmetry_trace(m, beta).unwrap();
                assert!(t.relative_a() < 1e-10, "model {k} beta {beta}: {t:?}");
                assert!(t.relative_b() < 1e-10, "model {k} beta {beta}: {t:?}");
            }
            let broken = first_order_symmetry_trace(&m.with_coupling_shift(0.3), 0.9).unwrap();
            assert!(broken.relative_a() > 1e-3);
            assert!(broken.relative_b() > 1e-3);
        }
    }

    #[test]
    fn gibbs_reduced_state_of_decoupled_model_is_system_gibbs() {
        let m = build_ring_model(2, 4, -1.0, 1, 2, 0.0).unwrap();
        let hs = spectrum::diagonalize(&m, Part::System).unwrap();
        let g = ExactGibbs::new(&m).unwrap().reduced_state(0.9, &hs).unwrap();
        let p = hs.thermo().probabilities(0.9);
        for (i, pi) in p.iter().enumerate() {
            for j in 0..4 {
                let expected = if i == j { *pi } else { 0.0 };
                assert!((g.entries()[(i, j)].re - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prediction_table_layout() {
        let ts = SpectrumSummary::from_eigenvalues(vec![0.0, 1.0]).thermo();
        let csv = prediction_table(&ts, &ts, &[0.0, 1.0]).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("beta,sigma2_leading"));
    }
}
