//! Spin-1/2 Hamiltonians `H = H_S + H_E + λ H_SE` given by bond tables, and
//! their matrix-free action on state vectors.
//!
//! Every bond `(i, j, Jx, Jy, Jz)` contributes `-(Jx S^x_i S^x_j + Jy S^y_i
//! S^y_j + Jz S^z_i S^z_j)` with `S^α = σ^α / 2`. Site indices are 0-based;
//! system sites map to bits `0..N_S`, environment sites to bits
//! `N_S..N_S+N_E` of a basis index.

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::state::StateVector;

/// Default cap on `N_S + N_E`: a complex-double vector at 28 spins is 4 GiB.
pub const DEFAULT_MAX_SPINS: usize = 28;

/// Random couplings are drawn uniformly from `[-RANDOM_COUPLING_RANGE, RANDOM_COUPLING_RANGE]`.
pub const RANDOM_COUPLING_RANGE: f64 = 4.0 / 3.0;

/// Vectors at or above this dimension are processed in parallel chunks.
const PARALLEL_DIM: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Coupling {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn isotropic(value: f64) -> Self {
        Self::new(value, value, value)
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let r = RANDOM_COUPLING_RANGE;
        Self::new(
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
        )
    }

    fn abs_sum(&self) -> f64 {
        self.x.abs() + self.y.abs() + self.z.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: Coupling,
}

impl Bond {
    pub const fn new(i: usize, j: usize, coupling: Coupling) -> Self {
        Self { i, j, coupling }
    }
}

/// Selects one term of `H = H_S + H_E + λ H_SE`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    System,
    Environment,
    /// `H_SE` without the factor `λ`.
    Interaction,
    Full,
}

/// Bond layout inside the environment of a ring model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnvTopology {
    /// Nearest-neighbour chain, so system and environment close into a ring.
    #[default]
    Chain,
    /// Every environment pair is bonded.
    FullyConnected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinModel {
    n_system: usize,
    n_env: usize,
    system_bonds: Vec<Bond>,
    env_bonds: Vec<Bond>,
    /// `i` is a system site, `j` an environment site.
    coupling_bonds: Vec<Bond>,
    lambda: f64,
    coupling_shift: f64,
}

impl SpinModel {
    pub fn new(
        n_system: usize,
        n_env: usize,
        system_bonds: Vec<Bond>,
        env_bonds: Vec<Bond>,
        coupling_bonds: Vec<Bond>,
        lambda: f64,
    ) -> Result<Self> {
        Self::with_spin_cap(
            n_system,
            n_env,
            system_bonds,
            env_bonds,
            coupling_bonds,
            lambda,
            DEFAULT_MAX_SPINS,
        )
    }

    pub fn with_spin_cap(
        n_system: usize,
        n_env: usize,
        system_bonds: Vec<Bond>,
        env_bonds: Vec<Bond>,
        coupling_bonds: Vec<Bond>,
        lambda: f64,
        max_spins: usize,
    ) -> Result<Self> {
        if n_system == 0 {
            return Err(Error::InvalidModel("the system needs at least one spin".into()));
        }
        let n = n_system + n_env;
        if n > max_spins {
            return Err(Error::InvalidModel(format!(
                "{n} spins exceed the cap of {max_spins}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidModel(format!("lambda must be finite, got {lambda}")));
        }
        check_bonds("system", &system_bonds, n_system, n_system, true)?;
        check_bonds("environment", &env_bonds, n_env, n_env, true)?;
        check_bonds("coupling", &coupling_bonds, n_system, n_env, false)?;
        Ok(Self {
            n_system,
            n_env,
            system_bonds,
            env_bonds,
            coupling_bonds,
            lambda,
            coupling_shift: 0.0,
        })
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    pub fn n_env(&self) -> usize {
        self.n_env
    }

    pub fn n_spins(&self) -> usize {
        self.n_system + self.n_env
    }

    pub fn dim_system(&self) -> usize {
        1 << self.n_system
    }

    pub fn dim_env(&self) -> usize {
        1 << self.n_env
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn system_bonds(&self) -> &[Bond] {
        &self.system_bonds
    }

    pub fn env_bonds(&self) -> &[Bond] {
        &self.env_bonds
    }

    pub fn coupling_bonds(&self) -> &[Bond] {
        &self.coupling_bonds
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coupling_shift(&self) -> f64 {
        self.coupling_shift
    }

    /// True when `λ H_SE` vanishes identically.
    pub fn is_decoupled(&self) -> bool {
        self.lambda == 0.0
            || (self.coupling_shift == 0.0
                && self.coupling_bonds.iter().all(|b| b.coupling.abs_sum() == 0.0))
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Adds `shift · 1` to `H_SE`. A nonzero shift breaks the global spin
    /// rotation symmetry that makes the first-order traces vanish.
    pub fn with_coupling_shift(&self, shift: f64) -> Self {
        Self {
            coupling_shift: shift,
            ..self.clone()
        }
    }

    pub fn dim_of(&self, part: Part) -> usize {
        match part {
            Part::System => self.dim_system(),
            Part::Environment => self.dim_env(),
            Part::Interaction | Part::Full => self.dim(),
        }
    }

    /// The selected term acting on the full `D`-dimensional space.
    pub fn operator(&self, part: Part) -> SpinOperator {
        let ns = self.n_system;
        let n = self.n_spins();
        let mut op = SpinOperator::empty(n);
        match part {
            Part::System => op.add_bonds(&self.system_bonds, 0, 0, 1.0),
            Part::Environment => op.add_bonds(&self.env_bonds, ns, ns, 1.0),
            Part::Interaction => {
                op.add_bonds(&self.coupling_bonds, 0, ns, 1.0);
                op.constant = self.coupling_shift;
            }
            Part::Full => {
                op.add_bonds(&self.system_bonds, 0, 0, 1.0);
                op.add_bonds(&self.env_bonds, ns, ns, 1.0);
                op.add_bonds(&self.coupling_bonds, 0, ns, self.lambda);
                op.constant = self.lambda * self.coupling_shift;
            }
        }
        op
    }

    /// The selected term on its own Hilbert space: `D_S` for the system,
    /// `D_E` for the environment, `D` otherwise.
    pub fn local_operator(&self, part: Part) -> SpinOperator {
        match part {
            Part::System => {
                let mut op = SpinOperator::empty(self.n_system);
                op.add_bonds(&self.system_bonds, 0, 0, 1.0);
                op
            }
            Part::Environment => {
                let mut op = SpinOperator::empty(self.n_env);
                op.add_bonds(&self.env_bonds, 0, 0, 1.0);
                op
            }
            Part::Interaction | Part::Full => self.operator(part),
        }
    }
}

fn check_bonds(
    label: &str,
    bonds: &[Bond],
    n_left: usize,
    n_right: usize,
    same_block: bool,
) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for b in bonds {
        if b.i >= n_left || b.j >= n_right {
            return Err(Error::InvalidModel(format!(
                "{label} bond ({}, {}) has a site out of range",
                b.i, b.j
            )));
        }
        if same_block && b.i >= b.j {
            return Err(Error::InvalidModel(format!(
                "{label} bond ({}, {}) must satisfy i < j",
                b.i, b.j
            )));
        }
        let c = b.coupling;
        if !(c.x.is_finite() && c.y.is_finite() && c.z.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "{label} bond ({}, {}) has a non-finite coupling",
                b.i, b.j
            )));
        }
        if !seen.insert((b.i, b.j)) {
            return Err(Error::InvalidModel(format!(
                "duplicate {label} bond ({}, {})",
                b.i, b.j
            )));
        }
    }
    Ok(())
}

fn chain_bonds(n: usize, coupling: Coupling) -> Vec<Bond> {
    (1..n).map(|i| Bond::new(i - 1, i, coupling)).collect()
}

/// Ring entirety: a system chain with isotropic coupling `j_system`, a random
/// environment, and two random bonds joining the chain ends.
///
/// Environment couplings are drawn from the `env_seed` stream and the two
/// system-environment bonds from the `coupling_seed` stream, each component
/// independently uniform in `[-4/3, 4/3]`.
pub fn build_ring_model(
    n_system: usize,
    n_env: usize,
    j_system: f64,
    coupling_seed: u64,
    env_seed: u64,
    lambda: f64,
) -> Result<SpinModel> {
    build_ring_model_with(
        n_system,
        n_env,
        j_system,
        coupling_seed,
        env_seed,
        lambda,
        EnvTopology::Chain,
    )
}

pub fn build_ring_model_with(
    n_system: usize,
    n_env: usize,
    j_system: f64,
    coupling_seed: u64,
    env_seed: u64,
    lambda: f64,
    topology: EnvTopology,
) -> Result<SpinModel> {
    if n_system < 2 || n_env < 2 {
        return Err(Error::InvalidModel(format!(
            "a ring needs at least two system and two environment spins, got {n_system} and {n_env}"
        )));
    }
    let system_bonds = chain_bonds(n_system, Coupling::isotropic(j_system));

    let mut env_rng = rng::seeded(env_seed);
    let env_bonds = match topology {
        EnvTopology::Chain => (1..n_env)
            .map(|i| Bond::new(i - 1, i, Coupling::random(&mut env_rng)))
            .collect(),
        EnvTopology::FullyConnected => {
            let mut bonds = Vec::with_capacity(n_env * (n_env - 1) / 2);
            for i in 0..n_env {
                for j in i + 1..n_env {
                    bonds.push(Bond::new(i, j, Coupling::random(&mut env_rng)));
                }
            }
            bonds
        }
    };

    let mut coupling_rng = rng::seeded(coupling_seed);
    let coupling_bonds = vec![
        Bond::new(n_system - 1, 0, Coupling::random(&mut coupling_rng)),
        Bond::new(0, n_env - 1, Coupling::random(&mut coupling_rng)),
    ];
    SpinModel::new(n_system, n_env, system_bonds, env_bonds, coupling_bonds, lambda)
}

/// Two isotropic nearest-neighbour chains joined end to end: system site
/// `N_S - 1` couples to environment site `0` with strength `delta_iso`.
pub fn build_chain_model(
    n_system: usize,
    n_env: usize,
    j_iso: f64,
    omega_iso: f64,
    delta_iso: f64,
    lambda: f64,
) -> Result<SpinModel> {
    if n_system < 1 || n_env < 1 {
        return Err(Error::InvalidModel(format!(
            "a chain needs at least one system and one environment spin, got {n_system} and {n_env}"
        )));
    }
    SpinModel::new(
        n_system,
        n_env,
        chain_bonds(n_system, Coupling::isotropic(j_iso)),
        chain_bonds(n_env, Coupling::isotropic(omega_iso)),
        vec![Bond::new(n_system - 1, 0, Coupling::isotropic(delta_iso))],
        lambda,
    )
}

#[derive(Clone, Copy, Debug)]
struct CompiledBond {
    mask_i: usize,
    mask_j: usize,
    diag_same: f64,
    diag_diff: f64,
    flip_same: f64,
    flip_diff: f64,
}

impl CompiledBond {
    fn new(bit_i: usize, bit_j: usize, c: Coupling, scale: f64) -> Self {
        Self {
            mask_i: 1 << bit_i,
            mask_j: 1 << bit_j,
            diag_same: -scale * c.z / 4.0,
            diag_diff: scale * c.z / 4.0,
            flip_same: -scale * (c.x - c.y) / 4.0,
            flip_diff: -scale * (c.x + c.y) / 4.0,
        }
    }

    #[inline]
    fn element(&self, k: usize) -> (f64, f64) {
        let same = ((k & self.mask_i) == 0) == ((k & self.mask_j) == 0);
        if same {
            (self.diag_same, self.flip_same)
        } else {
            (self.diag_diff, self.flip_diff)
        }
    }

    fn eigen_range(&self) -> (f64, f64) {
        let vals = [
            self.diag_same + self.flip_same.abs(),
            self.diag_same - self.flip_same.abs(),
            self.diag_diff + self.flip_diff.abs(),
            self.diag_diff - self.flip_diff.abs(),
        ];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Real symmetric sum of two-spin bond terms plus a constant, applied
/// without storing the matrix.
#[derive(Clone, Debug)]
pub struct SpinOperator {
    n_bits: usize,
    bonds: Vec<CompiledBond>,
    constant: f64,
}

impl SpinOperator {
    fn empty(n_bits: usize) -> Self {
        Self {
            n_bits,
            bonds: Vec::new(),
            constant: 0.0,
        }
    }

    fn add_bonds(&mut self, bonds: &[Bond], offset_i: usize, offset_j: usize, scale: f64) {
        self.bonds.extend(
            bonds
                .iter()
                .map(|b| CompiledBond::new(b.i + offset_i, b.j + offset_j, b.coupling, scale)),
        );
    }

    pub fn dim(&self) -> usize {
        1 << self.n_bits
    }

    pub fn n_terms(&self) -> usize {
        self.bonds.len()
    }

    /// `out = H x`.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) -> Result<()> {
        let dim = self.dim();
        for len in [x.len(), out.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: len,
                });
            }
        }
        let row = |k: usize| -> C64 {
            let mut acc = x[k] * self.constant;
            for b in &self.bonds {
                let (diag, flip) = b.element(k);
                acc += x[k] * diag + x[k ^ b.mask_i ^ b.mask_j] * flip;
            }
            acc
        };
        if dim >= PARALLEL_DIM {
            const CHUNK: usize = 4096;
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (o, y) in chunk.iter_mut().enumerate() {
                    *y = row(base + o);
                }
            });
        } else {
            for (k, y) in out.iter_mut().enumerate() {
                *y = row(k);
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = StateVector::zeros(self.dim());
        self.apply_into(state.amplitudes(), out.amplitudes_mut())?;
        Ok(out)
    }

    /// Visits every structurally nonzero matrix element as `(row, col, value)`.
    /// Diagonal contributions of different bonds are visited separately.
    pub fn for_each_element(&self, mut f: impl FnMut(usize, usize, f64)) {
        for k in 0..self.dim() {
            if self.constant != 0.0 {
                f(k, k, self.constant);
            }
            for b in &self.bonds {
                let (diag, flip) = b.element(k);
                if diag != 0.0 {
                    f(k, k, diag);
                }
                if flip != 0.0 {
                    f(k ^ b.mask_i ^ b.mask_j, k, flip);
                }
            }
        }
    }

    /// Dense real matrix, for exact diagonalization of small operators.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        self.for_each_element(|r, c, v| m[(r, c)] += v);
        m
    }

    /// Interval containing the whole spectrum: the sum of the exact extreme
    /// eigenvalues of each bond term, plus the constant.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self
            .bonds
            .iter()
            .map(CompiledBond::eigen_range)
            .fold((0.0, 0.0), |(lo, hi), (l, h)| (lo + l, hi + h));
        (lo + self.constant, hi + self.constant)
    }
}

/// `H_part |ψ⟩` on the full space.
pub fn apply_hamiltonian(model: &SpinModel, part: Part, state: &StateVector) -> Result<StateVector> {
    model.operator(part).apply(state)
}

/// Rigorous `(lower, upper)` bounds on the spectrum of the full `H`.
pub fn energy_bounds(model: &SpinModel) -> (f64, f64) {
    model.operator(Part::Full).spectral_bounds()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::propagate::random_state;

    fn sample_models() -> Vec<SpinModel> {
        vec![
            build_ring_model(2, 3, -1.0, 3, 4, 0.7).unwrap(),
            build_ring_model_with(3, 3, 1.0, 5, 6, 1.0, EnvTopology::FullyConnected).unwrap(),
            build_chain_model(2, 4, 1.0, -0.5, 0.8, 1.3).unwrap(),
            build_ring_model(3, 2, -1.0, 9, 9, 1.0).unwrap().with_coupling_shift(0.25),
        ]
    }

    #[test]
    fn ring_model_matches_reference_setup() {
        let m = build_ring_model(4, 22, -1.0, 1, 2, 1.0).unwrap();
        assert_eq!(m.n_spins(), 26);
        assert_eq!(m.system_bonds().len(), 3);
        assert!(m
            .system_bonds()
            .iter()
            .all(|b| b.coupling == Coupling::isotropic(-1.0)));
        assert_eq!(m.env_bonds().len(), 21);
        assert_eq!(m.coupling_bonds().len(), 2);
        assert_eq!((m.coupling_bonds()[0].i, m.coupling_bonds()[0].j), (3, 0));
        assert_eq!((m.coupling_bonds()[1].i, m.coupling_bonds()[1].j), (0, 21));
        for b in m.env_bonds().iter().chain(m.coupling_bonds()) {
            for v in [b.coupling.x, b.coupling.y, b.coupling.z] {
                assert!(v.abs() <= RANDOM_COUPLING_RANGE);
            }
        }
        assert_eq!(m, build_ring_model(4, 22, -1.0, 1, 2, 1.0).unwrap());
        assert_ne!(m, build_ring_model(4, 22, -1.0, 1, 3, 1.0).unwrap());
    }

    #[test]
    fn fully_connected_environment_has_all_pairs() {
        let m = build_ring_model_with(2, 5, 1.0, 1, 1, 1.0, EnvTopology::FullyConnected).unwrap();
        assert_eq!(m.env_bonds().len(), 10);
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(build_ring_model(1, 4, 1.0, 0, 0, 1.0).is_err());
        assert!(build_ring_model(2, 1, 1.0, 0, 0, 1.0).is_err());
        assert!(build_chain_model(0, 4, 1.0, 1.0, 1.0, 1.0).is_err());
        let c = Coupling::isotropic(1.0);
        let dup = SpinModel::new(3, 0, vec![Bond::new(0, 1, c), Bond::new(0, 1, c)], vec![], vec![], 0.0);
        assert!(matches!(dup, Err(Error::InvalidModel(_))));
        let out = SpinModel::new(2, 1, vec![], vec![], vec![Bond::new(0, 1, c)], 1.0);
        assert!(out.is_err());
        let order = SpinModel::new(3, 0, vec![Bond::new(2, 1, c)], vec![], vec![], 0.0);
        assert!(order.is_err());
        assert!(SpinModel::new(20, 10, vec![], vec![], vec![], 0.0).is_err());
        assert!(SpinModel::with_spin_cap(20, 10, vec![], vec![], vec![], 0.0, 30).is_ok());
    }

    #[test]
    fn decoupled_model_applies_system_plus_environment() {
        let m = build_ring_model(2, 2, 1.0, 5, 5, 0.0).unwrap();
        let psi = random_state(m.dim(), 3);
        let full = apply_hamiltonian(&m, Part::Full, &psi).unwrap();
        let hs = apply_hamiltonian(&m, Part::System, &psi).unwrap();
        let he = apply_hamiltonian(&m, Part::Environment, &psi).unwrap();
        for k in 0..m.dim() {
            assert!((full[k] - hs[k] - he[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn full_is_sum_of_parts_with_lambda() {
        for m in sample_models() {
            let psi = random_state(m.dim(), 17);
            let parts: Vec<_> = [Part::System, Part::Environment, Part::Interaction]
                .iter()
                .map(|&p| apply_hamiltonian(&m, p, &psi).unwrap())
                .collect();
            let full = apply_hamiltonian(&m, Part::Full, &psi).unwrap();
            for k in 0..m.dim() {
                let sum = parts[0][k] + parts[1][k] + parts[2][k] * m.lambda();
                assert!((full[k] - sum).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn ferromagnetic_all_up_is_eigenvector() {
        for ns in 2..=4 {
            let m = build_chain_model(ns, 1, 1.0, 1.0, 1.0, 0.0).unwrap();
            let hs = m.local_operator(Part::System);
            let up = StateVector::basis(m.dim_system(), m.dim_system() - 1);
            let out = hs.apply(&up).unwrap();
            let e0 = -((ns - 1) as f64) / 4.0;
            for k in 0..up.dim() {
                assert!((out[k] - up[k] * e0).norm() < 1e-15);
            }
            // same energy from the dense oracle
            let dense = oracle::dense_hamiltonian(&m, Part::System);
            let idx = up.dim() - 1;
            assert!((dense[(idx, idx)].re - e0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let m = build_ring_model(2, 3, 1.0, 1, 2, 1.0).unwrap();
        let out = apply_hamiltonian(&m, Part::Full, &StateVector::zeros(m.dim())).unwrap();
        assert!(out.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = build_ring_model(2, 3, 1.0, 1, 2, 1.0).unwrap();
        let r = apply_hamiltonian(&m, Part::Full, &StateVector::zeros(8));
        assert!(matches!(r, Err(Error::DimensionMismatch { expected: 32, found: 8 })));
    }

    #[test]
    fn matrix_free_apply_matches_kronecker_oracle() {
        let mut models = sample_models();
        models.push(build_ring_model(4, 6, -1.0, 21, 22, 0.9).unwrap());
        for m in models {
            for part in [Part::System, Part::Environment, Part::Interaction, Part::Full] {
                let dense = oracle::dense_hamiltonian_embedded(&m, part);
                let sparse = m.operator(part).to_dense();
                for r in 0..m.dim() {
                    for c in 0..m.dim() {
                        let d = (dense[(r, c)] - C64::new(sparse[(r, c)], 0.0)).norm();
                        assert!(d < 1e-13, "{part:?} ({r},{c}) differs by {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn local_operators_match_oracle() {
        for m in sample_models() {
            for part in [Part::System, Part::Environment] {
                let dense = oracle::dense_hamiltonian(&m, part);
                let sparse = m.local_operator(part).to_dense();
                assert_eq!(dense.nrows(), sparse.nrows());
                for (a, b) in dense.iter().zip(sparse.iter()) {
                    assert!((a.re - b).abs() < 1e-14 && a.im.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_bond_bounds_contain_spectrum() {
        let m = SpinModel::new(
            1,
            1,
            vec![],
            vec![],
            vec![Bond::new(0, 0, Coupling::new(0.0, 0.0, 1.0))],
            1.0,
        )
        .unwrap();
        let (lo, hi) = energy_bounds(&m);
        assert!(lo <= -0.25 && hi >= 0.25);
        let empty = SpinModel::new(3, 0, vec![], vec![], vec![], 1.0).unwrap();
        assert_eq!(energy_bounds(&empty), (0.0, 0.0));
    }

    /// Global π rotation of the system spins about axis `a` (0, 1, 2 for x, y, z),
    /// as `|k⟩ → phase |k'⟩`. Global phases drop out of conjugation.
    fn system_rotation(axis: usize, k: usize, ns: usize) -> (usize, f64) {
        let mask = (1 << ns) - 1;
        let parity = |n: u32| if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        match axis {
            0 => (k ^ mask, 1.0),
            1 => (k ^ mask, parity((k & mask).count_ones())),
            _ => (k, parity((k & mask).count_ones())),
        }
    }

    /// Each rotation leaves `H_S` and `H_E` invariant and flips the sign of the
    /// two coupling components transverse to its axis, so the three images of
    /// `H_SE` sum to `-H_SE`.
    #[test]
    fn system_rotations_keep_parts_and_average_out_interaction() {
        for m in sample_models().into_iter().filter(|m| m.coupling_shift() == 0.0) {
            let ns = m.n_system();
            let dim = m.dim();
            let rotate = |h: &nalgebra::DMatrix<f64>, axis: usize| {
                nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
                    let (rf, pr) = system_rotation(axis, r, ns);
                    let (cf, pc) = system_rotation(axis, c, ns);
                    pr * pc * h[(rf, cf)]
                })
            };
            for part in [Part::System, Part::Environment] {
                let h = m.operator(part).to_dense();
                for axis in 0..3 {
                    assert!((rotate(&h, axis) - &h).amax() < 1e-15);
                }
            }
            let h = m.operator(Part::Interaction).to_dense();
            let sum = rotate(&h, 0) + rotate(&h, 1) + rotate(&h, 2);
            assert!((sum + &h).amax() < 1e-14);
            if h.amax() > 0.0 {
                assert!((rotate(&h, 0) - &h).amax() > 1e-3 || (rotate(&h, 2) - &h).amax() > 1e-3);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn hamiltonian_is_hermitian(
                ns in 2usize..4, ne in 2usize..4,
                cs in any::<u64>(), es in any::<u64>(),
                lambda in -2.0f64..2.0, su in any::<u64>(), sv in any::<u64>(),
            ) {
                let m = build_ring_model(ns, ne, -1.0, cs, es, lambda).unwrap();
                let u = random_state(m.dim(), su);
                let v = random_state(m.dim(), sv);
                let hu = apply_hamiltonian(&m, Part::Full, &u).unwrap();
                let hv = apply_hamiltonian(&m, Part::Full, &v).unwrap();
                let a = u.inner(&hv).unwrap();
                let b = v.inner(&hu).unwrap().conj();
                prop_assert!((a - b).norm() < 1e-12);
            }

            #[test]
            fn apply_is_linear(
                cs in any::<u64>(), su in any::<u64>(), sv in any::<u64>(),
                a in -3.0f64..3.0, b in -3.0f64..3.0,
            ) {
                let m = build_ring_model(2, 4, 1.0, cs, cs ^ 1, 0.8).unwrap();
                let u = random_state(m.dim(), su);
                let v = random_state(m.dim(), sv);
                let mut w = StateVector::zeros(m.dim());
                for k in 0..m.dim() {
                    w[k] = u[k] * a + v[k] * b;
                }
                let hw = apply_hamiltonian(&m, Part::Full, &w).unwrap();
                let hu = apply_hamiltonian(&m, Part::Full, &u).unwrap();
                let hv = apply_hamiltonian(&m, Part::Full, &v).unwrap();
                for k in 0..m.dim() {
                    prop_assert!((hw[k] - hu[k] * a - hv[k] * b).norm() < 1e-13);
                }
            }
        }
    }
}
