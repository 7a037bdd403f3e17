//! Exact diagonalization and thermodynamics from a discrete spectrum.
//!
//! All Boltzmann sums subtract the ground energy before exponentiating, so
//! they stay finite at any `β ≥ 0` in double precision.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::{Part, SpinModel};
use crate::state::StateVector;
use num_complex::Complex64 as C64;

/// Default cap on the dimension handed to the dense eigensolver.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Eigenvalues closer than this fraction of the spectral width are treated
/// as degenerate.
pub const DEGENERACY_RELATIVE_TOLERANCE: f64 = 1e-8;

/// A projected basis vector is accepted during gauge fixing only when its
/// residual norm exceeds this.
const GAUGE_ACCEPT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SpectrumSummary {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<DMatrix<f64>>,
    degeneracy_tolerance: f64,
}

impl SpectrumSummary {
    /// Spectrum without eigenvectors; `eigenvalues` need not be sorted.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let degeneracy_tolerance = default_tolerance(&eigenvalues);
        Self {
            eigenvalues,
            eigenvectors: None,
            degeneracy_tolerance,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are orthonormal eigenvectors in the order of `eigenvalues`.
    pub fn eigenvectors(&self) -> Option<&DMatrix<f64>> {
        self.eigenvectors.as_ref()
    }

    pub fn degeneracy_tolerance(&self) -> f64 {
        self.degeneracy_tolerance
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn width(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    pub fn ground_degeneracy(&self) -> usize {
        let e0 = self.eigenvalues[0];
        self.eigenvalues
            .iter()
            .take_while(|e| **e - e0 <= self.degeneracy_tolerance)
            .count()
    }

    /// Half-open index ranges of (numerically) degenerate eigenvalue blocks.
    pub fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.eigenvalues[k] - self.eigenvalues[k - 1] > self.degeneracy_tolerance {
                blocks.push(start..k);
                start = k;
            }
        }
        blocks
    }

    pub fn thermo(&self) -> ThermoFunctions {
        thermo(self)
    }

    /// `index,eigenvalue` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (k, e) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{k},{e:e}");
        }
        out
    }
}

fn default_tolerance(sorted: &[f64]) -> f64 {
    let width = match (sorted.first(), sorted.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    DEGENERACY_RELATIVE_TOLERANCE * if width > 0.0 { width } else { 1.0 }
}

fn check_dim(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::TooLarge { dim, cap });
    }
    Ok(())
}

/// Dense symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.ncols(),
        });
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| matrix[(i, j)]);
    let eig = f
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok((values, vectors))
}

/// Dense symmetric eigenvalues only, ascending.
pub fn eigvalsh(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| matrix[(i, j)]);
    let mut values = f
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues and canonical eigenvectors of the selected part.
///
/// Within each degenerate block the eigenvectors are replaced by the
/// Gram-Schmidt orthonormalization of the block projections of the
/// computational basis vectors `|0⟩, |1⟩, ...`, skipping those already in the
/// span. The result is independent of the solver's internal gauge.
pub fn diagonalize(model: &SpinModel, part: Part) -> Result<SpectrumSummary> {
    diagonalize_with_cap(model, part, DEFAULT_MAX_DIM)
}

pub fn diagonalize_with_cap(model: &SpinModel, part: Part, cap: usize) -> Result<SpectrumSummary> {
    check_dim(model.dim_of(part), cap)?;
    let (values, vectors) = eigh(&model.local_operator(part).to_dense())?;
    Ok(canonical_summary(values, vectors))
}

/// Eigenvalues of the selected part without eigenvectors.
pub fn eigenvalues(model: &SpinModel, part: Part) -> Result<SpectrumSummary> {
    check_dim(model.dim_of(part), DEFAULT_MAX_DIM)?;
    let values = eigvalsh(&model.local_operator(part).to_dense())?;
    Ok(SpectrumSummary::from_eigenvalues(values))
}

/// Wraps an eigendecomposition and fixes the gauge of degenerate blocks.
pub fn canonical_summary(eigenvalues: Vec<f64>, mut vectors: DMatrix<f64>) -> SpectrumSummary {
    let degeneracy_tolerance = default_tolerance(&eigenvalues);
    let mut s = SpectrumSummary {
        eigenvalues,
        eigenvectors: None,
        degeneracy_tolerance,
    };
    for block in s.degenerate_blocks() {
        canonicalize_block(&mut vectors, block);
    }
    s.eigenvectors = Some(vectors);
    s
}

fn canonicalize_block(vectors: &mut DMatrix<f64>, block: std::ops::Range<usize>) {
    let g = block.len();
    let dim = vectors.nrows();
    let v = vectors.columns(block.start, g).into_owned();
    // Orthonormal coefficient vectors in the g-dimensional block coordinates.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(g);
    for k in 0..dim {
        if q.len() == g {
            break;
        }
        let mut r: Vec<f64> = v.row(k).iter().copied().collect();
        for _ in 0..2 {
            for qi in &q {
                let dot: f64 = qi.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(qi).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > GAUGE_ACCEPT {
            r.iter_mut().for_each(|x| *x /= norm);
            q.push(r);
        }
    }
    let qm = DMatrix::from_fn(g, q.len(), |i, j| q[j][i]);
    let canon = v * qm;
    vectors.columns_mut(block.start, canon.ncols()).copy_from(&canon);
}

/// Normalized eigenvector of the smallest eigenvalue of the full `H`, in the
/// canonical gauge of [`diagonalize`].
pub fn ground_state(model: &SpinModel) -> Result<(StateVector, f64)> {
    let s = diagonalize(model, Part::Full)?;
    let v = s.eigenvectors().expect("diagonalize returns eigenvectors");
    let amps = v.column(0).iter().map(|x| C64::new(*x, 0.0)).collect();
    Ok((StateVector::from_amplitudes(amps), s.ground_energy()))
}

/// Thermodynamic functions of a fixed spectrum, evaluated at any `nβ ≥ 0`.
#[derive(Clone, Debug)]
pub struct ThermoFunctions {
    eigenvalues: Vec<f64>,
    ground_degeneracy: usize,
}

pub fn thermo(spectrum: &SpectrumSummary) -> ThermoFunctions {
    ThermoFunctions {
        eigenvalues: spectrum.eigenvalues.clone(),
        ground_degeneracy: spectrum.ground_degeneracy(),
    }
}

impl ThermoFunctions {
    pub fn from_spectrum(spectrum: &SpectrumSummary) -> Self {
        thermo(spectrum)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_degeneracy(&self) -> usize {
        self.ground_degeneracy
    }

    /// `Σ e^{-x (E - E_min)}`, always in `[g, dim]`.
    pub fn shifted_z(&self, x: f64) -> f64 {
        let e0 = self.ground_energy();
        self.eigenvalues.iter().map(|e| (-x * (e - e0)).exp()).sum()
    }

    /// `ln Z(x)`.
    pub fn ln_z(&self, x: f64) -> f64 {
        -x * self.ground_energy() + self.shifted_z(x).ln()
    }

    /// `Z(x)`; may overflow for large `x |E_min|`, prefer [`Self::ln_z`].
    pub fn z(&self, x: f64) -> f64 {
        self.ln_z(x).exp()
    }

    /// `F(x) = -ln Z(x) / x`, which diverges at `x = 0`.
    pub fn free_energy(&self, x: f64) -> f64 {
        -self.ln_z(x) / x
    }

    /// Gibbs probabilities `e^{-x E_k} / Z(x)` in eigenvalue order.
    pub fn probabilities(&self, x: f64) -> Vec<f64> {
        let e0 = self.ground_energy();
        let w: Vec<f64> = self.eigenvalues.iter().map(|e| (-x * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    /// `U(x) = ⟨E⟩`.
    pub fn internal_energy(&self, x: f64) -> f64 {
        self.probabilities(x)
            .iter()
            .zip(&self.eigenvalues)
            .map(|(p, e)| p * e)
            .sum()
    }

    /// `⟨E²⟩ - ⟨E⟩²`, accumulated around the mean.
    pub fn energy_variance(&self, x: f64) -> f64 {
        let p = self.probabilities(x);
        let u: f64 = p.iter().zip(&self.eigenvalues).map(|(p, e)| p * e).sum();
        p.iter()
            .zip(&self.eigenvalues)
            .map(|(p, e)| p * (e - u).powi(2))
            .sum()
    }

    /// `C(x) = x² (⟨E²⟩ - ⟨E⟩²)`.
    pub fn heat_capacity(&self, x: f64) -> f64 {
        x * x * self.energy_variance(x)
    }
}
