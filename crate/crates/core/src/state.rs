use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Amplitudes of a pure state of `n_spins` spin-1/2 particles in the
/// product up/down basis.
///
/// Constructors in [`crate::propagate`] return normalized states; the raw
/// constructors here do not normalize, so intermediate (unnormalized) vectors
/// can share the type.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![C64::new(0.0, 0.0); dim],
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    /// Basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amplitudes[index] = C64::new(1.0, 0.0);
        s
    }

    /// `|system⟩ ⊗ |env⟩` with the system occupying the low index bits.
    pub fn product(system: &StateVector, env: &StateVector) -> Self {
        let ds = system.dim();
        let mut amplitudes = Vec::with_capacity(ds * env.dim());
        for e in env.iter() {
            amplitudes.extend(system.iter().map(|s| s * e));
        }
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.amplitudes.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scales to unit norm and returns the norm before scaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
        n
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&mut self, factor: C64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amplitudes[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.amplitudes[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_places_system_in_low_bits() {
        let s = StateVector::basis(4, 1);
        let e = StateVector::basis(2, 1);
        let p = StateVector::product(&s, &e);
        assert_eq!(p.dim(), 8);
        assert_eq!(p[1 + 4], C64::new(1.0, 0.0));
        assert!((p.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_returns_previous_norm() {
        let mut s = StateVector::from_amplitudes(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]);
        assert_eq!(s.normalize(), 5.0);
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inner_rejects_mismatched_dims() {
        let a = StateVector::zeros(2);
        let b = StateVector::zeros(4);
        assert!(matches!(a.inner(&b), Err(Error::DimensionMismatch { .. })));
    }
}
