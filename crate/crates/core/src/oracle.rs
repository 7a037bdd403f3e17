//! Dense reference implementations used to cross-check the matrix-free
//! kernels and the Chebyshev propagators.
//!
//! Operators are assembled from 2×2 spin matrices by explicit Kronecker
//! products and exponentiated with nalgebra's Padé `exp`, sharing no code
//! with the production paths. Intended for `N ≤ 10`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::hamiltonian::{Bond, Part, SpinModel};
use crate::state::StateVector;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `S^x, S^y, S^z` in the local basis `(0 = down, 1 = up)`.
fn spin_matrices() -> [DMatrix<C64>; 3] {
    let z = c(0.0, 0.0);
    [
        DMatrix::from_row_slice(2, 2, &[z, c(0.5, 0.0), c(0.5, 0.0), z]),
        DMatrix::from_row_slice(2, 2, &[z, c(0.0, 0.5), c(0.0, -0.5), z]),
        DMatrix::from_row_slice(2, 2, &[c(-0.5, 0.0), z, z, c(0.5, 0.0)]),
    ]
}

/// `op` acting on sites `i` and `j` (distinct) of `n` spins. Site `n-1` is the
/// most significant Kronecker factor, so bit `b` of a basis index is spin `b`.
fn embed_pair(op: &DMatrix<C64>, i: usize, j: usize, n: usize) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(2, 2);
    let mut m = DMatrix::<C64>::identity(1, 1);
    for s in (0..n).rev() {
        m = m.kronecker(if s == i || s == j { op } else { &id });
    }
    m
}

fn add_bonds(h: &mut DMatrix<C64>, bonds: &[Bond], off_i: usize, off_j: usize, n: usize, scale: f64) {
    let s = spin_matrices();
    for b in bonds {
        let js = [b.coupling.x, b.coupling.y, b.coupling.z];
        for (alpha, j) in js.iter().enumerate() {
            if *j == 0.0 {
                continue;
            }
            let term = embed_pair(&s[alpha], b.i + off_i, b.j + off_j, n);
            *h -= term * c(scale * j, 0.0);
        }
    }
}

/// Dense matrix of `part` on its own space (`D_S`, `D_E` or `D`).
pub fn dense_hamiltonian(model: &SpinModel, part: Part) -> DMatrix<C64> {
    match part {
        Part::System => {
            let n = model.n_system();
            let mut h = DMatrix::zeros(1 << n, 1 << n);
            add_bonds(&mut h, model.system_bonds(), 0, 0, n, 1.0);
            h
        }
        Part::Environment => {
            let n = model.n_env();
            let mut h = DMatrix::zeros(1 << n, 1 << n);
            add_bonds(&mut h, model.env_bonds(), 0, 0, n, 1.0);
            h
        }
        Part::Interaction | Part::Full => dense_hamiltonian_embedded(model, part),
    }
}

/// Dense matrix of `part` on the full `D`-dimensional space.
pub fn dense_hamiltonian_embedded(model: &SpinModel, part: Part) -> DMatrix<C64> {
    let n = model.n_spins();
    let ns = model.n_system();
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    let id = DMatrix::<C64>::identity(dim, dim);
    if matches!(part, Part::System | Part::Full) {
        add_bonds(&mut h, model.system_bonds(), 0, 0, n, 1.0);
    }
    if matches!(part, Part::Environment | Part::Full) {
        add_bonds(&mut h, model.env_bonds(), ns, ns, n, 1.0);
    }
    let scale = match part {
        Part::Interaction => 1.0,
        Part::Full => model.lambda(),
        _ => return h,
    };
    add_bonds(&mut h, model.coupling_bonds(), 0, ns, n, scale);
    h += id * c(scale * model.coupling_shift(), 0.0);
    h
}

/// `exp(z H) ψ` by dense matrix exponential.
pub fn exp_apply(h: &DMatrix<C64>, z: C64, psi: &StateVector) -> StateVector {
    let u = (h * z).exp();
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    StateVector::from_amplitudes((u * v).as_slice().to_vec())
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Coupling;

    #[test]
    fn heisenberg_pair_has_triplet_and_singlet() {
        let m = SpinModel::new(1, 1, vec![], vec![], vec![Bond::new(0, 0, Coupling::isotropic(1.0))], 1.0)
            .unwrap();
        let e = eigenvalues(&dense_hamiltonian(&m, Part::Full));
        let expected = [-0.25, -0.25, -0.25, 0.75];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spin_matrices_satisfy_commutator() {
        let [sx, sy, sz] = spin_matrices();
        let comm = &sx * &sy - &sy * &sx;
        let isz = sz * c(0.0, 1.0);
        assert!((comm - isz).norm() < 1e-15);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let h = DMatrix::<C64>::zeros(4, 4);
        let psi = StateVector::basis(4, 2);
        assert_eq!(exp_apply(&h, c(0.0, -1.0), &psi), psi);
    }
}
