//! Fixed workloads shared by the benchmarks in `benches/`.

use spinbath::hamiltonian::build_ring_model;
use spinbath::propagate::random_state;
use spinbath::{SpinModel, StateVector};

/// Coupled ring entirety with four system spins and `n_env` environment spins.
pub fn ring(n_env: usize) -> SpinModel {
    build_ring_model(4, n_env, -1.0, 1, 2, 1.0).expect("valid benchmark model")
}

/// A fixed random state for `model`.
pub fn state(model: &SpinModel) -> StateVector {
    random_state(model.dim(), 17)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_match_in_dimension() {
        let m = ring(6);
        assert_eq!(state(&m).dim(), 1024);
    }
}
