//! Finite-temperature decoherence and thermalization of a spin-1/2 system
//! coupled to a spin-1/2 environment.
//!
//! The entirety `H = H_S + H_E + λ H_SE` is built from bond tables
//! ([`hamiltonian`]), prepared in a canonical thermal pure state
//! `e^{-βH/2}|Ψ₀⟩` from a Haar-random `|Ψ₀⟩` ([`propagate`]), and reduced to
//! the system, where the decoherence measure `σ`, the thermalization measure
//! `δ` and the fitted inverse temperature `b` are evaluated ([`observe`]).
//! Exact spectra and thermodynamic functions ([`spectrum`]) feed closed-form
//! predictions for `E(σ²)` and `E(δ²)` ([`theory`]), and [`experiment`] runs
//! seeded parameter sweeps that write CSV tables.
//!
//! Basis convention: bit `b` of a basis index is spin `b`, with a set bit
//! meaning spin up (`S^z = +1/2`). System spins occupy the low `N_S` bits, so
//! a basis index factors as `s + D_S · e`.

pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod observe;
pub mod oracle;
pub mod propagate;
pub mod rng;
pub mod spectrum;
pub mod state;
pub mod stats;
pub mod theory;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use hamiltonian::{Bond, Coupling, EnvTopology, Part, SpinModel};
pub use observe::{MeasureReport, ReducedDensityMatrix};
pub use propagate::{ChebyshevPlan, Method, Propagator, ThermalState, ThermalStateRequest};
pub use spectrum::{SpectrumSummary, ThermoFunctions};
pub use state::StateVector;
pub use theory::PredictionInputs;
