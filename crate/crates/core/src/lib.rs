//! Entanglement robustness of qudit pairs under local Lindblad dissipation.
//!
//! The crate evaluates the algebraic tangle bound `Tr[(ρ⊗ρ)V]`, its
//! temporal increment `2Tr[(ρ̇⊗ρ)V]` under local dephasing or decay, and
//! searches for the pure states of prescribed initial tangle whose
//! entanglement decays slowest.
//!
//! Module map:
//!
//! - [`linalg`]: bipartite states, Schmidt decomposition, partial traces,
//!   Haar-random unitaries.
//! - [`tangle`]: the duplicated-space operator `V`, tangle bound and rate.
//! - [`channels`]: coupling-operator families and the Lindblad generator.
//! - [`evolution`]: RK4 integration and tangle trajectories.
//! - [`sampling`]: random pure states with exact prescribed tangle.
//! - [`optimizer`]: fixed-tangle maximization of the tangle rate.
//!
//! Every basis index on the bipartite space follows the A-major convention
//! `k = a·d + b` for `|a⟩_A ⊗ |b⟩_B`.

pub mod channels;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod optimizer;
pub mod sampling;
pub mod tangle;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
