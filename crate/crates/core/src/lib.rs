//! Precise large and moderate deviation asymptotics for discrete-time linear
//! Hawkes processes.
//!
//! `X_t` is conditionally Poisson with intensity `λ_t = ν + Σ_{s<t} α_s X_{t−s}`
//! and `N_t = X_1 + ⋯ + X_t`. The crate computes the limiting CGF `η`, the
//! mod-φ limit `ψ`, the saddle-point expansions of `P(N_t = tx)` and
//! `P(N_t ≥ tx)` with their correction coefficients, and checks them against
//! an exact finite-`t` MGF recursion, a lattice Fourier inversion and seeded
//! Monte Carlo.

pub mod cgf;
pub mod deviations;
pub mod error;
pub mod jet;
pub mod kernel;
pub mod modphi;
pub mod partitions;
pub mod series;
pub mod simulator;

pub use cgf::{CgfEval, ThetaBound};
pub use error::{Error, Result};
pub use kernel::{ExcitingKernel, HawkesModel, Majorant};
