//! Numerical flow of θ-capillary surfaces in hyperbolic 3-space (half-space model).
//!
//! Surfaces are radial graphs `x = cE3 + e^{u(z)} z` over the closed half-sphere,
//! evolved by the scalar parabolic equation `u_t = Q_c(∇²u, ∇u, ρ, β, γ)` with a
//! nonlinear Neumann condition encoding the contact angle θ at the wall `{x1 = 0}`.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;

pub use error::{CapflowError, Result};
