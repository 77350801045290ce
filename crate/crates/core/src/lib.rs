//! Boundary control of the scalar reaction–diffusion equation
//! `y_t - y_xx = f(y)` on `(0, L)` with Dirichlet controls in `[0, 1]`.
//!
//! * [`reaction`]: monostable and bistable nonlinearities, primitives.
//! * [`phase_plane`]: threshold lengths, stationary solutions, steady paths.
//! * [`pde`]: the time-stepping scheme and trajectories.
//! * [`strategies`]: static, staircase and local steering controls.
//! * [`optimal_control`]: discrete adjoint, projected gradient, minimal time.

// comparisons are negated on purpose so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod optimal_control;
pub mod pde;
pub mod phase_plane;
pub mod quadrature;
pub mod reaction;
pub mod scalar;
pub mod strategies;

pub use error::{Error, Result};
pub use pde::{ControlSchedule, Field, Trajectory};
pub use phase_plane::{PhasePoint, SteadyState};
pub use reaction::{ModelKind, ModelSpec, ReactionModel};
