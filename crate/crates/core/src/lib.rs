//! Numerical laboratory for the damped-driven KdV equation
//!
//! ```text
//! u_t - nu u_xx + u_xxx - 6 u u_x = sqrt(nu) eta(t, x),   x in S^1,  int u dx = 0
//! ```
//!
//! and for its effective (torus-averaged) equation in Birkhoff coordinates.
//! The crate is organized bottom-up:
//!
//! * [`field`]: zero-mean trigonometric fields, dealiased KdV nonlinearity.
//! * [`birkhoff`]: action-angle coordinates and backends for the nonlinear
//!   Fourier transform.
//! * [`dynamics`]: the SPDE integrator, ensembles, the fast `v`-equations and a
//!   generic SDE step.
//! * [`averaging`]: torus quadrature and every averaged quantity.
//! * [`effective`]: assembly and integration of the effective equation.
//! * [`analysis`]: distances between action laws, the convergence study,
//!   angle equidistribution and occupation diagnostics.

pub mod analysis;
pub mod averaging;
pub mod birkhoff;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod field;
pub mod rng;
pub mod trajectory;

pub use birkhoff::{
    actions, angles, reconstruct, rotate, ActionVector, AngleVector, BackendSpec,
    BirkhoffBackend, BirkhoffVector, Capabilities,
};
pub use error::{Error, Result};
pub use field::FourierField;
pub use trajectory::{Snapshot, TrajectoryRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
