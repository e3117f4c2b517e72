//! Multiple-vortex solutions of the coupled BPS vortex equations
//!
//! ```text
//! Δu_j = e^{u_j} + Σ_i e^{u_i} − (l+1) + 4π Σ_s δ_{p_{j,s}},   j = 1..l,
//! ```
//!
//! on a doubly periodic cell and on a truncated plane, by minimizing a
//! strictly convex functional in the Cholesky variables `w = L⁻¹(u − u⁰)`.

pub mod background;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod grid;
pub mod io;
pub mod newton;
pub mod periodic;
pub mod planar;
pub mod problem;
pub mod radial;
pub mod spectral;
pub mod torus;

pub use background::{BackgroundData, VortexSpec};
pub use coupling::CouplingData;
pub use diagnostics::{DiagnosticsReport, Tolerances};
pub use error::{Result, VortexError};
pub use functional::{SolveOptions, SolveResult};
pub use grid::{Grid, PlanarTruncation, ScalarField2D, TorusGeometry};
pub use periodic::{existence_condition, ExistenceReport, PeriodicProblem};
pub use planar::{decay_rate, DecayFit, PlanarProblem};
pub use problem::VortexProblem;
pub use radial::{radial_profile, RadialProfile};
