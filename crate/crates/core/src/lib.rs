//! Wave-packet dynamics of an atom crossing a cavity mode, and diagnostics
//! for how adiabatically the internal state follows the local dressed states.
//!
//! The model is one excitation block of the Jaynes-Cummings Hamiltonian with
//! a position-dependent coupling `g(x)`. [`propagator`] evolves the exact
//! two-channel state and the adiabatic reference side by side, [`metrics`]
//! compares them, and [`semiclassical`] reduces the problem to effective
//! time-dependent two-level models.

pub mod csv;
pub mod frame;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod propagator;
pub mod semiclassical;

pub use frame::AdiabaticFrame;
pub use grid::{Basis, Channel, GaussianPacket, Grid, GridError, Observable, SpinorField};
pub use metrics::{AdiabaticityWeights, MetricsError};
pub use model::{FrameCase, ModeShape, ModelError, ModelParams, TabulatedMode};
pub use propagator::{InitialState, PropagationError, Scenario, Trajectory};
pub use semiclassical::{EffectiveModel, InversionFormula, SemiclassicalError};

/// Version string written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
