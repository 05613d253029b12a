//! Monte Carlo wave-function simulation of generalized Lindblad master
//! equations, in which the system state is split into several coupled,
//! non-normalized components ρ_m and jumps move weight between components.
//!
//! * [`model`]: model types, validation, effective Hamiltonians and the
//!   built-in two-band and spin-bath models.
//! * [`unravel`]: per-step outcome probabilities, jump and non-jump updates,
//!   single trajectories and the exhaustive one-step enumeration.
//! * [`ensemble`]: seeded parallel trajectory ensembles.
//! * [`integrator`]: RK4 reference integration and closed-form solutions.
//! * [`observables`], [`stats`]: expectation values and ensemble statistics.
//! * [`io`]: configuration and model files, CSV output.

pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod stats;
pub mod unravel;

pub use error::{Error, Result};
pub use integrator::{closed_form_two_band, master_rhs, reduce_density, rk4_integrate, DensityComponents};
pub use linalg::ComplexMatrix;
pub use model::{
    build_spin_bath, build_spin_bath_two_spins, build_two_band, gamma_from_microscopic, jump_mode_count,
    GeneralizedLindbladModel, JumpTerm, ValidationReport,
};
pub use observables::{ObservableSpec, Preset, TimeSeries};
pub use unravel::{ComponentWaveFunction, TrajectoryState, Unraveling, UnravelingOptions};
