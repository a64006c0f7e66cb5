//! Steady-state superradiance in a pumped atom-cavity system: operator
//! construction, quantum-jump trajectories, photon-correlation estimators,
//! a second-order cumulant model and an exact density-matrix reference.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod ensemble;
pub mod error;
pub mod operators;
pub mod oracle;
pub mod params;
pub mod propagator;
pub mod record;
pub mod semiclassical;
pub mod sparse;
pub mod state;
pub mod trajectory;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, ErrorKind, Result};
pub use operators::{build_adiabatic_model, build_full_model, build_model, ModelKind, OperatorSet};
pub use params::{classify, classify_regime, gamma_c, validity_report, Regime, SystemParams};
pub use propagator::Integrator;
pub use record::{read_records, write_records, JumpEvent, JumpRecord};
pub use state::{expectation, StateVector};
pub use trajectory::{run_trajectory, TrajectoryRunner};
pub use correlation::{g2_histogram, g2_zero_from_states, intensity_variance, G2Estimate};
pub use ensemble::{run_ensemble, EnsembleConfig, EnsembleResult, MeanEstimate};
pub use oracle::{build_liouvillian, exact_moments, steady_state, DensityMatrix, ExactMoments};
pub use semiclassical::{
    closed_form_steady_state, cumulant_rhs, g2_zero_semiclassical, integrate_to_steady_state,
    thermal_g2, thermal_g2_zero, PairCorrelations,
};
