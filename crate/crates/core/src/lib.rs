//! Reconstruction and characterization of two-qubit spin states from measured
//! polarization and spin-correlation coefficients.
//!
//! * [`fano`]: assembly of density matrices, reductions, partial transposes, entropies.
//! * [`observables`]: discord, entanglement, steering, CHSH and magic markers.
//! * [`inference`]: covariance-weighted likelihood, profile scans, threshold significances.
//! * [`oracles`] (feature `oracles`): brute-force references and analytic state generators.

pub mod error;
pub mod fano;
pub mod inference;
pub mod observables;
mod optim;
#[cfg(feature = "oracles")]
pub mod oracles;
pub mod sphere;

pub use error::{Error, Result};
pub use fano::{
    assemble_density, extract_fano, partial_transpose, physicality_of_vector, reduced_state,
    rotate_basis, validate_physicality, von_neumann_entropy, BasisKind, BinKinematics,
    CoefficientVector, DensityMatrix4, FanoCoefficients, Handedness, PhysicalityReport, Side,
    SingleQubitState, SpinBasis,
};
pub use inference::{
    chi2, fit_central, profile_at, scan_observable, threshold_significance, GridSpec,
    MeasurementRecord, Observable, ObservableKind, ScanResult, StandardObservable,
};
pub use observables::{
    chsh_marker, classify_hierarchy, discord, discord_difference, entanglement_marker, magic,
    post_measurement_state, steering_marker, DiscordOptions, DiscordResult, HierarchyFlags,
    HierarchyOptions, HierarchyReport, QuadratureSpec,
};
