//! Gaussian likelihood over the 15 coefficients and profile-likelihood intervals of
//! nonlinear observables.
//!
//! Profiles minimize `-2 log L` on the box `[-1, 1]^15` subject to `g(x) = t` by a
//! penalty continuation (weights `1e2 → 1e10`) whose inner problem is a projected
//! Levenberg–Marquardt fit. Discord-based observables are additionally restricted
//! to positive semidefinite states.

mod likelihood;
mod observable;
mod profile;
mod scan;

pub use likelihood::{
    chi2, CovarianceMatrix, Likelihood, MeasurementRecord, NULL_EIGENVALUE_RATIO, OBSERVED_LIMIT,
};
pub use observable::{
    finite_difference_gradient, LinearObservable, Observable, ObservableKind, StandardObservable,
    FD_STEP,
};
pub use profile::{fit_central, profile_at, CentralFit, ProfileOptions, ProfilePoint, Profiler};
pub use scan::{
    scan_observable, scan_observable_with, threshold_significance, GridSpec, ScanResult,
    Significance, SignificanceSide,
};
