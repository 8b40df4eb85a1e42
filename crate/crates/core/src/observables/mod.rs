//! Quantum-correlation markers of a two-qubit spin state and their hierarchy.
//!
//! | marker | threshold | meaning when exceeded |
//! |---|---|---|
//! | discord `D` | 0 | quantum correlations beyond classical |
//! | `Δ_E` | 1 | entanglement (Peres–Horodecki) |
//! | steering `T` | 2π | steerable (unpolarized states) |
//! | CHSH `B = m1 + m2` | 1 | Bell-correlated |
//! | magic `M̃2` | 0 | non-stabilizer state |

mod discord;
mod entanglement;
mod steering;

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

pub use discord::{
    discord, discord_difference, post_measurement_state, DiscordOptions, DiscordResult, Outcome,
    PostMeasurement, DEFAULT_PHYSICALITY_TOL, DEGENERATE_PROBABILITY,
};
pub use entanglement::{entanglement_marker, EntanglementMarker};
pub use steering::{steering_marker, QuadratureSpec};

pub(crate) use discord::{discord_at_axis, discord_core};
pub(crate) use entanglement::entanglement_of_matrix;
pub(crate) use steering::{chsh_with_gradient, steering_with_gradient};

use crate::error::{Error, Result};
use crate::fano::{
    assemble_density, validate_physicality, CoefficientVector, FanoCoefficients, Side,
};

pub const DISCORD_THRESHOLD: f64 = 0.0;
pub const ENTANGLEMENT_THRESHOLD: f64 = 1.0;
pub const STEERING_THRESHOLD: f64 = 2.0 * PI;
pub const BELL_THRESHOLD: f64 = 1.0;
pub const MAGIC_THRESHOLD: f64 = 0.0;

/// Discord below this counts as zero when classifying.
pub const DISCORD_FLAG_TOL: f64 = 1e-7;
/// Magic below this counts as zero when classifying.
pub const MAGIC_FLAG_TOL: f64 = 1e-9;

/// CHSH marker: sum of the two largest eigenvalues of `CᵀC`.
pub fn chsh_marker(c: &Matrix3<f64>) -> f64 {
    let m = steering::gram_eigenvalues(c);
    m[0] + m[1]
}

/// Stabilizer-Rényi magic of the state as represented in its Pauli basis.
pub fn magic(fano: &FanoCoefficients) -> f64 {
    magic_of_vector(&fano.to_vector())
}

pub(crate) fn magic_of_vector(x: &CoefficientVector) -> f64 {
    let (mut num, mut den) = (1.0, 1.0);
    for v in x.iter() {
        let v2 = v * v;
        num += v2 * v2;
        den += v2;
    }
    -(num / den).log2()
}

/// Marker values that drive the hierarchy flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerValues {
    pub discord: f64,
    pub delta_e: f64,
    pub steering: f64,
    pub chsh: f64,
    pub magic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyFlags {
    pub discordant: bool,
    pub entangled: bool,
    pub steerable: bool,
    pub bell_correlated: bool,
    pub magical: bool,
}

impl HierarchyFlags {
    /// Threshold comparisons. `threshold_tol` guards the sharp thresholds of `Δ_E`,
    /// `T` and `B` against rounding of values computed exactly at the boundary.
    pub fn from_markers(m: &MarkerValues, threshold_tol: f64) -> Self {
        HierarchyFlags {
            discordant: m.discord > DISCORD_THRESHOLD + DISCORD_FLAG_TOL,
            entangled: m.delta_e > ENTANGLEMENT_THRESHOLD + threshold_tol,
            steerable: m.steering > STEERING_THRESHOLD + threshold_tol,
            bell_correlated: m.chsh > BELL_THRESHOLD + threshold_tol,
            magical: m.magic > MAGIC_THRESHOLD + MAGIC_FLAG_TOL,
        }
    }

    pub fn as_tuple(&self) -> (bool, bool, bool, bool, bool) {
        (
            self.discordant,
            self.entangled,
            self.steerable,
            self.bell_correlated,
            self.magical,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyOptions {
    pub discord: DiscordOptions,
    pub quadrature: QuadratureSpec,
    /// Above this polarization magnitude the steering criterion's unpolarized
    /// assumption is flagged.
    pub polarization_tol: f64,
    pub threshold_tol: f64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            discord: DiscordOptions::default(),
            quadrature: QuadratureSpec::default(),
            polarization_tol: 0.05,
            threshold_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HierarchyWarning {
    /// The steering iff-criterion holds for unpolarized states only.
    UnpolarizedAssumption { max_polarization: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyReport {
    pub discord_top: f64,
    pub entanglement_marker: f64,
    pub negativity: f64,
    pub steering: f64,
    pub chsh: f64,
    pub magic: f64,
    pub flags: HierarchyFlags,
    pub warnings: Vec<HierarchyWarning>,
}

impl HierarchyReport {
    pub fn markers(&self) -> MarkerValues {
        MarkerValues {
            discord: self.discord_top,
            delta_e: self.entanglement_marker,
            steering: self.steering,
            chsh: self.chsh,
            magic: self.magic,
        }
    }
}

pub fn classify_hierarchy(
    fano: &FanoCoefficients,
    opts: &HierarchyOptions,
) -> Result<HierarchyReport> {
    let report = validate_physicality(fano, opts.discord.physicality_tol);
    if !report.is_physical {
        return Err(Error::Unphysical(Box::new(report)));
    }
    let rho = assemble_density(fano);
    let d = discord(fano, Side::Top, &opts.discord)?;
    let e = entanglement_of_matrix(rho.matrix());
    let markers = MarkerValues {
        discord: d.value,
        delta_e: e.delta_e,
        steering: steering_marker(fano.c(), &opts.quadrature),
        chsh: chsh_marker(fano.c()),
        magic: magic(fano),
    };
    let max_polarization = fano.p().norm().max(fano.pbar().norm());
    let mut warnings = Vec::new();
    if max_polarization > opts.polarization_tol {
        warnings.push(HierarchyWarning::UnpolarizedAssumption { max_polarization });
    }
    Ok(HierarchyReport {
        discord_top: markers.discord,
        entanglement_marker: markers.delta_e,
        negativity: e.negativity,
        steering: markers.steering,
        chsh: markers.chsh,
        magic: markers.magic,
        flags: HierarchyFlags::from_markers(&markers, opts.threshold_tol),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fano::SpinBasis;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    #[test]
    fn chsh_examples() {
        assert_abs_diff_eq!(chsh_marker(&(-Matrix3::identity())), 2.0, epsilon = 1e-12);
        assert_eq!(chsh_marker(&Matrix3::zeros()), 0.0);
        let c = Matrix3::from_diagonal(&Vector3::new(0.6, 0.5, 0.4));
        assert_abs_diff_eq!(chsh_marker(&c), 0.61, epsilon = 1e-14);
    }

    #[test]
    fn magic_examples() {
        let stab = FanoCoefficients::new(
            Vector3::z(),
            Vector3::z(),
            Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0)),
            SpinBasis::beam(),
        )
        .unwrap();
        assert_eq!(magic(&stab), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = Vector3::new(s, s, 0.0);
        let t = FanoCoefficients::new(
            p,
            Vector3::z(),
            p * Vector3::z().transpose(),
            SpinBasis::beam(),
        )
        .unwrap();
        assert_abs_diff_eq!(magic(&t), (4.0f64 / 3.0).log2(), epsilon = 1e-12);
    }

    #[test]
    fn published_marker_values_flags() {
        let m = MarkerValues {
            discord: 0.424,
            delta_e: 2.03,
            steering: 8.55,
            chsh: 0.99,
            magic: 0.561,
        };
        assert_eq!(
            HierarchyFlags::from_markers(&m, 1e-9).as_tuple(),
            (true, true, true, false, true)
        );
    }

    #[test]
    fn singlet_and_mixed_classification() {
        let singlet = FanoCoefficients::new(
            Vector3::zeros(),
            Vector3::zeros(),
            -Matrix3::identity(),
            SpinBasis::beam(),
        )
        .unwrap();
        let r = classify_hierarchy(&singlet, &HierarchyOptions::default()).unwrap();
        assert_eq!(r.flags.as_tuple(), (true, true, true, true, false));
        assert!(r.warnings.is_empty());
        let mixed = FanoCoefficients::maximally_mixed(SpinBasis::beam());
        let r = classify_hierarchy(&mixed, &HierarchyOptions::default()).unwrap();
        assert_eq!(r.flags.as_tuple(), (false, false, false, false, false));
    }

    #[test]
    fn polarized_state_warns() {
        let p = Vector3::new(0.0, 0.0, 0.3);
        let f = FanoCoefficients::new(p, Vector3::zeros(), Matrix3::zeros(), SpinBasis::beam())
            .unwrap();
        let r = classify_hierarchy(&f, &HierarchyOptions::default()).unwrap();
        assert!(matches!(
            r.warnings[0],
            HierarchyWarning::UnpolarizedAssumption { max_polarization } if (max_polarization - 0.3).abs() < 1e-15
        ));
    }
}
