use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::fano::{
    hermitian_eigenvalues, partial_transpose_matrix, physicality_of_matrix, DensityMatrix4, Side,
    C64,
};

use super::DEFAULT_PHYSICALITY_TOL;

/// Peres–Horodecki markers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementMarker {
    /// `1 − 4 λ_min(rho^{T_tbar})`; the state is entangled iff this exceeds 1.
    pub delta_e: f64,
    /// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
    pub negativity: f64,
}

pub fn entanglement_marker(rho: &DensityMatrix4) -> Result<EntanglementMarker> {
    let report = physicality_of_matrix(rho.matrix(), DEFAULT_PHYSICALITY_TOL);
    if !report.is_physical {
        return Err(Error::Unphysical(Box::new(report)));
    }
    Ok(entanglement_of_matrix(rho.matrix()))
}

pub(crate) fn entanglement_of_matrix(m: &Matrix4<C64>) -> EntanglementMarker {
    let ev = hermitian_eigenvalues(&partial_transpose_matrix(m, Side::Antitop));
    EntanglementMarker {
        delta_e: 1.0 - 4.0 * ev[0],
        negativity: ev.iter().filter(|&&l| l < 0.0).map(|l| -l).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fano::{assemble_density, FanoCoefficients, SpinBasis};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Vector3};

    fn werner(p: f64) -> DensityMatrix4 {
        assemble_density(
            &FanoCoefficients::new(
                Vector3::zeros(),
                Vector3::zeros(),
                -p * Matrix3::identity(),
                SpinBasis::beam(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn singlet_markers() {
        let e = entanglement_marker(&werner(1.0)).unwrap();
        assert_abs_diff_eq!(e.negativity, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.delta_e, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn werner_boundary() {
        let e = entanglement_marker(&werner(1.0 / 3.0)).unwrap();
        assert_abs_diff_eq!(e.delta_e, 1.0, epsilon = 1e-12);
        assert!(e.negativity < 1e-15);
    }

    #[test]
    fn product_state_is_ppt() {
        let p = Vector3::new(0.1, 0.5, -0.3);
        let q = Vector3::new(0.7, 0.0, 0.2);
        let rho = assemble_density(
            &FanoCoefficients::new(p, q, p * q.transpose(), SpinBasis::beam()).unwrap(),
        );
        let e = entanglement_marker(&rho).unwrap();
        assert_eq!(e.negativity, 0.0);
        assert!(e.delta_e <= 1.0);
    }
}
