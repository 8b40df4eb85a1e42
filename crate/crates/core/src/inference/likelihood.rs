use nalgebra::{SMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fano::{BinKinematics, CoefficientVector, SpinBasis};

pub type CovarianceMatrix = SMatrix<f64, 15, 15>;

/// Largest magnitude allowed for an observed coefficient.
pub const OBSERVED_LIMIT: f64 = 1.5;

/// Relative cut below which covariance eigenvalues are treated as null directions.
pub const NULL_EIGENVALUE_RATIO: f64 = 1e-12;

/// Measured coefficients of one phase-space bin with their covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// Canonical order `P1..P3, Pbar1..Pbar3, C11..C33` (row-major).
    pub observed: CoefficientVector,
    pub covariance: CovarianceMatrix,
    pub bin: BinKinematics,
    pub basis: SpinBasis,
    pub label: String,
}

impl MeasurementRecord {
    pub fn new(
        observed: CoefficientVector,
        covariance: CovarianceMatrix,
        bin: BinKinematics,
        basis: SpinBasis,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        for (k, v) in observed.iter().enumerate() {
            if !v.is_finite() || v.abs() > OBSERVED_LIMIT {
                return Err(Error::validation(format!(
                    "bin `{label}`: observed coefficient {k} = {v} outside [-{OBSERVED_LIMIT}, {OBSERVED_LIMIT}]"
                )));
            }
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "bin `{label}`: covariance has non-finite entries"
            )));
        }
        let scale = covariance.amax();
        let asym = (covariance - covariance.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::validation(format!(
                "bin `{label}`: covariance asymmetric (max |U - Uᵀ| = {asym:e})"
            )));
        }
        spectrum_check(&covariance)?;
        Ok(MeasurementRecord {
            observed,
            covariance,
            bin,
            basis,
            label,
        })
    }
}

/// Eigenvalues of a covariance, rejecting significantly negative ones.
fn spectrum_check(cov: &CovarianceMatrix) -> Result<SymmetricEigen<f64, nalgebra::Const<15>>> {
    let eig = SymmetricEigen::new(*cov);
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::Covariance {
            eigenvalue: lmax,
            reason: "no positive eigenvalue".into(),
        });
    }
    let lmin = eig.eigenvalues.min();
    if lmin < -1e-10 * lmax {
        return Err(Error::Covariance {
            eigenvalue: lmin,
            reason: format!("negative beyond -1e-10 × λ_max = {:e}", -1e-10 * lmax),
        });
    }
    Ok(eig)
}

/// Gaussian likelihood `-2 log L = (o − x)ᵀ U⁺ (o − x)` with a spectrally truncated
/// pseudo-inverse.
#[derive(Debug, Clone)]
pub struct Likelihood {
    observed: CoefficientVector,
    covariance: CovarianceMatrix,
    /// Rows `e_kᵀ / sqrt(λ_k)` for kept eigenpairs, zero rows for null directions.
    whitening: CovarianceMatrix,
    rank: usize,
}

impl Likelihood {
    pub fn new(record: &MeasurementRecord) -> Result<Self> {
        let eig = spectrum_check(&record.covariance)?;
        let lmax = eig.eigenvalues.max();
        let mut whitening = CovarianceMatrix::zeros();
        let mut rank = 0;
        for k in 0..15 {
            let l = eig.eigenvalues[k];
            if l > NULL_EIGENVALUE_RATIO * lmax {
                let v = eig.eigenvectors.column(k);
                whitening.row_mut(k).copy_from(&(v.transpose() / l.sqrt()));
                rank += 1;
            }
        }
        Ok(Likelihood {
            observed: record.observed,
            covariance: record.covariance,
            whitening,
            rank,
        })
    }

    pub fn observed(&self) -> &CoefficientVector {
        &self.observed
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.covariance
    }

    /// Number of non-null directions kept in the quadratic form.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub(crate) fn whitening(&self) -> &CovarianceMatrix {
        &self.whitening
    }

    /// Whitened residual; its squared norm is `-2 log L`.
    pub fn whitened(&self, x: &CoefficientVector) -> CoefficientVector {
        self.whitening * (x - self.observed)
    }

    pub fn chi2(&self, x: &CoefficientVector) -> f64 {
        self.whitened(x).norm_squared()
    }

    /// `Uᵀ g`-weighted variance `gᵀ U g` of a linear functional.
    pub fn linear_variance(&self, gradient: &CoefficientVector) -> f64 {
        (gradient.transpose() * self.covariance * gradient)[(0, 0)]
    }
}

/// `-2 log L` of the parameter point `x` (entries in `[-1, 1]`).
pub fn chi2(x: &CoefficientVector, record: &MeasurementRecord) -> Result<f64> {
    if let Some((k, v)) = x
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() > 1.0 + 1e-12 || !v.is_finite())
    {
        return Err(Error::validation(format!(
            "parameter {k} = {v} outside [-1, 1]"
        )));
    }
    Ok(Likelihood::new(record)?.chi2(x))
}
