//! Two-qubit spin states in the polarization / spin-correlation parameterization.
//!
//! A state of the top-antitop spin system is written as
//!
//! ```text
//! rho = 1/4 (I⊗I + Σ P_i σ_i⊗I + Σ Pbar_j I⊗σ_j + Σ C_ij σ_i⊗σ_j)
//! ```
//!
//! The first tensor factor is always the top quark, the second the antiquark.
//! Pauli index `i = 1, 2, 3` binds to the three axis labels of the [`SpinBasis`]
//! in their declared order: `(n, r, k)` for the helicity basis and `(x, y, z)` for
//! the beam basis. Computational basis state `0` is spin up along axis 3.

use std::borrow::Cow;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix, Matrix2, Matrix3, Matrix4, SVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// The 15 coefficients in canonical order: `P1..P3, Pbar1..Pbar3, C11, C12, ..., C33`.
pub type CoefficientVector = SVector<f64, 15>;

/// Hermiticity and unit-trace tolerance for [`DensityMatrix4`].
pub const DENSITY_TOL: f64 = 1e-12;

/// Eigenvalues above `-ENTROPY_CLAMP_TOL` are treated as zero by the entropy routines.
pub const ENTROPY_CLAMP_TOL: f64 = 1e-10;

const COEFF_RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Antitop,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Top => Side::Antitop,
            Side::Antitop => Side::Top,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Helicity,
    Beam,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinBasis {
    kind: BasisKind,
    axis_labels: [Cow<'static, str>; 3],
}

impl SpinBasis {
    /// Helicity basis with index order `(n, r, k)`.
    pub fn helicity() -> Self {
        SpinBasis {
            kind: BasisKind::Helicity,
            axis_labels: [Cow::Borrowed("n"), Cow::Borrowed("r"), Cow::Borrowed("k")],
        }
    }

    /// Beam basis with index order `(x, y, z)`, `z` along the beam.
    pub fn beam() -> Self {
        SpinBasis {
            kind: BasisKind::Beam,
            axis_labels: [Cow::Borrowed("x"), Cow::Borrowed("y"), Cow::Borrowed("z")],
        }
    }

    pub fn custom(labels: [&str; 3]) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() {
                return Err(Error::validation(format!("axis label {} is empty", i + 1)));
            }
        }
        if labels[0] == labels[1] || labels[0] == labels[2] || labels[1] == labels[2] {
            return Err(Error::validation(format!(
                "axis labels must be distinct, got {labels:?}"
            )));
        }
        Ok(SpinBasis {
            kind: BasisKind::Custom,
            axis_labels: labels.map(|l| Cow::Owned(l.to_string())),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn axis_labels(&self) -> [&str; 3] {
        [
            &self.axis_labels[0],
            &self.axis_labels[1],
            &self.axis_labels[2],
        ]
    }

    /// Name used in reports and input files.
    pub fn name(&self) -> &'static str {
        match self.kind {
            BasisKind::Helicity => "helicity",
            BasisKind::Beam => "beam",
            BasisKind::Custom => "custom",
        }
    }
}

impl fmt::Display for SpinBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.axis_labels();
        write!(f, "{}({a},{b},{c})", self.name())
    }
}

/// Phase-space cell of a measurement: invariant mass range in GeV and `|cos Θ|` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinKinematics {
    pub mtt_range: (f64, f64),
    pub abs_costheta_range: (f64, f64),
}

impl BinKinematics {
    pub fn new(mtt_range: (f64, f64), abs_costheta_range: (f64, f64)) -> Result<Self> {
        let (mlo, mhi) = mtt_range;
        let (clo, chi) = abs_costheta_range;
        if !(mlo.is_finite() && mhi.is_finite() && mlo < mhi) {
            return Err(Error::validation(format!(
                "m(tt) range [{mlo}, {mhi}] must have lower < upper"
            )));
        }
        if !(clo < chi && clo >= 0.0 && chi <= 1.0) {
            return Err(Error::validation(format!(
                "|cos theta| range [{clo}, {chi}] must satisfy 0 <= lower < upper <= 1"
            )));
        }
        Ok(BinKinematics {
            mtt_range,
            abs_costheta_range,
        })
    }

    pub fn mtt_midpoint(&self) -> f64 {
        0.5 * (self.mtt_range.0 + self.mtt_range.1)
    }

    pub fn costheta_midpoint(&self) -> f64 {
        0.5 * (self.abs_costheta_range.0 + self.abs_costheta_range.1)
    }
}

/// Polarizations and spin-correlation matrix of a two-qubit state in a named basis.
///
/// Entries are restricted to `[-1, 1]`; positivity of the assembled density
/// matrix is *not* required (see [`validate_physicality`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FanoCoefficients {
    p: Vector3<f64>,
    pbar: Vector3<f64>,
    c: Matrix3<f64>,
    basis: SpinBasis,
}

impl FanoCoefficients {
    pub fn new(
        p: Vector3<f64>,
        pbar: Vector3<f64>,
        c: Matrix3<f64>,
        basis: SpinBasis,
    ) -> Result<Self> {
        let check = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v.abs() > 1.0 + COEFF_RANGE_SLACK {
                Err(Error::validation(format!("{name} = {v} outside [-1, 1]")))
            } else {
                Ok(())
            }
        };
        for i in 0..3 {
            check(&format!("P{}", i + 1), p[i])?;
            check(&format!("Pbar{}", i + 1), pbar[i])?;
            for j in 0..3 {
                check(&format!("C{}{}", i + 1, j + 1), c[(i, j)])?;
            }
        }
        Ok(FanoCoefficients { p, pbar, c, basis })
    }

    /// Build from the canonical 15-vector.
    pub fn from_vector(x: &CoefficientVector, basis: SpinBasis) -> Result<Self> {
        let p = Vector3::new(x[0], x[1], x[2]);
        let pbar = Vector3::new(x[3], x[4], x[5]);
        let c = Matrix3::from_row_slice(&x.as_slice()[6..15]);
        FanoCoefficients::new(p, pbar, c, basis)
    }

    pub fn to_vector(&self) -> CoefficientVector {
        let mut x = CoefficientVector::zeros();
        for i in 0..3 {
            x[i] = self.p[i];
            x[3 + i] = self.pbar[i];
            for j in 0..3 {
                x[6 + 3 * i + j] = self.c[(i, j)];
            }
        }
        x
    }

    pub fn maximally_mixed(basis: SpinBasis) -> Self {
        FanoCoefficients {
            p: Vector3::zeros(),
            pbar: Vector3::zeros(),
            c: Matrix3::zeros(),
            basis,
        }
    }

    pub fn p(&self) -> &Vector3<f64> {
        &self.p
    }

    pub fn pbar(&self) -> &Vector3<f64> {
        &self.pbar
    }

    pub fn c(&self) -> &Matrix3<f64> {
        &self.c
    }

    pub fn basis(&self) -> &SpinBasis {
        &self.basis
    }

    /// Polarization of the given side.
    pub fn polarization(&self, side: Side) -> &Vector3<f64> {
        match side {
            Side::Top => &self.p,
            Side::Antitop => &self.pbar,
        }
    }

    /// The same state with the roles of quark and antiquark swapped.
    pub fn exchanged(&self) -> Self {
        FanoCoefficients {
            p: self.pbar,
            pbar: self.p,
            c: self.c.transpose(),
            basis: self.basis.clone(),
        }
    }
}

/// A 4×4 Hermitian, unit-trace matrix on the top ⊗ antitop spin space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix4 {
    m: Matrix4<C64>,
}

impl DensityMatrix4 {
    pub fn from_matrix(m: Matrix4<C64>) -> Result<Self> {
        let herm = max_hermiticity_defect(&m);
        if herm > DENSITY_TOL {
            return Err(Error::validation(format!(
                "matrix is not Hermitian (max |m - m^†| = {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::validation(format!("trace {tr} differs from 1")));
        }
        Ok(DensityMatrix4 { m })
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.m)
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        spectral_entropy(&self.eigenvalues())
    }
}

/// A single-qubit state `(I + b·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitState {
    bloch: Vector3<f64>,
}

impl SingleQubitState {
    pub fn new(bloch: Vector3<f64>) -> Result<Self> {
        let r = bloch.norm();
        if !(r <= 1.0 + DENSITY_TOL) {
            return Err(Error::validation(format!(
                "Bloch vector length {r} exceeds 1"
            )));
        }
        Ok(SingleQubitState { bloch })
    }

    pub(crate) fn new_unchecked(bloch: Vector3<f64>) -> Self {
        SingleQubitState { bloch }
    }

    pub fn maximally_mixed() -> Self {
        SingleQubitState {
            bloch: Vector3::zeros(),
        }
    }

    pub fn bloch(&self) -> &Vector3<f64> {
        &self.bloch
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        let s = paulis();
        let mut m = Matrix2::identity();
        for i in 0..3 {
            m += s[i] * C64::new(self.bloch[i], 0.0);
        }
        m * C64::new(0.5, 0.0)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        bloch_entropy(self.bloch.norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalityReport {
    pub min_eigenvalue: f64,
    pub is_physical: bool,
    /// Ascending.
    pub eigenvalues: [f64; 4],
}

/// Pauli matrices σ1, σ2, σ3.
pub fn paulis() -> &'static [Matrix2<C64>; 3] {
    static PAULIS: OnceLock<[Matrix2<C64>; 3]> = OnceLock::new();
    PAULIS.get_or_init(|| {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        [
            Matrix2::new(o, one, one, o),
            Matrix2::new(o, -i, i, o),
            Matrix2::new(one, o, o, -one),
        ]
    })
}

/// The operator multiplying coefficient `k` (canonical order) in the expansion:
/// `σ_k⊗I`, `I⊗σ_j`, or `σ_i⊗σ_j`.
pub fn coefficient_operators() -> &'static [Matrix4<C64>; 15] {
    static OPS: OnceLock<[Matrix4<C64>; 15]> = OnceLock::new();
    OPS.get_or_init(|| {
        let s = paulis();
        let id = Matrix2::<C64>::identity();
        let kron = |a: &Matrix2<C64>, b: &Matrix2<C64>| -> Matrix4<C64> {
            Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
        };
        std::array::from_fn(|k| match k {
            0..=2 => kron(&s[k], &id),
            3..=5 => kron(&id, &s[k - 3]),
            _ => {
                let (i, j) = ((k - 6) / 3, (k - 6) % 3);
                kron(&s[i], &s[j])
            }
        })
    })
}

/// Assemble `rho` from the coefficients. The result is Hermitian with unit trace
/// for any coefficients, physical or not.
pub fn assemble_density(fano: &FanoCoefficients) -> DensityMatrix4 {
    DensityMatrix4 {
        m: assemble_from_vector(&fano.to_vector()),
    }
}

pub(crate) fn assemble_from_vector(x: &CoefficientVector) -> Matrix4<C64> {
    let ops = coefficient_operators();
    let mut m = Matrix4::<C64>::identity();
    for k in 0..15 {
        if x[k] != 0.0 {
            m += ops[k] * C64::new(x[k], 0.0);
        }
    }
    m * C64::new(0.25, 0.0)
}

/// Invert the expansion through Pauli-trace orthogonality.
///
/// Hermiticity and trace are guaranteed by [`DensityMatrix4::from_matrix`]; an
/// indefinite matrix can still yield coefficients outside `[-1, 1]`, which is an error.
pub fn extract_fano(rho: &DensityMatrix4, basis: SpinBasis) -> Result<FanoCoefficients> {
    let ops = coefficient_operators();
    let x = CoefficientVector::from_fn(|k, _| trace_product(&rho.m, &ops[k]));
    FanoCoefficients::from_vector(&x, basis)
}

fn trace_product(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
    let mut t = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    t.re
}

/// Reduced single-qubit state of one side. Its Bloch vector is the polarization of that side.
pub fn reduced_state(rho: &DensityMatrix4, side: Side) -> SingleQubitState {
    let ops = coefficient_operators();
    let offset = match side {
        Side::Top => 0,
        Side::Antitop => 3,
    };
    let b = Vector3::from_fn(|i, _| trace_product(&rho.m, &ops[offset + i]));
    SingleQubitState::new_unchecked(b)
}

/// Transpose on one tensor factor. Trace and Hermiticity are preserved; positivity is not.
pub fn partial_transpose(rho: &DensityMatrix4, side: Side) -> Matrix4<C64> {
    partial_transpose_matrix(&rho.m, side)
}

pub(crate) fn partial_transpose_matrix(m: &Matrix4<C64>, side: Side) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        match side {
            Side::Top => m[(2 * a2 + b, 2 * a + b2)],
            Side::Antitop => m[(2 * a + b2, 2 * a2 + b)],
        }
    })
}

pub(crate) fn max_hermiticity_defect<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian 4×4 matrix, ascending.
pub fn hermitian_eigenvalues(m: &Matrix4<C64>) -> [f64; 4] {
    let eig = SymmetricEigen::new(*m);
    let mut ev = [
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.eigenvalues[2],
        eig.eigenvalues[3],
    ];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of a Hermitian 4×4 matrix with its (normalized) eigenvector.
pub(crate) fn hermitian_min_eigenpair(m: &Matrix4<C64>) -> (f64, nalgebra::Vector4<C64>) {
    let eig = SymmetricEigen::new(*m);
    let k = eig.eigenvalues.imin();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Entropy in bits of a qubit whose Bloch vector has length `r`.
pub fn bloch_entropy(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    xlog2x_neg(0.5 * (1.0 + r)) + xlog2x_neg(0.5 * (1.0 - r))
}

#[inline]
fn xlog2x_neg(l: f64) -> f64 {
    if l <= 0.0 {
        0.0
    } else {
        -l * l.log2()
    }
}

/// `-Σ λ log2 λ` over a spectrum. Eigenvalues in `[-1e-10, 0)` are clamped to zero,
/// anything lower is a domain error, as is a spectrum not summing to one within 1e-9.
pub fn spectral_entropy(eigenvalues: &[f64]) -> Result<f64> {
    let sum: f64 = eigenvalues.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("spectrum sums to {sum}, expected 1")));
    }
    if let Some(&bad) = eigenvalues.iter().find(|&&l| l < -ENTROPY_CLAMP_TOL) {
        return Err(Error::Domain(format!(
            "negative eigenvalue {bad:e} below clamp tolerance {ENTROPY_CLAMP_TOL:e}"
        )));
    }
    Ok(entropy_clamped(eigenvalues))
}

/// Entropy with every negative eigenvalue set to zero and no checks.
pub(crate) fn entropy_clamped(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().map(|&l| xlog2x_neg(l.max(0.0))).sum()
}

/// Von Neumann entropy (bits) of a 2×2 or 4×4 Hermitian PSD matrix.
pub fn von_neumann_entropy(m: &DMatrix<C64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n || !(n == 2 || n == 4) {
        return Err(Error::validation(format!(
            "entropy supports 2×2 or 4×4 matrices, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-10 {
                return Err(Error::validation("matrix is not Hermitian"));
            }
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    spectral_entropy(eig.eigenvalues.as_slice())
}

/// Spectrum of the assembled density matrix and whether it is positive within `tol`.
pub fn validate_physicality(fano: &FanoCoefficients, tol: f64) -> PhysicalityReport {
    physicality_of_matrix(&assemble_from_vector(&fano.to_vector()), tol)
}

/// As [`validate_physicality`] for a raw canonical vector, which may hold measured
/// values outside `[-1, 1]`.
pub fn physicality_of_vector(x: &CoefficientVector, tol: f64) -> PhysicalityReport {
    physicality_of_matrix(&assemble_from_vector(x), tol)
}

pub(crate) fn physicality_of_matrix(m: &Matrix4<C64>, tol: f64) -> PhysicalityReport {
    let eigenvalues = hermitian_eigenvalues(m);
    PhysicalityReport {
        min_eigenvalue: eigenvalues[0],
        is_physical: eigenvalues[0] >= -tol,
        eigenvalues,
    }
}

/// Whether [`rotate_basis`] accepts orthogonal matrices with determinant −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    ProperOnly,
    AllowImproper,
}

/// Re-express the state in rotated axes: `P' = R_t P`, `Pbar' = R_tbar Pbar`,
/// `C' = R_t C R_tbarᵀ`.
pub fn rotate_basis(
    fano: &FanoCoefficients,
    r_t: &Matrix3<f64>,
    r_tbar: &Matrix3<f64>,
    handedness: Handedness,
) -> Result<FanoCoefficients> {
    for (name, r) in [("R_t", r_t), ("R_tbar", r_tbar)] {
        let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
        if defect > 1e-9 {
            return Err(Error::validation(format!(
                "{name} is not orthogonal (max |RᵀR - I| = {defect:e})"
            )));
        }
        let det = r.determinant();
        let proper = (det - 1.0).abs() <= 1e-9;
        let improper = (det + 1.0).abs() <= 1e-9;
        if !proper && !(improper && handedness == Handedness::AllowImproper) {
            return Err(Error::validation(format!(
                "{name} has determinant {det}; improper reflections need Handedness::AllowImproper"
            )));
        }
    }
    FanoCoefficients::new(
        r_t * fano.p,
        r_tbar * fano.pbar,
        r_t * fano.c * r_tbar.transpose(),
        fano.basis.clone(),
    )
}

/// Axis map implementing the helicity-basis sign convention `n → s·n, r → s·r, k → k`
/// with `s = sgn(cos θ)`, in `(n, r, k)` order. For `s = −1` this is a rotation by π about `k`.
pub fn helicity_sign_convention(sign_cos_theta: f64) -> Matrix3<f64> {
    let s = if sign_cos_theta < 0.0 { -1.0 } else { 1.0 };
    Matrix3::from_diagonal(&Vector3::new(s, s, 1.0))
}
