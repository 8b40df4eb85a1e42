use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::sphere::gauss_legendre;

/// Gauss–Legendre rule in `cos θ` for sphere integrals whose azimuthal part is done in
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    polar_order: usize,
}

impl QuadratureSpec {
    pub fn new(polar_order: usize) -> Result<Self> {
        if polar_order < 4 {
            return Err(Error::validation(format!(
                "polar quadrature order must be >= 4, got {polar_order}"
            )));
        }
        Ok(QuadratureSpec { polar_order })
    }

    pub fn polar_order(&self) -> usize {
        self.polar_order
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { polar_order: 64 }
    }
}

/// Eigenvalues of `CᵀC`, descending and clamped at zero.
pub(crate) fn gram_eigenvalues(c: &Matrix3<f64>) -> [f64; 3] {
    let eig = SymmetricEigen::new(c.transpose() * c);
    let mut m = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]].map(|v| v.max(0.0));
    m.sort_by(|a, b| b.total_cmp(a));
    m
}

/// Eigenpairs of `CᵀC`, descending, eigenvalues clamped at zero.
fn gram_eigenpairs(c: &Matrix3<f64>) -> [(f64, Vector3<f64>); 3] {
    let eig = SymmetricEigen::new(c.transpose() * c);
    let mut pairs: [(f64, Vector3<f64>); 3] = std::array::from_fn(|k| {
        (
            eig.eigenvalues[k].max(0.0),
            eig.eigenvectors.column(k).into_owned(),
        )
    });
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Complete elliptic integrals `K(m)` and `E(m)` by the arithmetic-geometric mean, `0 ≤ m < 1`.
fn elliptic_ke(m: f64) -> (f64, f64) {
    let (mut a, mut g) = (1.0, (1.0 - m).sqrt());
    let mut sum = 0.5 * m;
    let mut pow = 0.5;
    for _ in 0..40 {
        let c = 0.5 * (a - g);
        if c.abs() <= 1e-17 * a {
            break;
        }
        pow *= 2.0;
        sum += pow * c * c;
        (a, g) = (0.5 * (a + g), (a * g).sqrt());
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// `R = ∫₀^{2π} sqrt(A cos²φ + B sin²φ) dφ = 4 sqrt(A) E(1 − B/A)` for `A ≥ B ≥ 0`,
/// with `∂R/∂A` and `∂R/∂B`.
fn ring(a: f64, b: f64) -> (f64, f64, f64) {
    if a <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let m = (1.0 - b / a).clamp(0.0, 1.0);
    let sa = a.sqrt();
    if m >= 1.0 {
        // B = 0: R = 4 sqrt(A), the B-derivative diverges
        return (4.0 * sa, 2.0 / sa, f64::INFINITY);
    }
    let (k, e) = elliptic_ke(m);
    // dE/dm, with its series near m = 0 where (E − K)/2m cancels
    let de = if m < 1e-3 {
        0.5 * PI * (-0.25 - 3.0 * m / 32.0 - 15.0 * m * m / 256.0)
    } else {
        (e - k) / (2.0 * m)
    };
    let r = 4.0 * sa * e;
    let dr_da = 2.0 * e / sa + 4.0 * sa * de * b / (a * a);
    let dr_db = -4.0 * sa * de / a;
    (r, dr_da, dr_db)
}

/// Gauss–Legendre `(cos θ, weight)` pairs mapped to `[0, 1]`, built once per order.
fn polar_rule(order: usize) -> Arc<Vec<(f64, f64)>> {
    static RULES: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let mut rules = RULES
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    rules
        .entry(order)
        .or_insert_with(|| {
            let (nodes, weights) = gauss_legendre(order);
            Arc::new(
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| (0.5 * (x + 1.0), *w))
                    .collect(),
            )
        })
        .clone()
}

/// `T` and `(∂T/∂m_polar, ∂T/∂m_a, ∂T/∂m_b)` for eigenvalues `m_polar ≥ m_a ≥ m_b`.
fn steering_integral(m: [f64; 3], quad: &QuadratureSpec) -> (f64, [f64; 3]) {
    let [mp, ma, mb] = m;
    if mp == 0.0 {
        return (0.0, [0.0; 3]);
    }
    let mut total = 0.0;
    let mut d = [0.0; 3];
    // the even integrand doubles the half-sphere, which cancels the ½ of the [0, 1] map
    for &(z, w) in polar_rule(quad.polar_order).iter() {
        let z2 = z * z;
        let (r, ra, rb) = ring(mp * z2 + (1.0 - z2) * ma, mp * z2 + (1.0 - z2) * mb);
        total += w * r;
        d[0] += w * (ra + rb) * z2;
        d[1] += w * ra * (1.0 - z2);
        d[2] += w * rb * (1.0 - z2);
    }
    (total, d)
}

/// Steering marker `T = ∫ dΩ |C û|`.
///
/// With `m1 ≥ m2 ≥ m3` the eigenvalues of `CᵀC`, the integrand in the eigenframe is
/// `sqrt(m1 u1² + m2 u2² + m3 u3²)`. The polar axis is put along `m1`; each ring of
/// constant `cos θ` is a complete elliptic integral evaluated in closed form, and the
/// polar integral over `cos θ ∈ [0, 1]` (the integrand is even under `û → −û`) uses
/// Gauss–Legendre. The rank-one case reduces to `2π sqrt(m1) cos θ`, integrated exactly.
pub fn steering_marker(c: &Matrix3<f64>, quad: &QuadratureSpec) -> f64 {
    steering_integral(gram_eigenvalues(c), quad).0
}

/// `T` and `∂T/∂C`. As a spectral function of `G = CᵀC`, `∂T/∂G = Σ_k (∂T/∂m_k) v_k v_kᵀ`
/// and `∂T/∂C = 2 C ∂T/∂G`.
pub(crate) fn steering_with_gradient(
    c: &Matrix3<f64>,
    quad: &QuadratureSpec,
) -> (f64, Matrix3<f64>) {
    let pairs = gram_eigenpairs(c);
    let (t, d) = steering_integral([pairs[0].0, pairs[1].0, pairs[2].0], quad);
    let mut dg = Matrix3::zeros();
    for k in 0..3 {
        if d[k].is_finite() {
            dg += pairs[k].1 * pairs[k].1.transpose() * d[k];
        }
    }
    (t, 2.0 * c * dg)
}

/// CHSH marker and its gradient `2 C (v1 v1ᵀ + v2 v2ᵀ)`.
pub(crate) fn chsh_with_gradient(c: &Matrix3<f64>) -> (f64, Matrix3<f64>) {
    let pairs = gram_eigenpairs(c);
    let proj = pairs[0].1 * pairs[0].1.transpose() + pairs[1].1 * pairs[1].1.transpose();
    (pairs[0].0 + pairs[1].0, 2.0 * c * proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_singlet() {
        let q = QuadratureSpec::default();
        assert_eq!(steering_marker(&Matrix3::zeros(), &q), 0.0);
        let t = steering_marker(&(-Matrix3::identity()), &q);
        assert!((t / (4.0 * PI) - 1.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn rank_one_is_exactly_two_pi() {
        let q = QuadratureSpec::default();
        let t = steering_marker(&Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0)), &q);
        assert!((t / (2.0 * PI) - 1.0).abs() < 1e-12, "{t}");
        // orientation of the rank-one axis does not matter
        let t2 = steering_marker(&Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, -1.0)), &q);
        assert!((t2 / (2.0 * PI) - 1.0).abs() < 1e-12, "{t2}");
    }

    #[test]
    fn rank_two_disk() {
        // mean of sin θ over the sphere is π/4
        let t = steering_marker(
            &Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)),
            &QuadratureSpec::default(),
        );
        assert!((t / (PI * PI) - 1.0).abs() < 1e-10, "{t}");
    }

    #[test]
    fn elliptic_values() {
        let (k, e) = elliptic_ke(0.0);
        assert_eq!((k, e), (0.5 * PI, 0.5 * PI));
        // K(1/2) = Γ(1/4)² / (4 sqrt(π)), Legendre's relation gives E(1/2)
        let k_half = 1.854_074_677_301_372;
        let (k, e) = elliptic_ke(0.5);
        assert!((k - k_half).abs() < 1e-14);
        assert!((2.0 * e * k - k * k - 0.5 * PI).abs() < 1e-13);
    }

    #[test]
    fn ring_derivatives() {
        let (r, ra, rb) = ring(0.5, 0.5);
        let expected = PI / (2.0 * 0.5f64.sqrt());
        assert!((r - 2.0 * PI * 0.5f64.sqrt()).abs() < 1e-14);
        assert!((ra - expected).abs() < 1e-14 && (rb - expected).abs() < 1e-14);
        for (a, b) in [(1.0, 0.3), (0.7, 0.69999), (2.0, 1e-3)] {
            let (_, ra, rb) = ring(a, b);
            let h = 1e-6;
            let fa = (ring(a + h, b).0 - ring(a - h, b).0) / (2.0 * h);
            let fb = (ring(a, b + h).0 - ring(a, (b - h).max(0.0)).0) / (2.0 * h);
            assert!((ra - fa).abs() < 1e-6, "{a} {b}: {ra} vs {fa}");
            if b > h {
                assert!(
                    (rb - fb).abs() < 1e-5 * rb.abs().max(1.0),
                    "{a} {b}: {rb} vs {fb}"
                );
            }
        }
    }

    #[test]
    fn order_validation() {
        assert!(QuadratureSpec::new(3).is_err());
        assert!(QuadratureSpec::new(4).is_ok());
    }
}
