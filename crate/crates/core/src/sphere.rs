//! Point sets and quadrature rules on the unit sphere.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Golden ratio.
const PHI: f64 = 1.618_033_988_749_894_9;
/// Plastic number, the 2-D analogue of the golden ratio.
const PLASTIC: f64 = 1.324_717_957_244_746;

/// Unit vector from polar angle `theta` (from axis 3) and azimuth `phi`.
#[inline]
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// `(theta, phi)` of a non-zero vector.
pub fn angles(u: &Vector3<f64>) -> (f64, f64) {
    let r = u.norm();
    ((u.z / r).clamp(-1.0, 1.0).acos(), u.y.atan2(u.x))
}

/// Fibonacci lattice of `n` points on the upper hemisphere (`z > 0`).
///
/// Equal-area in `z`, golden-angle spaced in azimuth.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Vector3<f64>> {
    let golden_angle = 2.0 * PI * (1.0 - 1.0 / PHI);
    (0..n)
        .map(|k| {
            let z = 1.0 - (k as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * k as f64;
            Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// The first `n` points of an infinite low-discrepancy sequence on the upper hemisphere.
///
/// Point `k` does not depend on `n`, so the lattice for `n` is a prefix of the lattice
/// for any `m > n`. Uses the plastic-number Kronecker sequence mapped by the
/// equal-area `(z, phi)` parameterization.
pub fn nested_hemisphere(n: usize) -> Vec<Vector3<f64>> {
    let a1 = 1.0 / PLASTIC;
    let a2 = 1.0 / (PLASTIC * PLASTIC);
    (0..n)
        .map(|k| {
            let kf = k as f64;
            let s = (0.5 + a1 * kf).fract();
            let t = (0.5 + a2 * kf).fract();
            let z = 1.0 - s;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * PI * t;
            Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [4, 7, 32, 64] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            // ∫ x^{2n-2} over [-1,1] = 2/(2n-1)
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn lattices_are_unit_and_upper() {
        for u in fibonacci_hemisphere(64)
            .iter()
            .chain(nested_hemisphere(1000).iter())
        {
            assert!((u.norm() - 1.0).abs() < 1e-14);
            assert!(u.z >= 0.0);
        }
    }

    #[test]
    fn nested_lattice_is_prefix_stable() {
        let a = nested_hemisphere(500);
        let b = nested_hemisphere(2000);
        assert_eq!(&a[..], &b[..500]);
    }

    #[test]
    fn nested_lattice_covers_hemisphere() {
        // every probe direction lies within a small angle of some lattice point
        let pts = nested_hemisphere(20_000);
        for probe in fibonacci_hemisphere(200) {
            let best = pts.iter().map(|p| p.dot(&probe).abs()).fold(0.0, f64::max);
            assert!(best.acos() < 0.03, "coverage gap {}", best.acos());
        }
    }

    #[test]
    fn angles_roundtrip() {
        let u = direction(1.1, -2.3);
        let (t, p) = angles(&u);
        assert!((direction(t, p) - u).norm() < 1e-14);
    }
}
