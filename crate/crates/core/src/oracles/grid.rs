use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fano::{assemble_density, validate_physicality, FanoCoefficients, Side, C64};
use crate::sphere::nested_hemisphere;

const CHUNK: usize = 1024;

fn xlog2x(l: f64) -> f64 {
    if l <= 0.0 {
        0.0
    } else {
        -l * l.log2()
    }
}

fn entropy2(m: &Matrix2<C64>) -> f64 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)].norm();
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    xlog2x(0.5 * (tr + disc)) + xlog2x(0.5 * (tr - disc))
}

fn entropy4(m: &Matrix4<C64>) -> f64 {
    SymmetricEigen::new(*m)
        .eigenvalues
        .iter()
        .map(|&l| xlog2x(l.max(0.0)))
        .sum()
}

/// Partial trace over `traced`, entry by entry.
fn trace_out(m: &Matrix4<C64>, traced: Side) -> Matrix2<C64> {
    Matrix2::from_fn(|a, b| match traced {
        Side::Antitop => m[(2 * a, 2 * b)] + m[(2 * a + 1, 2 * b + 1)],
        Side::Top => m[(a, b)] + m[(2 + a, 2 + b)],
    })
}

fn projector(u: &Vector3<f64>, sign: f64) -> Matrix2<C64> {
    let h = 0.5 * sign;
    Matrix2::new(
        Complex::new(0.5 + h * u.z, 0.0),
        Complex::new(h * u.x, -h * u.y),
        Complex::new(h * u.x, h * u.y),
        Complex::new(0.5 - h * u.z, 0.0),
    )
}

fn embed(p: &Matrix2<C64>, measured: Side) -> Matrix4<C64> {
    let one = Matrix2::<C64>::identity();
    let (top, anti) = match measured {
        Side::Top => (p, &one),
        Side::Antitop => (&one, p),
    };
    Matrix4::from_fn(|r, c| top[(r / 2, c / 2)] * anti[(r % 2, c % 2)])
}

/// Brute-force discord: the measurement-conditioned entropy is minimized over the
/// first `n_points` directions of a nested hemisphere lattice, with post-measurement
/// states built by explicit projection and partial trace.
///
/// The lattice for `n` is a prefix of the lattice for any larger `n`, so the result
/// can only decrease as `n` grows. It is an upper bound on the exact discord.
pub fn grid_discord(fano: &FanoCoefficients, side: Side, n_points: usize) -> Result<f64> {
    if n_points < 100 {
        return Err(Error::validation(format!(
            "grid_discord needs at least 100 points, got {n_points}"
        )));
    }
    let report = validate_physicality(fano, 1e-6);
    if !report.is_physical {
        return Err(Error::Unphysical(Box::new(report)));
    }
    let rho = *assemble_density(fano).matrix();
    // D of the top measures the antitop, and vice versa
    let measured = side.other();
    let kept = side;
    let s_measured = entropy2(&trace_out(&rho, kept));
    let s_joint = entropy4(&rho);

    let dirs = nested_hemisphere(n_points);
    let conditional = |u: &Vector3<f64>| -> f64 {
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let proj = embed(&projector(u, sign), measured);
            let post = proj * rho * proj;
            let p = post.trace().re;
            if p <= 1e-14 {
                continue;
            }
            let cond = trace_out(&post, measured) / Complex::new(p, 0.0);
            total += p * entropy2(&cond);
        }
        total
    };
    let best = dirs
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(&conditional).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);

    let value = s_measured - s_joint + best;
    if value >= 0.0 {
        Ok(value)
    } else if value >= -1e-9 {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!(
            "grid discord evaluated to {value:e} < 0"
        )))
    }
}
