//! Brute-force references and exact state generators.
//!
//! Everything here is deliberately computed by a different route than the main
//! algorithms: projector algebra instead of closed-form conditional states, Monte
//! Carlo instead of quadrature, random search instead of penalty continuation.
//!
//! Randomness is `ChaCha8Rng` seeded with `seed_from_u64`; parallel work is split into
//! fixed chunks with one stream per chunk, so results do not depend on the thread count.

mod dense;
mod grid;
mod monte_carlo;

use nalgebra::{Complex, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fano::{extract_fano, DensityMatrix4, FanoCoefficients, SpinBasis, C64};

pub use dense::dense_profile_oracle;
pub use grid::grid_discord;
pub use monte_carlo::{mc_steering, McEstimate};

/// Catalogue of generated states with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateName {
    MaximallyMixed,
    BellPhiPlus,
    BellPhiMinus,
    BellPsiPlus,
    BellPsiMinus,
    /// `p |Ψ−⟩⟨Ψ−| + (1 − p) I/4`.
    Werner(f64),
    Product(Vector3<f64>, Vector3<f64>),
    /// Ginibre-distributed mixed state `G G† / tr(G G†)`.
    RandomPhysical(u64),
    /// Mixture of 1 to 8 product states with Bloch vectors uniform in the ball.
    RandomSeparable(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedState {
    pub name: StateName,
    pub fano: FanoCoefficients,
}

fn correlation_only(c: Matrix3<f64>) -> Result<FanoCoefficients> {
    FanoCoefficients::new(Vector3::zeros(), Vector3::zeros(), c, SpinBasis::beam())
}

pub fn analytic_state(name: StateName) -> Result<NamedState> {
    let diag = |a: f64, b: f64, c: f64| Matrix3::from_diagonal(&Vector3::new(a, b, c));
    let fano = match name {
        StateName::MaximallyMixed => FanoCoefficients::maximally_mixed(SpinBasis::beam()),
        StateName::BellPhiPlus => correlation_only(diag(1.0, -1.0, 1.0))?,
        StateName::BellPhiMinus => correlation_only(diag(-1.0, 1.0, 1.0))?,
        StateName::BellPsiPlus => correlation_only(diag(1.0, 1.0, -1.0))?,
        StateName::BellPsiMinus => correlation_only(-Matrix3::identity())?,
        StateName::Werner(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!(
                    "Werner weight {p} outside [0, 1]"
                )));
            }
            correlation_only(-p * Matrix3::identity())?
        }
        StateName::Product(a, b) => {
            if a.norm() > 1.0 + 1e-12 || b.norm() > 1.0 + 1e-12 {
                return Err(Error::validation(
                    "product-state Bloch vectors must have length <= 1",
                ));
            }
            FanoCoefficients::new(a, b, a * b.transpose(), SpinBasis::beam())?
        }
        StateName::RandomPhysical(seed) => random_physical(seed)?,
        StateName::RandomSeparable(seed) => random_separable(seed)?,
    };
    Ok(NamedState { name, fano })
}

fn random_physical(seed: u64) -> Result<FanoCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix4::<C64>::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re, im)
    });
    let m = g * g.adjoint();
    let tr = m.trace().re;
    let m = m / Complex::new(tr, 0.0);
    // exact Hermitian part, removing rounding asymmetry from the product
    let m = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    extract_fano(&DensityMatrix4::from_matrix(m)?, SpinBasis::beam())
}

fn uniform_in_ball(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let r: f64 = rng.random::<f64>().cbrt();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * s * phi.cos(), r * s * phi.sin(), r * z)
}

fn random_separable(seed: u64) -> Result<FanoCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=8usize);
    let parts: Vec<(f64, Vector3<f64>, Vector3<f64>)> = (0..k)
        .map(|_| {
            let w: f64 = rng.random::<f64>() + 1e-3;
            (w, uniform_in_ball(&mut rng), uniform_in_ball(&mut rng))
        })
        .collect();
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let mut p = Vector3::zeros();
    let mut pbar = Vector3::zeros();
    let mut c = Matrix3::zeros();
    for (w, a, b) in &parts {
        let w = w / total;
        p += a * w;
        pbar += b * w;
        c += a * b.transpose() * w;
    }
    FanoCoefficients::new(p, pbar, c, SpinBasis::beam())
}
