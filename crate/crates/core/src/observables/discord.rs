//! Quantum discord under projective spin measurements.
//!
//! For the top quark, the antiquark is measured along `û` and
//!
//! ```text
//! D_t = S(rho_tbar) − S(rho) + min_û Σ_± p_± S(rho_t|±û)
//! ```
//!
//! In the coefficient parameterization the post-measurement quantities are
//! closed-form: `p_± = (1 ± Pbar·û)/2` and the conditional top Bloch vector is
//! `(P ± C û)/(1 ± Pbar·û)`. The antiquark discord uses the exchanged state.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::fano::{
    self, bloch_entropy, entropy_clamped, hermitian_eigenvalues, validate_physicality,
    CoefficientVector, DensityMatrix4, FanoCoefficients, Side, SingleQubitState, C64,
};
use crate::optim::nelder_mead;
use crate::sphere::{angles, direction, fibonacci_hemisphere};

/// Below this probability a measurement outcome is treated as impossible.
pub const DEGENERATE_PROBABILITY: f64 = 1e-14;

/// Default physicality tolerance for quantities that need a positive density matrix.
pub const DEFAULT_PHYSICALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostMeasurement {
    pub probability: f64,
    /// Conditional top-quark state; maximally mixed when `degenerate`.
    pub state: SingleQubitState,
    pub degenerate: bool,
}

/// Projective measurement of the antiquark spin along `u`, conditional top state.
///
/// Computed literally with the projector `Π = (I ± u·σ)/2`:
/// `p = Tr[(I⊗Π) rho (I⊗Π)]` and `rho_t = Tr_tbar[(I⊗Π) rho (I⊗Π)] / p`.
pub fn post_measurement_state(
    rho: &DensityMatrix4,
    u: &Vector3<f64>,
    outcome: Outcome,
) -> Result<PostMeasurement> {
    if (u.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "measurement direction must be a unit vector, |u| = {}",
            u.norm()
        )));
    }
    let s = fano::paulis();
    let sign = C64::new(outcome.sign(), 0.0);
    let mut proj = Matrix2::<C64>::identity();
    for i in 0..3 {
        proj += s[i] * C64::new(u[i], 0.0) * sign;
    }
    proj *= C64::new(0.5, 0.0);
    let k = Matrix4::from_fn(|r, c| {
        if r / 2 == c / 2 {
            proj[(r % 2, c % 2)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let m = k * rho.matrix() * k;
    let probability = m.trace().re;
    if probability < DEGENERATE_PROBABILITY {
        return Ok(PostMeasurement {
            probability: probability.max(0.0),
            state: SingleQubitState::maximally_mixed(),
            degenerate: true,
        });
    }
    let reduced = Matrix2::from_fn(|a, a2| m[(2 * a, 2 * a2)] + m[(2 * a + 1, 2 * a2 + 1)]);
    let bloch = Vector3::from_fn(|i, _| {
        let t = reduced * s[i];
        (t[(0, 0)] + t[(1, 1)]).re / probability
    });
    Ok(PostMeasurement {
        probability,
        state: SingleQubitState::new_unchecked(bloch),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscordOptions {
    /// Number of Fibonacci-lattice seeds on the hemisphere (`û` and `−û` are the same measurement).
    pub seeds: usize,
    /// How many seeds, ranked by objective value, are refined locally. Values
    /// `>= seeds` refine every seed.
    pub refined_seeds: usize,
    /// Simplex size (radians, max-norm) at which local refinement stops.
    pub xtol: f64,
    pub max_evals_per_start: usize,
    pub physicality_tol: f64,
}

impl Default for DiscordOptions {
    fn default() -> Self {
        DiscordOptions {
            seeds: 64,
            refined_seeds: 64,
            xtol: 1e-9,
            max_evals_per_start: 4000,
            physicality_tol: DEFAULT_PHYSICALITY_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscordResult {
    /// Bits; non-negative.
    pub value: f64,
    pub side: Side,
    /// Minimizing measurement direction (sign-canonicalized: first non-zero component positive).
    pub argmin_direction: Vector3<f64>,
    pub optimizer_evals: usize,
}

/// Average conditional entropy `Σ_± p_± S(rho_cond,±)` as a function of the measurement axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConditionalEntropy {
    /// Polarization of the unmeasured (conditioned) qubit.
    cond: Vector3<f64>,
    /// Polarization of the measured qubit.
    meas: Vector3<f64>,
    /// Correlation matrix oriented as (conditioned, measured).
    corr: Matrix3<f64>,
}

impl ConditionalEntropy {
    pub(crate) fn new(x: &CoefficientVector, side: Side) -> Self {
        let p = Vector3::new(x[0], x[1], x[2]);
        let pbar = Vector3::new(x[3], x[4], x[5]);
        let c = Matrix3::from_row_slice(&x.as_slice()[6..15]);
        match side {
            // discord of the top: measure the antiquark
            Side::Top => ConditionalEntropy {
                cond: p,
                meas: pbar,
                corr: c,
            },
            Side::Antitop => ConditionalEntropy {
                cond: pbar,
                meas: p,
                corr: c.transpose(),
            },
        }
    }

    #[inline]
    pub(crate) fn at(&self, u: &Vector3<f64>) -> f64 {
        let q = self.meas.dot(u);
        let cu = self.corr * u;
        let mut total = 0.0;
        for s in [1.0, -1.0] {
            let denom = 1.0 + s * q;
            let p = 0.5 * denom;
            if p < DEGENERATE_PROBABILITY {
                continue;
            }
            let r = (self.cond + cu * s).norm() / denom;
            total += p * bloch_entropy(r);
        }
        total
    }

    fn minimize_from(
        &self,
        seed: &Vector3<f64>,
        step: f64,
        opts: &DiscordOptions,
    ) -> (f64, Vector3<f64>, usize) {
        let (t0, p0) = angles(seed);
        let out = nelder_mead(
            |a: &[f64; 2]| self.at(&direction(a[0], a[1])),
            [t0, p0],
            step,
            opts.xtol,
            opts.max_evals_per_start,
        );
        (
            out.f,
            canonical_direction(&direction(out.x[0], out.x[1])),
            out.evals,
        )
    }
}

/// Unclamped discord with entropies evaluated on a clamped spectrum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DiscordCore {
    pub value: f64,
    pub argmin: Vector3<f64>,
    pub evals: usize,
}

/// `S(rho_measured) − S(rho)` for the given side.
fn entropy_offset(x: &CoefficientVector, side: Side) -> f64 {
    let rho = fano::assemble_from_vector(x);
    let s_rho = entropy_clamped(&hermitian_eigenvalues(&rho));
    let meas = match side {
        Side::Top => Vector3::new(x[3], x[4], x[5]),
        Side::Antitop => Vector3::new(x[0], x[1], x[2]),
    };
    bloch_entropy(meas.norm()) - s_rho
}

/// Full multi-start minimization over the seed lattice.
pub(crate) fn discord_core(
    x: &CoefficientVector,
    side: Side,
    opts: &DiscordOptions,
) -> DiscordCore {
    let objective = ConditionalEntropy::new(x, side);
    let seeds = fibonacci_hemisphere(opts.seeds.max(1));
    let step = (2.0 * std::f64::consts::PI / seeds.len() as f64)
        .sqrt()
        .min(0.5);
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut evals = 0;
    let mut seeds = seeds;
    if opts.refined_seeds < seeds.len() {
        let mut ranked: Vec<(f64, Vector3<f64>)> =
            seeds.iter().map(|u| (objective.at(u), *u)).collect();
        evals += ranked.len();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        seeds = ranked
            .into_iter()
            .take(opts.refined_seeds.max(1))
            .map(|p| p.1)
            .collect();
    }
    for seed in &seeds {
        let (f, u, n) = objective.minimize_from(seed, step, opts);
        evals += n;
        let better = match &best {
            None => true,
            Some((bf, bu)) => f < *bf || (f == *bf && lex_less(&u, bu)),
        };
        if better {
            best = Some((f, u));
        }
    }
    let (fmin, argmin) = best.expect("at least one seed");
    DiscordCore {
        value: entropy_offset(x, side) + fmin,
        argmin,
        evals,
    }
}

/// The discord objective with the measurement axis held fixed. At the minimizing axis
/// its gradient in `x` equals the gradient of the discord (envelope theorem).
pub(crate) fn discord_at_axis(x: &CoefficientVector, side: Side, u: &Vector3<f64>) -> f64 {
    entropy_offset(x, side) + ConditionalEntropy::new(x, side).at(u)
}

fn canonical_direction(u: &Vector3<f64>) -> Vector3<f64> {
    let u = u.normalize();
    for i in 0..3 {
        if u[i].abs() > 1e-12 {
            return if u[i] < 0.0 { -u } else { u };
        }
    }
    u
}

fn lex_less(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    for i in 0..3 {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

/// Discord of one side. Requires the state to be physical within `opts.physicality_tol`.
pub fn discord(
    fano: &FanoCoefficients,
    side: Side,
    opts: &DiscordOptions,
) -> Result<DiscordResult> {
    let report = validate_physicality(fano, opts.physicality_tol);
    if !report.is_physical {
        return Err(Error::Unphysical(Box::new(report)));
    }
    let core = discord_core(&fano.to_vector(), side, opts);
    let value = clamp_discord(core.value)?;
    Ok(DiscordResult {
        value,
        side,
        argmin_direction: core.argmin,
        optimizer_evals: core.evals,
    })
}

fn clamp_discord(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-9 {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("discord evaluated to {v:e} < 0")))
    }
}

/// `D_t − D_tbar` with identical optimizer settings on both sides.
pub fn discord_difference(fano: &FanoCoefficients, opts: &DiscordOptions) -> Result<f64> {
    let top = discord(fano, Side::Top, opts)?;
    let anti = discord(fano, Side::Antitop, opts)?;
    Ok(top.value - anti.value)
}
