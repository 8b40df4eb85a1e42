//! Agreement checks between the production algorithms and the brute-force oracles.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector3;
use rayon::prelude::*;
use spincorr_core::oracles::{analytic_state, grid_discord, mc_steering, StateName};
use spincorr_core::{
    discord, magic, steering_marker, DiscordOptions, FanoCoefficients, QuadratureSpec, Side,
    SpinBasis,
};

/// Allowed gap between optimized and grid discord.
pub const DISCORD_TOLERANCE: f64 = 5e-5;
pub const DISCORD_GRID_POINTS: usize = 20_000;
/// Allowed distance of the quadrature from the Monte Carlo mean, in standard errors.
pub const STEERING_SIGMAS: f64 = 5.0;
pub const MAGIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub name: &'static str,
    pub cases: usize,
    /// Largest discrepancy, in the unit of `limit`.
    pub worst: f64,
    pub limit: f64,
    /// Description of the case with the largest discrepancy.
    pub worst_case: String,
}

impl Agreement {
    pub fn passed(&self) -> bool {
        self.worst < self.limit
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} cases, worst {:.3e} (limit {:.1e}) at {} {}",
            self.name,
            self.cases,
            self.worst,
            self.limit,
            self.worst_case,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn worst_of(
    name: &'static str,
    limit: f64,
    items: Vec<spincorr_core::Result<(f64, String)>>,
) -> spincorr_core::Result<Agreement> {
    let mut out = Agreement {
        name,
        cases: items.len(),
        worst: 0.0,
        limit,
        worst_case: "-".into(),
    };
    for item in items {
        let (d, case) = item?;
        if !(d <= out.worst) {
            out.worst = d;
            out.worst_case = case;
        }
    }
    Ok(out)
}

/// `|discord − grid_discord|` for both sides of `states` random physical states.
pub fn discord_agreement(
    states: usize,
    seed: u64,
    opts: &DiscordOptions,
) -> spincorr_core::Result<Agreement> {
    let items = (0..states as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let f = analytic_state(StateName::RandomPhysical(s))?.fano;
            let mut worst = (0.0, String::new());
            for side in [Side::Top, Side::Antitop] {
                let d = discord(&f, side, opts)?.value;
                let g = grid_discord(&f, side, DISCORD_GRID_POINTS)?;
                let gap = (d - g).abs();
                if gap >= worst.0 {
                    worst = (
                        gap,
                        format!("state {s} ({side:?}: optimizer {d:.9}, grid {g:.9})"),
                    );
                }
            }
            Ok(worst)
        })
        .collect();
    worst_of("discord vs grid", DISCORD_TOLERANCE, items)
}

/// Quadrature steering against Monte Carlo, in standard errors, on the correlation
/// matrices of `states` random physical states.
pub fn steering_agreement(
    states: usize,
    samples: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> spincorr_core::Result<Agreement> {
    let items = (0..states as u64)
        .map(|i| {
            let s = seed.wrapping_add(i);
            let c = *analytic_state(StateName::RandomPhysical(s))?.fano.c();
            let t = steering_marker(&c, quad);
            let mc = mc_steering(&c, samples, s)?;
            let z = (t - mc.estimate).abs() / mc.std_error;
            Ok((
                z,
                format!(
                    "state {s} (quadrature {t:.9}, monte carlo {:.9} ± {:.1e})",
                    mc.estimate, mc.std_error
                ),
            ))
        })
        .collect();
    worst_of("steering vs monte carlo", STEERING_SIGMAS, items)
}

/// Magic of stabilizer states (zero) and of a T-type state times a stabilizer state.
pub fn magic_agreement() -> spincorr_core::Result<Agreement> {
    let mut cases: Vec<(String, FanoCoefficients, f64)> = Vec::new();
    let product = analytic_state(StateName::Product(Vector3::z(), -Vector3::x()))?.fano;
    cases.push(("stabilizer product".into(), product, 0.0));
    for name in [
        StateName::BellPhiPlus,
        StateName::BellPhiMinus,
        StateName::BellPsiPlus,
        StateName::BellPsiMinus,
    ] {
        cases.push((format!("{name:?}"), analytic_state(name)?.fano, 0.0));
    }
    let t = Vector3::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0);
    let z = Vector3::z();
    let t_state = FanoCoefficients::new(t, z, t * z.transpose(), SpinBasis::beam())?;
    cases.push(("T state x |0>".into(), t_state, (4.0f64 / 3.0).log2()));
    let items = cases
        .into_iter()
        .map(|(name, f, expected)| {
            let m = magic(&f);
            Ok((
                (m - expected).abs(),
                format!("{name} (magic {m:.15}, expected {expected:.15})"),
            ))
        })
        .collect();
    worst_of("magic fixtures", MAGIC_TOLERANCE, items)
}
