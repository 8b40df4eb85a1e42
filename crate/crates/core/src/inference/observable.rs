use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fano::{
    assemble_from_vector, coefficient_operators, hermitian_min_eigenpair, partial_transpose_matrix,
    CoefficientVector, Side, C64,
};
use crate::observables::{
    chsh_marker, chsh_with_gradient, discord_at_axis, discord_core, magic_of_vector,
    steering_marker, steering_with_gradient, DiscordOptions, QuadratureSpec, BELL_THRESHOLD,
    DISCORD_THRESHOLD, ENTANGLEMENT_THRESHOLD, MAGIC_THRESHOLD, STEERING_THRESHOLD,
};

/// Step of the central finite differences used when no analytic gradient exists.
pub const FD_STEP: f64 = 1e-6;
const DISCORD_FD_STEP: f64 = 1e-6;
/// Lattice seeds refined per discord evaluation inside profiles.
pub const PROFILE_REFINED_SEEDS: usize = 4;

/// A scalar function of the 15 coefficients that can be profiled.
pub trait Observable: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, x: &CoefficientVector) -> Result<f64>;

    fn value_and_gradient(&self, x: &CoefficientVector) -> Result<(f64, CoefficientVector)> {
        let v = self.value(x)?;
        let g = finite_difference_gradient(|y| self.value(y), x, FD_STEP)?;
        Ok((v, g))
    }

    /// Range the observable can take on physical states.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Whether profiling must stay on positive semidefinite states.
    fn requires_physical(&self) -> bool {
        false
    }

    /// Threshold whose exclusion significance is reported, if any.
    fn threshold(&self) -> Option<f64> {
        None
    }
}

/// Central differences, switching to one-sided steps at the faces of `[-1, 1]^15`.
pub fn finite_difference_gradient<F>(
    f: F,
    x: &CoefficientVector,
    h: f64,
) -> Result<CoefficientVector>
where
    F: Fn(&CoefficientVector) -> Result<f64>,
{
    let mut g = CoefficientVector::zeros();
    for k in 0..15 {
        let (lo, hi) = ((x[k] - h).max(-1.0), (x[k] + h).min(1.0));
        let mut a = *x;
        let mut b = *x;
        a[k] = lo;
        b[k] = hi;
        g[k] = (f(&b)? - f(&a)?) / (hi - lo);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    DiscordTop,
    DiscordAntitop,
    DiscordDifference,
    Entanglement,
    Steering,
    Chsh,
    Magic,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 7] = [
        ObservableKind::DiscordTop,
        ObservableKind::DiscordAntitop,
        ObservableKind::DiscordDifference,
        ObservableKind::Entanglement,
        ObservableKind::Steering,
        ObservableKind::Chsh,
        ObservableKind::Magic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::DiscordTop => "discord_top",
            ObservableKind::DiscordAntitop => "discord_antitop",
            ObservableKind::DiscordDifference => "discord_difference",
            ObservableKind::Entanglement => "entanglement",
            ObservableKind::Steering => "steering",
            ObservableKind::Chsh => "chsh",
            ObservableKind::Magic => "magic",
        }
    }

    /// Accepts the canonical names plus a few short aliases.
    pub fn from_name(name: &str) -> Option<Self> {
        let k = match name.trim().to_ascii_lowercase().as_str() {
            "discord_top" | "discord" | "d_t" => ObservableKind::DiscordTop,
            "discord_antitop" | "d_tbar" => ObservableKind::DiscordAntitop,
            "discord_difference" | "discord_diff" => ObservableKind::DiscordDifference,
            "entanglement" | "delta_e" => ObservableKind::Entanglement,
            "steering" => ObservableKind::Steering,
            "chsh" | "bell" => ObservableKind::Chsh,
            "magic" => ObservableKind::Magic,
            _ => return None,
        };
        Some(k)
    }

    pub fn threshold(self) -> Option<f64> {
        match self {
            ObservableKind::DiscordTop | ObservableKind::DiscordAntitop => Some(DISCORD_THRESHOLD),
            ObservableKind::DiscordDifference => None,
            ObservableKind::Entanglement => Some(ENTANGLEMENT_THRESHOLD),
            ObservableKind::Steering => Some(STEERING_THRESHOLD),
            ObservableKind::Chsh => Some(BELL_THRESHOLD),
            ObservableKind::Magic => Some(MAGIC_THRESHOLD),
        }
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            // two-qubit discord is at most one bit
            ObservableKind::DiscordTop | ObservableKind::DiscordAntitop => (0.0, 1.0),
            ObservableKind::DiscordDifference => (-1.0, 1.0),
            ObservableKind::Magic => (0.0, f64::INFINITY),
            ObservableKind::Entanglement => (0.0, 3.0),
            ObservableKind::Steering => (0.0, 4.0 * PI),
            ObservableKind::Chsh => (0.0, 2.0),
        }
    }

    pub fn requires_physical(self) -> bool {
        matches!(
            self,
            ObservableKind::DiscordTop
                | ObservableKind::DiscordAntitop
                | ObservableKind::DiscordDifference
        )
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the built-in correlation markers as a function of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardObservable {
    kind: ObservableKind,
    discord: DiscordOptions,
    quadrature: QuadratureSpec,
}

impl StandardObservable {
    /// Default settings. Discord evaluations refine only the most promising lattice
    /// seeds, which keeps the many evaluations of a profile scan affordable.
    pub fn new(kind: ObservableKind) -> Self {
        StandardObservable {
            kind,
            discord: DiscordOptions {
                refined_seeds: PROFILE_REFINED_SEEDS,
                ..DiscordOptions::default()
            },
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn with_options(
        kind: ObservableKind,
        discord: DiscordOptions,
        quadrature: QuadratureSpec,
    ) -> Self {
        StandardObservable {
            kind,
            discord,
            quadrature,
        }
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn discord_options(&self) -> DiscordOptions {
        self.discord
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    fn discord_value_and_gradient(
        &self,
        x: &CoefficientVector,
        side: Side,
    ) -> Result<(f64, CoefficientVector)> {
        let core = discord_core(x, side, &self.discord);
        let g = finite_difference_gradient(
            |y| Ok(discord_at_axis(y, side, &core.argmin)),
            x,
            DISCORD_FD_STEP,
        )?;
        Ok((core.value, g))
    }
}

fn correlation(x: &CoefficientVector) -> Matrix3<f64> {
    Matrix3::from_row_slice(&x.as_slice()[6..15])
}

fn correlation_gradient(g: &Matrix3<f64>) -> CoefficientVector {
    let mut out = CoefficientVector::zeros();
    for r in 0..3 {
        for c in 0..3 {
            out[6 + 3 * r + c] = g[(r, c)];
        }
    }
    out
}

/// `λ_min` of `M = ¼(I + Σ x_k B_k)` and its gradient `¼ v† B_k v`.
pub(crate) fn min_eigenvalue_with_gradient(
    m: &Matrix4<C64>,
    operators: &[Matrix4<C64>; 15],
) -> (f64, CoefficientVector) {
    let (l, v): (f64, Vector4<C64>) = hermitian_min_eigenpair(m);
    let g = CoefficientVector::from_fn(|k, _| 0.25 * (v.adjoint() * operators[k] * v)[(0, 0)].re);
    (l, g)
}

fn transposed_operators() -> &'static [Matrix4<C64>; 15] {
    use std::sync::OnceLock;
    static OPS: OnceLock<[Matrix4<C64>; 15]> = OnceLock::new();
    OPS.get_or_init(|| {
        let ops = coefficient_operators();
        std::array::from_fn(|k| partial_transpose_matrix(&ops[k], Side::Antitop))
    })
}

impl Observable for StandardObservable {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn value(&self, x: &CoefficientVector) -> Result<f64> {
        let v = match self.kind {
            ObservableKind::DiscordTop => discord_core(x, Side::Top, &self.discord).value,
            ObservableKind::DiscordAntitop => discord_core(x, Side::Antitop, &self.discord).value,
            ObservableKind::DiscordDifference => {
                discord_core(x, Side::Top, &self.discord).value
                    - discord_core(x, Side::Antitop, &self.discord).value
            }
            ObservableKind::Entanglement => {
                let pt = partial_transpose_matrix(&assemble_from_vector(x), Side::Antitop);
                1.0 - 4.0 * hermitian_min_eigenpair(&pt).0
            }
            ObservableKind::Steering => steering_marker(&correlation(x), &self.quadrature),
            ObservableKind::Chsh => chsh_marker(&correlation(x)),
            ObservableKind::Magic => magic_of_vector(x),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("{} evaluated to {v}", self.name())))
        }
    }

    fn value_and_gradient(&self, x: &CoefficientVector) -> Result<(f64, CoefficientVector)> {
        match self.kind {
            ObservableKind::DiscordTop => self.discord_value_and_gradient(x, Side::Top),
            ObservableKind::DiscordAntitop => self.discord_value_and_gradient(x, Side::Antitop),
            ObservableKind::DiscordDifference => {
                let (a, ga) = self.discord_value_and_gradient(x, Side::Top)?;
                let (b, gb) = self.discord_value_and_gradient(x, Side::Antitop)?;
                Ok((a - b, ga - gb))
            }
            ObservableKind::Entanglement => {
                let pt = partial_transpose_matrix(&assemble_from_vector(x), Side::Antitop);
                let (l, g) = min_eigenvalue_with_gradient(&pt, transposed_operators());
                Ok((1.0 - 4.0 * l, -4.0 * g))
            }
            ObservableKind::Magic => {
                let (mut num, mut den) = (1.0, 1.0);
                for v in x.iter() {
                    let v2 = v * v;
                    num += v2 * v2;
                    den += v2;
                }
                let ln2 = std::f64::consts::LN_2;
                let g = x.map(|v| -(4.0 * v * v * v / num - 2.0 * v / den) / ln2);
                Ok((-(num / den).log2(), g))
            }
            ObservableKind::Steering => {
                let (v, g) = steering_with_gradient(&correlation(x), &self.quadrature);
                Ok((v, correlation_gradient(&g)))
            }
            ObservableKind::Chsh => {
                let (v, g) = chsh_with_gradient(&correlation(x));
                Ok((v, correlation_gradient(&g)))
            }
        }
    }

    fn domain(&self) -> (f64, f64) {
        self.kind.domain()
    }

    fn requires_physical(&self) -> bool {
        self.kind.requires_physical()
    }

    fn threshold(&self) -> Option<f64> {
        self.kind.threshold()
    }
}

/// `g(x) = aᵀx + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservable {
    name: String,
    coefficients: CoefficientVector,
    offset: f64,
    threshold: Option<f64>,
}

impl LinearObservable {
    pub fn new(name: impl Into<String>, coefficients: CoefficientVector, offset: f64) -> Self {
        LinearObservable {
            name: name.into(),
            coefficients,
            offset,
            threshold: None,
        }
    }

    /// The single coefficient `x_k`.
    pub fn component(k: usize) -> Self {
        let mut a = CoefficientVector::zeros();
        a[k] = 1.0;
        LinearObservable::new(format!("x{k}"), a, 0.0)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }
}

impl Observable for LinearObservable {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &CoefficientVector) -> Result<f64> {
        Ok(self.coefficients.dot(x) + self.offset)
    }

    fn value_and_gradient(&self, x: &CoefficientVector) -> Result<(f64, CoefficientVector)> {
        Ok((self.value(x)?, self.coefficients))
    }

    fn threshold(&self) -> Option<f64> {
        self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CoefficientVector {
        let mut x = CoefficientVector::zeros();
        x[0] = 0.05;
        x[4] = -0.04;
        x[6] = -0.45;
        x[7] = 0.05;
        x[10] = -0.4;
        x[14] = -0.3;
        x[12] = 0.02;
        x
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let x = sample();
        for kind in [
            ObservableKind::Entanglement,
            ObservableKind::Magic,
            ObservableKind::Steering,
            ObservableKind::Chsh,
        ] {
            let obs = StandardObservable::new(kind);
            let (_, g) = obs.value_and_gradient(&x).unwrap();
            let fd = finite_difference_gradient(|y| obs.value(y), &x, 1e-6).unwrap();
            assert!((g - fd).amax() < 1e-6, "{kind}: {g} vs {fd}");
        }
    }

    #[test]
    fn discord_gradient_is_consistent() {
        let x = sample();
        let obs = StandardObservable::new(ObservableKind::DiscordTop);
        let (v, g) = obs.value_and_gradient(&x).unwrap();
        let mut d = CoefficientVector::zeros();
        d[6] = 1.0;
        d[14] = 0.5;
        let h = 1e-4;
        let up = obs.value(&(x + d * h)).unwrap();
        let dn = obs.value(&(x - d * h)).unwrap();
        assert!(((up - dn) / (2.0 * h) - g.dot(&d)).abs() < 1e-5);
        assert!(v > 0.0);
    }

    #[test]
    fn names_round_trip() {
        for k in ObservableKind::ALL {
            assert_eq!(ObservableKind::from_name(k.name()), Some(k));
        }
        assert_eq!(ObservableKind::from_name("nope"), None);
    }

    #[test]
    fn one_sided_steps_at_faces() {
        let mut x = CoefficientVector::zeros();
        x[2] = 1.0;
        let obs = LinearObservable::component(2);
        let g = finite_difference_gradient(|y| obs.value(y), &x, 1e-6).unwrap();
        assert!((g[2] - 1.0).abs() < 1e-9);
    }
}
