use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fano::CoefficientVector;

use super::likelihood::MeasurementRecord;
use super::observable::Observable;
use super::profile::{ProfileOptions, ProfilePoint, Profiler};

/// Grid of target values for a profile scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `points` values centred on the best fit. Each side starts at `sigmas` linearized
    /// standard deviations and doubles until `Δχ² ≥ sigmas²` or the domain edge.
    Auto { points: usize, sigmas: f64 },
    /// Uniform grid on `[lo, hi]`, which must contain the best fit.
    Explicit { lo: f64, hi: f64, points: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            points: 201,
            sigmas: 5.0,
        }
    }
}

impl GridSpec {
    /// Parses `lo:hi:n`.
    pub fn parse_explicit(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::validation(format!("grid `{s}` is not of the form lo:hi:n"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo < hi) || points < 3 {
            return Err(Error::validation(format!(
                "grid `{s}` needs lo < hi and at least 3 points"
            )));
        }
        Ok(GridSpec::Explicit { lo, hi, points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceSide {
    /// The best fit lies above the threshold.
    Above,
    Below,
}

/// Exclusion of a threshold value, `sqrt(Δχ²)` from the profile at the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub threshold: f64,
    pub sigma: f64,
    pub side: SignificanceSide,
    /// No admissible state reaches the threshold; `sigma` is infinite.
    pub unattainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub observable: String,
    pub central: f64,
    pub ci68_low: f64,
    pub ci68_high: f64,
    /// The interval edge is a domain or attainability boundary, not a `Δχ² = 1` crossing.
    pub at_boundary_low: bool,
    pub at_boundary_high: bool,
    /// `(value, Δχ²)` pairs in ascending value, minimum shifted to zero.
    pub curve: Vec<(f64, f64)>,
    /// Absolute `-2 log L` at the unconstrained best fit.
    pub chi2_min: f64,
    pub significance: Option<Significance>,
}

impl ScanResult {
    pub fn error_low(&self) -> f64 {
        self.central - self.ci68_low
    }

    pub fn error_high(&self) -> f64 {
        self.ci68_high - self.central
    }
}

struct Side {
    /// Targets ordered outward from the central value.
    points: Vec<ProfilePoint>,
    /// The outermost requested target could not be reached.
    truncated: bool,
    /// The grid ends on a domain edge.
    ends_on_boundary: bool,
}

const MAX_DOUBLINGS: usize = 40;

fn infeasible(e: &Error) -> bool {
    matches!(e, Error::Infeasible { .. })
}

/// Outermost feasible target in `(inner, outer]` by bisection, assuming `inner` is feasible.
/// Stops early at a feasible point whose χ² reaches `enough`.
fn feasible_edge(
    profiler: &Profiler<'_>,
    inner: (f64, CoefficientVector),
    outer: f64,
    enough: f64,
) -> Result<Option<ProfilePoint>> {
    let (mut good_t, mut good_x) = inner;
    let mut good: Option<ProfilePoint> = None;
    let mut bad_t = outer;
    let resolution = 1e-4 * (outer - good_t).abs();
    for _ in 0..40 {
        if (bad_t - good_t).abs() <= resolution {
            break;
        }
        let mid = 0.5 * (good_t + bad_t);
        match profiler.profile(mid, &[good_x, profiler.central().x]) {
            Ok(p) if p.chi2 >= enough => return Ok(Some(p)),
            Ok(p) => {
                good_t = mid;
                good_x = p.x;
                good = Some(p);
            }
            Err(e) if infeasible(&e) => bad_t = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(good)
}

/// Span of one side of the automatic grid (distance from the central value) and
/// whether it ends on a boundary.
fn auto_span(profiler: &Profiler<'_>, direction: f64, sigmas: f64) -> Result<(f64, bool)> {
    let c = profiler.central();
    let (lo, hi) = profiler.observable().domain();
    let edge = if direction > 0.0 { hi } else { lo };
    let room = (edge - c.value).abs();
    if room <= 1e-12 {
        return Ok((0.0, true));
    }
    let sigma = profiler.linear_sigma();
    let mut span = if sigma > 1e-9 {
        sigmas * sigma
    } else {
        1e-3 * c.value.abs().max(1.0)
    };
    let goal = sigmas * sigmas;
    let mut last = (c.value, c.x);
    for _ in 0..MAX_DOUBLINGS {
        let hit_edge = span >= room;
        if hit_edge {
            span = room;
        }
        let t = c.value + direction * span;
        let mut starts = vec![last.1];
        starts.extend(profiler.default_starts(t));
        match profiler.profile(t, &starts) {
            Ok(p) => {
                if p.chi2 - c.chi2 >= goal {
                    return Ok((span, false));
                }
                if hit_edge {
                    return Ok((span, true));
                }
                last = (t, p.x);
            }
            Err(e) if infeasible(&e) => {
                return Ok(match feasible_edge(profiler, last, t, c.chi2 + goal)? {
                    Some(p) => ((p.target - c.value).abs(), p.chi2 - c.chi2 < goal),
                    None => ((last.0 - c.value).abs(), true),
                });
            }
            Err(e) => return Err(e),
        }
        span *= 2.0;
    }
    Err(Error::GridTooNarrow {
        observable: profiler.observable().name().to_string(),
        detail: format!("Δχ² stayed below {goal} within {MAX_DOUBLINGS} span doublings"),
    })
}

/// Warm-started sweep outward from the central fit.
fn sweep(profiler: &Profiler<'_>, targets: &[f64], ends_on_boundary: bool) -> Result<Side> {
    let mut points: Vec<ProfilePoint> = Vec::with_capacity(targets.len());
    let mut truncated = false;
    for &t in targets {
        let result = match points.last() {
            None => profiler.profile(t, &profiler.default_starts(t)),
            Some(prev) => profiler.profile_near(t, prev).or_else(|e| {
                if infeasible(&e) || matches!(e, Error::NonConvergence { .. }) {
                    profiler.profile(t, &profiler.default_starts(t))
                } else {
                    Err(e)
                }
            }),
        };
        match result {
            Ok(p) => points.push(p),
            Err(e) if infeasible(&e) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Side {
        points,
        truncated,
        ends_on_boundary: ends_on_boundary && !truncated,
    })
}

/// First `Δχ² = 1` crossing walking outward along a monotone envelope of the curve,
/// interpolating `sqrt(Δχ²)`, which is linear for a Gaussian profile.
fn crossing(central: f64, base: f64, side: &[(f64, f64)]) -> Option<f64> {
    let (mut t_prev, mut m_prev) = (central, base.max(0.0));
    for &(t, d) in side {
        let m = d.max(m_prev);
        if m >= 1.0 {
            let (a, b) = (m_prev.sqrt(), m.sqrt());
            if b == a {
                return Some(t_prev);
            }
            return Some(t_prev + (t - t_prev) * (1.0 - a) / (b - a));
        }
        t_prev = t;
        m_prev = m;
    }
    None
}

pub fn scan_observable(
    record: &MeasurementRecord,
    observable: &dyn Observable,
    grid: GridSpec,
) -> Result<ScanResult> {
    scan_observable_with(record, observable, grid, ProfileOptions::default())
}

pub fn scan_observable_with(
    record: &MeasurementRecord,
    observable: &dyn Observable,
    grid: GridSpec,
    options: ProfileOptions,
) -> Result<ScanResult> {
    let profiler = Profiler::new(record, observable, options)?;
    let c = profiler.central().clone();

    let (low_targets, high_targets, low_edge, high_edge) = match grid {
        GridSpec::Auto { points, sigmas } => {
            if points < 3 {
                return Err(Error::validation("automatic grid needs at least 3 points"));
            }
            let per_side = (points - 1) / 2;
            let (span_lo, edge_lo) = auto_span(&profiler, -1.0, sigmas)?;
            let (span_hi, edge_hi) = auto_span(&profiler, 1.0, sigmas)?;
            let side = |dir: f64, span: f64| -> Vec<f64> {
                if span == 0.0 {
                    return Vec::new();
                }
                (1..=per_side)
                    .map(|k| c.value + dir * span * k as f64 / per_side as f64)
                    .collect()
            };
            (side(-1.0, span_lo), side(1.0, span_hi), edge_lo, edge_hi)
        }
        GridSpec::Explicit { lo, hi, points } => {
            if !(lo <= c.value && c.value <= hi) {
                return Err(Error::validation(format!(
                    "grid [{lo}, {hi}] does not contain the best-fit value {}",
                    c.value
                )));
            }
            let step = (hi - lo) / (points - 1) as f64;
            let all: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
            let mut low: Vec<f64> = all.iter().copied().filter(|&t| t < c.value).collect();
            low.reverse();
            let high: Vec<f64> = all.iter().copied().filter(|&t| t > c.value).collect();
            let (dlo, dhi) = observable.domain();
            (low, high, lo <= dlo + 1e-12, hi >= dhi - 1e-12)
        }
    };

    let low = sweep(&profiler, &low_targets, low_edge)?;
    let high = sweep(&profiler, &high_targets, high_edge)?;

    let mut curve: Vec<(f64, f64)> = low
        .points
        .iter()
        .rev()
        .map(|p| (p.target, p.chi2))
        .collect();
    curve.push((c.value, c.chi2));
    curve.extend(high.points.iter().map(|p| (p.target, p.chi2)));
    let min = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    for p in &mut curve {
        p.1 -= min;
    }
    let base = c.chi2 - min;

    let rel = |s: &Side| -> Vec<(f64, f64)> {
        s.points.iter().map(|p| (p.target, p.chi2 - min)).collect()
    };
    let resolve = |s: &Side, sign: f64| -> Result<(f64, bool)> {
        match crossing(c.value, base, &rel(s)) {
            Some(t) => Ok((t, false)),
            None if s.truncated || s.ends_on_boundary || s.points.is_empty() => {
                let edge = s.points.last().map(|p| p.target).unwrap_or(c.value);
                Ok((edge, true))
            }
            None => Err(Error::GridTooNarrow {
                observable: observable.name().to_string(),
                detail: format!(
                    "Δχ² never reaches 1 on the {} side of the grid",
                    if sign < 0.0 { "lower" } else { "upper" }
                ),
            }),
        }
    };
    let (ci68_low, at_boundary_low) = resolve(&low, -1.0)?;
    let (ci68_high, at_boundary_high) = resolve(&high, 1.0)?;

    let significance = match observable.threshold() {
        Some(t) => {
            let mut known: Vec<&ProfilePoint> =
                low.points.iter().chain(high.points.iter()).collect();
            known.sort_by(|a, b| (a.target - t).abs().total_cmp(&(b.target - t).abs()));
            let hint = known.first().map(|p| p.x);
            Some(significance_with(&profiler, t, min, hint)?)
        }
        None => None,
    };

    Ok(ScanResult {
        observable: observable.name().to_string(),
        central: c.value,
        ci68_low,
        ci68_high,
        at_boundary_low,
        at_boundary_high,
        curve,
        chi2_min: min,
        significance,
    })
}

fn significance_with(
    profiler: &Profiler<'_>,
    threshold: f64,
    chi2_min: f64,
    hint: Option<CoefficientVector>,
) -> Result<Significance> {
    let c = profiler.central();
    let side = if c.value >= threshold {
        SignificanceSide::Above
    } else {
        SignificanceSide::Below
    };
    if c.value == threshold {
        return Ok(Significance {
            threshold,
            sigma: 0.0,
            side,
            unattainable: false,
        });
    }
    let mut starts: Vec<CoefficientVector> = hint.into_iter().collect();
    starts.extend(profiler.default_starts(threshold));
    match profiler.profile(threshold, &starts) {
        Ok(p) => Ok(Significance {
            threshold,
            sigma: (p.chi2 - chi2_min).max(0.0).sqrt(),
            side,
            unattainable: false,
        }),
        Err(e) if infeasible(&e) => Ok(Significance {
            threshold,
            sigma: f64::INFINITY,
            side,
            unattainable: true,
        }),
        Err(e) => Err(e),
    }
}

/// Significance with which the profile excludes `threshold`, relative to the scan minimum.
pub fn threshold_significance(
    record: &MeasurementRecord,
    observable: &dyn Observable,
    scan: &ScanResult,
    threshold: f64,
) -> Result<Significance> {
    let profiler = Profiler::new(record, observable, ProfileOptions::default())?;
    significance_with(&profiler, threshold, scan.chi2_min, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fano::{BinKinematics, SpinBasis};
    use crate::inference::likelihood::CovarianceMatrix;
    use crate::inference::observable::{LinearObservable, ObservableKind, StandardObservable};
    use approx::assert_abs_diff_eq;

    fn record(o: CoefficientVector, cov: CovarianceMatrix) -> MeasurementRecord {
        MeasurementRecord::new(
            o,
            cov,
            BinKinematics::new((300.0, 400.0), (0.0, 0.4)).unwrap(),
            SpinBasis::helicity(),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn crossing_interpolates_on_monotone_envelope() {
        // a parabola with σ = 2 sampled off its crossing is recovered exactly
        let side = [(1.0, 0.25), (3.0, 2.25)];
        assert_abs_diff_eq!(crossing(0.0, 0.0, &side).unwrap(), 2.0, epsilon = 1e-15);
        // the dip at t = 2 is lifted to the envelope value 0.25
        let side = [(1.0, 0.25), (2.0, 0.1), (3.0, 2.25)];
        assert_abs_diff_eq!(crossing(0.0, 0.0, &side).unwrap(), 2.5, epsilon = 1e-15);
        assert_eq!(crossing(0.0, 0.0, &[(1.0, 0.2)]), None);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            GridSpec::parse_explicit("0:1:11").unwrap(),
            GridSpec::Explicit {
                lo: 0.0,
                hi: 1.0,
                points: 11
            }
        );
        assert!(GridSpec::parse_explicit("1:0:11").is_err());
        assert!(GridSpec::parse_explicit("0:1").is_err());
    }

    #[test]
    fn linear_scan_has_unit_errors() {
        let mut o = CoefficientVector::zeros();
        o[6] = 0.3;
        let r = record(o, CovarianceMatrix::identity() * 0.01);
        let obs = LinearObservable::component(6).with_threshold(0.0);
        let s = scan_observable(
            &r,
            &obs,
            GridSpec::Auto {
                points: 41,
                sigmas: 3.0,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(s.central, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.error_low(), 0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(s.error_high(), 0.1, epsilon = 1e-6);
        let sig = s.significance.unwrap();
        assert_eq!(sig.side, SignificanceSide::Above);
        assert_abs_diff_eq!(sig.sigma, 3.0, epsilon = 1e-5);
    }

    #[test]
    fn explicit_grid_must_contain_central() {
        let r = record(
            CoefficientVector::zeros(),
            CovarianceMatrix::identity() * 0.01,
        );
        let obs = LinearObservable::component(0);
        let g = GridSpec::Explicit {
            lo: 0.2,
            hi: 0.5,
            points: 5,
        };
        assert!(matches!(
            scan_observable(&r, &obs, g),
            Err(Error::Validation(_))
        ));
        let g = GridSpec::Explicit {
            lo: -0.05,
            hi: 0.05,
            points: 5,
        };
        assert!(matches!(
            scan_observable(&r, &obs, g),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn boundary_flag_for_zero_observation() {
        let r = record(
            CoefficientVector::zeros(),
            CovarianceMatrix::identity() * 1e-4,
        );
        let chsh = StandardObservable::new(ObservableKind::Chsh);
        let s = scan_observable(
            &r,
            &chsh,
            GridSpec::Auto {
                points: 21,
                sigmas: 3.0,
            },
        )
        .unwrap();
        assert!(s.at_boundary_low);
        assert!(!s.at_boundary_high);
        assert_eq!(s.ci68_low, 0.0);
        assert_eq!(s.central, 0.0);
    }
}
