use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fano::{validate_physicality, CoefficientVector, FanoCoefficients, SpinBasis};
use crate::inference::{MeasurementRecord, Observable};

type M15 = SMatrix<f64, 15, 15>;

/// Plain quadratic form with an SVD pseudo-inverse.
struct Quadratic {
    observed: CoefficientVector,
    inverse: M15,
    /// Sampling and search directions: `√s_k v_k` for kept singular pairs, `0.1 v_k`
    /// for null ones.
    directions: Vec<CoefficientVector>,
}

impl Quadratic {
    fn new(record: &MeasurementRecord) -> Result<Self> {
        let svd = record.covariance.svd(true, true);
        let u = svd.u.expect("requested");
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Err(Error::validation("covariance is zero"));
        }
        let mut inverse = M15::zeros();
        let mut directions = Vec::with_capacity(15);
        for k in 0..15 {
            let s = svd.singular_values[k];
            let v: CoefficientVector = u.column(k).into_owned();
            if s > 1e-12 * smax {
                inverse += v * v.transpose() / s;
                directions.push(v * s.sqrt());
            } else {
                directions.push(v * 0.1);
            }
        }
        Ok(Quadratic {
            observed: record.observed,
            inverse,
            directions,
        })
    }

    fn chi2(&self, x: &CoefficientVector) -> f64 {
        let d = x - self.observed;
        (d.transpose() * self.inverse * d)[(0, 0)]
    }
}

struct Search<'a> {
    quad: Quadratic,
    observable: &'a dyn Observable,
    target: f64,
    physical: bool,
}

fn in_box(x: &CoefficientVector) -> bool {
    x.iter().all(|v| v.abs() <= 1.0)
}

impl Search<'_> {
    fn admissible(&self, x: &CoefficientVector) -> bool {
        in_box(x)
            && (!self.physical
                || FanoCoefficients::from_vector(x, SpinBasis::beam())
                    .map(|f| validate_physicality(&f, 0.0).is_physical)
                    .unwrap_or(false))
    }

    fn residual(&self, x: &CoefficientVector) -> Option<f64> {
        self.observable.value(x).ok().map(|v| v - self.target)
    }

    /// Largest `s ∈ [0, limit]` such that `x + s d` stays admissible.
    fn reach(&self, x: &CoefficientVector, d: &CoefficientVector, limit: f64) -> f64 {
        if self.admissible(&(x + d * limit)) {
            return limit;
        }
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.admissible(&(x + d * mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Root of the residual on the segment `x + s d`, `s ∈ [a, b]`, given a sign change.
    fn bisect(
        &self,
        x: &CoefficientVector,
        d: &CoefficientVector,
        mut a: f64,
        mut b: f64,
        mut ra: f64,
    ) -> Option<CoefficientVector> {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let rm = self.residual(&(x + d * m))?;
            if rm == 0.0 || (b - a).abs() < 1e-15 {
                return Some(x + d * m);
            }
            if (rm > 0.0) == (ra > 0.0) {
                a = m;
                ra = rm;
            } else {
                b = m;
            }
        }
        Some(x + d * (0.5 * (a + b)))
    }

    /// Constraint point on the line through `x` along `d` nearest to `x`, scanning
    /// outward over the admissible part of `[-span, span]`.
    fn project_on_line(
        &self,
        x: &CoefficientVector,
        d: &CoefficientVector,
        span: f64,
        scan: usize,
    ) -> Option<CoefficientVector> {
        let r0 = self.residual(x)?;
        if r0 == 0.0 {
            return Some(*x);
        }
        let ends = [self.reach(x, d, span), -self.reach(x, &(-d), span)];
        let mut best: Option<(f64, CoefficientVector)> = None;
        for end in ends {
            if end == 0.0 {
                continue;
            }
            let mut prev = (0.0, r0);
            for k in 1..=scan {
                // geometric spacing resolves roots close to x as well as far ones
                let s = end * (2f64.powi(k as i32) - 1.0) / (2f64.powi(scan as i32) - 1.0);
                let Some(r) = self.residual(&(x + d * s)) else {
                    break;
                };
                if (r > 0.0) != (prev.1 > 0.0) || r == 0.0 {
                    if let Some(p) = self.bisect(x, d, prev.0, s, prev.1) {
                        if best.as_ref().is_none_or(|b| s.abs() < b.0) {
                            best = Some((s.abs(), p));
                        }
                    }
                    break;
                }
                prev = (s, r);
            }
        }
        best.map(|b| b.1)
    }

    fn feasible(&self, x: &CoefficientVector) -> bool {
        self.admissible(x)
            && self
                .residual(x)
                .is_some_and(|r| r.abs() <= 1e-9 * self.target.abs().max(1.0))
    }

    /// Pairwise moves: step along one direction, restore the constraint along
    /// another, keep the move if `-2 log L` drops.
    fn refine(&self, mut x: CoefficientVector) -> CoefficientVector {
        let mut f = self.quad.chi2(&x);
        let dirs = &self.quad.directions;
        let mut h = 1.0;
        while h > 1e-7 {
            let mut improved_any = true;
            let mut sweeps = 0;
            while improved_any && sweeps < 60 {
                improved_any = false;
                sweeps += 1;
                for a in 0..dirs.len() {
                    for sign in [1.0, -1.0] {
                        let y = x + dirs[a] * (sign * h);
                        if !self.admissible(&y) {
                            continue;
                        }
                        let mut best: Option<(f64, CoefficientVector)> = None;
                        for (b, db) in dirs.iter().enumerate() {
                            if b == a {
                                continue;
                            }
                            let Some(z) = self.project_on_line(&y, db, 8.0 * h, 12) else {
                                continue;
                            };
                            if !self.feasible(&z) {
                                continue;
                            }
                            let fz = self.quad.chi2(&z);
                            if fz < f && best.as_ref().is_none_or(|bb| fz < bb.0) {
                                best = Some((fz, z));
                            }
                            if best.is_some() {
                                break;
                            }
                        }
                        if let Some((fz, z)) = best {
                            x = z;
                            f = fz;
                            improved_any = true;
                        }
                    }
                }
            }
            h *= 0.5;
        }
        x
    }
}

/// Brute-force constrained minimum of `-2 log L` at `observable = target`.
///
/// `n_draws` points are drawn from the Gaussian around the observation (shrunk into
/// the admissible set), each is moved onto the constraint along a random direction,
/// and the best few are refined by pairwise moves that restore the constraint exactly.
/// The value is an upper bound on the true constrained minimum.
pub fn dense_profile_oracle(
    record: &MeasurementRecord,
    observable: &dyn Observable,
    target: f64,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    let quad = Quadratic::new(record)?;
    let search = Search {
        quad,
        observable,
        target,
        physical: observable.requires_physical(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let origin = CoefficientVector::zeros();

    let mut candidates: Vec<(f64, CoefficientVector)> = Vec::new();
    for _ in 0..n_draws {
        let z = SVector::<f64, 15>::from_fn(|_, _| normal());
        let mut x = search.quad.observed;
        for (k, d) in search.quad.directions.iter().enumerate() {
            x += d * z[k];
        }
        if !search.admissible(&x) {
            // pull towards the maximally mixed state, which is interior
            let back = x - origin;
            let s = search.reach(&origin, &back, 1.0);
            x = origin + back * s * (1.0 - 1e-12);
        }
        let w = SVector::<f64, 15>::from_fn(|_, _| normal());
        let mut dir = CoefficientVector::zeros();
        for (k, d) in search.quad.directions.iter().enumerate() {
            dir += d * w[k];
        }
        if dir.norm() == 0.0 {
            continue;
        }
        if let Some(p) = search.project_on_line(&x, &(dir / dir.norm()), 4.0, 24) {
            if search.feasible(&p) {
                candidates.push((search.quad.chi2(&p), p));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Infeasible {
            observable: observable.name().to_string(),
            target,
            reason: format!("no feasible point among {n_draws} random draws"),
        });
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = candidates
        .iter()
        .take(4)
        .map(|(_, x)| {
            let y = search.refine(*x);
            search.quad.chi2(&y)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}
