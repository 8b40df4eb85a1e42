use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fano::{assemble_from_vector, coefficient_operators, CoefficientVector, C64};

use super::likelihood::{Likelihood, MeasurementRecord};
use super::observable::Observable;

/// Controls of the penalty-continuation profiler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub initial_weight: f64,
    pub max_weight: f64,
    pub weight_factor: f64,
    /// Stop escalating once `|g(x) − t|` and the physicality violation are below this.
    pub residual_tol: f64,
    /// Larger final residuals make the target infeasible.
    pub infeasible_tol: f64,
    /// Allowed negative eigenvalue of a profiled state.
    pub physicality_tol: f64,
    pub max_iterations: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            initial_weight: 1e2,
            max_weight: 1e10,
            weight_factor: 10.0,
            residual_tol: 1e-6,
            infeasible_tol: 1e-8,
            physicality_tol: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Unconstrained best fit inside the parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralFit {
    pub x: CoefficientVector,
    pub chi2: f64,
    pub value: f64,
    pub gradient: CoefficientVector,
}

/// Constrained minimum of `-2 log L` at one value of the observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub target: f64,
    pub chi2: f64,
    pub x: CoefficientVector,
    /// `|g(x) − target|` at the returned point.
    pub residual: f64,
    /// Penalty multiplier at convergence; warm starts at nearby targets reuse it.
    pub multiplier: f64,
}

const BOUND_EPS: f64 = 1e-12;
const MAX_OUTER: usize = 40;
const POLISH_STEPS: usize = 60;
const RESTORE_STEPS: usize = 100;
const SLIDE_STEPS: usize = 30;
/// Trial points of a slide are discarded rather than restored at length.
const SLIDE_RESTORE_STEPS: usize = 4;

fn clamp_box(x: &CoefficientVector) -> CoefficientVector {
    x.map(|v| v.clamp(-1.0, 1.0))
}

/// Box-constrained minimizer of the quadratic form by cyclic coordinate descent.
fn box_constrained_fit(lik: &Likelihood) -> Result<CoefficientVector> {
    let o = *lik.observed();
    let start = clamp_box(&o);
    if start == o {
        return Ok(o);
    }
    let w = lik.whitening();
    let a = w.transpose() * w;
    let mut x = start;
    for sweep in 0..20_000 {
        let mut change: f64 = 0.0;
        for i in 0..15 {
            let new = if a[(i, i)] > 0.0 {
                let grad_i = (a.row(i) * (x - o))[(0, 0)];
                (x[i] - grad_i / a[(i, i)]).clamp(-1.0, 1.0)
            } else {
                o[i].clamp(-1.0, 1.0)
            };
            change = change.max((new - x[i]).abs());
            x[i] = new;
        }
        if change < 1e-14 {
            return Ok(x);
        }
        if sweep == 19_999 {
            return Err(Error::NonConvergence {
                iterations: sweep + 1,
                detail: format!("box-constrained central fit, last change {change:e}"),
            });
        }
    }
    unreachable!()
}

/// Least-squares form of the penalized objective
/// `|W(x − o)|² + w (g(x) − t)² + w Σ_k min(0, λ_k(ρ(x)))²`.
struct PenaltyProblem<'p> {
    lik: &'p Likelihood,
    constraint: Option<(&'p dyn Observable, f64)>,
    physical: bool,
    weight: f64,
}

impl PenaltyProblem<'_> {
    fn rows(&self) -> usize {
        15 + usize::from(self.constraint.is_some()) + if self.physical { 4 } else { 0 }
    }

    fn residuals(&self, x: &CoefficientVector) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.rows());
        r.rows_mut(0, 15).copy_from(&self.lik.whitened(x));
        let sw = self.weight.sqrt();
        let mut k = 15;
        if let Some((obs, t)) = self.constraint {
            r[k] = sw * (obs.value(x)? - t);
            k += 1;
        }
        if self.physical {
            for (i, l) in crate::fano::hermitian_eigenvalues(&assemble_from_vector(x))
                .into_iter()
                .enumerate()
            {
                r[k + i] = sw * l.min(0.0);
            }
        }
        Ok(r)
    }

    fn linearize(&self, x: &CoefficientVector) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.rows();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 15);
        r.rows_mut(0, 15).copy_from(&self.lik.whitened(x));
        j.view_mut((0, 0), (15, 15)).copy_from(self.lik.whitening());
        let sw = self.weight.sqrt();
        let mut k = 15;
        if let Some((obs, t)) = self.constraint {
            let (g, grad) = obs.value_and_gradient(x)?;
            r[k] = sw * (g - t);
            j.row_mut(k).copy_from(&(grad.transpose() * sw));
            k += 1;
        }
        if self.physical {
            // one row per negative eigenvalue; their sum of squares stays differentiable
            // where eigenvalues coincide, unlike λ_min alone
            let eig = SymmetricEigen::new(assemble_from_vector(x));
            let ops = coefficient_operators();
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                if l < 0.0 {
                    let v = eig.eigenvectors.column(i);
                    r[k + i] = sw * l;
                    for (c, op) in ops.iter().enumerate() {
                        j[(k + i, c)] = sw * 0.25 * (v.adjoint() * op * v)[(0, 0)].re;
                    }
                }
            }
        }
        Ok((r, j))
    }
}

/// Nearest unit-trace positive semidefinite state: negative eigenvalues set to zero,
/// the rest renormalized.
fn clip_spectrum(x: &CoefficientVector) -> CoefficientVector {
    let eig = SymmetricEigen::new(assemble_from_vector(x));
    let kept = eig.eigenvalues.map(|l| l.max(0.0));
    let total = kept.sum();
    let mut rho = nalgebra::Matrix4::zeros();
    for k in 0..4 {
        let v = eig.eigenvectors.column(k);
        rho += v * v.adjoint() * C64::new(kept[k] / total, 0.0);
    }
    let ops = coefficient_operators();
    clamp_box(&CoefficientVector::from_fn(|k, _| {
        (rho * ops[k]).trace().re
    }))
}

pub(crate) fn min_eigenvalue(x: &CoefficientVector) -> f64 {
    crate::fano::hermitian_eigenvalues(&assemble_from_vector(x))[0]
}

/// Projected Levenberg–Marquardt on `[-1, 1]^15`. Coordinates at a face whose
/// descent direction points outward are frozen for the step.
fn levenberg_marquardt(
    problem: &PenaltyProblem<'_>,
    x0: &CoefficientVector,
    max_iter: usize,
) -> Result<CoefficientVector> {
    let mut x = clamp_box(x0);
    let (mut r, mut j) = problem.linearize(&x)?;
    let mut cost = r.norm_squared();
    let mut mu: Option<f64> = None;
    let mut rejected = 0;
    for _ in 0..max_iter {
        let grad = j.transpose() * &r;
        let free: Vec<usize> = (0..15)
            .filter(|&i| {
                !((x[i] >= 1.0 - BOUND_EPS && grad[i] < 0.0)
                    || (x[i] <= -1.0 + BOUND_EPS && grad[i] > 0.0))
            })
            .collect();
        if free.is_empty() || free.iter().all(|&i| grad[i].abs() <= 1e-15 * (1.0 + cost)) {
            break;
        }
        let jf = j.select_columns(&free);
        let diag: Vec<f64> = (0..free.len())
            .map(|c| jf.column(c).norm_squared())
            .collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let scale: Vec<f64> = diag
            .iter()
            .map(|d| d.max(1e-12 * dmax).max(1e-300))
            .collect();
        let mu_now = *mu.get_or_insert(1e-3);

        let n = jf.nrows();
        let m = free.len();
        let mut a = DMatrix::zeros(n + m, m);
        a.view_mut((0, 0), (n, m)).copy_from(&jf);
        let mut b = DVector::zeros(n + m);
        b.rows_mut(0, n).copy_from(&(-&r));
        for c in 0..m {
            a[(n + c, c)] = (mu_now * scale[c]).sqrt();
        }
        let step = a
            .svd(true, true)
            .solve(&b, 1e-15)
            .map_err(|e| Error::NonConvergence {
                iterations: 0,
                detail: format!("least-squares step failed: {e}"),
            })?;
        let mut trial = x;
        for (c, &i) in free.iter().enumerate() {
            trial[i] = (x[i] + step[c]).clamp(-1.0, 1.0);
        }
        let moved = (trial - x).amax();
        let trial_cost = problem
            .residuals(&trial)
            .map(|v| v.norm_squared())
            .unwrap_or(f64::INFINITY);
        if trial_cost < cost {
            let decrease = cost - trial_cost;
            x = trial;
            let lin = problem.linearize(&x)?;
            r = lin.0;
            j = lin.1;
            cost = r.norm_squared();
            mu = Some((mu_now * 0.3).max(1e-15));
            rejected = 0;
            if moved < 1e-11 || decrease <= 1e-12 * cost {
                break;
            }
        } else {
            mu = Some(mu_now * 10.0);
            rejected += 1;
            if rejected >= 6 || moved < 1e-14 {
                break;
            }
        }
    }
    Ok(x)
}

/// Evaluates constrained profiles of one observable for one measurement.
pub struct Profiler<'a> {
    likelihood: Likelihood,
    observable: &'a dyn Observable,
    options: ProfileOptions,
    central: CentralFit,
}

impl<'a> Profiler<'a> {
    pub fn new(
        record: &MeasurementRecord,
        observable: &'a dyn Observable,
        options: ProfileOptions,
    ) -> Result<Self> {
        let likelihood = Likelihood::new(record)?;
        let mut x = box_constrained_fit(&likelihood)?;
        if observable.requires_physical() && min_eigenvalue(&x) < -options.physicality_tol {
            x = physical_projection(&likelihood, &x, &options)?;
        }
        let (value, gradient) = observable.value_and_gradient(&x)?;
        let central = CentralFit {
            chi2: likelihood.chi2(&x),
            x,
            value,
            gradient,
        };
        Ok(Profiler {
            likelihood,
            observable,
            options,
            central,
        })
    }

    pub fn central(&self) -> &CentralFit {
        &self.central
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    pub fn observable(&self) -> &dyn Observable {
        self.observable
    }

    pub fn options(&self) -> &ProfileOptions {
        &self.options
    }

    /// Linearized standard deviation `sqrt(∇gᵀ U ∇g)` at the central fit.
    pub fn linear_sigma(&self) -> f64 {
        self.likelihood
            .linear_variance(&self.central.gradient)
            .max(0.0)
            .sqrt()
    }

    fn check_domain(&self, target: f64) -> Result<()> {
        let (lo, hi) = self.observable.domain();
        if target >= lo - 1e-12 && target <= hi + 1e-12 {
            Ok(())
        } else {
            Err(Error::Infeasible {
                observable: self.observable.name().to_string(),
                target,
                reason: format!("outside the domain [{lo}, {hi}]"),
            })
        }
    }

    /// Deterministic restart set: the central fit, its linearized projection onto
    /// the constraint, two symmetric perturbations when the gradient vanishes, and for
    /// observables restricted to physical states a point on the ray towards `I/4`.
    pub fn default_starts(&self, target: f64) -> Vec<CoefficientVector> {
        let c = &self.central;
        let mut starts = vec![c.x];
        let u_grad = self.likelihood.covariance() * c.gradient;
        let denom = c.gradient.dot(&u_grad);
        if denom > 1e-300 && c.gradient.amax() > 1e-8 {
            starts.push(clamp_box(&(c.x + u_grad * ((target - c.value) / denom))));
        }
        let spread = self
            .likelihood
            .covariance()
            .diagonal()
            .map(|v| v.max(0.0).sqrt());
        // a (nearly) stationary point of the observable: linearization says nothing
        if denom.max(0.0).sqrt() <= 1e-3 * spread.max() {
            let pattern = CoefficientVector::from_fn(|k, _| if k % 2 == 0 { 1.0 } else { -1.0 });
            let delta = spread.component_mul(&pattern).map(|v| v.clamp(-0.1, 0.1));
            starts.push(clamp_box(&(c.x + delta)));
            starts.push(clamp_box(&(c.x - delta)));
        }
        if self.observable.requires_physical() {
            starts.extend(self.ray_start(target));
        }
        starts
    }

    /// The point `s x̂` on the segment from the maximally mixed state to the central fit
    /// where the observable equals `target`, by bisection. Every such point is physical.
    fn ray_start(&self, target: f64) -> Option<CoefficientVector> {
        let c = &self.central;
        let g0 = self.observable.value(&CoefficientVector::zeros()).ok()?;
        if (target - g0) * (c.value - target) <= 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let g = self.observable.value(&(c.x * mid)).ok()?;
            if (g - target) * (c.value - g0) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(c.x * (0.5 * (lo + hi)))
    }

    /// Minimum over the given starts; errors only if every start fails.
    pub fn profile(&self, target: f64, starts: &[CoefficientVector]) -> Result<ProfilePoint> {
        self.check_domain(target)?;
        let mut best: Option<ProfilePoint> = None;
        let mut first_err = None;
        for s in starts {
            match self.profile_from(target, s, 0.0, self.options.initial_weight) {
                Ok(p) => {
                    if best.as_ref().is_none_or(|b| p.chi2 < b.chi2) {
                        best = Some(p);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        if best.is_none() && matches!(first_err, Some(Error::Infeasible { .. })) {
            // Low penalty weights can collapse onto a stationary point of the observable
            // (e.g. a quadratic observable at its zero). Start on the constraint instead
            // and hold it with the full weight.
            let scale = target.abs().max(1.0);
            for s in starts {
                let (x, residual) = self.polish(s, target, RESTORE_STEPS)?;
                if residual > self.options.infeasible_tol * scale {
                    continue;
                }
                if let Ok(p) = self.profile_from(target, &x, 0.0, self.options.max_weight) {
                    if best.as_ref().is_none_or(|b| p.chi2 < b.chi2) {
                        best = Some(p);
                    }
                }
            }
        }
        if best.is_none() && matches!(first_err, Some(Error::Infeasible { .. })) {
            for x in self.line_starts(target) {
                if let Ok(p) = self.profile_from(target, &x, 0.0, self.options.max_weight) {
                    if best.as_ref().is_none_or(|b| p.chi2 < b.chi2) {
                        best = Some(p);
                    }
                }
            }
        }
        best.ok_or_else(|| first_err.expect("at least one start"))
    }

    /// Points where the observable equals `target` on rays from the central fit (pulled
    /// strictly inside the state space when physicality is required) along fixed
    /// patterns scaled by the measurement errors. Needed where the observable is flat
    /// near the fit and gradient steps cannot reach the constraint.
    fn line_starts(&self, target: f64) -> Vec<CoefficientVector> {
        const MARGIN: f64 = 1e-3;
        let c = &self.central;
        let physical = self.observable.requires_physical();
        let mut base = c.x;
        if physical {
            // eigenvalues of ρ(s x) are (1 − s)/4 + s λ_k
            let l = min_eigenvalue(&base);
            if l < MARGIN {
                base *= (0.25 - MARGIN) / (0.25 - l);
            }
        }
        let admissible =
            |y: &CoefficientVector| y.amax() <= 1.0 && (!physical || min_eigenvalue(y) >= 0.0);
        let Ok(g_base) = self.observable.value(&base) else {
            return Vec::new();
        };
        let spread = self
            .likelihood
            .covariance()
            .diagonal()
            .map(|v| v.max(0.0).sqrt());
        let floor = 1e-3 * spread.max().max(1e-12);
        // generic directions, so no commuting structure cancels the observable
        let pattern = |j: usize, k: usize| {
            ((k + 1) as f64 * (j as f64 + 0.5) * 0.618_033_988_749_895).fract() - 0.5
        };
        let mut out = Vec::new();
        // exchanging top and antitop flips the sign of asymmetric observables
        let swap = |k: usize| match k {
            0..=2 => k + 3,
            3..=5 => k - 3,
            _ => 6 + 3 * ((k - 6) % 3) + (k - 6) / 3,
        };
        for j in 0..3 {
            for (sign, swapped) in [(1.0, false), (-1.0, false), (1.0, true), (-1.0, true)] {
                let dir = CoefficientVector::from_fn(|k, _| {
                    let q = if swapped { swap(k) } else { k };
                    sign * pattern(j, q) * spread[k].max(floor)
                });
                let dir = dir / dir.amax();
                let side = |g: f64| (g - target).signum();
                let start_side = side(g_base);
                if start_side == 0.0 {
                    out.push(base);
                    continue;
                }
                let (mut lo, mut hi) = (0.0, f64::NAN);
                let mut step = 1e-6;
                while step <= 2.0 {
                    let y = base + dir * step;
                    if !admissible(&y) {
                        break;
                    }
                    match self.observable.value(&y) {
                        Ok(g) if side(g) != start_side => {
                            hi = step;
                            break;
                        }
                        Ok(_) => lo = step,
                        Err(_) => break,
                    }
                    step *= 2.0;
                }
                if hi.is_nan() {
                    continue;
                }
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    match self.observable.value(&(base + dir * mid)) {
                        Ok(g) if side(g) == start_side => lo = mid,
                        Ok(_) => hi = mid,
                        Err(_) => break,
                    }
                }
                out.push(base + dir * hi);
            }
        }
        out
    }

    /// Profile at `target` starting from a solution at a nearby target, reusing its
    /// coefficients and multiplier.
    pub fn profile_near(&self, target: f64, previous: &ProfilePoint) -> Result<ProfilePoint> {
        self.check_domain(target)?;
        self.profile_from(
            target,
            &previous.x,
            previous.multiplier,
            self.options.initial_weight,
        )
    }

    fn profile_from(
        &self,
        target: f64,
        start: &CoefficientVector,
        multiplier: f64,
        weight: f64,
    ) -> Result<ProfilePoint> {
        let opts = &self.options;
        let physical = self.observable.requires_physical();
        let mut problem = PenaltyProblem {
            lik: &self.likelihood,
            constraint: Some((self.observable, target)),
            physical,
            weight,
        };
        let mut x = clamp_box(start);
        // multiplier term: the penalty pulls towards `target − shift`
        let mut shift = multiplier / weight;
        let mut last_miss = f64::INFINITY;
        for _ in 0..MAX_OUTER {
            problem.constraint = Some((self.observable, target - shift));
            x = levenberg_marquardt(&problem, &x, opts.max_iterations)?;
            let c = self.observable.value(&x)? - target;
            let violation = if physical {
                (-min_eigenvalue(&x)).max(0.0)
            } else {
                0.0
            };
            if c.abs() < opts.residual_tol && violation < opts.residual_tol {
                break;
            }
            let stalled = c.abs() + violation > 0.5 * last_miss;
            if problem.weight >= opts.max_weight && stalled {
                break;
            }
            last_miss = c.abs() + violation;
            shift += c;
            if problem.weight < opts.max_weight {
                let next = (problem.weight * opts.weight_factor).min(opts.max_weight);
                shift *= problem.weight / next;
                problem.weight = next;
            }
        }
        let multiplier = shift * problem.weight;
        let (x, residual) = if physical {
            self.restore_physical(&x, target, RESTORE_STEPS)?
        } else {
            self.polish(&x, target, POLISH_STEPS)?
        };
        let scale = target.abs().max(1.0);
        let (x, residual) = if residual <= opts.infeasible_tol * scale {
            self.slide(x, residual, target)?
        } else {
            (x, residual)
        };

        if residual > opts.infeasible_tol * scale {
            return Err(Error::Infeasible {
                observable: self.observable.name().to_string(),
                target,
                reason: format!("closest attainable point misses the target by {residual:e}"),
            });
        }
        if physical {
            let l = min_eigenvalue(&x);
            if l < -opts.physicality_tol {
                return Err(Error::Infeasible {
                    observable: self.observable.name().to_string(),
                    target,
                    reason: format!("only reachable by unphysical states (λ_min = {l:e})"),
                });
            }
        }
        Ok(ProfilePoint {
            target,
            chi2: self.likelihood.chi2(&x),
            x,
            residual,
            multiplier,
        })
    }

    /// Gauss–Newton steps within the tangent space of the constraint, each followed by a
    /// polish back onto it. Removes what the ill-conditioned penalty stages leave of the
    /// likelihood gradient along the constraint surface.
    fn slide(
        &self,
        mut x: CoefficientVector,
        mut residual: f64,
        target: f64,
    ) -> Result<(CoefficientVector, f64)> {
        let opts = &self.options;
        let physical = self.observable.requires_physical();
        let scale = target.abs().max(1.0);
        let w = self.likelihood.whitening();
        let mut f = self.likelihood.chi2(&x);
        for _ in 0..SLIDE_STEPS {
            let (_, grad) = self.observable.value_and_gradient(&x)?;
            let r = self.likelihood.whitened(&x);
            let mut frozen = [false; 15];
            let mut d = CoefficientVector::zeros();
            for _ in 0..15 {
                let free: Vec<usize> = (0..15).filter(|&i| !frozen[i]).collect();
                let m = free.len();
                if m < 2 {
                    return Ok((x, residual));
                }
                let a = DVector::from_iterator(m, free.iter().map(|&i| grad[i]));
                let an = a.norm();
                // orthonormal basis of the free coordinates orthogonal to the constraint gradient
                let basis = if an > 0.0 {
                    let mut q = DMatrix::identity(m, m);
                    let v = {
                        let mut v = a.clone() / an;
                        v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
                        let vn = v.norm();
                        v / vn
                    };
                    q -= &v * v.transpose() * 2.0;
                    q.columns(1, m - 1).into_owned()
                } else {
                    DMatrix::identity(m, m)
                };
                let wf = DMatrix::from_fn(15, m, |row, c| w[(row, free[c])]);
                let system = &wf * &basis;
                let z = system
                    .svd(true, true)
                    .solve(&DVector::from_iterator(15, r.iter().map(|v| -v)), 1e-12)
                    .map_err(|e| Error::NonConvergence {
                        iterations: 0,
                        detail: format!("tangent step failed: {e}"),
                    })?;
                let step = basis * z;
                d = CoefficientVector::zeros();
                for (c, &i) in free.iter().enumerate() {
                    d[i] = step[c];
                }
                let mut changed = false;
                for i in 0..15 {
                    let outward = (x[i] >= 1.0 - BOUND_EPS && d[i] > 0.0)
                        || (x[i] <= -1.0 + BOUND_EPS && d[i] < 0.0);
                    if outward && !frozen[i] {
                        frozen[i] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            if d.amax() < 1e-13 {
                break;
            }
            let mut improved = false;
            let mut s = 1.0;
            for _ in 0..6 {
                let trial = clamp_box(&(x + d * s));
                s *= 0.5;
                let restored = if physical {
                    self.restore_physical(&trial, target, SLIDE_RESTORE_STEPS)
                } else {
                    self.polish(&trial, target, POLISH_STEPS)
                };
                let Ok((y, res)) = restored else { continue };
                if res > opts.infeasible_tol * scale
                    || (physical && min_eigenvalue(&y) < -opts.physicality_tol)
                {
                    continue;
                }
                let fy = self.likelihood.chi2(&y);
                if fy < f {
                    improved = f - fy > 1e-12 * f.max(1.0);
                    x = y;
                    f = fy;
                    residual = res;
                    break;
                }
            }
            if !improved {
                break;
            }
        }
        Ok((x, residual))
    }

    /// Alternates clipping of negative eigenvalues with a polish back onto the constraint.
    fn restore_physical(
        &self,
        x0: &CoefficientVector,
        target: f64,
        rounds: usize,
    ) -> Result<(CoefficientVector, f64)> {
        let tol = self.options.physicality_tol;
        let mut out = self.polish(x0, target, POLISH_STEPS)?;
        for _ in 0..rounds {
            if min_eigenvalue(&out.0) >= -0.01 * tol {
                return Ok(out);
            }
            out = self.polish(&clip_spectrum(&out.0), target, POLISH_STEPS)?;
        }
        Ok(out)
    }

    /// Newton steps along `U∇g`, the direction of least likelihood cost, to remove the
    /// residual left by the finite penalty weight.
    fn polish(
        &self,
        x0: &CoefficientVector,
        target: f64,
        steps: usize,
    ) -> Result<(CoefficientVector, f64)> {
        let mut x = *x0;
        let (mut g, mut grad) = self.observable.value_and_gradient(&x)?;
        let mut res = g - target;
        for _ in 0..steps {
            if res.abs() <= 1e-13 * target.abs().max(1.0) {
                break;
            }
            let u = self.likelihood.covariance();
            let mut d = u * grad;
            let mut frozen = [false; 15];
            for _ in 0..15 {
                let mut changed = false;
                for i in 0..15 {
                    let outward = (x[i] >= 1.0 - BOUND_EPS && -res * d[i] > 0.0)
                        || (x[i] <= -1.0 + BOUND_EPS && -res * d[i] < 0.0);
                    if outward && !frozen[i] {
                        frozen[i] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
                // the step is restricted to free coordinates, so the frozen gradient entries drop out
                let g_free =
                    CoefficientVector::from_fn(|i, _| if frozen[i] { 0.0 } else { grad[i] });
                d = u * g_free;
                for i in (0..15).filter(|&i| frozen[i]) {
                    d[i] = 0.0;
                }
            }
            if grad.dot(&d).abs() < 1e-14 * grad.norm_squared() {
                d = grad;
            }
            let slope = grad.dot(&d);
            if slope == 0.0 {
                break;
            }
            let mut s = -res / slope;
            let mut accepted = false;
            for _ in 0..12 {
                let trial = clamp_box(&(x + d * s));
                let gt = self.observable.value(&trial)?;
                if (gt - target).abs() < res.abs() {
                    x = trial;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
            (g, grad) = self.observable.value_and_gradient(&x)?;
            res = g - target;
        }
        Ok((x, res.abs()))
    }
}

/// Closest physical point to `x` in the likelihood metric.
fn physical_projection(
    lik: &Likelihood,
    x: &CoefficientVector,
    opts: &ProfileOptions,
) -> Result<CoefficientVector> {
    let mut problem = PenaltyProblem {
        lik,
        constraint: None,
        physical: true,
        weight: opts.initial_weight,
    };
    let mut x = *x;
    loop {
        x = levenberg_marquardt(&problem, &x, opts.max_iterations)?;
        if -min_eigenvalue(&x) < opts.residual_tol || problem.weight >= opts.max_weight {
            break;
        }
        problem.weight *= opts.weight_factor;
    }
    Ok(x)
}

/// Observable value at the constrained best fit and the fitted coefficients.
pub fn fit_central(
    record: &MeasurementRecord,
    observable: &dyn Observable,
) -> Result<(f64, CoefficientVector)> {
    let p = Profiler::new(record, observable, ProfileOptions::default())?;
    Ok((p.central.value, p.central.x))
}

/// `min -2 log L` subject to `g(x) = target`, relative to the unconstrained minimum.
pub fn profile_at(
    record: &MeasurementRecord,
    observable: &dyn Observable,
    target: f64,
) -> Result<f64> {
    let p = Profiler::new(record, observable, ProfileOptions::default())?;
    let point = p.profile(target, &p.default_starts(target))?;
    Ok(point.chi2 - p.central.chi2)
}
