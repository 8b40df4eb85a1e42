use proptest::prelude::*;
use spincorr_core::inference::{
    CovarianceMatrix, LinearObservable, ProfileOptions, Profiler, SignificanceSide,
};
use spincorr_core::oracles::{analytic_state, dense_profile_oracle, StateName};
use spincorr_core::*;

fn kinematics() -> BinKinematics {
    BinKinematics::new((400.0, 600.0), (0.0, 0.4)).unwrap()
}

fn record(o: CoefficientVector, cov: CovarianceMatrix) -> MeasurementRecord {
    MeasurementRecord::new(o, cov, kinematics(), SpinBasis::helicity(), "synthetic").unwrap()
}

/// Dense correlated covariance with entries of order `scale²`.
fn covariance(seed: u64, scale: f64) -> CovarianceMatrix {
    let a = CovarianceMatrix::from_fn(|i, j| {
        let k = (seed as usize + 1) * (i * 17 + j * 31 + 7);
        ((k % 97) as f64 / 48.0 - 1.0) * scale / 4.0
    });
    a * a.transpose() + CovarianceMatrix::identity() * (scale * scale)
}

/// Scales an observable and its threshold by `k`.
struct Scaled<'a> {
    inner: &'a dyn Observable,
    k: f64,
}

impl Observable for Scaled<'_> {
    fn name(&self) -> &str {
        "scaled"
    }

    fn value(&self, x: &CoefficientVector) -> spincorr_core::Result<f64> {
        Ok(self.k * self.inner.value(x)?)
    }

    fn value_and_gradient(
        &self,
        x: &CoefficientVector,
    ) -> spincorr_core::Result<(f64, CoefficientVector)> {
        let (v, g) = self.inner.value_and_gradient(x)?;
        Ok((self.k * v, g * self.k))
    }

    fn domain(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.domain();
        (self.k * lo, self.k * hi)
    }

    fn requires_physical(&self) -> bool {
        self.inner.requires_physical()
    }

    fn threshold(&self) -> Option<f64> {
        self.inner.threshold().map(|t| self.k * t)
    }
}

#[test]
fn linear_scan_reproduces_gaussian_profile() {
    let o = CoefficientVector::from_fn(|k, _| 0.05 * ((k as f64) * 0.7).cos());
    let cov = covariance(3, 0.03);
    let r = record(o, cov);
    let g = CoefficientVector::from_fn(|k, _| ((k % 4) as f64 - 1.5) / 1.5);
    let obs = LinearObservable::new("lin", g, 0.0)
        .with_threshold(g.dot(&o) - 2.4 * (g.transpose() * cov * g)[(0, 0)].sqrt());
    let c_star = g.dot(&o);
    let sigma = (g.transpose() * cov * g)[(0, 0)].sqrt();

    let scan = scan_observable(&r, &obs, GridSpec::default()).unwrap();
    assert!((scan.central - c_star).abs() < 1e-9);
    assert!((scan.error_low() - sigma).abs() < 1e-3 * sigma);
    assert!((scan.error_high() - sigma).abs() < 1e-3 * sigma);
    for &(c, d) in &scan.curve {
        let expected = ((c - c_star) / sigma).powi(2);
        assert!(
            (d - expected).abs() < 1e-6 * expected.max(1.0),
            "{c}: {d} vs {expected}"
        );
    }
    let s = scan.significance.unwrap();
    assert_eq!(s.side, SignificanceSide::Above);
    assert!((s.sigma - 2.4).abs() < 1e-3, "{}", s.sigma);
}

#[test]
fn threshold_significance_of_scaled_component() {
    let mut o = CoefficientVector::zeros();
    o[6] = 0.3;
    let r = record(o, CovarianceMatrix::identity() * 0.01);
    let mut g = CoefficientVector::zeros();
    g[6] = 10.0;
    let obs = LinearObservable::new("ten_c11", g, 0.0).with_threshold(0.0);
    let scan = scan_observable(&r, &obs, GridSpec::default()).unwrap();
    let s = threshold_significance(&r, &obs, &scan, 0.0).unwrap();
    assert!((s.sigma - 3.0).abs() < 1e-3);
    assert!((scan.error_high() - 1.0).abs() < 1e-3);
}

#[test]
fn profile_is_zero_at_the_central_value() {
    for kind in [
        ObservableKind::Chsh,
        ObservableKind::Entanglement,
        ObservableKind::Magic,
        ObservableKind::Steering,
    ] {
        let o = analytic_state(StateName::RandomPhysical(11))
            .unwrap()
            .fano
            .to_vector();
        let r = record(o, covariance(1, 0.02));
        let obs = StandardObservable::new(kind);
        let (c, _) = fit_central(&r, &obs).unwrap();
        assert!(profile_at(&r, &obs, c).unwrap().abs() < 1e-8, "{kind}");
    }
}

#[test]
fn profiles_are_unimodal() {
    let o = analytic_state(StateName::RandomPhysical(21))
        .unwrap()
        .fano
        .to_vector();
    let r = record(o, covariance(2, 0.02));
    for kind in [
        ObservableKind::Chsh,
        ObservableKind::Entanglement,
        ObservableKind::Magic,
    ] {
        let scan = scan_observable(
            &r,
            &StandardObservable::new(kind),
            GridSpec::Auto {
                points: 41,
                sigmas: 3.0,
            },
        )
        .unwrap();
        let k = scan.curve.iter().position(|p| p.0 == scan.central).unwrap();
        for w in scan.curve[..=k].windows(2) {
            assert!(w[0].1 >= w[1].1 - 1e-7, "{kind}: {w:?}");
        }
        for w in scan.curve[k..].windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-7, "{kind}: {w:?}");
        }
    }
}

#[test]
fn penalty_minima_match_dense_oracle() {
    for (seed, kind) in [
        (31, ObservableKind::Chsh),
        (32, ObservableKind::Entanglement),
        (33, ObservableKind::Magic),
        (34, ObservableKind::Chsh),
        (35, ObservableKind::Entanglement),
    ] {
        let o = analytic_state(StateName::RandomPhysical(seed))
            .unwrap()
            .fano
            .to_vector();
        let r = record(o, covariance(seed, 0.03));
        let obs = StandardObservable::new(kind);
        let p = Profiler::new(&r, &obs, ProfileOptions::default()).unwrap();
        let target = p.central().value + 1.5 * p.linear_sigma();
        let point = p.profile(target, &p.default_starts(target)).unwrap();
        let oracle = dense_profile_oracle(&r, &obs, target, 400, seed).unwrap();
        assert!(
            (point.chi2 - oracle).abs() < 1e-3,
            "{kind} seed {seed}: penalty {} vs oracle {oracle}",
            point.chi2
        );
    }
}

/// Discord of the Werner state `p |Ψ−⟩⟨Ψ−| + (1 − p) I/4`.
fn werner_discord(p: f64) -> f64 {
    let xlx = |v: f64| if v > 0.0 { v * v.log2() } else { 0.0 };
    0.25 * xlx(1.0 - p) - 0.5 * xlx(1.0 + p) + 0.25 * xlx(1.0 + 3.0 * p)
}

#[test]
fn discord_profiles_leave_a_pure_state() {
    let singlet = analytic_state(StateName::BellPsiMinus)
        .unwrap()
        .fano
        .to_vector();
    let rec = record(singlet, CovarianceMatrix::identity() * 1e-4);
    // the Werner family reaches Δχ² = 1 at 1 − p = 0.01/√3, so the profile there is at most 1
    let p = 1.0 - 0.01 / 3f64.sqrt();
    let d = werner_discord(p);
    for kind in [ObservableKind::DiscordTop, ObservableKind::DiscordAntitop] {
        let obs = StandardObservable::new(kind);
        let at = profile_at(&rec, &obs, d).unwrap();
        assert!(at <= 1.0 + 1e-6, "{kind}: Δχ² = {at} at D = {d}");
        let zero = profile_at(&rec, &obs, 0.0).unwrap();
        assert!(zero.is_finite() && zero > 1e4, "{kind}: {zero}");
    }
}

#[test]
fn near_zero_discord_reports_distance_to_boundary() {
    let mut o = CoefficientVector::zeros();
    o[6] = 0.03;
    o[10] = 0.02;
    o[14] = 0.04;
    let r = record(o, CovarianceMatrix::identity() * 0.05f64.powi(2));
    let obs = StandardObservable::new(ObservableKind::DiscordTop);
    let scan = scan_observable(
        &r,
        &obs,
        GridSpec::Auto {
            points: 41,
            sigmas: 3.0,
        },
    )
    .unwrap();
    assert!(scan.at_boundary_low);
    assert_eq!(scan.ci68_low, 0.0);
    assert_eq!(scan.error_low(), scan.central);
    assert!(!scan.at_boundary_high);
    assert!(scan.error_high() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi2_is_permutation_invariant(
        seed in 0u64..1000,
        x in prop::collection::vec(-1.0f64..=1.0, 15),
        perm in Just((0..15).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let o = analytic_state(StateName::RandomPhysical(seed)).unwrap().fano.to_vector();
        let cov = covariance(seed, 0.05);
        let x = CoefficientVector::from_column_slice(&x);
        let base = chi2(&x, &record(o, cov)).unwrap();
        let po = CoefficientVector::from_fn(|i, _| o[perm[i]]);
        let px = CoefficientVector::from_fn(|i, _| x[perm[i]]);
        let pc = CovarianceMatrix::from_fn(|i, j| cov[(perm[i], perm[j])]);
        let permuted = chi2(&px, &record(po, pc)).unwrap();
        prop_assert!((base - permuted).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn significance_is_scale_invariant(seed in 0u64..1000, k in 0.1f64..20.0) {
        let o = analytic_state(StateName::RandomPhysical(seed)).unwrap().fano.to_vector();
        let r = record(o, covariance(seed, 0.03));
        let base = StandardObservable::new(ObservableKind::Chsh);
        let scaled = Scaled { inner: &base, k };
        let grid = GridSpec::Auto { points: 21, sigmas: 3.0 };
        let a = scan_observable(&r, &base, grid).unwrap();
        let b = scan_observable(&r, &scaled, grid).unwrap();
        let (sa, sb) = (a.significance.unwrap(), b.significance.unwrap());
        prop_assert_eq!(sa.side, sb.side);
        prop_assert!((sa.sigma - sb.sigma).abs() < 1e-4 * sa.sigma.max(1.0), "{} vs {}", sa.sigma, sb.sigma);
    }
}
