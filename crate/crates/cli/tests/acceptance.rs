//! One PASS/FAIL line per acceptance criterion. Always exits 0; the lines are the result.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use spincorr_cli::analysis::{AnalysisOptions, BinReportRow, ObservableResult};
use spincorr_cli::oracle::{discord_agreement, magic_agreement, steering_agreement};
use spincorr_cli::{emit_report, format_value, parse_input_path, Report, ReportFormat};
use spincorr_core::inference::{
    CovarianceMatrix, LinearObservable, ObservableKind, Significance, SignificanceSide,
    StandardObservable,
};
use spincorr_core::observables::{entanglement_marker, HierarchyFlags, MarkerValues};
use spincorr_core::oracles::{analytic_state, StateName};
use spincorr_core::{
    assemble_density, chsh_marker, classify_hierarchy, discord, magic, scan_observable,
    steering_marker, BinKinematics, CoefficientVector, DiscordOptions, FanoCoefficients, GridSpec,
    HierarchyOptions, MeasurementRecord, QuadratureSpec, Side, SpinBasis,
};

type Outcome = Result<(bool, String), String>;

struct Suite {
    passed: usize,
    total: usize,
}

impl Suite {
    fn check(&mut self, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let limit = budget
            .map(|b| format!(" (limit {:.0} s)", b.as_secs_f64()))
            .unwrap_or_default();
        println!(
            "{} {name}: {detail} [{:.2} s{limit}]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        self.total += 1;
        self.passed += ok as usize;
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn state(name: StateName) -> Result<FanoCoefficients, String> {
    analytic_state(name)
        .map(|s| s.fano)
        .map_err(|e| e.to_string())
}

fn singlet_suite() -> Outcome {
    let f = state(StateName::BellPsiMinus)?;
    let opts = DiscordOptions::default();
    let d_top = discord(&f, Side::Top, &opts)
        .map_err(|e| e.to_string())?
        .value;
    let d_anti = discord(&f, Side::Antitop, &opts)
        .map_err(|e| e.to_string())?
        .value;
    let t = steering_marker(f.c(), &QuadratureSpec::default());
    let b = chsh_marker(f.c());
    let e = entanglement_marker(&assemble_density(&f)).map_err(|e| e.to_string())?;
    let m = magic(&f);
    let checks = [
        (d_top - 1.0).abs() < 1e-6,
        (d_anti - 1.0).abs() < 1e-6,
        ((t - 4.0 * PI) / (4.0 * PI)).abs() < 1e-8,
        (b - 2.0).abs() < 1e-12,
        (e.negativity - 0.5).abs() < 1e-9,
        (e.delta_e - 3.0).abs() < 1e-9,
        m.abs() < 1e-12,
    ];
    Ok((
        checks.iter().all(|&c| c),
        format!(
            "discord {d_top:.9}/{d_anti:.9}, steering/4pi - 1 = {:.1e}, chsh {b:.15}, negativity {:.12}, delta_e {:.12}, magic {m:e}",
            t / (4.0 * PI) - 1.0,
            e.negativity,
            e.delta_e
        ),
    ))
}

fn threshold_exactness() -> Outcome {
    let c = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
    let t = steering_marker(&c, &QuadratureSpec::default());
    let rel = (t - 2.0 * PI).abs() / (2.0 * PI);
    Ok((
        rel < 1e-7,
        format!("steering of diag(1, 0, 0) off 2pi by {rel:.2e} relative"),
    ))
}

fn werner_sweep() -> Outcome {
    let opts = HierarchyOptions::default();
    let mut worst = 0.0f64;
    let mut wrong = Vec::new();
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        let r =
            classify_hierarchy(&state(StateName::Werner(p))?, &opts).map_err(|e| e.to_string())?;
        worst = worst.max((r.entanglement_marker - 3.0 * p).abs());
        let f = r.flags;
        let expected = (p > 1.0 / 3.0, p > 0.5, p > FRAC_1_SQRT_2);
        let ordered = (!f.bell_correlated || f.steerable)
            && (!f.steerable || f.entangled)
            && (!f.entangled || f.discordant);
        if (f.entangled, f.steerable, f.bell_correlated) != expected || !ordered {
            wrong.push(format!("p = {p}"));
        }
    }
    Ok((
        worst < 1e-9 && wrong.is_empty(),
        format!(
            "max |delta_e - 3p| = {worst:.1e}, flag mismatches: {}",
            if wrong.is_empty() {
                "none".to_string()
            } else {
                wrong.join(", ")
            }
        ),
    ))
}

fn discord_without_entanglement() -> Outcome {
    let opts = DiscordOptions::default();
    for seed in 0..100 {
        let f = state(StateName::RandomSeparable(seed))?;
        let e = entanglement_marker(&assemble_density(&f)).map_err(|e| e.to_string())?;
        let d = discord(&f, Side::Top, &opts)
            .map_err(|e| e.to_string())?
            .value;
        if e.negativity == 0.0 && d > 1e-3 {
            return Ok((
                true,
                format!("separable seed {seed}: discord {d:.6}, negativity 0"),
            ));
        }
    }
    Ok((
        false,
        "no separable state among seeds 0..100 has discord above 1e-3".into(),
    ))
}

fn oracle_equivalence() -> Outcome {
    let d = discord_agreement(200, 0, &DiscordOptions::default()).map_err(|e| e.to_string())?;
    let s = steering_agreement(50, 10_000_000, 0, &QuadratureSpec::default())
        .map_err(|e| e.to_string())?;
    Ok((
        d.passed() && s.passed(),
        format!("{}; {}", d.summary(), s.summary()),
    ))
}

fn magic_fixtures() -> Outcome {
    let m = magic_agreement().map_err(|e| e.to_string())?;
    Ok((m.passed(), m.summary()))
}

fn synthetic_record(
    observed: CoefficientVector,
    covariance: CovarianceMatrix,
) -> Result<MeasurementRecord, String> {
    let bin = BinKinematics::new((300.0, 400.0), (0.0, 0.4)).map_err(|e| e.to_string())?;
    MeasurementRecord::new(
        observed,
        covariance,
        bin,
        SpinBasis::helicity(),
        "synthetic",
    )
    .map_err(|e| e.to_string())
}

fn inference_check() -> Outcome {
    // correlated covariance well inside the box, so the Gaussian profile is exact
    let observed = CoefficientVector::from_fn(|k, _| 0.3 * ((k as f64) * 0.7).sin());
    let a = CovarianceMatrix::from_fn(|i, j| 0.01 * (((i * 15 + j) as f64) * 0.37).cos());
    let covariance = a * a.transpose() * 0.05 + CovarianceMatrix::identity() * 1e-4;
    let record = synthetic_record(observed, covariance)?;
    let g = CoefficientVector::from_fn(|k, _| if k >= 6 { 1.0 } else { 0.5 * (k as f64 - 2.5) });
    let center = g.dot(&observed) + 0.2;
    let sigma = (g.transpose() * covariance * g)[(0, 0)].sqrt();
    let threshold = center - 2.2 * sigma;
    let obs = LinearObservable::new("linear", g, 0.2).with_threshold(threshold);
    let scan = scan_observable(&record, &obs, GridSpec::default()).map_err(|e| e.to_string())?;

    let mut curve_err = 0.0f64;
    for &(c, d) in &scan.curve {
        let q = ((c - center) / sigma).powi(2);
        curve_err = curve_err.max((d - q).abs() / q.max(1.0));
    }
    let low_err = ((center - scan.ci68_low) / sigma - 1.0).abs();
    let high_err = ((scan.ci68_high - center) / sigma - 1.0).abs();
    let sig = scan.significance.ok_or("no significance")?;
    let sig_err = (sig.sigma - 2.2).abs();
    let linear_ok = curve_err < 1e-3 && low_err < 1e-3 && high_err < 1e-3 && sig_err < 1e-3;

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/boundary.json");
    let req = parse_input_path(&fixture).map_err(|e| e.to_string())?;
    let discord_obs = StandardObservable::new(ObservableKind::DiscordTop);
    let b = scan_observable(&req.records[0], &discord_obs, GridSpec::default())
        .map_err(|e| e.to_string())?;
    let cell = format_value(
        b.central,
        b.central - b.ci68_low,
        b.ci68_high - b.central,
        None,
    );
    let (value, rest) = cell.split_once("_{-").ok_or("cell without errors")?;
    let boundary_ok =
        b.at_boundary_low && b.ci68_low == 0.0 && rest.starts_with(&format!("{value}}}"));

    Ok((
        linear_ok && boundary_ok,
        format!(
            "linear: curve {curve_err:.1e}, ci {low_err:.1e}/{high_err:.1e} sigma, significance {:.6} vs 2.2; \
             near-zero discord {cell} (boundary low {})",
            sig.sigma, b.at_boundary_low
        ),
    ))
}

fn row(
    observable: ObservableKind,
    central: f64,
    err: (f64, f64),
    sigma: Option<f64>,
) -> Result<BinReportRow, String> {
    let record = synthetic_record(
        CoefficientVector::zeros(),
        CovarianceMatrix::identity() * 1e-4,
    )?;
    let significance = sigma.map(|s| Significance {
        threshold: observable.threshold().unwrap_or(0.0),
        sigma: s,
        side: SignificanceSide::Above,
        unattainable: s.is_infinite(),
    });
    Ok(BinReportRow {
        record,
        results: vec![ObservableResult {
            observable,
            central,
            ci_low: central - err.0,
            ci_high: central + err.1,
            at_boundary_low: false,
            at_boundary_high: false,
            threshold: observable.threshold(),
            significance,
            reference: None,
        }],
        reference_label: None,
    })
}

fn table_cell(r: BinReportRow) -> Result<String, String> {
    let report = Report {
        rows: vec![r],
        options: AnalysisOptions::default(),
    };
    let text = String::from_utf8(emit_report(&report, ReportFormat::TableText))
        .map_err(|e| e.to_string())?;
    let line = text.lines().nth(1).ok_or("table without rows")?;
    Ok(line
        .split_whitespace()
        .last()
        .unwrap_or_default()
        .to_string())
}

fn formatting_fidelity() -> Outcome {
    let cases = [
        (
            row(ObservableKind::DiscordTop, 0.003, (0.003, 0.034), None)?,
            "0.003_{-0.003}^{+0.034}",
        ),
        (
            row(ObservableKind::Steering, 8.55, (0.65, 0.65), Some(3.6))?,
            "8.55_{-0.65}^{+0.65}[3.6σ]",
        ),
        (
            row(ObservableKind::Steering, 8.55, (0.65, 0.65), Some(2.99))?,
            "8.55_{-0.65}^{+0.65}",
        ),
        (
            row(ObservableKind::Entanglement, 2.03, (0.11, 0.11), Some(9.3))?,
            "2.03_{-0.11}^{+0.11}[>5σ]",
        ),
        (
            row(
                ObservableKind::Entanglement,
                2.03,
                (0.11, 0.11),
                Some(f64::INFINITY),
            )?,
            "2.03_{-0.11}^{+0.11}[>5σ]",
        ),
    ];
    let mut bad = Vec::new();
    let n = cases.len();
    for (r, expected) in cases {
        let got = table_cell(r)?;
        if got != expected {
            bad.push(format!("{got} != {expected}"));
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{n} cells rendered as expected")
        } else {
            bad.join("; ")
        },
    ))
}

fn hierarchy_regression() -> Outcome {
    let m = MarkerValues {
        discord: 0.424,
        delta_e: 2.03,
        steering: 8.55,
        chsh: 0.99,
        magic: 0.561,
    };
    let flags =
        HierarchyFlags::from_markers(&m, HierarchyOptions::default().threshold_tol).as_tuple();
    Ok((
        flags == (true, true, true, false, true),
        format!("(discordant, entangled, steerable, bell, magical) = {flags:?}"),
    ))
}

fn main() {
    let mut suite = Suite {
        passed: 0,
        total: 0,
    };
    suite.check("singlet suite", secs(5), singlet_suite);
    suite.check("threshold exactness", secs(1), threshold_exactness);
    suite.check("werner sweep", secs(10), werner_sweep);
    suite.check(
        "discord without entanglement",
        secs(10),
        discord_without_entanglement,
    );
    suite.check("oracle equivalence", secs(300), oracle_equivalence);
    suite.check("magic fixtures", None, magic_fixtures);
    suite.check("inference analytic check", None, inference_check);
    suite.check("formatting fidelity", None, formatting_fidelity);
    suite.check("hierarchy regression", None, hierarchy_regression);
    println!(
        "acceptance: {}/{} criteria passed",
        suite.passed, suite.total
    );
}
