use rayon::prelude::*;
use spincorr_core::inference::{
    scan_observable_with, GridSpec, MeasurementRecord, ObservableKind, ProfileOptions, ScanResult,
    Significance, StandardObservable,
};
use spincorr_core::{BinKinematics, DiscordOptions, QuadratureSpec, SpinBasis};
use thiserror::Error;

use crate::input::{AnalysisRequest, InputError, OptionsInput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub discord: DiscordOptions,
    pub quadrature: QuadratureSpec,
    pub grid: GridSpec,
    pub profile: ProfileOptions,
    /// Worker threads for the bins; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            discord: StandardObservable::new(ObservableKind::DiscordTop).discord_options(),
            quadrature: QuadratureSpec::default(),
            grid: GridSpec::default(),
            profile: ProfileOptions::default(),
            threads: None,
        }
    }
}

impl AnalysisOptions {
    pub fn from_input(input: OptionsInput) -> Result<Self, InputError> {
        let mut o = AnalysisOptions::default();
        if input.scan_points.is_some() || input.scan_sigmas.is_some() {
            let points = input.scan_points.unwrap_or(201);
            let sigmas = input.scan_sigmas.unwrap_or(5.0);
            if points < 3 || !(sigmas > 0.0) {
                return Err(InputError::Invalid(format!(
                    "options: scan needs at least 3 points and positive sigmas, got {points} and {sigmas}"
                )));
            }
            o.grid = GridSpec::Auto { points, sigmas };
        }
        if let Some(n) = input.polar_order {
            o.quadrature =
                QuadratureSpec::new(n).map_err(|e| InputError::Invalid(format!("options: {e}")))?;
        }
        if let Some(n) = input.discord_seeds {
            if n == 0 {
                return Err(InputError::Invalid(
                    "options: discord_seeds must be positive".into(),
                ));
            }
            o.discord.seeds = n;
            o.discord.refined_seeds = o.discord.refined_seeds.min(n);
        }
        if let Some(t) = input.discord_tolerance {
            if !(t > 0.0) {
                return Err(InputError::Invalid(format!(
                    "options: discord_tolerance must be positive, got {t}"
                )));
            }
            o.discord.xtol = t;
        }
        Ok(o)
    }

    pub fn observable(&self, kind: ObservableKind) -> StandardObservable {
        StandardObservable::with_options(kind, self.discord, self.quadrature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableResult {
    pub observable: ObservableKind,
    pub central: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub at_boundary_low: bool,
    pub at_boundary_high: bool,
    pub threshold: Option<f64>,
    pub significance: Option<Significance>,
    pub reference: Option<f64>,
}

impl ObservableResult {
    pub fn from_scan(
        observable: ObservableKind,
        scan: &ScanResult,
        reference: Option<f64>,
    ) -> Self {
        ObservableResult {
            observable,
            central: scan.central,
            ci_low: scan.ci68_low,
            ci_high: scan.ci68_high,
            at_boundary_low: scan.at_boundary_low,
            at_boundary_high: scan.at_boundary_high,
            threshold: observable.threshold(),
            significance: scan.significance,
            reference,
        }
    }

    pub fn error_low(&self) -> f64 {
        self.central - self.ci_low
    }

    pub fn error_high(&self) -> f64 {
        self.ci_high - self.central
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinReportRow {
    pub record: MeasurementRecord,
    pub results: Vec<ObservableResult>,
    /// Name of the reference predictions, when the input carried any.
    pub reference_label: Option<String>,
}

impl BinReportRow {
    pub fn label(&self) -> &str {
        &self.record.label
    }

    pub fn bin(&self) -> &BinKinematics {
        &self.record.bin
    }

    pub fn basis(&self) -> &SpinBasis {
        &self.record.basis
    }
}

#[derive(Debug, Error)]
#[error("bin `{label}`, observable `{observable}`: {source}")]
pub struct AnalysisError {
    pub label: String,
    pub observable: ObservableKind,
    #[source]
    pub source: spincorr_core::Error,
}

fn analyze_bin(req: &AnalysisRequest, index: usize) -> Result<BinReportRow, AnalysisError> {
    let record = &req.records[index];
    let refs = req.references.values.get(index);
    let mut results = Vec::with_capacity(req.observables.len());
    for &kind in &req.observables {
        let obs = req.options.observable(kind);
        let scan = scan_observable_with(record, &obs, req.options.grid, req.options.profile)
            .map_err(|source| AnalysisError {
                label: record.label.clone(),
                observable: kind,
                source,
            })?;
        results.push(ObservableResult::from_scan(
            kind,
            &scan,
            refs.and_then(|r| r.get(&kind).copied()),
        ));
    }
    let has_refs = req.references.values.iter().any(|r| !r.is_empty());
    Ok(BinReportRow {
        record: record.clone(),
        results,
        reference_label: has_refs.then(|| req.references.label.clone()),
    })
}

/// Scans every requested observable in every bin. Bins run in parallel; rows come
/// back in input order, and the first failing bin in input order is reported.
pub fn run_analysis(req: &AnalysisRequest) -> Result<Vec<BinReportRow>, AnalysisError> {
    let work = || -> Vec<Result<BinReportRow, AnalysisError>> {
        (0..req.records.len())
            .into_par_iter()
            .map(|i| analyze_bin(req, i))
            .collect()
    };
    let rows = match req.options.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    };
    rows.into_iter().collect()
}
