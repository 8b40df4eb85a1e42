//! Report emission: aligned text tables, CSV, round-trippable JSON and plot columns.

use std::fmt::Write as _;

use serde::Serialize;
use spincorr_core::inference::{GridSpec, Significance, SignificanceSide};

use crate::analysis::{AnalysisOptions, BinReportRow, ObservableResult};
use crate::input::{bin_input, InputDocument, OptionsInput};

/// Smallest significance shown in brackets in the text table.
pub const BRACKET_MIN_SIGMA: f64 = 3.0;
/// Significances above this are shown as `>5σ`.
pub const SATURATION_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TableText,
    Csv,
    Structured,
    PlotData,
}

impl ReportFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "table" | "table-text" | "text" => Some(ReportFormat::TableText),
            "csv" => Some(ReportFormat::Csv),
            "json" | "structured" => Some(ReportFormat::Structured),
            "plot" | "plot-data" => Some(ReportFormat::PlotData),
            _ => None,
        }
    }
}

/// Rows of one analysis together with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<BinReportRow>,
    pub options: AnalysisOptions,
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::TableText => table_text(&report.rows).into_bytes(),
        ReportFormat::Csv => csv_report(&report.rows),
        ReportFormat::Structured => structured(report).into_bytes(),
        ReportFormat::PlotData => plot_data(&report.rows).into_bytes(),
    }
}

/// Decimal places that keep two significant digits of the larger error.
pub fn decimals_for(err_low: f64, err_high: f64) -> usize {
    let e = err_low.abs().max(err_high.abs());
    if !(e > 0.0) || !e.is_finite() {
        return 4;
    }
    (1 - e.log10().floor() as i64).max(0) as usize
}

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // rounding a tiny negative number must not print as "-0.00"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Bracketed significance, shown only for a best fit above its threshold by at least 3σ.
pub fn significance_bracket(s: Option<&Significance>) -> String {
    match s {
        Some(s) if s.side == SignificanceSide::Above => {
            if s.unattainable || s.sigma > SATURATION_SIGMA {
                format!("[>{SATURATION_SIGMA:.0}σ]")
            } else if s.sigma >= BRACKET_MIN_SIGMA {
                format!("[{:.1}σ]", s.sigma)
            } else {
                String::new()
            }
        }
        _ => String::new(),
    }
}

/// `central_{-lo}^{+hi}[Nσ]` with both errors at the precision of the larger one.
pub fn format_value(
    central: f64,
    err_low: f64,
    err_high: f64,
    significance: Option<&Significance>,
) -> String {
    let d = decimals_for(err_low, err_high);
    format!(
        "{}_{{-{}}}^{{+{}}}{}",
        fixed(central, d),
        fixed(err_low.abs(), d),
        fixed(err_high.abs(), d),
        significance_bracket(significance)
    )
}

fn cell(r: &ObservableResult) -> String {
    format_value(
        r.central,
        r.error_low(),
        r.error_high(),
        r.significance.as_ref(),
    )
}

fn range(r: (f64, f64)) -> String {
    format!("{}-{}", r.0, r.1)
}

fn table_text(rows: &[BinReportRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut header: Vec<String> = ["bin", "mtt [GeV]", "|cos theta|", "basis"]
        .map(String::from)
        .to_vec();
    header.extend(
        first
            .results
            .iter()
            .map(|r| r.observable.name().to_string()),
    );

    let mut body: Vec<Vec<String>> = Vec::new();
    for row in rows {
        let mut line = vec![
            row.label().to_string(),
            range(row.bin().mtt_range),
            range(row.bin().abs_costheta_range),
            row.basis().name().to_string(),
        ];
        line.extend(row.results.iter().map(cell));
        body.push(line);
        if let Some(label) = &row.reference_label {
            let mut line = vec![
                format!("  {label}"),
                String::new(),
                String::new(),
                String::new(),
            ];
            line.extend(row.results.iter().map(|r| match r.reference {
                Some(v) => fixed(v, decimals_for(r.error_low(), r.error_high())),
                None => "-".to_string(),
            }));
            body.push(line);
        }
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|k| {
            std::iter::once(&header)
                .chain(&body)
                .map(|l| l.get(k).map_or(0, |s| s.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        v.to_string()
    }
}

fn opt_number(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

const CSV_HEADER: [&str; 19] = [
    "label",
    "basis",
    "mtt_lo",
    "mtt_hi",
    "abs_cos_lo",
    "abs_cos_hi",
    "observable",
    "central",
    "ci_low",
    "ci_high",
    "err_low",
    "err_high",
    "at_boundary_low",
    "at_boundary_high",
    "threshold",
    "significance",
    "significance_side",
    "unattainable",
    "reference",
];

fn csv_report(rows: &[BinReportRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut write = || -> csv::Result<()> {
        w.write_record(CSV_HEADER)?;
        for row in rows {
            for r in &row.results {
                let s = r.significance.as_ref();
                w.write_record([
                    row.label().to_string(),
                    row.basis().name().to_string(),
                    number(row.bin().mtt_range.0),
                    number(row.bin().mtt_range.1),
                    number(row.bin().abs_costheta_range.0),
                    number(row.bin().abs_costheta_range.1),
                    r.observable.name().to_string(),
                    number(r.central),
                    number(r.ci_low),
                    number(r.ci_high),
                    number(r.error_low()),
                    number(r.error_high()),
                    r.at_boundary_low.to_string(),
                    r.at_boundary_high.to_string(),
                    opt_number(r.threshold),
                    opt_number(s.map(|s| s.sigma)),
                    s.map(|s| side_name(s.side).to_string()).unwrap_or_default(),
                    s.map(|s| s.unattainable.to_string()).unwrap_or_default(),
                    opt_number(r.reference),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write().expect("writing CSV to memory cannot fail");
    w.into_inner().expect("in-memory writer")
}

fn side_name(side: SignificanceSide) -> &'static str {
    match side {
        SignificanceSide::Above => "above",
        SignificanceSide::Below => "below",
    }
}

#[derive(Serialize)]
struct SignificanceJson {
    threshold: f64,
    /// `null` when the threshold is unattainable.
    sigma: Option<f64>,
    side: SignificanceSide,
    unattainable: bool,
}

#[derive(Serialize)]
struct ResultJson {
    observable: String,
    central: f64,
    ci_low: f64,
    ci_high: f64,
    at_boundary_low: bool,
    at_boundary_high: bool,
    threshold: Option<f64>,
    significance: Option<SignificanceJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
}

impl From<&ObservableResult> for ResultJson {
    fn from(r: &ObservableResult) -> Self {
        ResultJson {
            observable: r.observable.name().to_string(),
            central: r.central,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            at_boundary_low: r.at_boundary_low,
            at_boundary_high: r.at_boundary_high,
            threshold: r.threshold,
            significance: r.significance.map(|s| SignificanceJson {
                threshold: s.threshold,
                sigma: s.sigma.is_finite().then_some(s.sigma),
                side: s.side,
                unattainable: s.unattainable,
            }),
            reference: r.reference,
        }
    }
}

impl AnalysisOptions {
    /// Input-schema view of the settings read from a document.
    pub fn to_input(&self) -> OptionsInput {
        let (scan_points, scan_sigmas) = match self.grid {
            GridSpec::Auto { points, sigmas } => (Some(points), Some(sigmas)),
            GridSpec::Explicit { .. } => (None, None),
        };
        OptionsInput {
            scan_points,
            scan_sigmas,
            polar_order: Some(self.quadrature.polar_order()),
            discord_seeds: Some(self.discord.seeds),
            discord_tolerance: Some(self.discord.xtol),
        }
    }
}

/// The input document with a `results` list attached to every bin; it parses back to
/// the same request.
fn structured(report: &Report) -> String {
    let rows = &report.rows;
    let reference_label = rows.iter().find_map(|r| r.reference_label.clone());
    let observables = rows.first().map(|r| {
        r.results
            .iter()
            .map(|x| x.observable.name().to_string())
            .collect()
    });
    let bins = rows
        .iter()
        .map(|row| {
            let refs = row
                .results
                .iter()
                .filter_map(|r| r.reference.map(|v| (r.observable, v)))
                .collect();
            let mut bin = bin_input(&row.record, &refs);
            let results: Vec<ResultJson> = row.results.iter().map(ResultJson::from).collect();
            bin.results = Some(serde_json::to_value(results).expect("results serialize"));
            bin
        })
        .collect();
    let doc = InputDocument {
        reference_label,
        observables,
        options: Some(report.options.to_input()),
        bins,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

/// One whitespace-separated block per observable, blocks separated by two blank lines.
/// Columns: bin index, mtt midpoint, |cos theta| midpoint, central, errors, reference,
/// bin edges and the label last.
fn plot_data(rows: &[BinReportRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    for (k, obs) in first.results.iter().map(|r| r.observable).enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# observable {obs}");
        if let Some(t) = obs.threshold() {
            let _ = writeln!(out, "# threshold {}", number(t));
        }
        if let Some(label) = rows.iter().find_map(|r| r.reference_label.as_deref()) {
            let _ = writeln!(out, "# reference {label}");
        }
        let _ = writeln!(
            out,
            "# index mtt_mid abs_cos_mid central err_low err_high reference mtt_lo mtt_hi abs_cos_lo abs_cos_hi label"
        );
        for (i, row) in rows.iter().enumerate() {
            let Some(r) = row.results.iter().find(|r| r.observable == obs) else {
                continue;
            };
            let (m, c) = (row.bin().mtt_range, row.bin().abs_costheta_range);
            let _ = writeln!(
                out,
                "{i} {} {} {} {} {} {} {} {} {} {} {}",
                number(0.5 * (m.0 + m.1)),
                number(0.5 * (c.0 + c.1)),
                number(r.central),
                number(r.error_low()),
                number(r.error_high()),
                number(r.reference.unwrap_or(f64::NAN)),
                number(m.0),
                number(m.1),
                number(c.0),
                number(c.1),
                row.label()
            );
        }
    }
    out
}
