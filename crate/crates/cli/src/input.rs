//! Input documents: a JSON list of bins, or an object with `bins` plus optional
//! `observables`, `options` and `reference_label`.

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spincorr_core::inference::{CovarianceMatrix, MeasurementRecord, ObservableKind};
use spincorr_core::{BinKinematics, CoefficientVector, SpinBasis};
use thiserror::Error;

use crate::analysis::AnalysisOptions;

/// Relative asymmetry above which symmetrization is reported.
pub const SYMMETRIZATION_WARN: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        message: String,
        line: usize,
        column: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] spincorr_core::Error),
}

impl InputError {
    pub fn is_missing_file(&self) -> bool {
        matches!(self, InputError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound)
    }
}

/// Coefficients as the canonical 15-list or as a map keyed by component name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientsInput {
    List(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

/// Covariance as 225 row-major numbers or as 15 rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceInput {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinInput {
    pub label: String,
    pub basis: String,
    pub mtt_gev: [f64; 2],
    pub abs_cos_theta: [f64; 2],
    pub coefficients: CoefficientsInput,
    pub covariance: CovarianceInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<BTreeMap<String, f64>>,
    /// Written by the structured report; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_sigmas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discord_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discord_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsInput>,
    pub bins: Vec<BinInput>,
}

/// Per-bin predictions to show next to the measurements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct References {
    pub label: String,
    pub values: Vec<BTreeMap<ObservableKind, f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRequest {
    pub records: Vec<MeasurementRecord>,
    pub observables: Vec<ObservableKind>,
    pub options: AnalysisOptions,
    pub references: References,
    pub warnings: Vec<String>,
}

pub fn parse_input_path(path: &Path) -> Result<AnalysisRequest, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_input(&text)
}

pub fn parse_input(text: &str) -> Result<AnalysisRequest, InputError> {
    let doc = parse_document(text)?;
    request_from_document(&doc)
}

pub fn parse_document(text: &str) -> Result<InputDocument, InputError> {
    let schema = |e: serde_json::Error| InputError::Schema {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    };
    if text.trim_start().starts_with('[') {
        let bins: Vec<BinInput> = serde_json::from_str(text).map_err(schema)?;
        Ok(InputDocument {
            reference_label: None,
            observables: None,
            options: None,
            bins,
        })
    } else {
        serde_json::from_str(text).map_err(schema)
    }
}

fn parse_basis(name: &str, label: &str) -> Result<SpinBasis, InputError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "helicity" => Ok(SpinBasis::helicity()),
        "beam" => Ok(SpinBasis::beam()),
        other => Err(InputError::Invalid(format!(
            "bin `{label}`: basis `{other}` is not one of helicity, beam"
        ))),
    }
}

/// Canonical index of a named component: `P1`, `Pbar2`, `C13`, or with axis labels
/// of the basis, `P_n`, `Pbar_k`, `C_rk`.
fn component_index(key: &str, basis: &SpinBasis) -> Option<usize> {
    let axis = |s: &str| -> Option<usize> {
        if let Ok(k) = s.parse::<usize>() {
            return (1..=3).contains(&k).then(|| k - 1);
        }
        basis
            .axis_labels()
            .iter()
            .position(|a| a.eq_ignore_ascii_case(s))
    };
    let k = key.trim();
    let lower = k.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("pbar") {
        return axis(rest.trim_start_matches('_')).map(|i| 3 + i);
    }
    if let Some(rest) = lower.strip_prefix('p') {
        return axis(rest.trim_start_matches('_'));
    }
    if let Some(rest) = lower.strip_prefix('c') {
        let rest = rest.trim_start_matches('_');
        let chars: Vec<char> = rest.chars().collect();
        if chars.len() == 2 {
            let i = axis(&chars[0].to_string())?;
            let j = axis(&chars[1].to_string())?;
            return Some(6 + 3 * i + j);
        }
    }
    None
}

fn coefficient_vector(
    input: &CoefficientsInput,
    basis: &SpinBasis,
    label: &str,
) -> Result<CoefficientVector, InputError> {
    match input {
        CoefficientsInput::List(v) => {
            if v.len() != 15 {
                return Err(InputError::Invalid(format!(
                    "bin `{label}`: coefficients has {} entries, expected 15",
                    v.len()
                )));
            }
            Ok(CoefficientVector::from_column_slice(v))
        }
        CoefficientsInput::Named(map) => {
            let mut x = CoefficientVector::zeros();
            let mut seen = [false; 15];
            for (key, &v) in map {
                let k = component_index(key, basis).ok_or_else(|| {
                    InputError::Invalid(format!("bin `{label}`: unknown coefficient name `{key}`"))
                })?;
                if seen[k] {
                    return Err(InputError::Invalid(format!(
                        "bin `{label}`: coefficient `{key}` given twice"
                    )));
                }
                seen[k] = true;
                x[k] = v;
            }
            if let Some(k) = seen.iter().position(|s| !s) {
                return Err(InputError::Invalid(format!(
                    "bin `{label}`: coefficient {} missing",
                    canonical_name(k)
                )));
            }
            Ok(x)
        }
    }
}

/// `P1..P3`, `Pbar1..Pbar3`, `C11..C33`.
pub fn canonical_name(k: usize) -> String {
    match k {
        0..=2 => format!("P{}", k + 1),
        3..=5 => format!("Pbar{}", k - 2),
        _ => format!("C{}{}", (k - 6) / 3 + 1, (k - 6) % 3 + 1),
    }
}

fn covariance_matrix(input: &CovarianceInput, label: &str) -> Result<CovarianceMatrix, InputError> {
    match input {
        CovarianceInput::Flat(v) => {
            if v.len() != 225 {
                return Err(InputError::Invalid(format!(
                    "bin `{label}`: covariance has {} entries, expected 225 (15×15 row-major)",
                    v.len()
                )));
            }
            Ok(CovarianceMatrix::from_row_slice(v))
        }
        CovarianceInput::Rows(rows) => {
            let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
            if rows.len() != 15 || rows.iter().any(|r| r.len() != 15) {
                return Err(InputError::Invalid(format!(
                    "bin `{label}`: covariance block is {}×{cols}, expected 15×15",
                    rows.len()
                )));
            }
            Ok(CovarianceMatrix::from_fn(|i, j| rows[i][j]))
        }
    }
}

pub fn request_from_document(doc: &InputDocument) -> Result<AnalysisRequest, InputError> {
    if doc.bins.is_empty() {
        return Err(InputError::Invalid("input has no bins".into()));
    }
    let observables = match &doc.observables {
        None => ObservableKind::ALL.to_vec(),
        Some(names) => parse_observable_list(names.iter().map(String::as_str))?,
    };
    let options = AnalysisOptions::from_input(doc.options.as_ref().cloned().unwrap_or_default())?;

    let mut labels = HashSet::new();
    let mut records = Vec::with_capacity(doc.bins.len());
    let mut warnings = Vec::new();
    let mut refs = Vec::with_capacity(doc.bins.len());
    for bin in &doc.bins {
        let label = bin.label.as_str();
        if !labels.insert(label) {
            return Err(InputError::Invalid(format!(
                "duplicate bin label `{label}`"
            )));
        }
        let basis = parse_basis(&bin.basis, label)?;
        let kin = BinKinematics::new(
            (bin.mtt_gev[0], bin.mtt_gev[1]),
            (bin.abs_cos_theta[0], bin.abs_cos_theta[1]),
        )
        .map_err(|e| InputError::Invalid(format!("bin `{label}`: {e}")))?;
        let x = coefficient_vector(&bin.coefficients, &basis, label)?;
        let mut cov = covariance_matrix(&bin.covariance, label)?;
        let scale = cov.amax();
        let asym = (cov - cov.transpose()).amax();
        if asym > 0.0 {
            if asym > SYMMETRIZATION_WARN * scale {
                warnings.push(format!(
                    "bin `{label}`: covariance symmetrized (max |U - Uᵀ| = {asym:e}, {:e} relative)",
                    asym / scale
                ));
            }
            cov = (cov + cov.transpose()) * 0.5;
        }
        records.push(MeasurementRecord::new(x, cov, kin, basis, label)?);

        let mut values = BTreeMap::new();
        for (name, &v) in bin.reference.iter().flatten() {
            let kind = ObservableKind::from_name(name).ok_or_else(|| {
                InputError::Invalid(format!(
                    "bin `{label}`: reference for unknown observable `{name}`"
                ))
            })?;
            values.insert(kind, v);
        }
        refs.push(values);
    }
    Ok(AnalysisRequest {
        records,
        observables,
        options,
        references: References {
            label: doc
                .reference_label
                .clone()
                .unwrap_or_else(|| "reference".into()),
            values: refs,
        },
        warnings,
    })
}

/// Parses observable names, keeping the given order and dropping repeats.
pub fn parse_observable_list<'a>(
    names: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<ObservableKind>, InputError> {
    let mut out = Vec::new();
    for name in names {
        let kind = ObservableKind::from_name(name)
            .ok_or_else(|| InputError::Invalid(format!("unknown observable `{name}`")))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(InputError::Invalid("no observables requested".into()));
    }
    Ok(out)
}

/// Input-schema view of a record, as written by the structured report.
pub fn bin_input(
    record: &MeasurementRecord,
    reference: &BTreeMap<ObservableKind, f64>,
) -> BinInput {
    BinInput {
        label: record.label.clone(),
        basis: record.basis.name().to_string(),
        mtt_gev: [record.bin.mtt_range.0, record.bin.mtt_range.1],
        abs_cos_theta: [
            record.bin.abs_costheta_range.0,
            record.bin.abs_costheta_range.1,
        ],
        coefficients: CoefficientsInput::List(record.observed.iter().copied().collect()),
        covariance: CovarianceInput::Rows(
            (0..15)
                .map(|i| record.covariance.row(i).iter().copied().collect())
                .collect(),
        ),
        reference: (!reference.is_empty()).then(|| {
            reference
                .iter()
                .map(|(k, v)| (k.name().to_string(), *v))
                .collect()
        }),
        results: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_cov() -> Vec<f64> {
        (0..225)
            .map(|k| if k % 16 == 0 { 1.0 } else { 0.0 })
            .collect()
    }

    fn singlet_bin(label: &str) -> serde_json::Value {
        let mut c = vec![0.0; 15];
        for k in [6, 10, 14] {
            c[k] = -1.0;
        }
        serde_json::json!({
            "label": label,
            "basis": "helicity",
            "mtt_gev": [300.0, 400.0],
            "abs_cos_theta": [0.0, 0.4],
            "coefficients": c,
            "covariance": identity_cov(),
        })
    }

    #[test]
    fn minimal_file() {
        let text = serde_json::json!([singlet_bin("a")]).to_string();
        let req = parse_input(&text).unwrap();
        assert_eq!(req.records.len(), 1);
        assert_eq!(req.records[0].observed[14], -1.0);
        assert_eq!(req.observables, ObservableKind::ALL.to_vec());
        assert!(req.warnings.is_empty());
    }

    #[test]
    fn small_covariance_block_is_named() {
        let mut bin = singlet_bin("a");
        bin["covariance"] = serde_json::json!(vec![vec![0.0; 14]; 14]);
        let err = parse_input(&serde_json::json!([bin]).to_string()).unwrap_err();
        assert!(err.to_string().contains("14×14"), "{err}");
    }

    #[test]
    fn asymmetric_covariance_is_symmetrized_with_warning() {
        let mut cov = identity_cov();
        cov[1] = 1e-6;
        let mut bin = singlet_bin("a");
        bin["covariance"] = serde_json::json!(cov);
        let req = parse_input(&serde_json::json!([bin]).to_string()).unwrap();
        assert_eq!(req.warnings.len(), 1);
        let u = &req.records[0].covariance;
        assert_eq!(u[(0, 1)], 5e-7);
        assert_eq!(u[(1, 0)], 5e-7);
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = parse_input("{\"bins\": [{\"label\": \"a\", \"basis\": 3}]}").unwrap_err();
        match err {
            InputError::Schema { line, column, .. } => assert!(line == 1 && column > 0),
            other => panic!("{other}"),
        }
        let err = parse_input("[{\"label\": \"a\", \"colour\": 1}]").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn duplicate_labels_and_negative_covariance() {
        let text = serde_json::json!([singlet_bin("a"), singlet_bin("a")]).to_string();
        assert!(parse_input(&text)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let mut cov = identity_cov();
        cov[0] = -1.0;
        let mut bin = singlet_bin("a");
        bin["covariance"] = serde_json::json!(cov);
        assert!(matches!(
            parse_input(&serde_json::json!([bin]).to_string()),
            Err(InputError::Core(spincorr_core::Error::Covariance { .. }))
        ));
    }

    #[test]
    fn named_coefficients_use_basis_axes() {
        let mut map = serde_json::Map::new();
        for k in 0..15 {
            map.insert(canonical_name(k), serde_json::json!(0.0));
        }
        map.remove("C33");
        map.insert("C_kk".into(), serde_json::json!(-0.5));
        map.remove("P2");
        map.insert("P_r".into(), serde_json::json!(0.1));
        let mut bin = singlet_bin("a");
        bin["coefficients"] = serde_json::Value::Object(map);
        let req = parse_input(&serde_json::json!([bin]).to_string()).unwrap();
        assert_eq!(req.records[0].observed[14], -0.5);
        assert_eq!(req.records[0].observed[1], 0.1);
    }

    #[test]
    fn names_round_trip() {
        let basis = SpinBasis::helicity();
        for k in 0..15 {
            assert_eq!(component_index(&canonical_name(k), &basis), Some(k));
        }
        assert_eq!(component_index("Pbar_k", &basis), Some(5));
        assert_eq!(component_index("C_nr", &basis), Some(7));
        assert_eq!(component_index("Q1", &basis), None);
    }

    #[test]
    fn references_and_observables() {
        let mut bin = singlet_bin("a");
        bin["reference"] = serde_json::json!({"steering": 12.0, "chsh": 2.0});
        let text = serde_json::json!({
            "reference_label": "generator",
            "observables": ["chsh", "steering", "chsh"],
            "bins": [bin],
        })
        .to_string();
        let req = parse_input(&text).unwrap();
        assert_eq!(
            req.observables,
            vec![ObservableKind::Chsh, ObservableKind::Steering]
        );
        assert_eq!(req.references.label, "generator");
        assert_eq!(req.references.values[0][&ObservableKind::Steering], 12.0);
    }
}
