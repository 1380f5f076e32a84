//! Declarative description of the encounter table.
//!
//! Every other module is driven by a [`DatasetSchema`]: which columns are
//! categorical or continuous, which carry preprocessing directives, and which
//! identify patients, encounters and the target.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::RawTable;

/// Synthetic category that stands in for missing and unseen values.
pub const NAN_CATEGORY: &str = "nan";

/// Schema for the UCI "Diabetes 130-US hospitals" encounter table.
pub const UCI_DIABETES_SCHEMA: &str = include_str!("../data/uci_diabetes.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Continuous,
    Identifier,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    /// Replace x by ln(x + 1) before standardization.
    Log1p,
    /// Exclude from the model inputs.
    Drop,
    /// Dosage-change column (Up/Down/Steady/No), relabeled to Yes/No and counted into `count_meds`.
    MedicationLevel,
    /// ICD9 diagnosis code column.
    DiagnosisCode,
    /// Visit counter summed into `service_utilization`.
    VisitCount,
    /// Column computed by the pipeline rather than read from input.
    Engineered,
    /// HbA1c result, relabeled to normal / abnormal / not tested.
    A1cResult,
    /// Glucose serum test result, relabeled to normal / abnormal / not tested.
    GlucoseSerum,
}

/// Generator hint for [`crate::ingest::generate_synthetic`].
///
/// `values` draws from a finite domain (optionally weighted); otherwise a
/// Poisson count with rate `mean` is drawn. `minority_*` fields override the
/// distribution for rows of the positive class, which is how signal is planted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthHint {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub minority_weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minority_mean: Option<f64>,
    #[serde(default)]
    pub missing_rate: f64,
}

fn default_missing_marker() -> String {
    "?".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered categories; empty until [`build_vocabularies`] runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
    #[serde(default = "default_missing_marker")]
    pub missing_marker: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub directives: BTreeSet<Directive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthHint>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            vocabulary: Vec::new(),
            missing_marker: default_missing_marker(),
            directives: BTreeSet::new(),
            synth: None,
        }
    }

    pub fn with_directive(mut self, d: Directive) -> Self {
        self.directives.insert(d);
        self
    }

    pub fn has(&self, d: Directive) -> bool {
        self.directives.contains(&d)
    }

    pub fn cardinality(&self) -> usize {
        self.vocabulary.len()
    }

    /// Index of `value` in the vocabulary; unseen values map to the `nan` slot.
    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.vocabulary
            .iter()
            .position(|v| v == value)
            .or_else(|| self.vocabulary.iter().position(|v| v == NAN_CATEGORY))
    }

    /// Columns that are fed to the network.
    pub fn is_model_input(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical | ColumnKind::Continuous) && !self.has(Directive::Drop)
    }

    pub fn is_missing(&self, cell: &str) -> bool {
        cell == self.missing_marker
    }
}

/// Names of the two engineered features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineeredColumns {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_utilization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_meds: Option<String>,
}

impl Default for EngineeredColumns {
    fn default() -> Self {
        Self {
            service_utilization: Some("service_utilization".into()),
            count_meds: Some("count_meds".into()),
        }
    }
}

fn default_disposition_column() -> String {
    "discharge_disposition_id".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
    pub patient_id: String,
    pub encounter_id: String,
    pub target: String,
    pub diagnosis_columns: Vec<String>,
    #[serde(default = "default_disposition_column")]
    pub disposition_column: String,
    #[serde(default)]
    pub death_disposition_codes: Vec<String>,
    #[serde(default)]
    pub engineered: EngineeredColumns,
}

/// Reads and validates a schema file.
pub fn load_schema(path: impl AsRef<Path>) -> Result<DatasetSchema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetSchema::from_json(&text)
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: DatasetSchema =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("parse error: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    /// The bundled schema for the UCI diabetic encounter dataset.
    pub fn uci_diabetes() -> Self {
        Self::from_json(UCI_DIABETES_SCHEMA).expect("bundled schema is valid")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn hash_hex(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {}", c.name)));
            }
            validate_column(c)?;
        }

        let targets: Vec<_> = self.columns.iter().filter(|c| c.kind == ColumnKind::Target).collect();
        match targets.as_slice() {
            [] => return Err(Error::Schema("no target column".into())),
            [t] if t.name == self.target => {}
            [t] => {
                return Err(Error::Schema(format!(
                    "target is declared as '{}' but column '{}' has kind target",
                    self.target, t.name
                )))
            }
            _ => return Err(Error::Schema("more than one target column".into())),
        }

        for (what, name) in [("patient_id", &self.patient_id), ("encounter_id", &self.encounter_id)] {
            let c = self.require(name, what)?;
            if c.kind != ColumnKind::Identifier {
                return Err(Error::Schema(format!("{what} column {name} must have kind identifier")));
            }
        }

        if self.diagnosis_columns.len() != 3 {
            return Err(Error::Schema(format!(
                "expected 3 diagnosis columns, found {}",
                self.diagnosis_columns.len()
            )));
        }
        for d in &self.diagnosis_columns {
            self.require(d, "diagnosis_columns")?;
        }
        if !self.death_disposition_codes.is_empty() {
            self.require(&self.disposition_column, "disposition_column")?;
        }

        for name in [&self.engineered.service_utilization, &self.engineered.count_meds]
            .into_iter()
            .flatten()
        {
            let c = self.require(name, "engineered")?;
            if c.kind != ColumnKind::Continuous || !c.has(Directive::Engineered) {
                return Err(Error::Schema(format!(
                    "engineered column {name} must be continuous with the engineered directive"
                )));
            }
        }
        for c in &self.columns {
            if c.has(Directive::Engineered)
                && self.engineered.service_utilization.as_deref() != Some(&c.name)
                && self.engineered.count_meds.as_deref() != Some(&c.name)
            {
                return Err(Error::Schema(format!(
                    "column {} is marked engineered but no feature produces it",
                    c.name
                )));
            }
        }
        Ok(())
    }

    fn require(&self, name: &str, what: &str) -> Result<&ColumnSpec> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("{what} references unknown column {name}")))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut ColumnSpec> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    /// Columns expected in an input file (everything except engineered ones).
    pub fn input_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| !c.has(Directive::Engineered))
    }

    pub fn categorical_inputs(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical && c.is_model_input())
    }

    pub fn continuous_inputs(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous && c.is_model_input())
    }

    pub fn with_directive(&self, d: Directive) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| c.has(d))
    }

    /// Marks the named columns with the `drop` directive. The specs stay in the
    /// schema so references (diagnosis columns, engineered names) remain valid.
    pub fn with_dropped(&self, names: &BTreeSet<String>) -> Result<DatasetSchema> {
        let mut out = self.clone();
        for name in names {
            let c = out
                .column_mut(name)
                .ok_or_else(|| Error::Schema(format!("cannot drop unknown column {name}")))?;
            if matches!(c.kind, ColumnKind::Identifier | ColumnKind::Target) {
                return Err(Error::Schema(format!("cannot drop {:?} column {name}", c.kind)));
            }
            c.directives.insert(Directive::Drop);
        }
        Ok(out)
    }
}

fn validate_column(c: &ColumnSpec) -> Result<()> {
    match c.kind {
        ColumnKind::Categorical => {
            if !c.vocabulary.is_empty() {
                let mut seen = HashSet::new();
                for v in &c.vocabulary {
                    if !seen.insert(v.as_str()) {
                        return Err(Error::Schema(format!(
                            "column {}: duplicate vocabulary entry '{v}'",
                            c.name
                        )));
                    }
                }
                if !seen.contains(NAN_CATEGORY) {
                    return Err(Error::Schema(format!(
                        "column {}: vocabulary lacks the '{NAN_CATEGORY}' category",
                        c.name
                    )));
                }
            }
        }
        _ => {
            if !c.vocabulary.is_empty() {
                return Err(Error::Schema(format!(
                    "column {}: only categorical columns carry a vocabulary",
                    c.name
                )));
            }
        }
    }
    if let Some(h) = &c.synth {
        if !h.weights.is_empty() && h.weights.len() != h.values.len() {
            return Err(Error::Schema(format!(
                "column {}: synth weights and values differ in length",
                c.name
            )));
        }
        if !h.minority_weights.is_empty() && h.minority_weights.len() != h.values.len() {
            return Err(Error::Schema(format!(
                "column {}: synth minority_weights and values differ in length",
                c.name
            )));
        }
        if h.values.is_empty() && h.mean.is_none() && c.kind != ColumnKind::Identifier {
            return Err(Error::Schema(format!(
                "column {}: synth hint needs values or a mean",
                c.name
            )));
        }
        if !(0.0..=1.0).contains(&h.missing_rate) {
            return Err(Error::Schema(format!(
                "column {}: synth missing_rate outside [0, 1]",
                c.name
            )));
        }
    }
    Ok(())
}

/// Rebuilds each categorical vocabulary from the observed values.
///
/// The result is the lexicographically sorted set of distinct values with
/// `nan` appended last, so it does not depend on row order. Missing markers
/// that survived imputation count as `nan`.
pub fn build_vocabularies(table: &RawTable, schema: &DatasetSchema) -> Result<DatasetSchema> {
    for h in &table.header {
        if schema.column(h).is_none() {
            return Err(Error::Schema(format!("table column {h} is not in the schema")));
        }
    }
    let mut out = schema.clone();
    for spec in out.columns.iter_mut() {
        if spec.kind != ColumnKind::Categorical {
            continue;
        }
        let idx = match table.column_index(&spec.name) {
            Some(idx) => idx,
            None if spec.has(Directive::Drop) => continue,
            None => {
                return Err(Error::Schema(format!(
                    "categorical column {} missing from table",
                    spec.name
                )))
            }
        };
        let mut values = BTreeSet::new();
        for row in &table.rows {
            let cell = row[idx].as_str();
            if cell != NAN_CATEGORY && !spec.is_missing(cell) {
                values.insert(cell.to_string());
            }
        }
        spec.vocabulary = values.into_iter().collect();
        spec.vocabulary.push(NAN_CATEGORY.to_string());
    }
    Ok(out)
}

/// Per-column cardinalities of a schema with built vocabularies.
pub fn cardinalities(schema: &DatasetSchema) -> BTreeMap<String, usize> {
    schema
        .categorical_inputs()
        .map(|c| (c.name.clone(), c.cardinality()))
        .collect()
}
