//! CSV ingestion and synthetic encounter tables.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::rng::{stream_rng, Stream};
use crate::schema::{ColumnKind, ColumnSpec, DatasetSchema};

/// String-valued table, loaded verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(Error::Csv(format!("duplicate header column {h}")));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != header.len() {
                return Err(Error::Csv(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    r.len(),
                    header.len()
                )));
            }
        }
        Ok(Self { header, rows })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub(crate) fn require_column(&self, name: &str, step: &'static str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| Error::Preprocess {
            step,
            message: format!("missing column {name}"),
        })
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &str>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| r[idx].as_str()))
    }

    pub fn retain_rows(&self, mut keep: impl FnMut(&[String]) -> bool) -> RawTable {
        RawTable {
            header: self.header.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn without_columns(&self, names: &HashSet<&str>) -> RawTable {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !names.contains(self.header[i].as_str()))
            .collect();
        RawTable {
            header: keep.iter().map(|&i| self.header[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }

    /// Appends a column, or overwrites it if a column of that name exists.
    pub fn set_column(&mut self, name: &str, values: Vec<String>) {
        assert_eq!(values.len(), self.rows.len(), "column length");
        match self.column_index(name) {
            Some(idx) => {
                for (r, v) in self.rows.iter_mut().zip(values) {
                    r[idx] = v;
                }
            }
            None => {
                self.header.push(name.to_string());
                for (r, v) in self.rows.iter_mut().zip(values) {
                    r.push(v);
                }
            }
        }
    }
}

/// Reads an RFC-4180 CSV file and checks it carries every input column of `schema`.
pub fn read_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file, schema)
}

pub fn read_csv_from(reader: impl Read, schema: &DatasetSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() {
        return Err(Error::Csv("no rows: the file is empty".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(format!("row {}: {e}", i + 1)))?;
        if rec.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} cells, expected {}",
                i + 1,
                rec.len(),
                header.len()
            )));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    let table = RawTable::new(header, rows)?;
    for c in schema.input_columns() {
        if table.column_index(&c.name).is_none() {
            return Err(Error::Csv(format!("missing column {}", c.name)));
        }
    }
    Ok(table)
}

pub fn write_csv(table: &RawTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(table, file)
}

pub fn write_csv_to(table: &RawTable, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(&table.header).map_err(err)?;
    for r in &table.rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Parameters recorded next to a generated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_rows: usize,
    pub minority_fraction: f64,
    pub seed: u64,
    pub schema_hash: String,
    pub repeat_patient_fraction: f64,
    pub non_diabetic_fraction: f64,
}

/// Fraction of rows that reuse an earlier patient id with a later encounter.
const REPEAT_PATIENT_FRACTION: f64 = 0.03;
/// Fraction of rows whose diagnoses are all outside the 250.xx family.
const NON_DIABETIC_FRACTION: f64 = 0.02;

pub const MIN_SYNTH_ROWS: usize = 10;

/// Generates a table with planted signal, driven by each column's `synth` hint.
///
/// Rows of the positive class (`<30`) draw from `minority_mean` /
/// `minority_weights` where a hint provides them. With the bundled schema that
/// raises `number_inpatient` and the Up/Down rate of the medication columns.
/// A few rows are repeat encounters, non-diabetic, or end-of-life discharges so
/// that every pruning step has work to do.
pub fn generate_synthetic(
    schema: &DatasetSchema,
    n_rows: usize,
    minority_fraction: f64,
    seed: u64,
) -> Result<RawTable> {
    if n_rows < MIN_SYNTH_ROWS {
        return Err(Error::invalid(format!(
            "synthetic tables need at least {MIN_SYNTH_ROWS} rows, got {n_rows}"
        )));
    }
    if !(minority_fraction > 0.0 && minority_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "minority fraction must lie in (0, 1), got {minority_fraction}"
        )));
    }

    let columns: Vec<&ColumnSpec> = schema.input_columns().collect();
    let samplers = columns
        .iter()
        .map(|c| ColumnSampler::new(c))
        .collect::<Result<Vec<_>>>()?;
    let diag_idx: Vec<usize> = schema
        .diagnosis_columns
        .iter()
        .filter_map(|d| columns.iter().position(|c| &c.name == d))
        .collect();
    let diabetic_codes: Vec<String> = diag_idx
        .first()
        .and_then(|&i| columns[i].synth.as_ref())
        .map(|h| h.values.iter().filter(|v| is_diabetes_code(v)).cloned().collect())
        .unwrap_or_default();

    let mut rng = stream_rng(seed, Stream::Synth, 0);
    let mut rows = Vec::with_capacity(n_rows);
    let mut patients: Vec<u64> = Vec::with_capacity(n_rows);
    let mut next_patient = 100_000u64;
    for i in 0..n_rows {
        let minority = rng.random::<f64>() < minority_fraction;
        let target = if minority {
            "<30"
        } else if rng.random::<f64>() < 0.349 / (0.349 + 0.539) {
            ">30"
        } else {
            "NO"
        };
        let encounter = 1_000_000 + 10 * i as u64;
        let patient = if !patients.is_empty() && rng.random::<f64>() < REPEAT_PATIENT_FRACTION {
            patients[rng.random_range(0..patients.len())]
        } else {
            next_patient += 1 + rng.random_range(0..5u64);
            next_patient
        };
        patients.push(patient);

        let mut row = Vec::with_capacity(columns.len());
        for (c, s) in columns.iter().zip(&samplers) {
            let cell = if c.name == schema.encounter_id {
                encounter.to_string()
            } else if c.name == schema.patient_id {
                patient.to_string()
            } else if c.kind == ColumnKind::Target {
                target.to_string()
            } else {
                s.sample(&mut rng, minority, &c.missing_marker)
            };
            row.push(cell);
        }

        let non_diabetic = rng.random::<f64>() < NON_DIABETIC_FRACTION;
        if !diag_idx.is_empty() {
            let has_diabetes = diag_idx.iter().any(|&j| is_diabetes_code(&row[j]));
            if non_diabetic {
                for &j in &diag_idx {
                    if is_diabetes_code(&row[j]) {
                        row[j] = "401.9".to_string();
                    }
                }
            } else if !has_diabetes && !diabetic_codes.is_empty() {
                let j = diag_idx[rng.random_range(0..diag_idx.len())];
                row[j] = diabetic_codes[rng.random_range(0..diabetic_codes.len())].clone();
            }
        }
        rows.push(row);
    }

    RawTable::new(columns.iter().map(|c| c.name.clone()).collect(), rows)
}

pub fn synth_params(schema: &DatasetSchema, n_rows: usize, minority_fraction: f64, seed: u64) -> SynthParams {
    SynthParams {
        n_rows,
        minority_fraction,
        seed,
        schema_hash: schema.hash_hex(),
        repeat_patient_fraction: REPEAT_PATIENT_FRACTION,
        non_diabetic_fraction: NON_DIABETIC_FRACTION,
    }
}

pub(crate) fn is_diabetes_code(code: &str) -> bool {
    match code.strip_prefix("250") {
        Some(rest) => rest.is_empty() || rest.starts_with('.'),
        None => false,
    }
}

enum Draw {
    Values {
        values: Vec<String>,
        base: WeightedIndex<f64>,
        minority: Option<WeightedIndex<f64>>,
    },
    Count {
        base: Poisson<f64>,
        minority: Option<Poisson<f64>>,
    },
    Constant(String),
}

struct ColumnSampler {
    draw: Draw,
    missing_rate: f64,
}

impl ColumnSampler {
    fn new(c: &ColumnSpec) -> Result<Self> {
        let bad = |what: &str| Error::Schema(format!("column {}: invalid synth hint ({what})", c.name));
        let Some(h) = &c.synth else {
            let fallback = match c.kind {
                ColumnKind::Continuous => "0",
                _ => "x",
            };
            return Ok(Self {
                draw: Draw::Constant(fallback.to_string()),
                missing_rate: 0.0,
            });
        };
        let draw = if !h.values.is_empty() {
            let weights = if h.weights.is_empty() {
                vec![1.0; h.values.len()]
            } else {
                h.weights.clone()
            };
            let base = WeightedIndex::new(&weights).map_err(|_| bad("weights"))?;
            let minority = if h.minority_weights.is_empty() {
                None
            } else {
                Some(WeightedIndex::new(&h.minority_weights).map_err(|_| bad("minority_weights"))?)
            };
            Draw::Values {
                values: h.values.clone(),
                base,
                minority,
            }
        } else if let Some(mean) = h.mean {
            let base = Poisson::new(mean).map_err(|_| bad("mean"))?;
            let minority = match h.minority_mean {
                Some(m) => Some(Poisson::new(m).map_err(|_| bad("minority_mean"))?),
                None => None,
            };
            Draw::Count { base, minority }
        } else {
            Draw::Constant("0".into())
        };
        Ok(Self {
            draw,
            missing_rate: h.missing_rate,
        })
    }

    fn sample(&self, rng: &mut impl Rng, minority: bool, missing_marker: &str) -> String {
        // the missing draw is always consumed so the stream layout does not
        // depend on the column's missing rate
        let missing = rng.random::<f64>() < self.missing_rate;
        let value = match &self.draw {
            Draw::Values {
                values,
                base,
                minority: m,
            } => {
                let dist = match (minority, m) {
                    (true, Some(m)) => m,
                    _ => base,
                };
                values[dist.sample(rng)].clone()
            }
            Draw::Count { base, minority: m } => {
                let dist = match (minority, m) {
                    (true, Some(m)) => m,
                    _ => base,
                };
                format!("{}", dist.sample(rng) as u64)
            }
            Draw::Constant(v) => v.clone(),
        };
        if missing {
            missing_marker.to_string()
        } else {
            value
        }
    }
}
