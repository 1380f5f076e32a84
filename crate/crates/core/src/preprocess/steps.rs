//! String-level preprocessing steps over a [`RawTable`].

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{is_diabetes_code, RawTable};
use crate::schema::{ColumnKind, DatasetSchema, Directive, NAN_CATEGORY};

fn step_err(step: &'static str, message: impl Into<String>) -> Error {
    Error::Preprocess {
        step,
        message: message.into(),
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub(crate) fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Categorical missing markers become the `nan` category; continuous missing
/// cells take the median of the column's observed values.
pub fn impute_missing(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    const STEP: &str = "impute";
    let mut out = table.clone();
    for spec in &schema.columns {
        let Some(idx) = table.column_index(&spec.name) else {
            continue;
        };
        match spec.kind {
            ColumnKind::Categorical => {
                for row in out.rows.iter_mut() {
                    if spec.is_missing(&row[idx]) {
                        row[idx] = NAN_CATEGORY.to_string();
                    }
                }
            }
            ColumnKind::Continuous => {
                let mut observed = Vec::new();
                for (i, row) in table.rows.iter().enumerate() {
                    let cell = &row[idx];
                    if spec.is_missing(cell) {
                        continue;
                    }
                    let v = parse_number(cell).ok_or_else(|| {
                        step_err(
                            STEP,
                            format!("row {}: column {} has non-numeric value '{cell}'", i + 1, spec.name),
                        )
                    })?;
                    observed.push(v);
                }
                if observed.len() == table.row_count() {
                    continue;
                }
                let m = median(&mut observed)
                    .ok_or_else(|| step_err(STEP, format!("column {} has no observed values", spec.name)))?;
                let fill = format_number(m);
                for row in out.rows.iter_mut() {
                    if spec.is_missing(&row[idx]) {
                        row[idx] = fill.clone();
                    }
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

fn parse_id(cell: &str, row: usize, column: &str, step: &'static str) -> Result<i64> {
    cell.trim()
        .parse::<i64>()
        .map_err(|_| step_err(step, format!("row {row}: {column} '{cell}' is not an integer id")))
}

/// Keeps one row per patient: the one with the smallest encounter id.
/// Survivors keep their relative order.
pub fn keep_first_encounter(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    const STEP: &str = "dedup";
    let pid = table.require_column(&schema.patient_id, STEP)?;
    let eid = table.require_column(&schema.encounter_id, STEP)?;
    let mut first: HashMap<i64, (i64, usize)> = HashMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let p = parse_id(&row[pid], i + 1, &schema.patient_id, STEP)?;
        let e = parse_id(&row[eid], i + 1, &schema.encounter_id, STEP)?;
        first
            .entry(p)
            .and_modify(|best| {
                if e < best.0 {
                    *best = (e, i);
                }
            })
            .or_insert((e, i));
    }
    let keep: HashSet<usize> = first.values().map(|&(_, i)| i).collect();
    Ok(RawTable {
        header: table.header.clone(),
        rows: table
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(i))
            .map(|(_, r)| r.clone())
            .collect(),
    })
}

/// Keeps rows with at least one diagnosis in the 250.xx family.
pub fn filter_diabetes(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    let idx: Vec<usize> = schema
        .diagnosis_columns
        .iter()
        .map(|d| table.require_column(d, "diabetes filter"))
        .collect::<Result<_>>()?;
    Ok(table.retain_rows(|r| idx.iter().any(|&i| is_diabetes_code(r[i].trim()))))
}

/// Drops rows discharged as expired or to hospice.
pub fn filter_alive(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    if schema.death_disposition_codes.is_empty() {
        return Ok(table.clone());
    }
    let idx = table.require_column(&schema.disposition_column, "death filter")?;
    let codes: HashSet<&str> = schema.death_disposition_codes.iter().map(String::as_str).collect();
    Ok(table.retain_rows(|r| !codes.contains(r[idx].trim())))
}

pub fn filter_diabetes_and_alive(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    filter_alive(&filter_diabetes(table, schema)?, schema)
}

/// `<30` is the positive class; `>30` and `NO` are negative.
pub fn encode_target(value: &str) -> Result<u8> {
    match value.trim() {
        "<30" => Ok(1),
        ">30" | "NO" => Ok(0),
        other => Err(step_err("encode target", format!("unknown target value '{other}'"))),
    }
}

fn relabel_medication(v: &str) -> Option<&'static str> {
    match v {
        "Up" | "Down" | "Yes" => Some("Yes"),
        "Steady" | "None" | "No" => Some("No"),
        _ => None,
    }
}

fn relabel_a1c(v: &str) -> Option<&'static str> {
    match v {
        ">7" | ">8" | "abnormal" => Some("abnormal"),
        "Norm" | "normal" => Some("normal"),
        "None" | "not tested" => Some("not tested"),
        _ => None,
    }
}

fn relabel_glucose(v: &str) -> Option<&'static str> {
    match v {
        ">200" | ">300" | "abnormal" => Some("abnormal"),
        "Norm" | "normal" => Some("normal"),
        "None" | "not tested" => Some("not tested"),
        _ => None,
    }
}

/// Collapses medication dosage levels to Yes/No and lab results to
/// normal / abnormal / not tested. Already-relabeled values pass through, so
/// the step is idempotent; missing markers are left for imputation.
pub fn relabel_levels(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    const STEP: &str = "relabel";
    let mut out = table.clone();
    for spec in &schema.columns {
        let map: fn(&str) -> Option<&'static str> = if spec.has(Directive::MedicationLevel) {
            relabel_medication
        } else if spec.has(Directive::A1cResult) {
            relabel_a1c
        } else if spec.has(Directive::GlucoseSerum) {
            relabel_glucose
        } else {
            continue;
        };
        let Some(idx) = table.column_index(&spec.name) else {
            continue;
        };
        for (i, row) in out.rows.iter_mut().enumerate() {
            let cell = row[idx].as_str();
            if spec.is_missing(cell) || cell == NAN_CATEGORY {
                continue;
            }
            let mapped = map(cell).ok_or_else(|| {
                step_err(
                    STEP,
                    format!("row {}: column {} has unmapped value '{cell}'", i + 1, spec.name),
                )
            })?;
            row[idx] = mapped.to_string();
        }
    }
    Ok(out)
}

/// Adds `service_utilization` (sum of visit counts) and `count_meds`
/// (number of medication columns equal to "Yes"). Runs after [`relabel_levels`].
pub fn synthesize_features(table: &RawTable, schema: &DatasetSchema) -> Result<RawTable> {
    const STEP: &str = "feature synthesis";
    let mut out = table.clone();
    if let Some(name) = &schema.engineered.service_utilization {
        let idx: Vec<(usize, &str)> = schema
            .with_directive(Directive::VisitCount)
            .map(|c| Ok((table.require_column(&c.name, STEP)?, c.name.as_str())))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(table.row_count());
        for (i, row) in table.rows.iter().enumerate() {
            let mut total = 0.0;
            for &(j, col) in &idx {
                total += parse_number(&row[j]).ok_or_else(|| {
                    step_err(
                        STEP,
                        format!("row {}: visit count {col} '{}' is not numeric", i + 1, row[j]),
                    )
                })?;
            }
            values.push(format_number(total));
        }
        out.set_column(name, values);
    }
    if let Some(name) = &schema.engineered.count_meds {
        let idx: Vec<usize> = schema
            .with_directive(Directive::MedicationLevel)
            .filter_map(|c| table.column_index(&c.name))
            .collect();
        let values = table
            .rows
            .iter()
            .map(|row| idx.iter().filter(|&&j| row[j] == "Yes").count().to_string())
            .collect();
        out.set_column(name, values);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MostlyMissing,
    SingleValued,
    Directive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
    pub missing_fraction: f64,
    pub distinct_values: usize,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub table: RawTable,
    pub schema: DatasetSchema,
    pub dropped: Vec<DroppedColumn>,
}

/// Missing fraction above which a column is dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

/// Drops mostly-missing columns, single-valued categoricals and columns with
/// the `drop` directive. Must see the table before imputation.
pub fn select_features(table: &RawTable, schema: &DatasetSchema) -> Result<Selection> {
    let n = table.row_count();
    let mut dropped = Vec::new();
    for spec in &schema.columns {
        if !matches!(spec.kind, ColumnKind::Categorical | ColumnKind::Continuous) {
            continue;
        }
        let Some(idx) = table.column_index(&spec.name) else {
            continue;
        };
        let mut missing = 0usize;
        let mut distinct = BTreeSet::new();
        for row in &table.rows {
            let cell = row[idx].as_str();
            if spec.is_missing(cell) || cell == NAN_CATEGORY {
                missing += 1;
            } else {
                distinct.insert(cell);
            }
        }
        let missing_fraction = if n == 0 { 0.0 } else { missing as f64 / n as f64 };
        let reason = if missing_fraction > MAX_MISSING_FRACTION {
            Some(DropReason::MostlyMissing)
        } else if spec.kind == ColumnKind::Categorical && distinct.len() <= 1 {
            Some(DropReason::SingleValued)
        } else if spec.has(Directive::Drop) {
            Some(DropReason::Directive)
        } else {
            None
        };
        if let Some(reason) = reason {
            dropped.push(DroppedColumn {
                name: spec.name.clone(),
                reason,
                missing_fraction,
                distinct_values: distinct.len(),
            });
        }
    }
    let names: BTreeSet<String> = dropped.iter().map(|d| d.name.clone()).collect();
    let name_refs: HashSet<&str> = names.iter().map(String::as_str).collect();
    Ok(Selection {
        table: table.without_columns(&name_refs),
        schema: schema.with_dropped(&names)?,
        dropped,
    })
}
