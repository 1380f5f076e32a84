//! Cleaning, feature selection, encoding and fold planning.

pub mod encode;
pub mod folds;
pub mod io;
pub mod steps;

use serde::{Deserialize, Serialize};

pub use encode::{encode, transform_and_standardize, CatSpec, ContSpec, ContStats, EncodedMatrix, Standardizer};
pub use folds::FoldPlan;
pub use io::{load_dataset, save_dataset};
pub use steps::{
    encode_target, filter_alive, filter_diabetes, filter_diabetes_and_alive, impute_missing, keep_first_encounter,
    relabel_levels, select_features, synthesize_features, DropReason, DroppedColumn, Selection, MAX_MISSING_FRACTION,
};

use crate::error::{Error, Result};
use crate::ingest::RawTable;
use crate::schema::{build_vocabularies, ColumnKind, DatasetSchema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCount {
    pub step: String,
    pub rows_in: usize,
    pub rows_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub kind: ColumnKind,
    /// Vocabulary size for categoricals, distinct values for continuous columns.
    pub distinct: usize,
    pub missing_before_impute: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub steps: Vec<StepCount>,
    pub dropped: Vec<DroppedColumn>,
    pub columns: Vec<ColumnSummary>,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    /// Schema with dropped columns marked and vocabularies built.
    pub schema: DatasetSchema,
    pub matrix: EncodedMatrix,
    pub report: PreprocessReport,
}

/// Runs the full cleaning pipeline on a raw encounter table.
///
/// The returned matrix is encoded but not standardized: continuous scaling is
/// fitted later on training rows only.
pub fn run_pipeline(table: &RawTable, schema: &DatasetSchema) -> Result<Prepared> {
    schema.validate()?;
    if table.row_count() == 0 {
        return Err(Error::Preprocess {
            step: "ingest",
            message: "no rows".into(),
        });
    }
    let mut counts = Vec::new();
    let mut track = |step: &str, before: &RawTable, after: RawTable| -> Result<RawTable> {
        counts.push(StepCount {
            step: step.to_string(),
            rows_in: before.row_count(),
            rows_out: after.row_count(),
        });
        if after.row_count() == 0 {
            return Err(Error::Preprocess {
                step: "pipeline",
                message: format!("no rows left after {step}"),
            });
        }
        Ok(after)
    };

    let t = track("dedup", table, keep_first_encounter(table, schema)?)?;
    let t = track("filter_diabetes", &t, filter_diabetes(&t, schema)?)?;
    let t = track("filter_alive", &t, filter_alive(&t, schema)?)?;
    let t = track("relabel", &t, relabel_levels(&t, schema)?)?;
    let t = track("synthesize", &t, synthesize_features(&t, schema)?)?;
    let sel = select_features(&t, schema)?;
    let t = track("select", &t, sel.table)?;
    let schema = sel.schema;

    let mut columns = Vec::new();
    let conts: Vec<_> = schema.continuous_inputs().collect();
    let n = t.row_count();
    let mut mask = vec![false; n * conts.len()];
    for (j, spec) in conts.iter().enumerate() {
        let idx = t.require_column(&spec.name, "impute")?;
        for (r, row) in t.rows.iter().enumerate() {
            mask[r * conts.len() + j] = spec.is_missing(&row[idx]);
        }
    }
    for spec in schema.categorical_inputs() {
        let idx = t.require_column(&spec.name, "impute")?;
        columns.push((spec.name.clone(), ColumnKind::Categorical, idx));
    }
    for spec in &conts {
        let idx = t.require_column(&spec.name, "impute")?;
        columns.push((spec.name.clone(), ColumnKind::Continuous, idx));
    }
    let missing_counts: Vec<usize> = columns
        .iter()
        .map(|(name, _, idx)| {
            let spec = schema.column(name).expect("column from schema");
            t.rows.iter().filter(|row| spec.is_missing(&row[*idx])).count()
        })
        .collect();

    let t = track("impute", &t, impute_missing(&t, &schema)?)?;
    let schema = build_vocabularies(&t, &schema)?;
    let mut matrix = encode(&t, &schema)?;
    matrix.cont_missing = mask;

    let summaries = columns
        .into_iter()
        .zip(missing_counts)
        .map(|((name, kind, idx), missing)| {
            let distinct = match kind {
                ColumnKind::Categorical => schema.column(&name).map_or(0, |c| c.cardinality()),
                _ => t
                    .rows
                    .iter()
                    .map(|row| row[idx].as_str())
                    .collect::<std::collections::BTreeSet<_>>()
                    .len(),
            };
            ColumnSummary {
                name,
                kind,
                distinct,
                missing_before_impute: missing,
            }
        })
        .collect();
    let (negatives, positives) = matrix.class_counts();
    Ok(Prepared {
        report: PreprocessReport {
            steps: counts,
            dropped: sel.dropped,
            columns: summaries,
            positives,
            negatives,
        },
        schema,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::generate_synthetic;

    #[test]
    fn pipeline_on_synthetic_table() {
        let schema = DatasetSchema::uci_diabetes();
        let raw = generate_synthetic(&schema, 400, 0.112, 5).unwrap();
        let p = run_pipeline(&raw, &schema).unwrap();
        p.matrix.validate().unwrap();
        for w in p.report.steps.windows(2) {
            assert_eq!(w[0].rows_out, w[1].rows_in);
        }
        for s in &p.report.steps {
            assert!(s.rows_out <= s.rows_in);
        }
        assert_eq!(p.matrix.n_rows(), p.report.steps.last().unwrap().rows_out);
        assert!(p.report.dropped.iter().any(|d| d.name == "weight"));
        assert!(p.report.positives > 0 && p.report.negatives > 0);
        p.schema.validate().unwrap();
    }

    #[test]
    fn empty_table_is_an_error() {
        let schema = DatasetSchema::uci_diabetes();
        let raw = generate_synthetic(&schema, 20, 0.5, 1).unwrap();
        let empty = RawTable::new(raw.header.clone(), vec![]).unwrap();
        let e = run_pipeline(&empty, &schema).unwrap_err();
        assert!(e.to_string().contains("no rows"), "{e}");
    }
}
