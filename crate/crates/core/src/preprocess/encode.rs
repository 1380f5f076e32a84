//! String → index/number materialization and continuous-column scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RawTable;
use crate::preprocess::steps::{encode_target, median, parse_number};
use crate::schema::{DatasetSchema, Directive};

/// Guard below which a column's standard deviation is treated as zero.
pub const STD_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatSpec {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContSpec {
    pub name: String,
    pub log1p: bool,
}

/// Statistics fitted on training rows and reused for any later rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContStats {
    pub name: String,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    pub log1p_applied: bool,
}

/// Categorical indices, continuous values and binary target, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub cat: Vec<u32>,
    pub cont: Vec<f64>,
    /// Cells that were missing before imputation; re-imputed with fold medians.
    pub cont_missing: Vec<bool>,
    pub target: Vec<u8>,
    pub cat_specs: Vec<CatSpec>,
    pub cont_specs: Vec<ContSpec>,
    /// Present once the continuous block has been standardized.
    pub cont_stats: Option<Vec<ContStats>>,
}

impl EncodedMatrix {
    pub fn empty(cat_specs: Vec<CatSpec>, cont_specs: Vec<ContSpec>) -> Self {
        Self {
            cat: Vec::new(),
            cont: Vec::new(),
            cont_missing: Vec::new(),
            target: Vec::new(),
            cat_specs,
            cont_specs,
            cont_stats: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cat(&self) -> usize {
        self.cat_specs.len()
    }

    pub fn n_cont(&self) -> usize {
        self.cont_specs.len()
    }

    pub fn cat_row(&self, r: usize) -> &[u32] {
        let k = self.n_cat();
        &self.cat[r * k..(r + 1) * k]
    }

    pub fn cont_row(&self, r: usize) -> &[f64] {
        let k = self.n_cont();
        &self.cont[r * k..(r + 1) * k]
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.target.iter().filter(|&&t| t == 1).count();
        (self.n_rows() - pos, pos)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.cat_specs
            .iter()
            .map(|c| c.name.clone())
            .chain(self.cont_specs.iter().map(|c| c.name.clone()))
            .collect()
    }

    pub fn push_row(&mut self, cat: &[u32], cont: &[f64], missing: &[bool], target: u8) {
        debug_assert_eq!(cat.len(), self.n_cat());
        debug_assert_eq!(cont.len(), self.n_cont());
        self.cat.extend_from_slice(cat);
        self.cont.extend_from_slice(cont);
        self.cont_missing.extend_from_slice(missing);
        self.target.push(target);
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        let mut out = EncodedMatrix::empty(self.cat_specs.clone(), self.cont_specs.clone());
        out.cont_stats = self.cont_stats.clone();
        let (kc, kn) = (self.n_cat(), self.n_cont());
        for &r in rows {
            out.push_row(
                self.cat_row(r),
                self.cont_row(r),
                &self.cont_missing[r * kn..(r + 1) * kn],
                self.target[r],
            );
        }
        debug_assert_eq!(out.cat.len(), rows.len() * kc);
        out
    }

    /// Checks internal consistency: buffer sizes, index ranges, finiteness, labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        if self.cat.len() != n * self.n_cat()
            || self.cont.len() != n * self.n_cont()
            || self.cont_missing.len() != self.cont.len()
        {
            return Err(Error::Format("encoded matrix buffers disagree with row count".into()));
        }
        for r in 0..n {
            for (j, &i) in self.cat_row(r).iter().enumerate() {
                if i as usize >= self.cat_specs[j].cardinality {
                    return Err(Error::Format(format!(
                        "row {r}: index {i} out of range for {} (cardinality {})",
                        self.cat_specs[j].name, self.cat_specs[j].cardinality
                    )));
                }
            }
        }
        if let Some(i) = self.cont.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "continuous value in row {} column {}",
                i / self.n_cont().max(1),
                self.cont_specs[i % self.n_cont().max(1)].name
            )));
        }
        if self.target.iter().any(|&t| t > 1) {
            return Err(Error::Format("target values must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// Encodes a fully preprocessed table against a schema with built vocabularies.
///
/// Categorical cells map to vocabulary indices (unseen values to `nan`);
/// continuous cells are parsed and rounded to 32-bit precision, the width
/// stored in encoded dataset files.
pub fn encode(table: &RawTable, schema: &DatasetSchema) -> Result<EncodedMatrix> {
    const STEP: &str = "encode";
    let err = |message: String| Error::Preprocess { step: STEP, message };

    let cats: Vec<_> = schema.categorical_inputs().collect();
    let conts: Vec<_> = schema.continuous_inputs().collect();
    let cat_idx: Vec<usize> = cats
        .iter()
        .map(|c| table.require_column(&c.name, STEP))
        .collect::<Result<_>>()?;
    let cont_idx: Vec<usize> = conts
        .iter()
        .map(|c| table.require_column(&c.name, STEP))
        .collect::<Result<_>>()?;
    let target_idx = table.require_column(&schema.target, STEP)?;
    for c in &cats {
        if c.vocabulary.is_empty() {
            return Err(err(format!("vocabulary of {} has not been built", c.name)));
        }
    }

    let cat_specs = cats
        .iter()
        .map(|c| CatSpec {
            name: c.name.clone(),
            cardinality: c.cardinality(),
        })
        .collect();
    let cont_specs = conts
        .iter()
        .map(|c| ContSpec {
            name: c.name.clone(),
            log1p: c.has(Directive::Log1p),
        })
        .collect();
    let mut m = EncodedMatrix::empty(cat_specs, cont_specs);
    let mut cat_buf = Vec::with_capacity(cats.len());
    let mut cont_buf = Vec::with_capacity(conts.len());
    let missing_buf = vec![false; conts.len()];
    for (r, row) in table.rows.iter().enumerate() {
        cat_buf.clear();
        cont_buf.clear();
        for (spec, &j) in cats.iter().zip(&cat_idx) {
            let i = spec.index_of(&row[j]).ok_or_else(|| {
                err(format!(
                    "column {} has no '{}' category",
                    spec.name,
                    crate::schema::NAN_CATEGORY
                ))
            })?;
            cat_buf.push(i as u32);
        }
        for (spec, &j) in conts.iter().zip(&cont_idx) {
            let v = parse_number(&row[j]).ok_or_else(|| {
                err(format!(
                    "row {}: column {} value '{}' is not numeric",
                    r + 1,
                    spec.name,
                    row[j]
                ))
            })?;
            cont_buf.push(v as f32 as f64);
        }
        let t = encode_target(&row[target_idx])?;
        m.push_row(&cat_buf, &cont_buf, &missing_buf, t);
    }
    Ok(m)
}

/// Fitted imputation and scaling for the continuous block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub stats: Vec<ContStats>,
}

impl Standardizer {
    /// Fits medians on the observed cells of `rows`, then mean and population
    /// standard deviation of the imputed (and log1p-transformed) values.
    pub fn fit(matrix: &EncodedMatrix, rows: &[usize]) -> Result<Standardizer> {
        const STEP: &str = "standardize";
        if matrix.cont_stats.is_some() {
            return Err(Error::Preprocess {
                step: STEP,
                message: "matrix is already standardized".into(),
            });
        }
        if rows.is_empty() && matrix.n_cont() > 0 {
            return Err(Error::Preprocess {
                step: STEP,
                message: "cannot fit on zero rows".into(),
            });
        }
        let k = matrix.n_cont();
        let mut stats = Vec::with_capacity(k);
        for (j, spec) in matrix.cont_specs.iter().enumerate() {
            let mut observed: Vec<f64> = rows
                .iter()
                .filter(|&&r| !matrix.cont_missing[r * k + j])
                .map(|&r| matrix.cont[r * k + j])
                .collect();
            let med = median(&mut observed).ok_or_else(|| Error::Preprocess {
                step: STEP,
                message: format!("column {} has no observed values in the fit rows", spec.name),
            })?;
            let mut values = Vec::with_capacity(rows.len());
            for &r in rows {
                let raw = if matrix.cont_missing[r * k + j] {
                    med
                } else {
                    matrix.cont[r * k + j]
                };
                values.push(transform(raw, spec)?);
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            stats.push(ContStats {
                name: spec.name.clone(),
                median: med,
                mean,
                std: var.sqrt(),
                log1p_applied: spec.log1p,
            });
        }
        Ok(Standardizer { stats })
    }

    /// Imputes, transforms and scales every row of `matrix` with the fitted statistics.
    pub fn apply(&self, matrix: &EncodedMatrix) -> Result<EncodedMatrix> {
        if matrix.cont_stats.is_some() {
            return Err(Error::Preprocess {
                step: "standardize",
                message: "matrix is already standardized".into(),
            });
        }
        let names: Vec<&str> = matrix.cont_specs.iter().map(|c| c.name.as_str()).collect();
        let fitted: Vec<&str> = self.stats.iter().map(|s| s.name.as_str()).collect();
        if names != fitted {
            return Err(Error::LayoutMismatch(format!(
                "continuous columns {names:?} do not match fitted columns {fitted:?}"
            )));
        }
        let k = matrix.n_cont();
        let mut out = matrix.clone();
        for r in 0..matrix.n_rows() {
            for (j, (spec, st)) in matrix.cont_specs.iter().zip(&self.stats).enumerate() {
                let i = r * k + j;
                let raw = if matrix.cont_missing[i] {
                    st.median
                } else {
                    matrix.cont[i]
                };
                let x = transform(raw, spec)?;
                out.cont[i] = if st.std > STD_EPSILON {
                    (x - st.mean) / st.std
                } else {
                    x - st.mean
                };
                out.cont_missing[i] = false;
            }
        }
        out.cont_stats = Some(self.stats.clone());
        Ok(out)
    }
}

fn transform(x: f64, spec: &ContSpec) -> Result<f64> {
    if !spec.log1p {
        return Ok(x);
    }
    if x < 0.0 {
        return Err(Error::Preprocess {
            step: "standardize",
            message: format!("column {} has negative value {x}; log1p expects counts", spec.name),
        });
    }
    Ok(x.ln_1p())
}

/// Fits on every row of `matrix` and applies the result to it.
pub fn transform_and_standardize(matrix: &EncodedMatrix) -> Result<(EncodedMatrix, Standardizer)> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let s = Standardizer::fit(matrix, &rows)?;
    Ok((s.apply(matrix)?, s))
}
