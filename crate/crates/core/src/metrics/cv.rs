use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{eval_scores, predict_proba, Confusion, EvalReport, DEFAULT_THRESHOLD};
use crate::model::{train, EmbNet, EpochProgress, ModelBundle, ModelConfig, ModelLayout};
use crate::nncore::rng::derive_seed;
use crate::preprocess::{EncodedMatrix, FoldPlan, Standardizer};
use crate::schema::DatasetSchema;
use crate::smote::{oversample, SmoteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteScope {
    /// Oversample each fold's training rows only.
    TrainOnly,
    /// Standardize and oversample the whole dataset, then split. Validation
    /// folds then contain synthetic rows built from their training neighbours.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteOptions {
    pub enabled: bool,
    pub scope: SmoteScope,
    pub config: SmoteConfig,
}

impl Default for SmoteOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            scope: SmoteScope::TrainOnly,
            config: SmoteConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Training rows after oversampling.
    pub train_rows: usize,
    pub validation_rows: usize,
    pub model_seed: u64,
    pub smote_seed: Option<u64>,
    pub losses: Vec<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub plan_seed: u64,
    pub smote: SmoteOptions,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auroc: f64,
    pub std_auroc: f64,
    /// Sum of the per-fold confusion matrices.
    pub pooled_confusion: Confusion,
    /// Metrics over all out-of-fold predictions at once.
    pub pooled: EvalReport,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub summary: CvSummary,
    pub models: Vec<ModelBundle>,
    /// Out-of-fold validation matrices, already prepared for the matching model.
    pub validation: Vec<EncodedMatrix>,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `fold` is 1-based, as shown to users.
fn check_classes(m: &EncodedMatrix, fold: usize, what: &str) -> Result<()> {
    let (neg, pos) = m.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::invalid(format!(
            "fold {fold}: {what} rows contain a single class ({neg} negative, {pos} positive)"
        )));
    }
    Ok(())
}

/// k-fold cross-validation. Each fold fits scaling on its training rows,
/// oversamples them (train-only scope), trains a fresh network with a
/// fold-derived seed and evaluates on the untouched validation rows.
pub fn cross_validate(
    data: &EncodedMatrix,
    schema: &DatasetSchema,
    config: &ModelConfig,
    smote: &SmoteOptions,
    plan: &FoldPlan,
    mut progress: impl FnMut(usize, EpochProgress),
) -> Result<CvOutcome> {
    config.validate()?;
    if data.cont_stats.is_some() {
        return Err(Error::invalid("cross-validation expects an unstandardized matrix"));
    }

    // Global scope replaces the data and the plan before any split.
    let global;
    let (data, plan, global_scaler) = if smote.enabled && smote.scope == SmoteScope::Global {
        let all: Vec<usize> = (0..data.n_rows()).collect();
        let scaler = Standardizer::fit(data, &all)?;
        let balanced = oversample(&scaler.apply(data)?, &smote.config)?;
        let replanned = FoldPlan::stratified(&balanced.target, plan.k, plan.seed)?;
        global = (balanced, replanned);
        (&global.0, &global.1, Some(scaler))
    } else {
        (data, plan, None)
    };
    if plan.n_rows() != data.n_rows() {
        return Err(Error::invalid(format!(
            "fold plan covers {} rows, data has {}",
            plan.n_rows(),
            data.n_rows()
        )));
    }

    let layout = ModelLayout::of(data);
    let mut folds = Vec::with_capacity(plan.k);
    let mut models = Vec::with_capacity(plan.k);
    let mut validation = Vec::with_capacity(plan.k);
    let mut pooled_scores = Vec::with_capacity(data.n_rows());
    let mut pooled_labels = Vec::with_capacity(data.n_rows());
    for fold in 0..plan.k {
        let train_idx = plan.training_rows(fold);
        let val_idx = plan.validation_rows(fold);
        let (mut train_m, val_m, scaler) = match &global_scaler {
            Some(s) => (data.select_rows(&train_idx), data.select_rows(&val_idx), s.clone()),
            None => {
                let s = Standardizer::fit(data, &train_idx)?;
                let t = s.apply(&data.select_rows(&train_idx))?;
                let v = s.apply(&data.select_rows(&val_idx))?;
                (t, v, s)
            }
        };
        check_classes(&train_m, fold + 1, "training")?;
        check_classes(&val_m, fold + 1, "validation")?;
        let mut smote_seed = None;
        if smote.enabled && smote.scope == SmoteScope::TrainOnly {
            let seed = derive_seed(smote.config.seed, fold as u64);
            let cfg = SmoteConfig {
                seed,
                ..smote.config.clone()
            };
            train_m = oversample(&train_m, &cfg).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::InvalidArgument(format!("fold {}: {m}", fold + 1)),
                other => other,
            })?;
            smote_seed = Some(seed);
        }
        let model_seed = derive_seed(config.seed, fold as u64);
        let fold_cfg = ModelConfig {
            seed: model_seed,
            ..config.clone()
        };
        let mut net = EmbNet::<f32>::new(layout.clone(), &fold_cfg)?;
        let report = train(&mut net, &train_m, &fold_cfg, |p| progress(fold, p))?;
        let scores = predict_proba(&net, &val_m)?;
        let eval = eval_scores(&scores, &val_m.target, DEFAULT_THRESHOLD)?;
        pooled_scores.extend_from_slice(&scores);
        pooled_labels.extend_from_slice(&val_m.target);
        folds.push(FoldResult {
            fold,
            train_rows: train_m.n_rows(),
            validation_rows: val_m.n_rows(),
            model_seed,
            smote_seed,
            losses: report.losses,
            report: eval,
        });
        models.push(ModelBundle {
            schema: schema.clone(),
            standardizer: scaler,
            net,
        });
        validation.push(val_m);
    }

    let acc: Vec<f64> = folds.iter().map(|f| f.report.accuracy).collect();
    let auc: Vec<f64> = folds.iter().map(|f| f.report.auroc).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&acc);
    let (mean_auroc, std_auroc) = mean_std(&auc);
    let mut pooled_confusion = Confusion::default();
    for f in &folds {
        pooled_confusion.add(&f.report.confusion);
    }
    let pooled = eval_scores(&pooled_scores, &pooled_labels, DEFAULT_THRESHOLD)?;
    Ok(CvOutcome {
        summary: CvSummary {
            k: plan.k,
            plan_seed: plan.seed,
            smote: smote.clone(),
            folds,
            mean_accuracy,
            std_accuracy,
            mean_auroc,
            std_auroc,
            pooled_confusion,
            pooled,
        },
        models,
        validation,
    })
}
