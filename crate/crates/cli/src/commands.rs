use std::path::{Path, PathBuf};

use embpred_core::ingest::{generate_synthetic, read_csv, synth_params, write_csv_to};
use embpred_core::metrics::plot::{confusion_svg, importance_svg, roc_svg};
use embpred_core::metrics::{
    cross_validate, evaluate, permutation_importance, Confusion, EvalReport, ImportanceReport, RocPoint,
};
use embpred_core::model::load_model;
use embpred_core::model::{model_to_bytes, train, EmbNet, ModelBundle, ModelLayout};
use embpred_core::preprocess::io::dataset_to_bytes;
use embpred_core::preprocess::{load_dataset, run_pipeline, transform_and_standardize, FoldPlan};
use embpred_core::schema::{load_schema, DatasetSchema};
use embpred_core::smote::oversample;
use serde::Serialize;

use crate::args::{Command, SchemaArg};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::Run;
use crate::ui::Ui;

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Synth(_) => "synth",
        Command::Preprocess(_) => "preprocess",
        Command::Train(_) => "train",
        Command::Cv(_) => "cv",
        Command::Evaluate(_) => "evaluate",
        Command::Importance(_) => "importance",
        Command::Rerun(_) => "rerun",
    }
}

fn schema_of(arg: &SchemaArg, run: &mut Run) -> Result<DatasetSchema, CliError> {
    let schema = match &arg.schema {
        Some(p) => {
            run.record_input(p)?;
            load_schema(p)?
        }
        None => DatasetSchema::uci_diabetes(),
    };
    run.schema_hash = Some(schema.hash_hex());
    Ok(schema)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
    w.write_record(header).map_err(map)?;
    for r in rows {
        w.write_record(&r).map_err(map)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(format!("csv: {e}")))
}

fn roc_csv(points: &[RocPoint]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["threshold", "fpr", "tpr"],
        points
            .iter()
            .map(|p| vec![p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()]),
    )
}

fn confusion_csv(rows: &[(String, Confusion)]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["scope", "tn", "fp", "fn", "tp", "accuracy"],
        rows.iter().map(|(s, c)| {
            vec![
                s.clone(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tp.to_string(),
                c.accuracy().to_string(),
            ]
        }),
    )
}

fn write_eval_outputs(run: &mut Run, report: &EvalReport, name: &str) -> Result<(), CliError> {
    run.write_json(name, report)?;
    run.write_bytes("roc.csv", &roc_csv(&report.roc_points)?)?;
    run.write_bytes("confusion.csv", &confusion_csv(&[("all".into(), report.confusion)])?)?;
    run.write_bytes("roc.svg", roc_svg(&report.roc_points, report.auroc).as_bytes())?;
    run.write_bytes("confusion.svg", confusion_svg(&report.confusion).as_bytes())?;
    Ok(())
}

fn load_data(path: &Path, run: &mut Run) -> Result<(embpred_core::preprocess::EncodedMatrix, DatasetSchema), CliError> {
    run.record_input(path)?;
    let (m, s) = load_dataset(path)?;
    run.schema_hash = Some(s.hash_hex());
    Ok((m, s))
}

fn load_bundle(path: &Path, run: &mut Run) -> Result<ModelBundle, CliError> {
    run.record_input(path)?;
    Ok(load_model(path)?)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    rows: usize,
    train_rows: usize,
    parameter_count: usize,
    embedding_dims: Vec<(String, usize)>,
    input_width: usize,
    losses: &'a [f64],
    steps: u64,
}

/// Runs one command, writing its outputs into `run`.
pub fn execute(cmd: &Command, cfg: &RunConfig, run: &mut Run, ui: &Ui) -> Result<(), CliError> {
    match cmd {
        Command::Synth(a) => {
            let schema = schema_of(&a.schema, run)?;
            let table = generate_synthetic(&schema, cfg.synth_rows, cfg.synth_minority, cfg.seed)?;
            let mut bytes = Vec::new();
            write_csv_to(&table, &mut bytes)?;
            run.write_bytes("synthetic.csv", &bytes)?;
            run.write_json(
                "synth_params.json",
                &synth_params(&schema, cfg.synth_rows, cfg.synth_minority, cfg.seed),
            )?;
            ui.info(&format!("generated {} rows", table.row_count()));
        }
        Command::Preprocess(a) => {
            let schema = schema_of(&a.schema, run)?;
            run.record_input(&a.input)?;
            let raw = read_csv(&a.input, &schema)?;
            let prepared = run_pipeline(&raw, &schema)?;
            for s in &prepared.report.steps {
                ui.info(&format!("{:<16} {:>8} -> {:>8} rows", s.step, s.rows_in, s.rows_out));
            }
            run.write_bytes("dataset.bin", &dataset_to_bytes(&prepared.matrix, &prepared.schema)?)?;
            run.write_json("preprocess_report.json", &prepared.report)?;
            run.write_bytes("schema.json", prepared.schema.to_json_pretty().as_bytes())?;
        }
        Command::Train(a) => {
            let (matrix, schema) = load_data(&a.data, run)?;
            let (scaled, scaler) = transform_and_standardize(&matrix)?;
            let train_m = if cfg.smote.enabled {
                oversample(&scaled, &cfg.smote.config)?
            } else {
                scaled
            };
            let layout = ModelLayout::of(&train_m);
            let mut net = EmbNet::<f32>::new(layout.clone(), &cfg.model)?;
            ui.info(&format!(
                "training on {} rows, {} parameters",
                train_m.n_rows(),
                net.count_parameters()
            ));
            let report = train(&mut net, &train_m, &cfg.model, |p| {
                ui.progress(&format!("epoch {:>3}/{} loss {:.5}", p.epoch, p.epochs, p.mean_loss))
            })?;
            let bundle = ModelBundle {
                schema,
                standardizer: scaler,
                net,
            };
            run.write_bytes("model.bin", &model_to_bytes(&bundle)?)?;
            run.write_json(
                "train_report.json",
                &TrainSummary {
                    rows: matrix.n_rows(),
                    train_rows: train_m.n_rows(),
                    parameter_count: bundle.net.count_parameters(),
                    embedding_dims: layout
                        .cat
                        .iter()
                        .zip(layout.embedding_dims())
                        .map(|(c, d)| (c.name.clone(), d))
                        .collect(),
                    input_width: layout.input_width(),
                    losses: &report.losses,
                    steps: report.steps,
                },
            )?;
        }
        Command::Cv(a) => {
            let (matrix, schema) = load_data(&a.data, run)?;
            let plan = FoldPlan::stratified(&matrix.target, cfg.k, cfg.seed)?;
            let outcome = cross_validate(&matrix, &schema, &cfg.model, &cfg.smote, &plan, |f, p| {
                if p.epoch == p.epochs {
                    ui.progress(&format!("fold {} trained, final loss {:.5}", f + 1, p.mean_loss));
                }
            })?;
            let s = &outcome.summary;
            for f in &s.folds {
                ui.info(&format!(
                    "fold {}: accuracy {:.4} auroc {:.4}",
                    f.fold + 1,
                    f.report.accuracy,
                    f.report.auroc
                ));
            }
            ui.info(&format!(
                "mean accuracy {:.4} ± {:.4}, mean auroc {:.4} ± {:.4}",
                s.mean_accuracy, s.std_accuracy, s.mean_auroc, s.std_auroc
            ));
            run.write_json("cv_report.json", s)?;
            for (i, m) in outcome.models.iter().enumerate() {
                run.write_bytes(&format!("fold{}.model.bin", i + 1), &model_to_bytes(m)?)?;
            }
            let mut rows: Vec<(String, Confusion)> = s
                .folds
                .iter()
                .map(|f| (format!("fold{}", f.fold + 1), f.report.confusion))
                .collect();
            rows.push(("pooled".into(), s.pooled_confusion));
            run.write_bytes("confusion.csv", &confusion_csv(&rows)?)?;
            run.write_bytes("roc.csv", &roc_csv(&s.pooled.roc_points)?)?;
            run.write_bytes("roc.svg", roc_svg(&s.pooled.roc_points, s.pooled.auroc).as_bytes())?;
            run.write_bytes("confusion.svg", confusion_svg(&s.pooled_confusion).as_bytes())?;
        }
        Command::Evaluate(a) => {
            let bundle = load_bundle(&a.model, run)?;
            let (matrix, schema) = load_data(&a.data, run)?;
            let prepared = bundle.prepare(&matrix, &schema)?;
            let report = evaluate(&bundle.net, &prepared, cfg.threshold)?;
            ui.info(&format!(
                "{} rows: accuracy {:.4} auroc {:.4}",
                report.n_rows, report.accuracy, report.auroc
            ));
            write_eval_outputs(run, &report, "eval_report.json")?;
        }
        Command::Importance(a) => {
            let bundle = load_bundle(&a.model, run)?;
            let (matrix, schema) = load_data(&a.data, run)?;
            let prepared = bundle.prepare(&matrix, &schema)?;
            let report: ImportanceReport =
                permutation_importance(&bundle.net, &prepared, cfg.importance_repeats, cfg.seed)?;
            for (i, f) in report.features.iter().take(10).enumerate() {
                ui.info(&format!("{:>2}. {:<26} {:+.5}", i + 1, f.name, f.mean_drop));
            }
            run.write_json("importance.json", &report)?;
            run.write_bytes(
                "importance.csv",
                &csv_bytes(
                    &["rank", "feature", "mean_drop", "std_drop", "baseline_auroc", "repeats"],
                    report.features.iter().enumerate().map(|(i, f)| {
                        vec![
                            (i + 1).to_string(),
                            f.name.clone(),
                            f.mean_drop.to_string(),
                            f.std_drop.to_string(),
                            f.baseline_auroc.to_string(),
                            f.repeats.to_string(),
                        ]
                    }),
                )?,
            )?;
            run.write_bytes("importance.svg", importance_svg(&report.features).as_bytes())?;
        }
        Command::Rerun(_) => unreachable!("rerun is dispatched by main"),
    }
    Ok(())
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
