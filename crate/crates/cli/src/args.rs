use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "embpred",
    version,
    about = "30-day readmission classifier with categorical embeddings"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; model, fold and SMOTE seeds derive from it [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for per-run output directories [default: runs]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a planted-signal synthetic encounter table.
    Synth(SynthArgs),
    /// Clean, select and encode a raw encounter CSV.
    Preprocess(PreprocessArgs),
    /// Train one model on every row of an encoded dataset.
    Train(TrainArgs),
    /// k-fold cross-validation.
    Cv(CvArgs),
    /// Score an encoded dataset with a trained model.
    Evaluate(EvalArgs),
    /// Permutation feature importance of a trained model.
    Importance(ImportanceArgs),
    /// Re-execute the run recorded in a manifest and compare output hashes.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemaArg {
    /// Dataset schema (JSON). Defaults to the bundled UCI diabetes schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Rows to generate [default: 1000]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Fraction of rows labelled as readmitted within 30 days.
    #[arg(long)]
    pub minority: Option<f64>,
    #[command(flatten)]
    pub schema: SchemaArg,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Raw encounter CSV
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CategoricalArg {
    Majority,
    Copy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    TrainOnly,
    Global,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// Training epochs [default: 70]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 256]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer widths, comma separated (e.g. 512,512).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SmoteFlags {
    /// Minority neighbours considered per synthetic row [default: 5]
    #[arg(long)]
    pub smote_k: Option<usize>,
    /// Oversampling seed [default: the run seed]
    #[arg(long)]
    pub smote_seed: Option<u64>,
    /// How synthetic rows pick categorical values
    #[arg(long, value_enum)]
    pub smote_categorical: Option<CategoricalArg>,
    /// Train on the imbalanced data as is
    #[arg(long)]
    pub no_smote: bool,
    /// Oversample each fold's training rows, or the whole set before splitting
    #[arg(long, value_enum)]
    pub smote_scope: Option<ScopeArg>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Encoded dataset written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub smote: SmoteFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    /// Encoded dataset written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of folds [default: 6]
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub smote: SmoteFlags,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Model file written by `train` or `cv`.
    #[arg(long)]
    pub model: PathBuf,
    /// Encoded dataset preprocessed with the training run's schema.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Decision threshold on the positive-class probability [default: 0.5]
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ImportanceArgs {
    /// Model file written by `train` or `cv`.
    #[arg(long)]
    pub model: PathBuf,
    /// Encoded dataset preprocessed with the training run's schema.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Shuffles per feature [default: 5]
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// manifest.json of the run to repeat.
    pub manifest: PathBuf,
}
