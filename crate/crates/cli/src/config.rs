use std::fs;
use std::path::Path;

use embpred_core::ingest::MIN_SYNTH_ROWS;
use embpred_core::metrics::{SmoteOptions, SmoteScope, DEFAULT_THRESHOLD};
use embpred_core::model::ModelConfig;
use embpred_core::smote::CategoricalStrategy;
use serde::{Deserialize, Serialize};

use crate::args::{CategoricalArg, Cli, Command, ModelFlags, ScopeArg, SmoteFlags};
use crate::error::CliError;

/// Effective settings of a run. Precedence: flags > config file > defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// SMOTE seed; the run seed when absent.
    pub smote_seed: Option<u64>,
    pub model: ModelConfig,
    pub smote: SmoteOptions,
    pub k: usize,
    pub importance_repeats: usize,
    pub threshold: f64,
    pub synth_rows: usize,
    pub synth_minority: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            smote_seed: None,
            model: ModelConfig::default(),
            smote: SmoteOptions::default(),
            k: 6,
            importance_repeats: 5,
            threshold: DEFAULT_THRESHOLD,
            synth_rows: 1000,
            synth_minority: 0.112,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Defaults, overlaid with the config file, overlaid with flags.
    pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
        let mut c = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        match &cli.command {
            Command::Synth(a) => {
                if let Some(r) = a.rows {
                    c.synth_rows = r;
                }
                if let Some(m) = a.minority {
                    c.synth_minority = m;
                }
            }
            Command::Train(a) => {
                apply_model(&mut c, &a.model);
                apply_smote(&mut c, &a.smote);
            }
            Command::Cv(a) => {
                if let Some(k) = a.k {
                    c.k = k;
                }
                apply_model(&mut c, &a.model);
                apply_smote(&mut c, &a.smote);
            }
            Command::Evaluate(a) => {
                if let Some(t) = a.threshold {
                    c.threshold = t;
                }
            }
            Command::Importance(a) => {
                if let Some(r) = a.repeats {
                    c.importance_repeats = r;
                }
            }
            Command::Preprocess(_) | Command::Rerun(_) => {}
        }
        c.model.seed = c.seed;
        c.smote.config.seed = c.smote_seed.unwrap_or(c.seed);
        c.validate()?;
        Ok(c)
    }

    /// Rejects values no command could run with, before any output is written.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.synth_rows < MIN_SYNTH_ROWS {
            return bad(format!(
                "--rows must be at least {MIN_SYNTH_ROWS}, got {}",
                self.synth_rows
            ));
        }
        if !(self.synth_minority > 0.0 && self.synth_minority < 1.0) {
            return bad(format!("--minority must lie in (0, 1), got {}", self.synth_minority));
        }
        if self.k < 2 {
            return bad(format!("--k must be at least 2, got {}", self.k));
        }
        if self.smote.config.k_neighbors == 0 {
            return bad("--smote-k must be at least 1".into());
        }
        if self.importance_repeats == 0 {
            return bad("--repeats must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("--threshold must lie in [0, 1], got {}", self.threshold));
        }
        Ok(())
    }
}

fn apply_model(c: &mut RunConfig, f: &ModelFlags) {
    if let Some(e) = f.epochs {
        c.model.epochs = e;
    }
    if let Some(b) = f.batch_size {
        c.model.batch_size = b;
    }
    if let Some(lr) = f.lr {
        c.model.lr = lr;
    }
    if let Some(h) = &f.hidden {
        c.model.hidden_sizes = h.clone();
    }
}

fn apply_smote(c: &mut RunConfig, f: &SmoteFlags) {
    if let Some(k) = f.smote_k {
        c.smote.config.k_neighbors = k;
    }
    if let Some(s) = f.smote_seed {
        c.smote_seed = Some(s);
    }
    if let Some(cat) = f.smote_categorical {
        c.smote.config.categorical_strategy = match cat {
            CategoricalArg::Majority => CategoricalStrategy::MajorityVote,
            CategoricalArg::Copy => CategoricalStrategy::CopySeed,
        };
    }
    if f.no_smote {
        c.smote.enabled = false;
    }
    if let Some(s) = f.smote_scope {
        c.smote.scope = match s {
            ScopeArg::TrainOnly => SmoteScope::TrainOnly,
            ScopeArg::Global => SmoteScope::Global,
        };
    }
}
