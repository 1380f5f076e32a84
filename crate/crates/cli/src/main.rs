mod args;
mod commands;
mod config;
mod error;
mod run;
mod ui;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use crate::args::{Cli, Command};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{hash_file, Run, RunManifest};
use crate::ui::Ui;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let ui = Ui::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            ui.error("--threads must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            ui.error(&format!("thread pool: {e}"));
            return 2;
        }
    }
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match &cli.command {
        Command::Rerun(a) => rerun(&a.manifest, &ui),
        _ => execute(&cli, &argv, None, None, &ui).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            ui.error(&e.to_string());
            if matches!(e, CliError::Usage(_)) {
                eprintln!(
                    "\n{}\n\nFor more information, try '--help'.",
                    usage(commands::name(&cli.command))
                );
            }
            e.exit_code()
        }
    }
}

fn usage(subcommand: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn execute(
    cli: &Cli,
    argv: &[String],
    config: Option<RunConfig>,
    out_dir: Option<PathBuf>,
    ui: &Ui,
) -> Result<RunManifest, CliError> {
    let cfg = match config {
        Some(c) => c,
        None => RunConfig::resolve(cli)?,
    };
    let out_dir = out_dir
        .or_else(|| cli.out_dir.clone())
        .unwrap_or_else(commands::default_out_dir);
    let name = commands::name(&cli.command);
    let mut run = Run::create(&out_dir, name)?;
    let dir = run.dir.clone();
    let result = commands::execute(&cli.command, &cfg, &mut run, ui).and_then(|()| run.finish(name, argv, &cfg));
    let manifest = match result {
        Ok(m) => m,
        Err(e) => {
            // without a manifest the directory is not a reproducible run
            let _ = std::fs::remove_dir_all(&dir);
            return Err(e);
        }
    };
    ui.info(&format!(
        "wrote {} files to {}",
        manifest.outputs.len() + 1,
        dir.display()
    ));
    Ok(manifest)
}

/// Re-executes a recorded run with its frozen configuration, next to the
/// original run directory, and checks every output hash.
fn rerun(manifest_path: &Path, ui: &Ui) -> Result<(), CliError> {
    let m = RunManifest::load(manifest_path)?;
    let run_dir = manifest_path
        .parent()
        .ok_or_else(|| CliError::Usage("manifest has no parent directory".into()))?;
    let out_dir = run_dir
        .canonicalize()
        .map_err(|e| CliError::io(run_dir, e))?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(commands::default_out_dir);
    std::env::set_current_dir(&m.cwd).map_err(|e| CliError::io(&m.cwd, e))?;
    for (path, expected) in &m.inputs {
        if hash_file(Path::new(path))? != *expected {
            return Err(CliError::Mismatch(format!(
                "input {path} changed since the recorded run"
            )));
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("embpred".to_string()).chain(m.argv.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("recorded arguments no longer parse: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Usage("a rerun manifest cannot be rerun".into()));
    }
    let again = execute(&cli, &m.argv, Some(m.config.clone()), Some(out_dir), ui)?;
    let differing: Vec<String> = m
        .outputs
        .iter()
        .filter(|o| !again.outputs.contains(o))
        .map(|o| o.file.clone())
        .collect();
    if !differing.is_empty() || again.outputs.len() != m.outputs.len() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    ui.info(&format!("reproduced {} outputs bit-identically", m.outputs.len()));
    Ok(())
}
