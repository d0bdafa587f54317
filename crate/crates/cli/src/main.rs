//! `procest` - progress estimation for linear sequential processes.
//!
//! Subcommands: `simulate` (seeded synthetic datasets), `train` (GMM fit +
//! regressor training), `eval` (metric battery, alpha/beta sweeps,
//! activation comparison), `infer` (streaming per-frame reports on
//! standard streams).
//!
//! Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric.

mod args;
mod eval;
mod infer;
mod simulate;
mod train;

use clap::Parser;
use procest::Error;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Also covers --help/--version, which exit 0.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        args::Command::Simulate(a) => simulate::run(a),
        args::Command::Train(a) => train::run(a),
        args::Command::Eval(a) => eval::run(a),
        args::Command::Infer(a) => infer::run(a),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// Worker-thread count for evaluation: `PROCEST_THREADS` when set,
/// otherwise the available parallelism, never more than one per trace.
pub(crate) fn eval_threads(traces: usize) -> usize {
    let workers = std::env::var("PROCEST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    workers.min(traces.max(1))
}

/// Write the resolved configuration next to an output file.
pub(crate) fn write_config_sidecar<S: serde::Serialize>(
    out_path: &std::path::Path,
    config: &S,
) -> Result<(), Error> {
    let sidecar = sidecar_path(out_path, "config.json");
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::usage(format!("serialize config: {e}")))?;
    std::fs::write(&sidecar, json)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", sidecar.display())))?;
    Ok(())
}

/// `model.json` + `log.csv` -> `model.log.csv`.
pub(crate) fn sidecar_path(out_path: &std::path::Path, suffix: &str) -> std::path::PathBuf {
    let stem = out_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("out");
    out_path.with_file_name(format!("{stem}.{suffix}"))
}
