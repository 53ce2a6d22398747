//! The three subcommands. Each validates the config and synthesizes gains
//! before creating any output, so a failing run leaves no half-written
//! artifacts (the one exception: a diverged simulation saves its partial
//! trace under a `.partial` suffix).

use crate::config::{ConfigError, Mode, ResolvedRun};
use crate::report;
use quadlqr::metrics;
use quadlqr::{ControllerState, GainMatrix, SimError, SimTrace};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("synthesis failed: {0}")]
    Synthesis(#[from] quadlqr::SynthesisError),
    #[error("controller setup failed: {0}")]
    Control(#[from] quadlqr::ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] quadlqr::MetricsError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 config/IO, 2 synthesis, 3 divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Write { .. } | CliError::Metrics(_) => 1,
            CliError::Synthesis(_) | CliError::Control(_) => 2,
            CliError::Sim(SimError::Diverged { .. }) => 3,
            CliError::Sim(_) => 1,
        }
    }
}

fn synthesize_for(run: &ResolvedRun, mode: Mode) -> Result<GainMatrix, CliError> {
    Ok(match mode {
        Mode::Lqr => quadlqr::synthesize_lqr(&run.params, &run.lqr_weights)?,
        Mode::Lqri => quadlqr::synthesize_lqri(&run.params, run.lqri_weights()?)?,
    })
}

fn controller_for(
    run: &ResolvedRun,
    mode: Mode,
    gain: GainMatrix,
) -> Result<ControllerState, CliError> {
    Ok(match mode {
        Mode::Lqr => ControllerState::lqr(gain)?,
        Mode::Lqri => ControllerState::lqri(gain, run.integral_limit)?,
    })
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn cmd_synth(run: &ResolvedRun) -> Result<(), CliError> {
    let mode = run.mode;
    let gain = synthesize_for(run, mode)?;
    let header = report::provenance(&run.config_sha256, run.scenario.seed, mode.as_str());
    let body = report::gain_report(&gain);
    let path = write_file(
        &run.out_dir,
        &format!("gains_{}.txt", mode.as_str()),
        &format!("{header}{body}"),
    )?;
    print!("{body}");
    println!("wrote {}", path.display());
    Ok(())
}

/// Runs one simulation; on divergence the partial trace is saved with a
/// `.partial` suffix and the error is propagated (exit code 3).
fn simulate(
    run: &ResolvedRun,
    mode: Mode,
    gain: GainMatrix,
    header: &str,
) -> Result<SimTrace, CliError> {
    let controller = controller_for(run, mode, gain)?;
    match quadlqr::run(&run.scenario, controller, &run.params) {
        Ok(trace) => Ok(trace),
        Err(SimError::Diverged { t, partial }) => {
            if run.write_csv {
                let name = format!("trace_{}.csv.partial", mode.as_str());
                let path = write_file(
                    &run.out_dir,
                    &name,
                    &format!("{header}{}", partial.to_csv_string()),
                )?;
                eprintln!("saved partial trace to {}", path.display());
            }
            Err(CliError::Sim(SimError::Diverged { t, partial }))
        }
        Err(e) => Err(CliError::Sim(e)),
    }
}

pub fn cmd_sim(run: &ResolvedRun) -> Result<(), CliError> {
    let mode = run.mode;
    let gain = synthesize_for(run, mode)?;
    let header = report::provenance(&run.config_sha256, run.scenario.seed, mode.as_str());
    let trace = simulate(run, mode, gain, &header)?;
    let m = metrics::compute(&trace)?;

    if run.write_csv {
        write_file(
            &run.out_dir,
            &format!("trace_{}.csv", mode.as_str()),
            &format!("{header}{}", trace.to_csv_string()),
        )?;
    }
    let label = match mode {
        Mode::Lqr => "LQR",
        Mode::Lqri => "LQRi",
    };
    let table = metrics::render_table(label, &m);
    if run.report.table() {
        write_file(
            &run.out_dir,
            &format!("metrics_{}.txt", mode.as_str()),
            &format!("{header}{table}"),
        )?;
    }
    if run.report.kv() {
        write_file(
            &run.out_dir,
            &format!("metrics_{}.kv", mode.as_str()),
            &format!("{header}{}", metrics::render_kv(mode.as_str(), &m)),
        )?;
    }
    print!("{table}");
    Ok(())
}

/// Runs the identical scenario under both controllers (the shared seed makes
/// the noise realizations match sample for sample) and reports side-by-side
/// metrics with improvement percentages.
pub fn cmd_compare(run: &ResolvedRun) -> Result<(), CliError> {
    let lqr_gain = synthesize_for(run, Mode::Lqr)?;
    let lqri_gain = synthesize_for(run, Mode::Lqri)?;
    let lqr_header = report::provenance(&run.config_sha256, run.scenario.seed, "lqr");
    let lqri_header = report::provenance(&run.config_sha256, run.scenario.seed, "lqri");
    let header = report::provenance(&run.config_sha256, run.scenario.seed, "compare");

    let lqr_trace = simulate(run, Mode::Lqr, lqr_gain, &lqr_header)?;
    let lqri_trace = simulate(run, Mode::Lqri, lqri_gain, &lqri_header)?;

    let lqr_m = metrics::compute(&lqr_trace)?;
    let lqri_m = metrics::compute(&lqri_trace)?;
    let imp = metrics::improvement(&lqr_m, &lqri_m);

    if run.write_csv {
        write_file(
            &run.out_dir,
            "trace_lqr.csv",
            &format!("{lqr_header}{}", lqr_trace.to_csv_string()),
        )?;
        write_file(
            &run.out_dir,
            "trace_lqri.csv",
            &format!("{lqri_header}{}", lqri_trace.to_csv_string()),
        )?;
        write_file(
            &run.out_dir,
            "series_long.csv",
            &format!(
                "{header}{}",
                report::series_long_csv(&lqr_trace, &lqri_trace)
            ),
        )?;
    }
    let text = format!(
        "{}\n{}\n{}",
        metrics::render_table("LQR", &lqr_m),
        metrics::render_table("LQRi", &lqri_m),
        metrics::render_improvement(&imp)
    );
    if run.report.table() {
        write_file(&run.out_dir, "comparison.txt", &format!("{header}{text}"))?;
    }
    if run.report.kv() {
        let kv = format!(
            "{}{}{}",
            metrics::render_kv("lqr", &lqr_m),
            metrics::render_kv("lqri", &lqri_m),
            metrics::render_improvement_kv(&imp)
        );
        write_file(&run.out_dir, "comparison.kv", &format!("{header}{kv}"))?;
    }
    print!("{text}");
    Ok(())
}
