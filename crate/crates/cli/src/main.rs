use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use contact_wave::experiments::{run_scenario, RunRecord, Scenario, ScenarioKind};
use contact_wave::io::{default_out_root, emit_series, read_config, RunConfig};

/// Contact-wave stability laboratory.
#[derive(Debug, Parser)]
#[command(name = "cwlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; defaults to $CWLAB_OUT or ./runs.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Halve the grid spacing K times.
    #[arg(long, global = true, value_name = "K")]
    grid_refine: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario, from its preset or from --config.
    Run {
        #[arg(value_parser = parse_kind)]
        scenario: Option<ScenarioKind>,
    },
    /// Run every scenario in parallel.
    Suite,
    /// Run the delta0 or amplitude sweep.
    Sweep { kind: SweepKind },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKind {
    Delta0,
    Amplitude,
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
        .map_err(|e: contact_wave::ExperimentError| e.to_string())
}

impl Common {
    fn load(&self, kind: Option<ScenarioKind>) -> Result<RunConfig> {
        let mut cfg = match (&self.config, kind) {
            (Some(path), kind) => {
                let cfg = read_config(path)?;
                if let Some(k) = kind.filter(|&k| k != cfg.scenario.kind) {
                    bail!(
                        "{} configures {}, not {k}",
                        path.display(),
                        cfg.scenario.kind
                    );
                }
                cfg
            }
            (None, Some(k)) => RunConfig {
                scenario: Scenario::preset(k),
                out: None,
            },
            (None, None) => bail!("name a scenario or pass --config"),
        };
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
            cfg.scenario.initial.seed = seed;
        }
        if let Some(k) = self.grid_refine {
            cfg.scenario.grid_refine = k;
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| default_out_root().join(cfg.scenario.kind.name()))
    }
}

fn execute(cfg: &RunConfig, dir: &Path) -> Result<RunRecord> {
    let record = run_scenario(&cfg.scenario);
    emit_series(&record, dir)
        .with_context(|| format!("writing results of {}", cfg.scenario.kind))?;
    Ok(record)
}

/// Prints the flags of a record and returns the number of failed assertions.
fn report(record: &RunRecord, dir: &Path) -> usize {
    let kind = record.scenario.kind;
    println!(
        "{kind}: {} steps, results in {}",
        record.steps,
        dir.display()
    );
    for flag in &record.flags {
        let tag = match (flag.passed, flag.asserted) {
            (true, _) => "ok  ",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        println!(
            "  {tag} {} = {} ({} {})",
            flag.id,
            flag.measured,
            flag.relation.symbol(),
            flag.threshold
        );
    }
    let mut failures = 0;
    if let Some(reason) = &record.failure {
        eprintln!("{kind}: run failed: {reason}");
        failures += 1;
    }
    for flag in record.failed_flags() {
        eprintln!(
            "{kind}: {} measured {} but needs {} {}: {}",
            flag.id,
            flag.measured,
            flag.relation.symbol(),
            flag.threshold,
            flag.anchor
        );
        failures += 1;
    }
    failures
}

fn run(cli: Cli) -> Result<usize> {
    let common = &cli.common;
    let configs: Vec<(RunConfig, PathBuf)> = match cli.command {
        Command::Run { scenario } => {
            let cfg = common.load(scenario)?;
            let dir = common.out_dir(&cfg);
            vec![(cfg, dir)]
        }
        Command::Suite => {
            if common.config.is_some() {
                bail!("suite runs the presets; --config applies to run and sweep only");
            }
            let root = common.out.clone().unwrap_or_else(default_out_root);
            ScenarioKind::ALL
                .into_iter()
                .map(|k| {
                    let cfg = common.load(Some(k))?;
                    Ok((cfg, root.join(k.name())))
                })
                .collect::<Result<_>>()?
        }
        Command::Sweep { kind } => {
            let k = match kind {
                SweepKind::Delta0 => ScenarioKind::Delta0Sweep,
                SweepKind::Amplitude => ScenarioKind::AmplitudeSweep,
            };
            let cfg = common.load(Some(k))?;
            let dir = common.out_dir(&cfg);
            vec![(cfg, dir)]
        }
    };
    let results: Vec<Result<RunRecord>> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(cfg, dir)| s.spawn(move || execute(cfg, dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let mut failures = 0;
    for ((_, dir), result) in configs.iter().zip(results) {
        failures += report(&result?, dir);
    }
    Ok(failures)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
