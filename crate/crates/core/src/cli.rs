//! Command-line front end: `run`, `sweep` and `check`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{report, summarize, DiagnosticsReport, RunData, RunSummary};
use crate::driver::{
    estimate_v_star, read_csv, run, run_with_v_star, write_csv, AgentKind, ExperimentConfig, RunRecord,
};
use crate::env::KnrWorld;
use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "planex", version, about = "Randomized-reward exploration on KNR worlds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a grid of agents, seeds and beta scales.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Diagnose existing run CSVs.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        csv: Vec<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Grid description for `sweep`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub agents: Option<Vec<AgentKind>>,
    #[serde(default)]
    pub beta_scales: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepGroup {
    pub agent: String,
    pub beta_scale: f64,
    pub runs: Vec<RunSummary>,
    pub report: DiagnosticsReport,
}

impl SweepConfig {
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let agents = self.agents.clone().unwrap_or_else(|| vec![self.base.agent]);
        let scales = self.beta_scales.clone().unwrap_or_else(|| vec![self.base.beta_scale]);
        let mut out = Vec::new();
        for &agent in &agents {
            for &beta_scale in &scales {
                for &seed in &self.seeds {
                    out.push(ExperimentConfig {
                        agent,
                        beta_scale,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

fn run_file_stem(cfg: &ExperimentConfig) -> String {
    format!("{}_beta{}_seed{}", cfg.agent.name(), cfg.beta_scale, cfg.seed)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Writes the CSV and summary JSON of one run; aborted runs still get their
/// partial CSV.
fn persist(result: Result<RunRecord>, cfg: &ExperimentConfig, out: &Path) -> Result<(RunRecord, RunSummary)> {
    let stem = run_file_stem(cfg);
    match result {
        Ok(record) => {
            write_csv(&record.rows, &out.join(format!("{stem}.csv")))?;
            let summary = summarize(&record)?;
            write_json(&summary, &out.join(format!("{stem}.json")))?;
            Ok((record, summary))
        }
        Err(Error::Aborted { partial, source }) => {
            write_csv(&partial.rows, &out.join(format!("{stem}.partial.csv")))?;
            Err(Error::Aborted { partial, source })
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_run(config: &Path, out: &Path) -> Result<RunSummary> {
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?;
    std::fs::create_dir_all(out)?;
    let (record, summary) = persist(run(&cfg), &cfg, out)?;
    crate::diagnostics::potential_check(&record.rows)?;
    Ok(summary)
}

pub fn cmd_sweep(config: &Path, out: &Path) -> Result<Vec<SweepGroup>> {
    let sweep: SweepConfig = serde_json::from_str(&std::fs::read_to_string(config)?)?;
    if sweep.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    std::fs::create_dir_all(out)?;
    let world = KnrWorld::from_spec(&sweep.base.world)?;
    let configs = sweep.expand();
    for cfg in &configs {
        cfg.validate()?;
    }
    // V* depends only on the world, planner and seed, so share it per seed.
    let v_stars: Vec<(u64, (f64, f64))> = sweep
        .seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ExperimentConfig {
                seed,
                ..sweep.base.clone()
            };
            crate::driver::estimate_v_star_on(&world, &cfg).map(|v| (seed, v))
        })
        .collect::<Result<_>>()?;
    let results: Vec<(RunRecord, RunSummary)> = configs
        .par_iter()
        .map(|cfg| {
            let (_, (v, se)) = v_stars.iter().find(|(s, _)| *s == cfg.seed).expect("seed has V*");
            persist(run_with_v_star(cfg, &world, *v, *se), cfg, out)
        })
        .collect::<Result<_>>()?;

    let mut groups = Vec::new();
    for (chunk, cfgs) in results.chunks(sweep.seeds.len()).zip(configs.chunks(sweep.seeds.len())) {
        let data: Vec<RunData> = chunk.iter().map(|(r, _)| RunData::from(r)).collect();
        groups.push(SweepGroup {
            agent: cfgs[0].agent.name().into(),
            beta_scale: cfgs[0].beta_scale,
            runs: chunk.iter().map(|(_, s)| s.clone()).collect(),
            report: report(&data)?,
        });
    }
    write_json(&groups, &out.join("sweep_summary.json"))?;
    Ok(groups)
}

pub fn cmd_check(config: &Path, csvs: &[PathBuf]) -> Result<DiagnosticsReport> {
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?;
    let (v_star, v_star_se) = estimate_v_star(&cfg)?;
    let runs = csvs
        .iter()
        .map(|p| {
            Ok(RunData {
                rows: read_csv(p)?,
                v_star,
                v_star_se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report(&runs)
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out).and_then(|s| {
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(0)
        }),
        Command::Sweep { config, out } => cmd_sweep(&config, &out).map(|groups| {
            let mut code = 0;
            for g in &groups {
                eprintln!("== {} beta_scale={} ==\n{}", g.agent, g.beta_scale, g.report.table());
                if g.report.hard_failure() {
                    code = 1;
                }
            }
            code
        }),
        Command::Check { config, csv, out } => cmd_check(&config, &csv).and_then(|rep| {
            eprint!("{}", rep.table());
            let json = serde_json::to_string_pretty(&rep)?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            Ok(i32::from(rep.hard_failure()))
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invariant_violation() {
                1
            } else {
                2
            }
        }
    }
}
