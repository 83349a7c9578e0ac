use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use resilink_core::harness::{run_sweep_with, summary_csv, time_series_csv, EpisodeTrace};
use resilink_core::optimizer::solve_stage1;
use resilink_core::rng::{stream, STREAM_PLACEMENT};
use resilink_core::{run_episode, ScenarioConfig, StagePolicy, Topology};
use serde_json::json;

const DEFAULT_DURATIONS_MS: [f64; 6] = [50.0, 100.0, 200.0, 300.0, 400.0, 500.0];

#[derive(Parser)]
#[command(name = "resilink", version, about = "Blockage-resilient criticality-aware uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write the per-slot time series as CSV.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<StagePolicy>,
    },
    /// Monte-Carlo sweep over mean blockage durations; writes the summary CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Episodes per sweep point.
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Policies to compare; repeat the flag or separate with commas.
        #[arg(long, value_delimiter = ',', default_values_t = [StagePolicy::S1, StagePolicy::S1S2, StagePolicy::S1S2S3])]
        policy: Vec<StagePolicy>,
        /// Mean blockage durations in milliseconds.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DURATIONS_MS)]
        durations: Vec<f64>,
        /// Overall LoS blockage probability held fixed across the sweep.
        #[arg(long = "p-b")]
        p_b: Option<f64>,
    },
    /// Solve the stage-1 power allocation for the sampled topology; writes JSON.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Print the default scenario as TOML.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; the built-in defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report_episode(trace: &EpisodeTrace) {
    let m = trace.metrics();
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    eprintln!(
        "policy {} seed {}: worst delay hc {} lc {} slots, exceedance hc {:.4} lc {:.4}, stage 2/3 fraction {:.4}/{:.4}",
        trace.policy,
        trace.seed,
        fmt(m.tau_hc_worst()),
        fmt(m.tau_lc_worst()),
        m.exceed_hc_worst(),
        m.exceed_lc_worst(),
        m.frac_s2,
        m.frac_s3,
    );
    if !trace.baseline.report.stable {
        eprintln!("warning: stage-1 allocation is not mean-rate stable (min delta {:.4})", trace.baseline.targets.min());
    }
    if trace.unstable_solves > 0 {
        eprintln!("warning: {} stage-3 solves were not mean-rate stable", trace.unstable_solves);
    }
}

fn solve_json(config: &ScenarioConfig) -> Result<serde_json::Value> {
    let topology = Topology::build(config, &mut stream(config.seed, STREAM_PLACEMENT))?;
    let solution = solve_stage1(&topology, config);
    Ok(json!({
        "seed": config.seed,
        "ue_positions": topology.ue_positions,
        "association": topology.assoc,
        "allocation": solution.allocation,
        "targets": solution.targets,
        "min_delta": solution.targets.min(),
        "report": {
            "iterations": solution.report.iterations,
            "converged": solution.report.converged,
            "stable": solution.report.stable,
            "objective_trace": solution.report.objective_trace,
            "fixed_point_residual": solution.report.fixed_point_residual,
            "constraint_residual": solution.report.constraint_residual,
        },
    }))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, policy } => {
            let mut config = common.config()?;
            if let Some(p) = policy {
                config.stage_policy = p;
            }
            let trace = run_episode(&config, config.seed)?;
            report_episode(&trace);
            let mut out = output(common.out.as_deref())?;
            time_series_csv(&trace, &mut out)?;
            out.flush()?;
        }
        Command::Sweep {
            common,
            runs,
            policy,
            durations,
            p_b,
        } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let config = common.config()?;
            let p_b = p_b.unwrap_or_else(|| config.blockage_prob());
            let summary = run_sweep_with(&config, p_b, &durations, &policy, runs)?;
            let mut out = output(common.out.as_deref())?;
            summary_csv(&summary, &mut out)?;
            out.flush()?;
        }
        Command::Solve { common } => {
            let config = common.config()?;
            let value = solve_json(&config)?;
            let mut out = output(common.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &value)?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Config { out } => {
            let mut w = output(out.as_deref())?;
            w.write_all(ScenarioConfig::default().to_toml_string().as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}
