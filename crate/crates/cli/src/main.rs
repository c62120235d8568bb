use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use microgait::harness::{
    self, load_results, percent_change_report, write_comparison_csv, BASELINE_LABEL, RUN_INFO_JSON, SUCCESS_CSV,
};
use microgait::whole_body::TraceFormat;
use microgait::{
    compare, generate_environment, run_sweep, run_trial, Environment, ExperimentConfig, GaitParams, Morphology,
    TrialResult,
};

#[derive(Parser)]
#[command(name = "microgait", version, about = "Grasp-based quadruped locomotion planning and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MorphArg {
    Ypp,
    Rpp,
}

impl From<MorphArg> for Morphology {
    fn from(m: MorphArg) -> Self {
        match m {
            MorphArg::Ypp => Morphology::Ypp,
            MorphArg::Rpp => Morphology::Rpp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a handrail environment and write it as JSON.
    GenEnv {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the environment template from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Collapse every random range to its midpoint.
        #[arg(long)]
        regular: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Plan strides without executing them.
    Plan {
        env: PathBuf,
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ypp")]
        morphology: MorphArg,
        /// Condition label from the config; the baseline by default.
        #[arg(long, default_value = BASELINE_LABEL)]
        condition: String,
        #[arg(long, default_value_t = 5)]
        strides: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run one traversal trial and write its result.
    Run {
        env: PathBuf,
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ypp")]
        morphology: MorphArg,
        #[arg(long, default_value = BASELINE_LABEL)]
        condition: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the execution trace (`trace.csv` plus `trace.json`) here.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Run every condition × morphology × seed trial of a config.
    Sweep {
        config: PathBuf,
        /// Output directory; overrides the config's.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Paired comparison of every variant against a baseline condition.
    Compare {
        results: PathBuf,
        #[arg(long, default_value = BASELINE_LABEL)]
        baseline: String,
    },
    /// Print the success table and percentage-change table of a sweep.
    Report {
        results: PathBuf,
        #[arg(long, default_value = BASELINE_LABEL)]
        baseline: String,
    },
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn condition_params(cfg: &ExperimentConfig, label: &str) -> Result<GaitParams> {
    match cfg.conditions().into_iter().find(|c| c.label == label) {
        Some(c) => Ok(c.params),
        None => bail!("no condition {label:?} in config"),
    }
}

#[derive(Serialize)]
struct RunInfo {
    started_unix_s: u64,
    finished_unix_s: u64,
    trials: usize,
    threads: usize,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenEnv {
            seed,
            config,
            regular,
            out,
        } => {
            let mut spec = match config {
                Some(p) => ExperimentConfig::load(&p)?.environment,
                None => Default::default(),
            };
            spec.seed = seed;
            if regular {
                spec = spec.regular();
            }
            let env = generate_environment(&spec)?;
            env.save(&out)?;
            log::info!("{} handrails, {} anchors -> {}", env.handrails.len(), env.anchors.len(), out.display());
        }
        Command::Plan {
            env,
            config,
            morphology,
            condition,
            strides,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let env = Environment::load(&env)?;
            let settings = cfg.settings(&condition_params(&cfg, &condition)?);
            let (plans, err) = harness::plan_trial(&env, morphology.into(), &settings, strides);
            write_json(&plans, out.as_deref())?;
            if let Some(e) = err {
                bail!("planning stopped after {} strides: {e}", plans.len());
            }
        }
        Command::Run {
            env,
            config,
            morphology,
            condition,
            out,
            trace_dir,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let env_data = Environment::load(&env)?;
            let params = condition_params(&cfg, &condition)?;
            let morph: Morphology = morphology.into();
            let run = run_trial(&env_data, morph, &cfg.settings(&params));
            let result = TrialResult {
                schema_version: cfg.schema_version,
                config_hash: cfg.condition_hash(&params),
                variant: condition,
                morphology: morph,
                seed: env_data.spec.seed,
                metrics: run.metrics.clone(),
                failure: run.failure.clone(),
            };
            if let Some(dir) = trace_dir {
                run.trace.save(&dir, "trace", TraceFormat::Csv, serde_json::to_value(cfg.settings(&params))?)?;
            }
            log::info!("outcome {:?}", result.metrics.outcome);
            write_json(&result, out.as_deref())?;
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Some(dir) = out.or_else(|| cfg.output_dir.clone()) else {
                bail!("no output directory: pass --out or set output_dir in the config");
            };
            fs::create_dir_all(&dir)?;
            let started = unix_now();
            let results = run_sweep(&cfg, &dir)?;
            let info = RunInfo {
                started_unix_s: started,
                finished_unix_s: unix_now(),
                trials: results.len(),
                threads: harness::worker_threads(),
            };
            write_json(&info, Some(&dir.join(RUN_INFO_JSON)))?;
            log::info!("{} trials -> {}", results.len(), dir.display());
        }
        Command::Compare { results, baseline } => {
            let rs = load_results(&results)?;
            if !rs.iter().any(|r| r.variant == baseline) {
                bail!("no trials of baseline {baseline:?} in {}", results.display());
            }
            let cmp = compare(&rs, &baseline);
            write_comparison_csv(&cmp, &results)?;
            log::info!("{} comparisons -> {}", cmp.len(), results.display());
        }
        Command::Report { results, baseline } => {
            let success = fs::read_to_string(results.join(SUCCESS_CSV))
                .with_context(|| format!("reading {}", results.join(SUCCESS_CSV).display()))?;
            println!("{}", success.trim_end());
            let rs = load_results(&results)?;
            let (header, rows) = percent_change_report(&compare(&rs, &baseline));
            if header.len() > 1 {
                println!();
                println!("{}", header.join(","));
                for r in rows {
                    println!("{}", r.join(","));
                }
            }
        }
    }
    Ok(())
}
