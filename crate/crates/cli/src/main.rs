use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use hsdn_core::scenario::output::{compare_csv, render_run};
use hsdn_core::scenario::{builtin, run_trial, ConfigErrors, Method, ScenarioConfig, TrialSet};

#[derive(Parser)]
#[command(
    name = "hsdn",
    version,
    about = "Hybrid SDN / distributed control simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every trial of one scenario and write its reports.
    Run {
        /// JSON config file or built-in scenario name.
        #[arg(long)]
        config: String,
        /// Overrides the config seed.
        #[arg(long, env = "HSDN_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for trials; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Run the same scenario under several methods.
    Compare {
        /// One config for all methods, or one per method in order.
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<Method>,
        #[arg(long, env = "HSDN_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Check a config and list every problem.
    Validate {
        #[arg(long)]
        config: String,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {errors}")]
    Config { path: String, errors: ConfigErrors },
    #[error("compare needs at least two methods")]
    TooFewMethods,
    #[error("method {0} listed twice")]
    DuplicateMethod(Method),
    #[error("got {configs} configs for {methods} methods; pass one config or one per method")]
    ConfigCount { configs: usize, methods: usize },
    #[error("{0} and {1} describe different topologies")]
    TopologyMismatch(String, String),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load(arg: &str) -> Result<ScenarioConfig, CliError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(cfg) = builtin::get(arg) {
            return Ok(cfg);
        }
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    ScenarioConfig::from_json_str(&text).map_err(|errors| CliError::Config {
        path: arg.to_string(),
        errors,
    })
}

fn run_set(cfg: &ScenarioConfig, seed: u64, jobs: usize) -> Result<TrialSet, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    // collect() keeps trial order, so output does not depend on `jobs`
    let outputs = pool.install(|| {
        (0..cfg.knobs.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, seed, i))
            .collect()
    });
    Ok(TrialSet::collect(cfg, seed, outputs))
}

/// Writes through a temp file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(body.as_bytes()).map_err(io_err(&target))?;
    tmp.as_file().sync_all().map_err(io_err(&target))?;
    tmp.persist(&target).map_err(|e| CliError::Io {
        path: target.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

fn write_all(dir: &Path, files: &BTreeMap<String, String>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, body) in files {
        write_atomic(dir, name, body)?;
    }
    Ok(())
}

fn summary_line(set: &TrialSet) -> String {
    let s = set.cdf().summary();
    format!(
        "{}: {} trials, {} samples, mean {:.1} us, p95 {} us, delivery {:.4}, anomalies {}",
        set.method,
        set.trials,
        s.n,
        s.mean,
        s.p95,
        set.report.delivery_ratio(),
        set.report.anomalies
    )
}

/// Exit 2 when any anomaly was seen.
fn status(anomalies: u64) -> ExitCode {
    if anomalies > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_run(
    config: &str,
    seed: Option<u64>,
    out: &Path,
    jobs: usize,
    method: Option<Method>,
    trials: Option<u32>,
) -> Result<ExitCode, CliError> {
    let mut cfg = load(config)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    if let Some(t) = trials {
        cfg.knobs.trials = t;
    }
    let seed = seed.unwrap_or(cfg.seed);
    let set = run_set(&cfg, seed, jobs)?;
    write_all(out, &render_run(&cfg, &set))?;
    println!("{}", summary_line(&set));
    Ok(status(set.report.anomalies))
}

fn cmd_compare(
    configs: &[String],
    methods: &[Method],
    seed: Option<u64>,
    out: &Path,
    jobs: usize,
    trials: Option<u32>,
) -> Result<ExitCode, CliError> {
    if methods.len() < 2 {
        return Err(CliError::TooFewMethods);
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(CliError::DuplicateMethod(*m));
        }
    }
    if configs.len() != 1 && configs.len() != methods.len() {
        return Err(CliError::ConfigCount {
            configs: configs.len(),
            methods: methods.len(),
        });
    }
    let loaded: Vec<ScenarioConfig> = configs.iter().map(|c| load(c)).collect::<Result<_, _>>()?;
    for (i, c) in loaded.iter().enumerate().skip(1) {
        if !loaded[0].same_topology(c) {
            return Err(CliError::TopologyMismatch(
                configs[0].clone(),
                configs[i].clone(),
            ));
        }
    }
    let seed = seed.unwrap_or(loaded[0].seed);
    let mut sets = Vec::new();
    for (i, &m) in methods.iter().enumerate() {
        let mut cfg = loaded[if loaded.len() == 1 { 0 } else { i }].clone();
        cfg.method = m;
        if let Some(t) = trials {
            cfg.knobs.trials = t;
        }
        let set = run_set(&cfg, seed, jobs)?;
        write_all(&out.join(m.name()), &render_run(&cfg, &set))?;
        println!("{}", summary_line(&set));
        sets.push(set);
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    write_atomic(out, "compare.csv", &compare_csv(&sets))?;
    Ok(status(sets.iter().map(|s| s.report.anomalies).sum()))
}

fn cmd_validate(config: &str) -> Result<ExitCode, CliError> {
    let cfg = load(config)?;
    println!(
        "ok: {} ({} nodes, {} links, {} events, method {})",
        cfg.name,
        cfg.topology.nodes.len(),
        cfg.topology.links.len(),
        cfg.events.len(),
        cfg.method
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run {
            config,
            seed,
            out,
            jobs,
            method,
            trials,
        } => cmd_run(config, *seed, out, *jobs, *method, *trials),
        Cmd::Compare {
            config,
            methods,
            seed,
            out,
            jobs,
            trials,
        } => cmd_compare(config, methods, *seed, out, *jobs, *trials),
        Cmd::Validate { config } => cmd_validate(config),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
