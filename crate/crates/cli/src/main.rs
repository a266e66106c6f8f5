use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use tomdss_core::harness::{run_experiment_with, write_outputs, ExperimentConfig};
use tomdss_core::policy::{train_policy, Policy};
use tomdss_core::task::{discretize, RoundState, StateKey};
use tomdss_core::xrl::{counterfactual_at, feature_importance};
use tomdss_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "tomdss", version, about = "Expert policy, Theory-of-Mind tracking and explanation-based interventions for the bomb-defusal task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the task and write the policy table.
    TrainPolicy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print counterfactuals and feature ranking for one state.
    Explain {
        #[arg(long)]
        policy: PathBuf,
        /// A key such as "2,near,low,5", or a JSON state (discretized or raw).
        #[arg(long)]
        state: String,
    },
    /// Simulate all configured conditions and write metrics.
    RunExperiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Reuse a trained policy instead of solving again.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "TOMDSS_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Directory for completed session logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn policy_for(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Arc<Policy>> {
    let policy = match path {
        Some(p) => {
            let policy = Policy::load(p).with_context(|| format!("reading policy {}", p.display()))?;
            if policy.spec() != &cfg.engine.spec {
                bail!("policy {} was trained for a different payoff spec than the config", p.display());
            }
            policy
        }
        None => train_policy(&cfg.engine.spec, &cfg.engine.solver)?,
    };
    Ok(Arc::new(policy))
}

fn parse_state(text: &str, policy: &Policy) -> Result<StateKey> {
    let trimmed = text.trim();
    if !trimmed.starts_with('{') {
        return Ok(trimmed.trim_matches('"').parse()?);
    }
    let value: Value = serde_json::from_str(trimmed).context("state is not valid JSON")?;
    if value.get("time_bin").is_some() {
        return Ok(serde_json::from_value(value)?);
    }
    let raw: RoundState = serde_json::from_value(value).context("state is neither a key nor a round state")?;
    Ok(discretize(&raw, policy.spec()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::TrainPolicy { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let policy = train_policy(&cfg.engine.spec, &cfg.engine.solver)?;
            policy.save(&out)?;
            eprintln!("wrote {} states to {}", policy.space().terminal(), out.display());
        }
        Command::Explain { policy, state } => {
            let policy = Policy::load(&policy)?;
            let key = parse_state(&state, &policy)?;
            let cf = counterfactual_at(&policy, &key)?;
            let ranking = feature_importance(&cf);
            println!("{}", serde_json::to_string_pretty(&json!({ "counterfactual": cf, "ranking": ranking }))?);
        }
        Command::RunExperiment { config, out, seed, policy } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let policy = policy_for(&cfg, policy.as_deref())?;
            let result = run_experiment_with(&cfg, policy)?;
            write_outputs(&out, cfg.seed, cfg.participants, cfg.write_logs, &result)?;
            println!("{}", std::fs::read_to_string(out.join("summary.json"))?);
        }
        Command::Serve { config, port, host, policy, log_dir } => {
            let cfg = load_config(config.as_deref())?;
            let policy = policy_for(&cfg, policy.as_deref())?;
            let state = Arc::new(AppState::with_policy(ServiceConfig::from_experiment(&cfg, log_dir), policy));
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                tomdss_service::serve_on(listener, state).await
            })?;
        }
    }
    Ok(())
}

