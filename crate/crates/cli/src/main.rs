mod args;
mod commands;
mod run;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use lre_core::config::RunConfig;

use args::{Cli, Command};
use run::RunDir;

/// Config file (flag or `LRE_CONFIG`) or defaults, then flag overrides.
fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    let mut cfg = cfg.scaled();
    // The master seed drives every stochastic component.
    cfg.ga.seed = cfg.seed;
    match &cli.command {
        Command::TunePid { population, generations } => {
            if let Some(p) = population {
                cfg.ga.population = *p;
            }
            if let Some(n) = generations {
                cfg.ga.generations = *n;
            }
        }
        Command::Train { steps, warmup } => {
            if let Some(s) = steps {
                cfg.td3.total_steps = *s;
            }
            if let Some(w) = warmup {
                cfg.td3.warmup_steps = *w;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let argv: Vec<String> = std::env::args().collect();
    let dir = RunDir::create(cli.command.name(), &argv, &cfg)?;
    let outcome = match commands::with_jobs(&cfg, || commands::dispatch(&cli.command, &cfg, &dir)) {
        Ok(o) => o,
        Err(e) => {
            let _ = dir.fail(&format!("{e:#}"));
            return Err(e);
        }
    };
    let path = dir.finish(&outcome.summary, &outcome.outputs)?;
    Ok(format!("{} [run dir {}]", outcome.summary, path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors exit with 2, help/version with 0.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
