use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use lre_core::baselines::PidFamily;
use lre_core::bench::{
    self, run_episode, sweep, write_episodes_csv, write_summary_csv, write_trajectory_csv, Controller, EpisodeMetrics,
    SummaryTable, TrajectoryGroup,
};
use lre_core::config::RunConfig;
use lre_core::engine::{calibrate, CalibrationOptions, CalibrationTarget, Scenario};
use lre_core::par::{self, Execution};
use lre_core::td3::{self, Agent};
use lre_core::tuner::{self, PidEpisodeFitness};
use serde_json::json;

use crate::args::{Command, ControllerKind, Target};
use crate::run::RunDir;

pub struct Outcome {
    pub summary: String,
    pub outputs: Vec<PathBuf>,
}

fn exec() -> Execution {
    Execution::Parallel.effective()
}

fn checkpoint_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.checkpoint.clone())
}

fn load_agent(dir: Option<PathBuf>, cfg: &RunConfig) -> Result<Agent> {
    let dir = dir.ok_or_else(|| anyhow!("the rl controller needs --checkpoint <dir> (or `checkpoint` in the config)"))?;
    Agent::load(&dir, &cfg.td3).with_context(|| format!("loading checkpoint {}", dir.display()))
}

fn controller<'a>(kind: ControllerKind, cfg: &RunConfig, agent: Option<&'a Agent>) -> Result<Controller<'a>> {
    Ok(match kind {
        ControllerKind::Ols => Controller::Ols,
        ControllerKind::Pid => Controller::Pid { gains: cfg.pid.gains, anti_windup: cfg.pid.anti_windup },
        ControllerKind::Rl => Controller::Rl(agent.ok_or_else(|| anyhow!("no agent loaded"))?),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn metrics_line(name: &str, bar: f64, m: &EpisodeMetrics) -> String {
    format!(
        "{name} {bar:.0} bar: reward {:.3}, p_cc {:.2} bar, MR_GG {:.3}, MR_PI {:.3}, IAE p_cc {:.1}",
        m.cumulative_reward, m.steady.p_cc_bar, m.steady.mr_gg, m.steady.mr_pi, m.iae_pcc
    )
}

pub fn dispatch(command: &Command, cfg: &RunConfig, run: &RunDir) -> Result<Outcome> {
    match command {
        Command::Calibrate => calibrate_cmd(cfg, run),
        Command::RunOls { target } => episode_cmd(ControllerKind::Ols, *target, &None, cfg, run),
        Command::TunePid { .. } => tune_cmd(cfg, run),
        Command::Train { .. } => train_cmd(cfg, run),
        Command::Evaluate { controller, target, checkpoint } => episode_cmd(*controller, *target, checkpoint, cfg, run),
        Command::Sweep { controller, target, checkpoint } => sweep_cmd(*controller, *target, checkpoint, cfg, run),
        Command::Report { controller, target, checkpoint } => report_cmd(controller, target, checkpoint, cfg, run),
    }
}

fn calibrate_cmd(cfg: &RunConfig, run: &RunDir) -> Result<Outcome> {
    let initial = cfg.engine_params()?;
    let targets = [CalibrationTarget::nominal_100(), CalibrationTarget::nominal_80()];
    let (params, report) = calibrate(&initial, &targets, CalibrationOptions::default())?;
    let plant = run.file("plant.toml");
    fs::write(&plant, toml::to_string_pretty(&params)?)?;
    let text = run.file("calibration.txt");
    fs::write(&text, report.to_string())?;
    let js = run.file("calibration.json");
    write_json(&js, &report)?;
    Ok(Outcome {
        summary: format!(
            "calibrate: {} iterations, max scaled residual {:.3}, plant written to {}",
            report.iterations,
            report.max_scaled_residual(),
            plant.display()
        ),
        outputs: vec![plant, text, js],
    })
}

fn episode_cmd(
    kind: ControllerKind,
    target: Target,
    checkpoint: &Option<PathBuf>,
    cfg: &RunConfig,
    run: &RunDir,
) -> Result<Outcome> {
    let agent = match kind {
        ControllerKind::Rl => Some(load_agent(checkpoint_dir(checkpoint, cfg), cfg)?),
        _ => None,
    };
    let c = controller(kind, cfg, agent.as_ref())?;
    let mut env = cfg.env()?;
    let (traj, m) = run_episode(&c, Scenario::nominal(target.bar()), &mut env)?;
    let tp = run.file("trajectory.csv");
    write_trajectory_csv(&traj, &tp)?;
    let mp = run.file("metrics.json");
    write_json(&mp, &m)?;
    Ok(Outcome { summary: metrics_line(c.name(), target.bar(), &m), outputs: vec![tp, mp] })
}

fn tune_cmd(cfg: &RunConfig, run: &RunDir) -> Result<Outcome> {
    let fitness = PidEpisodeFitness { env: cfg.env()?, scenarios: cfg.ga.fitness_scenarios() };
    let ga = &cfg.ga;
    info!("GA: population {}, generations {}, seed {}", ga.population, ga.generations, ga.seed);
    let out = tuner::tune(ga, &fitness, exec())?;
    let log_txt = tuner::format_log(&out.log);
    info!("\n{log_txt}");
    let csv = run.file("convergence.csv");
    tuner::write_convergence_csv(&out.log, &csv)?;
    let txt = run.file("convergence.txt");
    fs::write(&txt, log_txt)?;
    let gains_path = run.file("pid_gains.toml");
    fs::write(&gains_path, gains_toml(&out.best.gains())?)?;
    let g = out.best.genes;
    Ok(Outcome {
        summary: format!(
            "tune-pid: best fitness {:.4} over {} generations; VGO ({:.4e}, {:.4e}, {:.4e}) VGH ({:.4e}, {:.4e}, {:.4e}) VGC ({:.4e}, {:.4e}, {:.4e})",
            out.best.fitness,
            ga.generations,
            g[0], g[1], g[2], g[3], g[4], g[5], g[6], g[7], g[8]
        ),
        outputs: vec![csv, txt, gains_path],
    })
}

/// `[pid.gains]` section ready to paste into a run config.
fn gains_toml(gains: &PidFamily) -> Result<String> {
    let mut pid = toml::Table::new();
    pid.insert("gains".into(), toml::Value::try_from(gains)?);
    let mut root = toml::Table::new();
    root.insert("pid".into(), toml::Value::Table(pid));
    Ok(toml::to_string_pretty(&root)?)
}

fn train_cmd(cfg: &RunConfig, run: &RunDir) -> Result<Outcome> {
    let mut env = cfg.env()?;
    let t = &cfg.td3;
    info!("TD3: {} steps ({} warm-up), seed {}", t.total_steps, t.warmup_steps, cfg.seed);
    let out = td3::train_with_progress(&mut env, t, cfg.seed, |log| {
        if log.episode % 10 == 0 {
            info!(
                "episode {:>5}  step {:>7}  reward {:>9.3}  critic loss {:.3e}",
                log.episode, log.steps, log.cumulative_reward, log.critic_loss_mean
            );
        }
    })?;
    let ckpt = run.file("checkpoint");
    let manifest = json!({
        "seed": cfg.seed,
        "steps": t.total_steps,
        "episodes": out.curve.len(),
        "counters": out.agent.counters,
        "td3": t,
    });
    out.agent.save(&ckpt, &manifest)?;
    let curve = run.file("learning_curve.csv");
    td3::write_learning_curve_csv(&out.curve, &curve)?;
    let mut nominal = Vec::new();
    for bar in [80.0, 100.0] {
        let r = td3::greedy_episode_reward(&out.agent, &mut env, Scenario::nominal(bar))?;
        nominal.push(format!("{bar:.0} bar {r:.3}"));
    }
    let last = out.curve.iter().rev().take(20).map(|l| l.cumulative_reward).collect::<Vec<_>>();
    let recent = if last.is_empty() { f64::NAN } else { last.iter().sum::<f64>() / last.len() as f64 };
    Ok(Outcome {
        summary: format!(
            "train: {} steps, {} episodes, mean reward of last {} episodes {:.3}, greedy nominal {}; checkpoint {}",
            t.total_steps,
            out.curve.len(),
            last.len(),
            recent,
            nominal.join(", "),
            ckpt.display()
        ),
        outputs: vec![ckpt, curve],
    })
}

fn sweep_cmd(
    kind: ControllerKind,
    target: Target,
    checkpoint: &Option<PathBuf>,
    cfg: &RunConfig,
    run: &RunDir,
) -> Result<Outcome> {
    let agent = match kind {
        ControllerKind::Rl => Some(load_agent(checkpoint_dir(checkpoint, cfg), cfg)?),
        _ => None,
    };
    let c = controller(kind, cfg, agent.as_ref())?;
    let env = cfg.env()?;
    let r = sweep(&c, target.bar(), &env, exec());
    let table = SummaryTable { rows: vec![r.row.clone()] };
    let sp = run.file("summary.csv");
    write_summary_csv(&table, &sp)?;
    let ep = run.file("episodes.csv");
    write_episodes_csv(&r, &ep)?;
    let row = &r.row;
    Ok(Outcome {
        summary: format!(
            "sweep {} {:.0} bar: reward {:.3} ± {:.3}, p_cc {:.2}..{:.2} bar, MR_GG {:.3} ± {:.3}, MR_PI {:.3} ± {:.3}, {} failed",
            row.controller,
            row.target_bar,
            row.reward.mean,
            row.reward.sd,
            row.p_cc.min,
            row.p_cc.max,
            row.mr_gg.mean,
            row.mr_gg.sd,
            row.mr_pi.mean,
            row.mr_pi.sd,
            row.failed
        ),
        outputs: vec![sp, ep],
    })
}

fn report_cmd(
    kinds: &[ControllerKind],
    targets: &[Target],
    checkpoint: &Option<PathBuf>,
    cfg: &RunConfig,
    run: &RunDir,
) -> Result<Outcome> {
    let ckpt = checkpoint_dir(checkpoint, cfg);
    let kinds: Vec<ControllerKind> = if kinds.is_empty() {
        let mut k = vec![ControllerKind::Ols, ControllerKind::Pid];
        if ckpt.is_some() {
            k.push(ControllerKind::Rl);
        }
        k
    } else {
        kinds.to_vec()
    };
    let bars: Vec<f64> = if targets.is_empty() { cfg.targets.clone() } else { targets.iter().map(|t| t.bar()).collect() };
    let agent = if kinds.contains(&ControllerKind::Rl) { Some(load_agent(ckpt, cfg)?) } else { None };
    let env = cfg.env()?;

    let mut table = SummaryTable::default();
    let mut nominal = Vec::new();
    let mut groups = Vec::new();
    for &kind in &kinds {
        let c = controller(kind, cfg, agent.as_ref())?;
        for &bar in &bars {
            info!("sweeping {} at {bar:.0} bar", c.name());
            let r = sweep(&c, bar, &env, exec());
            if let Some((_, m)) = r
                .episodes
                .iter()
                .find(|e| e.scenario.eta_lox == 1.0 && e.scenario.eta_lh2 == 1.0)
                .and_then(|e| e.result.as_ref().ok())
            {
                nominal.push((c.name().to_string(), bar, *m));
            }
            groups.push(TrajectoryGroup { controller: c.name().into(), target_bar: bar, trajectories: r.trajectories() });
            table.rows.push(r.row);
        }
    }
    if table.rows.is_empty() {
        bail!("nothing to report");
    }
    let files = bench::report(&table, &nominal, &groups, &run.path)?;
    let best = table
        .rows
        .iter()
        .map(|r| format!("{} {:.0} bar {:.3}", r.controller, r.target_bar, r.reward.mean))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome {
        summary: format!("report: {} row-groups, mean sweep reward {best}; {}", table.rows.len(), run.file("report.md").display()),
        outputs: files,
    })
}

/// Number of worker threads to request from the pool, if capped.
pub fn jobs_cap(cfg: &RunConfig) -> Option<usize> {
    (cfg.jobs > 0).then_some(cfg.jobs)
}

pub fn with_jobs<R: Send>(cfg: &RunConfig, f: impl FnOnce() -> R + Send) -> R {
    par::with_jobs(jobs_cap(cfg), f)
}
