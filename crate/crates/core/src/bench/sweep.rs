use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Controller, Trajectory};
use super::metrics::EpisodeMetrics;
use crate::engine::Scenario;
use crate::env::Env;
use crate::par::{self, Execution};

/// The 16 turbine-efficiency combinations at one target pressure.
pub fn efficiency_grid(target_bar: f64) -> Vec<Scenario> {
    let levels = Scenario::EFFICIENCY_LEVELS;
    levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| Scenario::nominal(target_bar).with_efficiency(a, b)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Population statistics; all zero for an empty slice.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            sd: var.sqrt(),
            min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// One controller at one target, aggregated over the scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: String,
    pub target_bar: f64,
    pub scenarios: usize,
    pub failed: usize,
    pub reward: Stats,
    pub p_cc: Stats,
    pub mr_gg: Stats,
    pub mr_pi: Stats,
    pub iae_pcc: Stats,
    pub iae_mrgg: Stats,
    pub iae_mrpi: Stats,
}

impl SummaryRow {
    pub fn from_metrics(controller: &str, target_bar: f64, metrics: &[EpisodeMetrics], failed: usize) -> Self {
        let col = |f: fn(&EpisodeMetrics) -> f64| Stats::of(&metrics.iter().map(f).collect::<Vec<_>>());
        Self {
            controller: controller.into(),
            target_bar,
            scenarios: metrics.len() + failed,
            failed,
            reward: col(|m| m.cumulative_reward),
            p_cc: col(|m| m.steady.p_cc_bar),
            mr_gg: col(|m| m.steady.mr_gg),
            mr_pi: col(|m| m.steady.mr_pi),
            iae_pcc: col(|m| m.iae_pcc),
            iae_mrgg: col(|m| m.iae_mrgg),
            iae_mrpi: col(|m| m.iae_mrpi),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Outcome of one scenario in a sweep.
#[derive(Debug, Clone)]
pub struct SweepEpisode {
    pub scenario: Scenario,
    pub result: Result<(Trajectory, EpisodeMetrics), String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub row: SummaryRow,
    pub episodes: Vec<SweepEpisode>,
}

impl SweepResult {
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.episodes.iter().filter_map(|e| e.result.as_ref().ok().map(|r| r.0.clone())).collect()
    }

    pub fn metrics(&self) -> Vec<EpisodeMetrics> {
        self.episodes.iter().filter_map(|e| e.result.as_ref().ok().map(|r| r.1)).collect()
    }
}

/// Run `controller` on every scenario; failures are counted, not fatal.
pub fn sweep_scenarios(
    controller: &Controller,
    scenarios: &[Scenario],
    target_bar: f64,
    env: &Env,
    exec: Execution,
) -> SweepResult {
    let episodes: Vec<SweepEpisode> = par::map(scenarios, exec, |sc| {
        let mut local = env.clone();
        SweepEpisode {
            scenario: *sc,
            result: run_episode(controller, *sc, &mut local).map_err(|e| e.to_string()),
        }
    });
    let metrics: Vec<EpisodeMetrics> = episodes.iter().filter_map(|e| e.result.as_ref().ok().map(|r| r.1)).collect();
    let failed = episodes.len() - metrics.len();
    SweepResult {
        row: SummaryRow::from_metrics(controller.name(), target_bar, &metrics, failed),
        episodes,
    }
}

/// All 16 efficiency combinations at `target_bar`.
pub fn sweep(controller: &Controller, target_bar: f64, env: &Env, exec: Execution) -> SweepResult {
    sweep_scenarios(controller, &efficiency_grid(target_bar), target_bar, env, exec)
}
