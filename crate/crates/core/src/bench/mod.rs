//! Evaluation protocol: episode runner, IAE, steady-state window statistics,
//! the 16-scenario efficiency sweep and report writing.

mod episode;
mod metrics;
mod report;
mod sweep;

use thiserror::Error;

pub use episode::{run_episode, Controller, StepRecord, Trajectory};
pub use metrics::{
    abs_errors, compute_metrics, iae, steady_state_stats, EpisodeMetrics, SteadyState, WINDOW_END, WINDOW_START,
};
pub use report::{
    markdown, plot_group, report, write_episodes_csv, write_summary_csv, write_trajectory_csv, TrajectoryGroup,
};
pub use sweep::{
    efficiency_grid, sweep, sweep_scenarios, Stats, SummaryRow, SummaryTable, SweepEpisode, SweepResult,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown variable '{0}' (expected p_cc, mr_gg or mr_pi)")]
    UnknownVariable(String),
    #[error("trajectory spans [{first}, {last}] s and does not cover the steady-state window")]
    WindowNotCovered { first: f64, last: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plotting failed: {0}")]
    Plot(String),
}

/// Synthetic trajectories on the standard 25 Hz grid.
#[cfg(test)]
pub(crate) mod fixtures {
    use super::{StepRecord, Trajectory};
    use crate::engine::{EngineOutputs, Scenario, HANDOFF_TIME};
    use crate::env::{Action, RewardBreakdown, CONTROL_DT, EPISODE_STEPS};

    pub fn grid_times() -> Vec<f64> {
        (1..=EPISODE_STEPS).map(|k| HANDOFF_TIME + k as f64 * CONTROL_DT).collect()
    }

    /// One record per grid time, outputs from `f(t)`.
    pub fn synthetic(scenario: Scenario, f: impl Fn(f64) -> EngineOutputs) -> Trajectory {
        let times = grid_times();
        let n = times.len();
        let records = times
            .into_iter()
            .enumerate()
            .map(|(i, t)| StepRecord {
                t,
                outputs: f(t),
                action: Action::new(0.5, 0.5, 0.5),
                reward: RewardBreakdown::from_parts(-0.01, 0.0, -0.001 * i as f64),
                done: i + 1 == n,
            })
            .collect();
        Trajectory { controller: "TEST".into(), scenario, records }
    }
}
