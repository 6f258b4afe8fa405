use serde::{Deserialize, Serialize};

use super::episode::Trajectory;
use super::BenchError;

pub const WINDOW_START: f64 = 3.5;
pub const WINDOW_END: f64 = 5.0;
const T_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub p_cc_bar: f64,
    pub mr_gg: f64,
    pub mr_pi: f64,
    pub p_gg_bar: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Undiscounted sum of per-step totals.
    pub cumulative_reward: f64,
    pub r_sp: f64,
    pub r_gg: f64,
    pub r_valve: f64,
    /// Sum of |error| over control steps, bar.
    pub iae_pcc: f64,
    pub iae_mrgg: f64,
    pub iae_mrpi: f64,
    pub steady: SteadyState,
}

/// Absolute tracking error of a named variable at every control step.
pub fn abs_errors(traj: &Trajectory, variable: &str) -> Result<Vec<f64>, BenchError> {
    let s = &traj.scenario;
    let f: Box<dyn Fn(&super::StepRecord) -> f64> = match variable {
        "p_cc" => Box::new(|r| (r.outputs.p_cc - s.p_cc_ref).abs() / 1e5),
        "mr_gg" => Box::new(|r| (r.outputs.mr_gg - s.mr_gg_ref).abs()),
        "mr_pi" => Box::new(|r| (r.outputs.mr_pi - s.mr_pi_ref).abs()),
        other => return Err(BenchError::UnknownVariable(other.to_string())),
    };
    Ok(traj.records.iter().map(f).collect())
}

/// Integrated absolute error as the plain sum over control steps (no dt);
/// chamber pressure in bar.
pub fn iae(traj: &Trajectory, variable: &str) -> Result<f64, BenchError> {
    if traj.records.is_empty() {
        return Err(BenchError::EmptyTrajectory);
    }
    Ok(abs_errors(traj, variable)?.iter().sum())
}

/// Means over samples with 3.5 s ≤ t ≤ 5.0 s, both ends inclusive.
pub fn steady_state_stats(traj: &Trajectory) -> Result<SteadyState, BenchError> {
    let first = traj.records.first().map_or(f64::INFINITY, |r| r.t);
    let last = traj.records.last().map_or(f64::NEG_INFINITY, |r| r.t);
    if first > WINDOW_START + T_EPS || last < WINDOW_END - T_EPS {
        return Err(BenchError::WindowNotCovered { first, last });
    }
    let mut acc = SteadyState::default();
    for r in traj
        .records
        .iter()
        .filter(|r| r.t >= WINDOW_START - T_EPS && r.t <= WINDOW_END + T_EPS)
    {
        acc.p_cc_bar += r.outputs.p_cc / 1e5;
        acc.mr_gg += r.outputs.mr_gg;
        acc.mr_pi += r.outputs.mr_pi;
        acc.p_gg_bar += r.outputs.p_gg / 1e5;
        acc.samples += 1;
    }
    if acc.samples == 0 {
        return Err(BenchError::WindowNotCovered { first, last });
    }
    let n = acc.samples as f64;
    acc.p_cc_bar /= n;
    acc.mr_gg /= n;
    acc.mr_pi /= n;
    acc.p_gg_bar /= n;
    Ok(acc)
}

pub fn compute_metrics(traj: &Trajectory) -> Result<EpisodeMetrics, BenchError> {
    let mut m = EpisodeMetrics {
        iae_pcc: iae(traj, "p_cc")?,
        iae_mrgg: iae(traj, "mr_gg")?,
        iae_mrpi: iae(traj, "mr_pi")?,
        steady: steady_state_stats(traj)?,
        ..Default::default()
    };
    for r in &traj.records {
        m.cumulative_reward += r.reward.total;
        m.r_sp += r.reward.r_sp;
        m.r_gg += r.reward.r_gg;
        m.r_valve += r.reward.r_valve;
    }
    Ok(m)
}
