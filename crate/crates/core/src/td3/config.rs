use serde::{Deserialize, Serialize};

use super::Td3Error;
use crate::env::TrainingScenarios;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub lr: f64,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub train_frequency: usize,
    pub gradient_steps: usize,
    pub policy_delay: usize,
    /// Std of the Gaussian smoothing noise on target actions (normalized units).
    pub target_policy_noise: f64,
    pub target_noise_clip: f64,
    pub ou_sigma: f64,
    pub ou_theta: f64,
    pub hidden: Vec<usize>,
    /// Extra scale on the initial weights of the actor's last layer.
    pub actor_last_layer_scale: f64,
    pub scenarios: TrainingScenarios,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.90,
            tau: 0.005,
            batch: 256,
            lr: 0.001,
            buffer_capacity: 25_000,
            warmup_steps: 5_000,
            total_steps: 100_000,
            train_frequency: 10,
            gradient_steps: 10,
            policy_delay: 2,
            target_policy_noise: 0.01,
            target_noise_clip: 0.02,
            ou_sigma: 0.05,
            ou_theta: 0.25,
            hidden: crate::neural::HIDDEN.to_vec(),
            actor_last_layer_scale: 0.1,
            scenarios: TrainingScenarios::default(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), Td3Error> {
        let bad = |m: &str| Err(Td3Error::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.target_noise_clip >= self.target_policy_noise && self.target_policy_noise >= 0.0) {
            return bad("need target_noise_clip >= target_policy_noise >= 0");
        }
        let counts = [
            self.batch,
            self.buffer_capacity,
            self.total_steps,
            self.train_frequency,
            self.gradient_steps,
            self.policy_delay,
        ];
        if counts.contains(&0) {
            return bad("all counts must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.scenarios.targets_bar.is_empty() || self.scenarios.efficiency_levels.is_empty() {
            return bad("training scenario set is empty");
        }
        Ok(())
    }
}
