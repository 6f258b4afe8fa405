//! Twin Delayed DDPG: twin critics, target networks, delayed policy updates,
//! clipped target-policy smoothing, OU exploration and a replay buffer.
//!
//! Actions live in `[-1, 1]³` inside the agent and are mapped onto the valve
//! box by [`crate::env::Action::from_normalized`].

mod agent;
mod config;
mod noise;
mod replay;
mod train;

use thiserror::Error;

pub use agent::{
    actor_update, compute_targets, compute_targets_with_noise, critic_update, critic_update_with_targets,
    polyak_update, select_action, Agent, UpdateCounters,
};
pub use config::Td3Config;
pub use noise::{ou_next, OuNoise};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{
    greedy_episode_reward, train, train_with_progress, write_learning_curve_csv, EpisodeLog, TrainOutcome,
};

#[derive(Debug, Error)]
pub enum Td3Error {
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error("invalid TD3 config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
