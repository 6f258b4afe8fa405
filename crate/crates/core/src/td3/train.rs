use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{actor_update, critic_update, polyak_update, Agent};
use super::config::Td3Config;
use super::replay::{ReplayBuffer, Transition};
use super::Td3Error;
use crate::engine::Scenario;
use crate::env::{sample_scenario, Action, Env, Observation, ACT_DIM};

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Environment steps taken when the episode ended.
    pub steps: usize,
    pub p_cc_ref_bar: f64,
    pub eta_lox: f64,
    pub eta_lh2: f64,
    pub cumulative_reward: f64,
    pub r_sp_mean: f64,
    pub r_gg_mean: f64,
    pub r_valve_mean: f64,
    /// Mean critic-1 loss over the updates made during the episode (0 if none).
    pub critic_loss_mean: f64,
}

pub struct TrainOutcome {
    pub agent: Agent,
    pub curve: Vec<EpisodeLog>,
}

/// Run one training update iteration (critics always, actor and targets on delay steps).
pub(crate) fn update_iteration<R: Rng + ?Sized>(
    agent: &mut Agent,
    buffer: &ReplayBuffer,
    config: &Td3Config,
    rng: &mut R,
) -> f64 {
    let batch = buffer.sample(rng, config.batch);
    let (l1, _) = critic_update(agent, &batch, config, rng);
    if agent.counters.critic_updates.is_multiple_of(config.policy_delay as u64) {
        actor_update(agent, &batch);
        polyak_update(agent, config);
    }
    l1
}

struct Running {
    scenario: Scenario,
    reward: f64,
    parts: [f64; 3],
    n: usize,
    loss: f64,
    n_loss: usize,
}

impl Running {
    fn new(scenario: Scenario) -> Self {
        Self { scenario, reward: 0.0, parts: [0.0; 3], n: 0, loss: 0.0, n_loss: 0 }
    }
}

pub fn train(env: &mut Env, config: &Td3Config, seed: u64) -> Result<TrainOutcome, Td3Error> {
    train_with_progress(env, config, seed, |_| {})
}

/// TD3 training loop. Warm-up steps use uniform actions and no updates; after
/// that every `train_frequency` steps run `gradient_steps` update iterations.
pub fn train_with_progress<F: FnMut(&EpisodeLog)>(
    env: &mut Env,
    config: &Td3Config,
    seed: u64,
    mut progress: F,
) -> Result<TrainOutcome, Td3Error> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Agent::new(config, &mut rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut curve = Vec::new();

    let scenario = sample_scenario(&mut rng, &config.scenarios);
    let mut obs: Observation = env.reset(scenario)?;
    agent.noise.reset();
    let mut run = Running::new(scenario);

    for s in 1..=config.total_steps {
        let u: [f64; ACT_DIM] = if s <= config.warmup_steps {
            std::array::from_fn(|_| rng.gen_range(-1.0..=1.0))
        } else {
            agent.act_normalized(&obs, true, &mut rng)
        };
        let res = env.step(&Action::from_normalized(&u))?;
        let d = if res.done { 1.0 } else { 0.0 };
        buffer.push(Transition { x: obs.values, u, r: res.reward, x_next: res.obs.values, d });
        run.reward += res.reward;
        run.parts[0] += res.info.reward.r_sp;
        run.parts[1] += res.info.reward.r_gg;
        run.parts[2] += res.info.reward.r_valve;
        run.n += 1;
        obs = res.obs;

        if s > config.warmup_steps && (s - config.warmup_steps).is_multiple_of(config.train_frequency) {
            for _ in 0..config.gradient_steps {
                run.loss += update_iteration(&mut agent, &buffer, config, &mut rng);
                run.n_loss += 1;
            }
        }

        if res.done {
            let n = run.n as f64;
            let log = EpisodeLog {
                episode: curve.len(),
                steps: s,
                p_cc_ref_bar: run.scenario.p_cc_ref / 1e5,
                eta_lox: run.scenario.eta_lox,
                eta_lh2: run.scenario.eta_lh2,
                cumulative_reward: run.reward,
                r_sp_mean: run.parts[0] / n,
                r_gg_mean: run.parts[1] / n,
                r_valve_mean: run.parts[2] / n,
                critic_loss_mean: if run.n_loss > 0 { run.loss / run.n_loss as f64 } else { 0.0 },
            };
            progress(&log);
            curve.push(log);
            let scenario = sample_scenario(&mut rng, &config.scenarios);
            obs = env.reset(scenario)?;
            agent.noise.reset();
            run = Running::new(scenario);
        }
    }
    Ok(TrainOutcome { agent, curve })
}

/// Learning curve as CSV, one row per finished episode.
pub fn write_learning_curve_csv(curve: &[EpisodeLog], path: &std::path::Path) -> Result<(), Td3Error> {
    let to_io = |e: csv::Error| Td3Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    for row in curve {
        w.serialize(row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Cumulative reward of one greedy episode.
pub fn greedy_episode_reward(agent: &Agent, env: &mut Env, scenario: Scenario) -> Result<f64, Td3Error> {
    let mut obs = env.reset(scenario)?;
    let mut total = 0.0;
    loop {
        let r = env.step(&Action::from_normalized(&agent.greedy_normalized(&obs)))?;
        total += r.reward;
        obs = r.obs;
        if r.done {
            return Ok(total);
        }
    }
}
