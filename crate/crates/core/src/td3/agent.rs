use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::Td3Config;
use super::noise::{ou_next, OuNoise};
use super::replay::Batch;
use super::Td3Error;
use crate::env::{Action, Observation, ACT_DIM, OBS_DIM};
use crate::neural::{self, adam_step, Adam, Direction, Gradients, Mlp, OutputActivation};

const ACTOR_HEAD: OutputActivation = OutputActivation::ScaledTanh { lo: -1.0, hi: 1.0 };

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub critic_updates: u64,
    pub actor_updates: u64,
    pub target_updates: u64,
}

/// Actor, twin critics, their target copies and optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: Adam,
    pub critic1_opt: Adam,
    pub critic2_opt: Adam,
    pub noise: OuNoise,
    pub counters: UpdateCounters,
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: &Td3Config, rng: &mut R) -> Self {
        let actor = Mlp::new(&dims(OBS_DIM, &config.hidden, ACT_DIM), ACTOR_HEAD, config.actor_last_layer_scale, rng);
        let critic_dims = dims(OBS_DIM + ACT_DIM, &config.hidden, 1);
        let critic1 = Mlp::new(&critic_dims, OutputActivation::Identity, 1.0, rng);
        let critic2 = Mlp::new(&critic_dims, OutputActivation::Identity, 1.0, rng);
        Self::from_networks(actor, critic1, critic2, config)
    }

    /// Assemble an agent; targets start equal to the online networks.
    pub fn from_networks(actor: Mlp, critic1: Mlp, critic2: Mlp, config: &Td3Config) -> Self {
        Self {
            actor_opt: Adam::new(&actor, config.lr),
            critic1_opt: Adam::new(&critic1, config.lr),
            critic2_opt: Adam::new(&critic2, config.lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            noise: OuNoise::new(ACT_DIM, config.ou_theta, config.ou_sigma),
            counters: UpdateCounters::default(),
        }
    }

    /// Normalized action `π̂(x)`, plus OU noise when exploring, clipped to `[-1, 1]`.
    pub fn act_normalized<R: Rng + ?Sized>(&mut self, obs: &Observation, explore: bool, rng: &mut R) -> [f64; ACT_DIM] {
        let a = self.actor.forward(obs.as_slice()).expect("actor input matches the observation size");
        let n = if explore { ou_next(&mut self.noise, rng) } else { vec![0.0; ACT_DIM] };
        std::array::from_fn(|i| (a[i] + n[i]).clamp(-1.0, 1.0))
    }

    pub fn greedy_normalized(&self, obs: &Observation) -> [f64; ACT_DIM] {
        let a = self.actor.forward(obs.as_slice()).expect("actor input matches the observation size");
        std::array::from_fn(|i| a[i].clamp(-1.0, 1.0))
    }

    pub fn save(&self, dir: &Path, manifest: &serde_json::Value) -> Result<(), Td3Error> {
        fs::create_dir_all(dir)?;
        neural::save(&self.actor, &dir.join("actor.bin"))?;
        neural::save(&self.critic1, &dir.join("critic1.bin"))?;
        neural::save(&self.critic2, &dir.join("critic2.bin"))?;
        let text = serde_json::to_string_pretty(manifest).map_err(|e| Td3Error::InvalidConfig(e.to_string()))?;
        fs::write(dir.join("agent.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path, config: &Td3Config) -> Result<Self, Td3Error> {
        let actor = neural::load_expecting(&dir.join("actor.bin"), &dims(OBS_DIM, &config.hidden, ACT_DIM))?;
        let cd = dims(OBS_DIM + ACT_DIM, &config.hidden, 1);
        let critic1 = neural::load_expecting(&dir.join("critic1.bin"), &cd)?;
        let critic2 = neural::load_expecting(&dir.join("critic2.bin"), &cd)?;
        Ok(Self::from_networks(actor, critic1, critic2, config))
    }
}

/// Greedy or exploring action in valve units.
pub fn select_action<R: Rng + ?Sized>(agent: &mut Agent, obs: &Observation, explore: bool, rng: &mut R) -> Action {
    Action::from_normalized(&agent.act_normalized(obs, explore, rng))
}

pub(crate) fn concat_xu(x: &[f64], u: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (OBS_DIM + ACT_DIM));
    for i in 0..n {
        out.extend_from_slice(&x[i * OBS_DIM..(i + 1) * OBS_DIM]);
        out.extend_from_slice(&u[i * ACT_DIM..(i + 1) * ACT_DIM]);
    }
    out
}

/// Bellman targets with an explicit smoothing-noise draw `eps` (one per action entry).
pub fn compute_targets_with_noise(batch: &Batch, agent: &Agent, config: &Td3Config, eps: &[f64]) -> Vec<f64> {
    let n = batch.n;
    let a = agent.actor_target.forward_batch(&batch.x_next, n).expect("actor target shape");
    let c = config.target_noise_clip;
    let u: Vec<f64> = a.iter().zip(eps).map(|(&ai, &e)| (ai + e.clamp(-c, c)).clamp(-1.0, 1.0)).collect();
    let xu = concat_xu(&batch.x_next, &u, n);
    let q1 = agent.critic1_target.forward_batch(&xu, n).expect("critic target shape");
    let q2 = agent.critic2_target.forward_batch(&xu, n).expect("critic target shape");
    (0..n)
        .map(|i| batch.r[i] + config.gamma * (1.0 - batch.d[i]) * q1[i].min(q2[i]))
        .collect()
}

/// `q = r + γ (1 − d) min_i Q̂_i⁻(x′, clip(π̂⁻(x′) + clip(ε, −c, c)))`, `ε ~ N(0, σ)`.
pub fn compute_targets<R: Rng + ?Sized>(batch: &Batch, agent: &Agent, config: &Td3Config, rng: &mut R) -> Vec<f64> {
    let eps: Vec<f64> = if config.target_policy_noise > 0.0 {
        let dist = Normal::new(0.0, config.target_policy_noise).expect("finite std");
        (0..batch.n * ACT_DIM).map(|_| dist.sample(rng)).collect()
    } else {
        vec![0.0; batch.n * ACT_DIM]
    };
    compute_targets_with_noise(batch, agent, config, &eps)
}

/// Batch-mean squared error of `critic` against `q` and its parameter gradient.
pub(crate) fn critic_loss_grad(critic: &Mlp, xu: &[f64], q: &[f64], n: usize) -> (f64, Gradients) {
    let cache = critic.forward_cached(xu, n).expect("critic shape");
    let pred = cache.output();
    let mut loss = 0.0;
    let up: Vec<f64> = pred
        .iter()
        .zip(q)
        .map(|(&p, &t)| {
            loss += (p - t) * (p - t);
            2.0 * (p - t) / n as f64
        })
        .collect();
    let (grads, _) = critic.backward_cached(&cache, &up).expect("critic shape");
    (loss / n as f64, grads)
}

fn critic_step(critic: &mut Mlp, opt: &mut Adam, xu: &[f64], q: &[f64], n: usize) -> f64 {
    let (loss, grads) = critic_loss_grad(critic, xu, q, n);
    adam_step(opt, critic, &grads, Direction::Minimize);
    loss
}

/// One Adam step per critic on the batch-mean squared Bellman error against `targets`.
pub fn critic_update_with_targets(agent: &mut Agent, batch: &Batch, targets: &[f64]) -> (f64, f64) {
    let xu = concat_xu(&batch.x, &batch.u, batch.n);
    let l1 = critic_step(&mut agent.critic1, &mut agent.critic1_opt, &xu, targets, batch.n);
    let l2 = critic_step(&mut agent.critic2, &mut agent.critic2_opt, &xu, targets, batch.n);
    agent.counters.critic_updates += 1;
    (l1, l2)
}

pub fn critic_update<R: Rng + ?Sized>(agent: &mut Agent, batch: &Batch, config: &Td3Config, rng: &mut R) -> (f64, f64) {
    let q = compute_targets(batch, agent, config, rng);
    critic_update_with_targets(agent, batch, &q)
}

/// Gradient ascent of the actor on mean `Q̂(x, π̂(x); θ1)`. Returns that mean.
pub fn actor_update(agent: &mut Agent, batch: &Batch) -> f64 {
    let n = batch.n;
    let actor_cache = agent.actor.forward_cached(&batch.x, n).expect("actor shape");
    let xu = concat_xu(&batch.x, actor_cache.output(), n);
    let critic_cache = agent.critic1.forward_cached(&xu, n).expect("critic shape");
    let objective = critic_cache.output().iter().sum::<f64>() / n as f64;
    let up = vec![1.0 / n as f64; n];
    let (_, dxu) = agent.critic1.backward_cached(&critic_cache, &up).expect("critic shape");
    let mut du = Vec::with_capacity(n * ACT_DIM);
    for row in dxu.chunks_exact(OBS_DIM + ACT_DIM) {
        du.extend_from_slice(&row[OBS_DIM..]);
    }
    let (grads, _) = agent.actor.backward_cached(&actor_cache, &du).expect("actor shape");
    adam_step(&mut agent.actor_opt, &mut agent.actor, &grads, Direction::Maximize);
    agent.counters.actor_updates += 1;
    objective
}

/// `θ⁻ ← (1 − τ) θ⁻ + τ θ` for the actor and both critics.
pub fn polyak_update(agent: &mut Agent, config: &Td3Config) {
    agent.actor_target.soft_update_from(&agent.actor, config.tau);
    agent.critic1_target.soft_update_from(&agent.critic1, config.tau);
    agent.critic2_target.soft_update_from(&agent.critic2, config.tau);
    agent.counters.target_updates += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::td3::Transition;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::time::Instant;

    const XU: usize = OBS_DIM + ACT_DIM;

    fn small_config() -> Td3Config {
        Td3Config { hidden: vec![16, 12], ..Td3Config::default() }
    }

    fn random_agent(seed: u64) -> Agent {
        Agent::new(&small_config(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn constant_critic(v: f64) -> Mlp {
        let mut c = Mlp::zeros(&[XU, 1], OutputActivation::Identity);
        c.layers[0].b[0] = v;
        c
    }

    fn linear_critic(w: &[f64; XU], b: f64) -> Mlp {
        let mut c = Mlp::zeros(&[XU, 1], OutputActivation::Identity);
        c.layers[0].w.copy_from_slice(w);
        c.layers[0].b[0] = b;
        c
    }

    fn zero_actor() -> Mlp {
        Mlp::zeros(&[OBS_DIM, ACT_DIM], ACTOR_HEAD)
    }

    fn random_transition(rng: &mut ChaCha8Rng, d: f64) -> Transition {
        Transition {
            x: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            u: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            r: rng.gen_range(-1.0..0.0),
            x_next: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            d,
        }
    }

    fn random_batch(seed: u64, n: usize, d: f64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts: Vec<Transition> = (0..n).map(|_| random_transition(&mut rng, d)).collect();
        Batch::from_transitions(&ts)
    }

    fn obs(seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Observation { values: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) }
    }

    fn params(net: &Mlp) -> Vec<f64> {
        net.param_iter().copied().collect()
    }

    #[test]
    fn targets_start_equal_to_online_networks() {
        let a = random_agent(0);
        assert_eq!(a.actor, a.actor_target);
        assert_eq!(a.critic1, a.critic1_target);
        assert_eq!(a.critic2, a.critic2_target);
        assert_ne!(a.critic1, a.critic2);
    }

    #[test]
    fn greedy_action_is_deterministic() {
        let mut a = random_agent(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let o = obs(2);
        let u1 = select_action(&mut a, &o, false, &mut rng);
        let u2 = select_action(&mut a, &o, false, &mut rng);
        assert_eq!(u1, u2);
        assert_eq!(a.noise.state, vec![0.0; ACT_DIM]);
    }

    #[test]
    fn saturated_actor_with_positive_noise_stays_at_upper_limit() {
        let mut a = random_agent(3);
        let last = a.actor.layers.len() - 1;
        a.actor.layers[last].b.iter_mut().for_each(|b| *b = 100.0);
        a.noise.sigma = 0.0;
        a.noise.state = vec![0.1; ACT_DIM];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let act = select_action(&mut a, &obs(4), true, &mut rng);
        assert!(a.noise.state.iter().all(|&n| n > 0.0));
        assert_eq!(act, Action::from_normalized(&[1.0; ACT_DIM]));
    }

    #[test]
    fn inference_is_fast_at_full_size() {
        let mut a = Agent::new(&Td3Config::default(), &mut ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = obs(5);
        let calls = 1000;
        let t0 = Instant::now();
        for _ in 0..calls {
            std::hint::black_box(select_action(&mut a, &o, false, &mut rng));
        }
        let per_call = t0.elapsed().as_secs_f64() / calls as f64;
        assert!(per_call < 1e-3, "{per_call} s per call");
    }

    #[test]
    fn terminal_target_is_the_reward() {
        let a = random_agent(5);
        let mut b = random_batch(6, 1, 1.0);
        b.r[0] = 1.0;
        let q = compute_targets(&b, &a, &small_config(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(q, vec![1.0]);
    }

    #[test]
    fn bootstrapped_target_uses_the_smaller_critic() {
        let cfg = small_config();
        let mut a = Agent::from_networks(zero_actor(), constant_critic(2.0), constant_critic(1.5), &cfg);
        let mut b = random_batch(7, 1, 0.0);
        b.r[0] = 0.5;
        let q = compute_targets(&b, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!((q[0] - 1.85).abs() <= 2.0 * f64::EPSILON, "{q:?}");
        // Swapping the twins changes nothing.
        std::mem::swap(&mut a.critic1_target, &mut a.critic2_target);
        let q2 = compute_targets(&b, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(q, q2);
    }

    #[test]
    fn smoothing_noise_is_clipped_before_the_range_clip() {
        let cfg = Td3Config { gamma: 0.5, ..small_config() };
        let mut w = [0.0; XU];
        w[OBS_DIM] = 1.0;
        let c = linear_critic(&w, 0.0);
        let a = Agent::from_networks(zero_actor(), c.clone(), c, &cfg);
        let mut b = random_batch(8, 1, 0.0);
        b.r[0] = 0.0;
        let q = compute_targets_with_noise(&b, &a, &cfg, &[0.05, 0.0, 0.0]);
        assert_eq!(q[0], 0.5 * 0.02);
        let q = compute_targets_with_noise(&b, &a, &cfg, &[-0.05, 0.0, 0.0]);
        assert_eq!(q[0], -0.5 * 0.02);
    }

    #[test]
    fn exact_critics_do_not_move() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w: [f64; XU] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let c = linear_critic(&w, 0.3);
        let mut a = Agent::from_networks(zero_actor(), c.clone(), c.clone(), &cfg);
        let b = random_batch(11, 1, 0.0);
        let xu = concat_xu(&b.x, &b.u, 1);
        let q = c.forward_batch(&xu, 1).unwrap();
        let (l1, l2) = critic_update_with_targets(&mut a, &b, &q);
        assert_eq!((l1, l2), (0.0, 0.0));
        assert_eq!(a.critic1, c);
        assert_eq!(a.critic2, c);
        assert_eq!(a.counters.critic_updates, 1);
    }

    #[test]
    fn linear_critic_gradient_matches_hand_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w: [f64; XU] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let c = linear_critic(&w, -0.2);
        let b = random_batch(13, 2, 0.0);
        let xu = concat_xu(&b.x, &b.u, 2);
        let q = [0.7, -1.1];
        let (loss, g) = critic_loss_grad(&c, &xu, &q, 2);
        // L = ½ Σ (w·z_i + b − q_i)², ∂L/∂w = Σ (p_i − q_i) z_i, ∂L/∂b = Σ (p_i − q_i)
        let p: Vec<f64> = (0..2).map(|i| (0..XU).map(|k| w[k] * xu[i * XU + k]).sum::<f64>() - 0.2).collect();
        let e = [p[0] - q[0], p[1] - q[1]];
        assert!((loss - 0.5 * (e[0] * e[0] + e[1] * e[1])).abs() < 1e-12);
        for k in 0..XU {
            let want = e[0] * xu[k] + e[1] * xu[XU + k];
            assert!((g.w[0][k] - want).abs() < 1e-12, "w[{k}]: {} vs {want}", g.w[0][k]);
        }
        assert!((g.b[0][0] - (e[0] + e[1])).abs() < 1e-12);
    }

    #[test]
    fn critic_update_descends_the_bellman_error() {
        let cfg = small_config();
        let mut a = random_agent(14);
        let b = random_batch(15, 32, 0.0);
        let q = compute_targets(&b, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let (first, _) = critic_update_with_targets(&mut a, &b, &q);
        let mut last = first;
        for _ in 0..200 {
            last = critic_update_with_targets(&mut a, &b, &q).0;
        }
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn flat_critic_gives_no_actor_gradient() {
        let cfg = small_config();
        let mut a = random_agent(16);
        a.critic1 = constant_critic(3.0);
        let before = a.actor.clone();
        let obj = actor_update(&mut a, &random_batch(17, 8, 0.0));
        assert_eq!(obj, 3.0);
        assert_eq!(a.actor, before);
        assert_eq!(a.counters.actor_updates, 1);
        let _ = cfg;
    }

    /// Piecewise-linear interpolant of `Q(u) = −(u₀ − 0.6)²` on a 0.05 grid over `[−1, 1]`,
    /// built as a one-hidden-layer ReLU critic that ignores `x` and the other actions.
    fn quadratic_toy_critic() -> Mlp {
        let knots: Vec<f64> = (0..40).map(|j| -1.0 + 0.05 * j as f64).collect();
        let f = |u: f64| -(u - 0.6) * (u - 0.6);
        let slope = |j: usize| (f(-1.0 + 0.05 * (j + 1) as f64) - f(-1.0 + 0.05 * j as f64)) / 0.05;
        let mut c = Mlp::zeros(&[XU, knots.len(), 1], OutputActivation::Identity);
        for (j, k) in knots.iter().enumerate() {
            c.layers[0].w[j * XU + OBS_DIM] = 1.0;
            c.layers[0].b[j] = -k;
            c.layers[1].w[j] = if j == 0 { slope(0) } else { slope(j) - slope(j - 1) };
        }
        c.layers[1].b[0] = f(-1.0);
        c
    }

    #[test]
    fn toy_critic_interpolates_the_quadratic() {
        let c = quadratic_toy_critic();
        for u in [-1.0, -0.5, 0.0, 0.6, 0.95] {
            let mut z = [0.0; XU];
            z[OBS_DIM] = u;
            let q = c.forward(&z).unwrap()[0];
            assert!((q + (u - 0.6) * (u - 0.6)).abs() < 1e-12, "u {u}: {q}");
        }
    }

    #[test]
    fn actor_climbs_a_one_dimensional_toy_critic() {
        let cfg = Td3Config { lr: 1e-4, ..small_config() };
        let mut a = random_agent(18);
        a.actor_opt = Adam::new(&a.actor, cfg.lr);
        a.critic1 = quadratic_toy_critic();
        let b = random_batch(19, 8, 0.0);
        for _ in 0..20_000 {
            actor_update(&mut a, &b);
        }
        let u = a.actor.forward_batch(&b.x, b.n).unwrap();
        for i in 0..b.n {
            assert!((u[i * ACT_DIM] - 0.6).abs() < 0.01, "row {i}: {}", u[i * ACT_DIM]);
        }
    }

    #[test]
    fn actor_update_reads_only_the_first_critic() {
        let b = random_batch(20, 16, 0.0);
        let mut clean = random_agent(21);
        let mut poisoned = clean.clone();
        let poison = |net: &mut Mlp| {
            for l in &mut net.layers {
                l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = f64::NAN);
            }
        };
        poison(&mut poisoned.critic2);
        poison(&mut poisoned.critic2_target);
        let c1 = clean.critic1.clone();
        assert_eq!(actor_update(&mut clean, &b), actor_update(&mut poisoned, &b));
        assert_eq!(clean.actor, poisoned.actor);
        assert!(poisoned.actor.is_finite());
        assert_eq!(poisoned.critic1, c1);
    }

    #[test]
    fn polyak_hand_case() {
        let cfg = small_config();
        let mut a = random_agent(22);
        for net in [&mut a.actor_target, &mut a.critic1_target, &mut a.critic2_target] {
            for l in &mut net.layers {
                l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = 0.0);
            }
        }
        for net in [&mut a.actor, &mut a.critic1, &mut a.critic2] {
            for l in &mut net.layers {
                l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = 1.0);
            }
        }
        polyak_update(&mut a, &cfg);
        for net in [&a.actor_target, &a.critic1_target, &a.critic2_target] {
            assert!(net.param_iter().all(|&p| p == 0.005));
        }
        assert_eq!(a.counters.target_updates, 1);
    }

    #[test]
    fn polyak_fixed_point() {
        let mut a = random_agent(23);
        let before = a.clone();
        polyak_update(&mut a, &small_config());
        assert_eq!(a.actor_target, before.actor_target);
        assert_eq!(a.critic1_target, before.critic1_target);
        assert_eq!(a.critic2_target, before.critic2_target);
    }

    #[test]
    fn polyak_gap_shrinks_geometrically() {
        let cfg = small_config();
        let mut a = random_agent(24);
        a.actor = random_agent(25).actor;
        let online = params(&a.actor);
        let gap = |a: &Agent| -> Vec<f64> { params(&a.actor_target).iter().zip(&online).map(|(t, o)| o - t).collect() };
        let mut g = gap(&a);
        for _ in 0..50 {
            polyak_update(&mut a, &cfg);
            let next = gap(&a);
            for (n, p) in next.iter().zip(&g) {
                assert!((n - (1.0 - cfg.tau) * p).abs() <= 1e-12 * p.abs().max(1e-300), "{n} vs {p}");
            }
            g = next;
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_config();
        let a = random_agent(26);
        let dir = std::env::temp_dir().join(format!("td3_ckpt_{}", std::process::id()));
        a.save(&dir, &serde_json::json!({ "steps": 0 })).unwrap();
        let b = Agent::load(&dir, &cfg).unwrap();
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.critic1, b.critic1);
        assert_eq!(a.critic2, b.critic2);
        assert!(Agent::load(&dir, &Td3Config::default()).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn terminal_targets_ignore_critics(seed in 0u64..1000, scale in -5.0f64..5.0) {
            let cfg = small_config();
            let a = random_agent(seed);
            let b = random_batch(seed + 1, 4, 1.0);
            let q = compute_targets(&b, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut p = a.clone();
            for net in [&mut p.critic1_target, &mut p.critic2_target, &mut p.actor_target] {
                for l in &mut net.layers {
                    l.w.iter_mut().for_each(|w| *w *= scale);
                    l.b.iter_mut().for_each(|w| *w += scale);
                }
            }
            let q2 = compute_targets(&b, &p, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(&q, &b.r);
            prop_assert_eq!(q, q2);
        }

        #[test]
        fn target_lag_is_exact(seed in 0u64..1000, tau in 0.001f64..1.0) {
            let cfg = Td3Config { tau, ..small_config() };
            let mut a = random_agent(seed);
            a.critic1 = random_agent(seed + 7).critic1;
            let pre = params(&a.critic1_target);
            let online = params(&a.critic1);
            polyak_update(&mut a, &cfg);
            let post = params(&a.critic1_target);
            let worst = post
                .iter()
                .zip(&pre)
                .zip(&online)
                .map(|((n, p), o)| (n - (p + tau * (o - p))).abs())
                .fold(0.0, f64::max);
            prop_assert_eq!(worst, 0.0);
        }
    }
}
