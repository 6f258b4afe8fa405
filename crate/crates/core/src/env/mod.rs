//! 25 Hz control environment over the engine model.

mod reward;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::OpenLoopSequence;
use crate::engine::{
    derived_outputs, init_state, step, steady_state_solve, EngineError, EngineOutputs, EngineParams, EngineState,
    Scenario, END_POSITIONS_100, END_POSITIONS_80, HANDOFF_TIME, VGC, VGH, VGO,
};

pub use reward::{compute_reward, RewardBreakdown, CLIP, R_SP_MIN};

pub const CONTROL_DT: f64 = 0.04;
pub const EPISODE_END: f64 = 5.0;
/// Control steps from the hand-off at 1.5 s until the 5.0 s horizon.
pub const EPISODE_STEPS: usize = 88;
pub const OBS_DIM: usize = 9;
pub const ACT_DIM: usize = 3;
/// Command limits for `[VGO, VGH, VGC]`.
pub const ACTION_LOW: [f64; 3] = [0.25, 0.25, 0.20];
pub const ACTION_HIGH: [f64; 3] = [1.0, 1.0, 1.0];
pub const P_CC_SCALE: f64 = 100.0e5;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("normalization reference was never computed")]
    MissingReference,
    #[error("episode already finished, call reset")]
    EpisodeFinished,
    #[error("no active episode, call reset")]
    NotReset,
}

/// Commanded positions of the three GG valves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub cmd_vgo: f64,
    pub cmd_vgh: f64,
    pub cmd_vgc: f64,
}

impl Action {
    pub fn new(cmd_vgo: f64, cmd_vgh: f64, cmd_vgc: f64) -> Self {
        Self { cmd_vgo, cmd_vgh, cmd_vgc }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.cmd_vgo, self.cmd_vgh, self.cmd_vgc]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn clamped(&self) -> Self {
        let a = self.to_array();
        Self::from_array(std::array::from_fn(|i| a[i].clamp(ACTION_LOW[i], ACTION_HIGH[i])))
    }

    /// Affine map from `[-1, 1]³` onto the valve box.
    pub fn from_normalized(u: &[f64]) -> Self {
        Self::from_array(std::array::from_fn(|i| {
            let x = u[i].clamp(-1.0, 1.0);
            ACTION_LOW[i] + 0.5 * (x + 1.0) * (ACTION_HIGH[i] - ACTION_LOW[i])
        }))
    }

    pub fn to_normalized(&self) -> [f64; 3] {
        let a = self.to_array();
        std::array::from_fn(|i| 2.0 * (a[i] - ACTION_LOW[i]) / (ACTION_HIGH[i] - ACTION_LOW[i]) - 1.0)
    }
}

/// `[p_cc_ref, ε_cc, ε_PI, ε_GG, pos_VGO, pos_VGH, pos_VGC, ω_LOX, ω_LH2]`, normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: [f64; OBS_DIM],
}

impl Observation {
    pub fn p_cc_ref(&self) -> f64 {
        self.values[0]
    }
    pub fn eps_cc(&self) -> f64 {
        self.values[1]
    }
    pub fn eps_pi(&self) -> f64 {
        self.values[2]
    }
    pub fn eps_gg(&self) -> f64 {
        self.values[3]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Fixed shaft-speed scales (nominal 100-bar equilibrium).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReference {
    pub omega_lox: f64,
    pub omega_lh2: f64,
}

impl NormReference {
    pub fn compute(params: &EngineParams) -> Result<Self, EngineError> {
        let s = steady_state_solve(&END_POSITIONS_100, params, &Scenario::nominal(100.0))?;
        Ok(Self { omega_lox: s.omega_lox, omega_lh2: s.omega_lh2 })
    }
}

pub fn observe(
    state: &EngineState,
    outputs: &EngineOutputs,
    scenario: &Scenario,
    reference: Option<&NormReference>,
) -> Result<Observation, EnvError> {
    let r = reference.ok_or(EnvError::MissingReference)?;
    let pos = &state.valve_pos;
    Ok(Observation {
        values: [
            scenario.p_cc_ref / P_CC_SCALE,
            (outputs.p_cc - scenario.p_cc_ref) / scenario.p_cc_ref,
            (outputs.mr_pi - scenario.mr_pi_ref) / scenario.mr_pi_ref,
            (outputs.mr_gg - scenario.mr_gg_ref) / scenario.mr_gg_ref,
            pos[VGO],
            pos[VGH],
            pos[VGC],
            state.omega_lox / r.omega_lox,
            state.omega_lh2 / r.omega_lh2,
        ],
    })
}

/// Valve end positions per target pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndPositions {
    pub p100: [f64; 5],
    pub p80: [f64; 5],
}

impl Default for EndPositions {
    fn default() -> Self {
        Self { p100: END_POSITIONS_100, p80: END_POSITIONS_80 }
    }
}

impl EndPositions {
    pub fn for_target(&self, p_cc_ref: f64) -> [f64; 5] {
        if (p_cc_ref - 80.0e5).abs() < 1.0 {
            self.p80
        } else {
            self.p100
        }
    }

    pub fn sequence(&self, p_cc_ref: f64) -> OpenLoopSequence {
        OpenLoopSequence::nominal(self.for_target(p_cc_ref))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub t: f64,
    pub outputs: EngineOutputs,
    pub applied: Action,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

fn scenario_key(s: &Scenario) -> [u64; 5] {
    [s.p_cc_ref, s.mr_pi_ref, s.mr_gg_ref, s.eta_lox, s.eta_lh2].map(f64::to_bits)
}

struct Episode {
    scenario: Scenario,
    state: EngineState,
    outputs: EngineOutputs,
    steps: usize,
    done: bool,
}

/// One environment instance; single-threaded, cheap to clone per worker.
pub struct Env {
    params: EngineParams,
    ends: EndPositions,
    reference: Option<NormReference>,
    handoff_cache: HashMap<[u64; 5], EngineState>,
    episode: Option<Episode>,
}

impl Clone for Env {
    fn clone(&self) -> Self {
        Self {
            params: self.params.clone(),
            ends: self.ends,
            reference: self.reference,
            handoff_cache: self.handoff_cache.clone(),
            episode: None,
        }
    }
}

impl Env {
    pub fn new(params: EngineParams) -> Result<Self, EnvError> {
        Self::with_end_positions(params, EndPositions::default())
    }

    pub fn with_end_positions(params: EngineParams, ends: EndPositions) -> Result<Self, EnvError> {
        params.validate()?;
        let reference = NormReference::compute(&params)?;
        Ok(Self {
            params,
            ends,
            reference: Some(reference),
            handoff_cache: HashMap::new(),
            episode: None,
        })
    }

    /// Environment without normalization constants; `reset` fails until they are set.
    pub fn without_reference(params: EngineParams) -> Self {
        Self {
            params,
            ends: EndPositions::default(),
            reference: None,
            handoff_cache: HashMap::new(),
            episode: None,
        }
    }

    pub fn set_reference(&mut self, reference: NormReference) {
        self.reference = Some(reference);
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn end_positions(&self) -> &EndPositions {
        &self.ends
    }

    pub fn reference(&self) -> Option<&NormReference> {
        self.reference.as_ref()
    }

    pub fn sequence(&self, scenario: &Scenario) -> OpenLoopSequence {
        self.ends.sequence(scenario.p_cc_ref)
    }

    /// Plant state at the hand-off time for `scenario` (memoized).
    pub fn handoff_state(&mut self, scenario: &Scenario) -> Result<EngineState, EnvError> {
        let key = scenario_key(scenario);
        if let Some(s) = self.handoff_cache.get(&key) {
            return Ok(*s);
        }
        let s = init_state(&self.params, scenario, &self.sequence(scenario))?;
        self.handoff_cache.insert(key, s);
        Ok(s)
    }

    pub fn reset(&mut self, scenario: Scenario) -> Result<Observation, EnvError> {
        if self.reference.is_none() {
            return Err(EnvError::MissingReference);
        }
        let state = self.handoff_state(&scenario)?;
        self.reset_to(scenario, state)
    }

    /// Start an episode from an arbitrary plant state.
    pub fn reset_to(&mut self, scenario: Scenario, state: EngineState) -> Result<Observation, EnvError> {
        let outputs = derived_outputs(&state, &self.params, &scenario)?;
        let obs = observe(&state, &outputs, &scenario, self.reference.as_ref())?;
        self.episode = Some(Episode { scenario, state, outputs, steps: 0, done: false });
        Ok(obs)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.done {
            return Err(EnvError::EpisodeFinished);
        }
        let applied = action.clamped();
        let end = self.ends.for_target(ep.scenario.p_cc_ref);
        let a = applied.to_array();
        let cmd = [end[0], end[1], a[0], a[1], a[2]];
        let start_t = ep.state.t;
        let mut next = step(&ep.state, &cmd, &self.params, &ep.scenario, CONTROL_DT)?;
        ep.steps += 1;
        // Keep the clock on the exact control grid.
        next.t = if (start_t - (HANDOFF_TIME + (ep.steps - 1) as f64 * CONTROL_DT)).abs() < 1e-9 {
            HANDOFF_TIME + ep.steps as f64 * CONTROL_DT
        } else {
            start_t + CONTROL_DT
        };
        let outputs = derived_outputs(&next, &self.params, &ep.scenario)?;
        let slews = [
            next.valve_pos[VGO] - ep.state.valve_pos[VGO],
            next.valve_pos[VGH] - ep.state.valve_pos[VGH],
            next.valve_pos[VGC] - ep.state.valve_pos[VGC],
        ];
        let reward = compute_reward(&outputs, &ep.scenario, &slews);
        let obs = observe(&next, &outputs, &ep.scenario, self.reference.as_ref())?;
        let done = next.t >= EPISODE_END - 1e-9;
        ep.state = next;
        ep.outputs = outputs;
        ep.done = done;
        Ok(StepResult {
            obs,
            reward: reward.total,
            done,
            info: StepInfo { t: next.t, outputs, applied, reward },
        })
    }

    pub fn state(&self) -> Option<&EngineState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn outputs(&self) -> Option<&EngineOutputs> {
        self.episode.as_ref().map(|e| &e.outputs)
    }

    pub fn scenario(&self) -> Option<&Scenario> {
        self.episode.as_ref().map(|e| &e.scenario)
    }

    pub fn steps_taken(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.done)
    }
}

/// Scenario distribution used while training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingScenarios {
    pub targets_bar: Vec<f64>,
    pub efficiency_levels: Vec<f64>,
}

impl Default for TrainingScenarios {
    fn default() -> Self {
        Self {
            targets_bar: vec![80.0, 100.0],
            efficiency_levels: Scenario::EFFICIENCY_LEVELS.to_vec(),
        }
    }
}

pub fn sample_scenario<R: Rng + ?Sized>(rng: &mut R, cfg: &TrainingScenarios) -> Scenario {
    let p = *cfg.targets_bar.choose(rng).expect("at least one target");
    let eta_lox = *cfg.efficiency_levels.choose(rng).expect("at least one efficiency level");
    let eta_lh2 = *cfg.efficiency_levels.choose(rng).expect("at least one efficiency level");
    Scenario::nominal(p).with_efficiency(eta_lox, eta_lh2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::ols_command;
    use crate::engine::steady_state_solve;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> Env {
        Env::new(EngineParams::default()).unwrap()
    }

    fn fake_ref() -> NormReference {
        NormReference { omega_lox: 1000.0, omega_lh2: 3000.0 }
    }

    #[test]
    fn equilibrium_has_zero_errors() {
        let p = EngineParams::default();
        let sc = Scenario::nominal(100.0);
        let s = steady_state_solve(&END_POSITIONS_100, &p, &sc).unwrap();
        let o = derived_outputs(&s, &p, &sc).unwrap();
        // Reference values taken from the equilibrium itself.
        let sc_eq = Scenario { p_cc_ref: o.p_cc, mr_gg_ref: o.mr_gg, mr_pi_ref: o.mr_pi, ..sc };
        let r = NormReference::compute(&p).unwrap();
        let obs = observe(&s, &o, &sc_eq, Some(&r)).unwrap();
        assert_eq!([obs.eps_cc(), obs.eps_pi(), obs.eps_gg()], [0.0; 3]);
        assert!((obs.values[7] - 1.0).abs() < 1e-12 && (obs.values[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chamber_error_is_relative() {
        let sc = Scenario::nominal(100.0);
        let s = EngineState::at_rest(&EngineParams::default(), END_POSITIONS_100);
        let o = EngineOutputs { p_cc: 90.0e5, mr_gg: 0.9, mr_pi: 5.2, ..Default::default() };
        let obs = observe(&s, &o, &sc, Some(&fake_ref())).unwrap();
        assert!((obs.eps_cc() + 0.10).abs() < 1e-15);
    }

    #[test]
    fn target_entry_is_scaled_by_100_bar() {
        let s = EngineState::at_rest(&EngineParams::default(), END_POSITIONS_100);
        let o = EngineOutputs::default();
        for (bar, want) in [(100.0, 1.0), (80.0, 0.8)] {
            let obs = observe(&s, &o, &Scenario::nominal(bar), Some(&fake_ref())).unwrap();
            assert!((obs.p_cc_ref() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_reference_is_reported() {
        let s = EngineState::at_rest(&EngineParams::default(), END_POSITIONS_100);
        let err = observe(&s, &EngineOutputs::default(), &Scenario::nominal(100.0), None);
        assert!(matches!(err, Err(EnvError::MissingReference)));
        let mut e = Env::without_reference(EngineParams::default());
        assert!(matches!(e.reset(Scenario::nominal(100.0)), Err(EnvError::MissingReference)));
    }

    #[test]
    fn reset_is_deterministic_and_starts_at_handoff() {
        let mut a = env();
        let mut b = env();
        let sc = Scenario::nominal(100.0);
        let oa = a.reset(sc).unwrap();
        let ob = b.reset(sc).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a.reset(sc).unwrap(), oa);
        assert!((a.state().unwrap().t - HANDOFF_TIME).abs() < 1e-12);
    }

    #[test]
    fn degraded_scenario_changes_state_not_commands() {
        let mut e = env();
        let nom = Scenario::nominal(100.0);
        let deg = nom.with_efficiency(0.85, 0.85);
        let s1 = e.handoff_state(&nom).unwrap();
        let s2 = e.handoff_state(&deg).unwrap();
        assert_eq!(e.sequence(&nom), e.sequence(&deg));
        assert_ne!(s1, s2);
        assert!(s2.omega_lox < s1.omega_lox);
    }

    #[test]
    fn episode_has_88_steps_then_refuses() {
        let mut e = env();
        let sc = Scenario::nominal(80.0);
        e.reset(sc).unwrap();
        let a = Action::from_array(e.end_positions().p80[2..].try_into().unwrap());
        let mut n = 0;
        loop {
            let r = e.step(&a).unwrap();
            n += 1;
            assert_eq!(r.done, n == EPISODE_STEPS);
            if r.done {
                // Decision points run 1.50 .. 4.98 s; the last step lands at 5.02 s.
                assert!((r.info.t - (HANDOFF_TIME + 88.0 * CONTROL_DT)).abs() < 1e-12);
                break;
            }
        }
        assert_eq!(n, 88);
        assert!(matches!(e.step(&a), Err(EnvError::EpisodeFinished)));
    }

    #[test]
    fn step_without_reset_fails() {
        let mut e = env();
        assert!(matches!(e.step(&Action::new(0.5, 0.5, 0.5)), Err(EnvError::NotReset)));
    }

    #[test]
    fn holding_an_equilibrium_gives_tracking_reward_only() {
        let mut e = env();
        let p = e.params().clone();
        let sc = Scenario::nominal(100.0);
        let s = steady_state_solve(&END_POSITIONS_100, &p, &sc).unwrap();
        e.reset_to(sc, s).unwrap();
        let r = e.step(&Action::new(0.6, 0.6, 0.5)).unwrap();
        assert!(r.info.reward.r_valve.abs() < 1e-9, "{:?}", r.info.reward);
        let o = derived_outputs(&s, &p, &sc).unwrap();
        let want = compute_reward(&o, &sc, &[0.0; 3]).r_sp;
        assert!((r.info.reward.r_sp - want).abs() < 1e-7);
    }

    #[test]
    fn actions_are_clamped_to_the_valve_box() {
        let mut e = env();
        e.reset(Scenario::nominal(100.0)).unwrap();
        let r = e.step(&Action::new(-1.0, 2.0, 0.0)).unwrap();
        assert_eq!(r.info.applied.to_array(), [0.25, 1.0, 0.2]);
    }

    #[test]
    fn wrapper_adds_no_dynamics() {
        let mut e = env();
        let sc = Scenario::nominal(100.0);
        e.reset(sc).unwrap();
        let p = e.params().clone();
        let seq = e.sequence(&sc);
        let mut direct = e.handoff_state(&sc).unwrap();
        for k in 0..EPISODE_STEPS {
            let c = ols_command(direct.t, &seq).unwrap();
            let r = e.step(&Action::new(c[VGO], c[VGH], c[VGC])).unwrap();
            let t_next = HANDOFF_TIME + (k + 1) as f64 * CONTROL_DT;
            direct = step(&direct, &[END_POSITIONS_100[0], END_POSITIONS_100[1], c[VGO], c[VGH], c[VGC]], &p, &sc, CONTROL_DT).unwrap();
            direct.t = t_next;
            let s = e.state().unwrap();
            assert_eq!(s.to_array(), direct.to_array(), "step {k}");
            assert_eq!(r.info.outputs, derived_outputs(&direct, &p, &sc).unwrap());
        }
    }

    #[test]
    fn normalized_actions_round_trip() {
        let a = Action::new(0.4, 0.9, 0.2);
        let b = Action::from_normalized(&a.to_normalized());
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(Action::from_normalized(&[-1.0, -1.0, -1.0]).to_array(), ACTION_LOW);
        assert_eq!(Action::from_normalized(&[1.0, 1.0, 1.0]).to_array(), ACTION_HIGH);
    }

    #[test]
    fn scenario_sampling_is_reproducible_and_balanced() {
        let cfg = TrainingScenarios::default();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10_000).map(|_| sample_scenario(&mut rng, &cfg)).collect::<Vec<_>>()
        };
        let a = draw(3);
        assert_eq!(a, draw(3));
        let n = a.len() as f64;
        let frac_100 = a.iter().filter(|s| s.p_cc_ref == 100e5).count() as f64 / n;
        assert!((frac_100 - 0.5).abs() < 0.02, "{frac_100}");
        for lvl in Scenario::EFFICIENCY_LEVELS {
            let fl = a.iter().filter(|s| s.eta_lox == lvl).count() as f64 / n;
            let fh = a.iter().filter(|s| s.eta_lh2 == lvl).count() as f64 / n;
            assert!((fl - 0.25).abs() < 0.02 && (fh - 0.25).abs() < 0.02, "{lvl}: {fl} {fh}");
        }
        assert!(a.iter().all(|s| s.mr_gg_ref == 0.9 && s.mr_pi_ref == 5.2));
    }

    proptest! {
        #[test]
        fn observation_shape_and_finiteness(
            w1 in 0.0f64..2000.0, w2 in 0.0f64..5000.0, p in 1e5f64..150e5,
            mg in 0.1f64..2.0, mp in 1.0f64..10.0, v in proptest::array::uniform5(0.0f64..1.0),
        ) {
            let s = EngineState { t: 2.0, omega_lox: w1, omega_lh2: w2, p_cc: p, p_gg: p, valve_pos: v };
            let o = EngineOutputs { p_cc: p, mr_gg: mg, mr_pi: mp, ..Default::default() };
            let obs = observe(&s, &o, &Scenario::nominal(80.0), Some(&fake_ref())).unwrap();
            prop_assert_eq!(obs.as_slice().len(), OBS_DIM);
            prop_assert!(obs.as_slice().iter().all(|x| x.is_finite()));
            prop_assert_eq!(&obs.values[4..7], &v[2..5]);
        }
    }
}
