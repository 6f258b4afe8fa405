use serde::{Deserialize, Serialize};

use crate::engine::{EngineOutputs, Scenario};

/// Upper bound of each set-point error term.
pub const CLIP: f64 = 0.2;
/// Lower bound of the summed tracking term (three clipped terms).
pub const R_SP_MIN: f64 = -0.6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_sp: f64,
    pub r_gg: f64,
    pub r_valve: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn from_parts(r_sp: f64, r_gg: f64, r_valve: f64) -> Self {
        Self { r_sp, r_gg, r_valve, total: r_sp + r_gg + r_valve }
    }
}

/// Set-point tracking, GG mixture-ratio excess and valve-motion penalties.
/// `slews` are the position changes of VGO, VGH, VGC over the last step.
pub fn compute_reward(outputs: &EngineOutputs, scenario: &Scenario, slews: &[f64; 3]) -> RewardBreakdown {
    let rel = |x: f64, r: f64| ((x - r).abs() / r).min(CLIP);
    let sum = rel(outputs.p_cc, scenario.p_cc_ref)
        + rel(outputs.mr_gg, scenario.mr_gg_ref)
        + rel(outputs.mr_pi, scenario.mr_pi_ref);
    // 0.2 + 0.2 + 0.2 rounds to 0.6000000000000001
    let r_sp = (-sum).max(R_SP_MIN);
    let r_gg = if outputs.mr_gg / scenario.mr_gg_ref > 1.0 {
        -(outputs.mr_gg - scenario.mr_gg_ref) / scenario.mr_gg_ref
    } else {
        0.0
    };
    let r_valve = -(slews[0].abs() + slews[1].abs() + slews[2].abs()) / 3.0;
    RewardBreakdown::from_parts(r_sp, r_gg, r_valve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn on_reference(s: &Scenario) -> EngineOutputs {
        EngineOutputs { p_cc: s.p_cc_ref, mr_gg: s.mr_gg_ref, mr_pi: s.mr_pi_ref, ..Default::default() }
    }

    #[test]
    fn on_reference_is_zero() {
        let s = Scenario::nominal(100.0);
        let r = compute_reward(&on_reference(&s), &s, &[0.0; 3]);
        assert_eq!(r, RewardBreakdown::from_parts(0.0, 0.0, 0.0));
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn half_pressure_hits_clip() {
        let s = Scenario::nominal(100.0);
        let o = EngineOutputs { p_cc: 50.0e5, ..on_reference(&s) };
        let r = compute_reward(&o, &s, &[0.0; 3]);
        assert_eq!(r.r_sp, -0.2);
        assert_eq!(r.total, -0.2);
    }

    #[test]
    fn rich_gas_generator_example() {
        let s = Scenario::nominal(100.0);
        let o = EngineOutputs { mr_gg: 0.99, ..on_reference(&s) };
        let r = compute_reward(&o, &s, &[0.03, 0.0, 0.0]);
        let tol = 4.0 * f64::EPSILON;
        assert!((r.r_gg + 0.1).abs() < tol, "{r:?}");
        assert!((r.r_sp + 0.1).abs() < tol, "{r:?}");
        assert!((r.r_valve + 0.01).abs() < tol, "{r:?}");
        assert!((r.total + 0.21).abs() < tol, "{r:?}");
    }

    #[test]
    fn lean_gas_generator_has_no_rich_penalty() {
        let s = Scenario::nominal(80.0);
        let o = EngineOutputs { mr_gg: 0.7, ..on_reference(&s) };
        assert_eq!(compute_reward(&o, &s, &[0.0; 3]).r_gg, 0.0);
    }

    proptest! {
        #[test]
        fn decomposition_and_bounds(
            p in 0.0f64..300e5, mg in 0.0f64..3.0, mp in 0.0f64..15.0,
            s0 in -1.0f64..1.0, s1 in -1.0f64..1.0, s2 in -1.0f64..1.0,
        ) {
            let sc = Scenario::nominal(100.0);
            let o = EngineOutputs { p_cc: p, mr_gg: mg, mr_pi: mp, ..Default::default() };
            let r = compute_reward(&o, &sc, &[s0, s1, s2]);
            prop_assert_eq!(r.total, r.r_sp + r.r_gg + r.r_valve);
            prop_assert!((-0.6..=0.0).contains(&r.r_sp));
            prop_assert!(r.r_gg <= 0.0);
            prop_assert!((-1.0..=0.0).contains(&r.r_valve));
            if mg <= 0.9 {
                prop_assert_eq!(r.r_gg, 0.0);
            }
        }
    }
}
