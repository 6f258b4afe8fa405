use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Piecewise-linear position schedule of one valve. Two knots at the same
/// time encode a step; the later knot applies from that instant on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValveSchedule {
    pub knots: Vec<(f64, f64)>,
}

impl ValveSchedule {
    pub fn constant(pos: f64) -> Self {
        Self { knots: vec![(0.0, pos)] }
    }

    /// Closed until `t_open`, jumps to `jump`, then ramps linearly to `end` at `t_full`.
    pub fn ramp(t_open: f64, t_full: f64, jump: f64, end: f64) -> Self {
        let mut knots = vec![(0.0, 0.0), (t_open, 0.0)];
        if jump > 0.0 {
            knots.push((t_open, jump));
        }
        knots.push((t_full, end));
        Self { knots }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        // Index of the last knot with time <= t.
        let i = k.partition_point(|&(tk, _)| tk <= t);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let (t0, p0) = k[i - 1];
        let (t1, p1) = k[i];
        p0 + (p1 - p0) * (t - t0) / (t1 - t0)
    }

    pub fn is_monotone(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1)
    }

    pub fn end_position(&self) -> f64 {
        self.knots.last().map(|k| k.1).unwrap_or(0.0)
    }
}

/// Open-loop start-up sequence for the five valves `[VCO, VCH, VGO, VGH, VGC]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopSequence {
    pub valves: [ValveSchedule; 5],
}

impl OpenLoopSequence {
    /// Nominal start-up: VCH opens at 0.1 s, VCO at 0.6 s, VGH at 1.4 s and
    /// VGO at 1.5 s; VGC sits at its end position throughout.
    pub fn nominal(end: [f64; 5]) -> Self {
        Self {
            valves: [
                ValveSchedule::ramp(0.6, 1.0, 0.0, end[0]),
                ValveSchedule::ramp(0.1, 0.5, 0.0, end[1]),
                ValveSchedule::ramp(1.5, 2.3, 0.25, end[2]),
                ValveSchedule::ramp(1.4, 2.2, 0.25, end[3]),
                ValveSchedule::constant(end[4]),
            ],
        }
    }

    pub fn end_positions(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.valves[i].end_position())
    }

    pub fn is_valid(&self) -> bool {
        self.valves.iter().all(|v| {
            !v.knots.is_empty() && v.is_monotone() && v.knots.iter().all(|k| (0.0..=1.0).contains(&k.1))
        })
    }

    pub(crate) fn command_unchecked(&self, t: f64) -> [f64; 5] {
        std::array::from_fn(|i| self.valves[i].eval(t))
    }
}

/// Commanded positions of the open-loop sequence at time `t`.
pub fn ols_command(t: f64, seq: &OpenLoopSequence) -> Result<[f64; 5], BaselineError> {
    if !(t >= 0.0) {
        return Err(BaselineError::OutOfRange(t));
    }
    Ok(seq.command_unchecked(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{VCH, VCO, VGC, VGH, VGO, END_POSITIONS_100, END_POSITIONS_80};
    use proptest::prelude::*;

    #[test]
    fn closed_before_first_event() {
        let seq = OpenLoopSequence::nominal(END_POSITIONS_100);
        let c = ols_command(0.05, &seq).unwrap();
        assert_eq!([c[VCO], c[VCH], c[VGO], c[VGH]], [0.0; 4]);
        assert_eq!(c[VGC], END_POSITIONS_100[VGC]);
    }

    #[test]
    fn reaches_end_positions() {
        for end in [END_POSITIONS_100, END_POSITIONS_80] {
            let seq = OpenLoopSequence::nominal(end);
            assert_eq!(ols_command(5.0, &seq).unwrap(), end);
            assert_eq!(seq.end_positions(), end);
            assert!(seq.is_valid());
        }
    }

    #[test]
    fn event_times_are_shared_between_targets() {
        let a = OpenLoopSequence::nominal(END_POSITIONS_100);
        let b = OpenLoopSequence::nominal(END_POSITIONS_80);
        for v in 0..4 {
            let ta: Vec<f64> = a.valves[v].knots.iter().map(|k| k.0).collect();
            let tb: Vec<f64> = b.valves[v].knots.iter().map(|k| k.0).collect();
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn step_knot_is_right_continuous() {
        let seq = OpenLoopSequence::nominal(END_POSITIONS_100);
        assert_eq!(ols_command(1.5, &seq).unwrap()[VGO], 0.25);
        assert_eq!(ols_command(1.4, &seq).unwrap()[VGH], 0.25);
        assert_eq!(ols_command(1.399_999, &seq).unwrap()[VGH], 0.0);
    }

    #[test]
    fn negative_time_is_rejected() {
        let seq = OpenLoopSequence::nominal(END_POSITIONS_100);
        assert!(matches!(ols_command(-0.01, &seq), Err(BaselineError::OutOfRange(_))));
        assert!(ols_command(f64::NAN, &seq).is_err());
    }

    proptest! {
        #[test]
        fn monotone_per_valve(t0 in 0.0f64..5.0, dt in 0.0f64..5.0) {
            let seq = OpenLoopSequence::nominal(END_POSITIONS_80);
            let a = ols_command(t0, &seq).unwrap();
            let b = ols_command((t0 + dt).min(5.0), &seq).unwrap();
            for v in 0..5 {
                prop_assert!(b[v] >= a[v]);
            }
        }
    }
}
