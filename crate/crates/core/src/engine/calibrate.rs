use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::{derived_outputs, EngineOutputs, EngineState};
use super::params::{EngineParams, Scenario, END_POSITIONS_100, END_POSITIONS_80};
use super::steady::{steady_state_solve, steady_state_solve_from};
use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetValue {
    pub value: f64,
    pub tolerance: f64,
}

impl TargetValue {
    pub fn new(value: f64, tolerance: f64) -> Self {
        Self { value, tolerance }
    }

    fn scaled(&self, x: f64) -> f64 {
        (x - self.value) / self.tolerance
    }
}

/// One equilibrium the calibrated plant has to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub name: String,
    pub valve_pos: [f64; 5],
    pub p_cc: TargetValue,
    pub mr_gg: TargetValue,
    pub mr_pi: TargetValue,
    pub p_gg: Option<TargetValue>,
    pub thrust: Option<TargetValue>,
}

impl CalibrationTarget {
    pub fn nominal_100() -> Self {
        Self {
            name: "100 bar".into(),
            valve_pos: END_POSITIONS_100,
            p_cc: TargetValue::new(100.0e5, 1.0e5),
            mr_gg: TargetValue::new(0.90, 0.02),
            mr_pi: TargetValue::new(5.2, 0.05),
            p_gg: Some(TargetValue::new(75.0e5, 7.5e5)),
            thrust: Some(TargetValue::new(1.0e6, 1.0e5)),
        }
    }

    pub fn nominal_80() -> Self {
        Self {
            name: "80 bar".into(),
            valve_pos: END_POSITIONS_80,
            p_cc: TargetValue::new(80.0e5, 0.8e5),
            mr_gg: TargetValue::new(0.90, 0.02),
            mr_pi: TargetValue::new(5.2, 0.05),
            p_gg: Some(TargetValue::new(45.0e5, 6.75e5)),
            thrust: None,
        }
    }

    /// Target built from what `params` actually produce at `valve_pos`.
    pub fn from_params(
        name: &str,
        valve_pos: [f64; 5],
        params: &EngineParams,
        scenario: &Scenario,
    ) -> Result<Self, EngineError> {
        let s = steady_state_solve(&valve_pos, params, scenario)?;
        let o = derived_outputs(&s, params, scenario)?;
        Ok(Self {
            name: name.into(),
            valve_pos,
            p_cc: TargetValue::new(o.p_cc, 1e-4 * o.p_cc),
            mr_gg: TargetValue::new(o.mr_gg, 1e-4 * o.mr_gg),
            mr_pi: TargetValue::new(o.mr_pi, 1e-4 * o.mr_pi),
            p_gg: Some(TargetValue::new(o.p_gg, 1e-4 * o.p_gg)),
            thrust: Some(TargetValue::new(o.thrust, 1e-4 * o.thrust)),
        })
    }

    fn residuals(&self, o: &EngineOutputs) -> Vec<(&'static str, f64, f64)> {
        let mut r = vec![
            ("p_cc", o.p_cc, self.p_cc.scaled(o.p_cc)),
            ("mr_gg", o.mr_gg, self.mr_gg.scaled(o.mr_gg)),
            ("mr_pi", o.mr_pi, self.mr_pi.scaled(o.mr_pi)),
        ];
        if let Some(t) = &self.p_gg {
            r.push(("p_gg", o.p_gg, t.scaled(o.p_gg)));
        }
        if let Some(t) = &self.thrust {
            r.push(("thrust", o.thrust, t.scaled(o.thrust)));
        }
        r
    }
}

/// Number of free coefficients adjusted by `calibrate`. Turbine efficiency
/// is held fixed: scaling the GG branch areas and the turbine nozzle together
/// trades against it almost exactly, so freeing it leaves a flat valley.
pub const FREE_COEFFS: usize = 6;
const FREE_NAMES: [&str; FREE_COEFFS] = [
    "ln GG LOX branch area",
    "ln GG LH2 branch area",
    "ln VCO line area",
    "ln VCH line area",
    "ln turbine nozzle area",
    "hot-gas split base",
];

fn apply(base: &EngineParams, theta: &[f64; FREE_COEFFS]) -> EngineParams {
    let mut p = base.clone();
    let v = &mut p.valve_flow_coeffs;
    v.vgo.max_area *= theta[0].exp();
    v.vgo.line_area *= theta[0].exp();
    v.vgh.max_area *= theta[1].exp();
    v.vgh.line_area *= theta[1].exp();
    v.vco.line_area *= theta[2].exp();
    v.vch.line_area *= theta[3].exp();
    p.turbine_nozzle_area *= theta[4].exp();
    p.hot_gas_split.base += theta[5];
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    /// (quantity, achieved value, residual scaled by tolerance)
    pub entries: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub iterations: usize,
    pub cost: f64,
    pub coefficients: Vec<(String, f64)>,
    pub targets: Vec<TargetReport>,
}

impl CalibrationReport {
    pub fn max_scaled_residual(&self) -> f64 {
        self.targets
            .iter()
            .flat_map(|t| t.entries.iter().map(|e| e.2.abs()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "calibration: {} iterations, cost {:.3e}", self.iterations, self.cost)?;
        for (name, v) in &self.coefficients {
            writeln!(f, "  {name:<24} {v:+.6e}")?;
        }
        for t in &self.targets {
            writeln!(f, "target {}", t.name)?;
            for (q, v, r) in &t.entries {
                writeln!(f, "  {q:<8} {v:>14.6e}  scaled residual {r:+.4}")?;
            }
        }
        writeln!(f, "max |scaled residual| = {:.4}", self.max_scaled_residual())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub max_iterations: usize,
    pub fd_step: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { max_iterations: 50, fd_step: 1e-6 }
    }
}

struct Evaluator<'a> {
    base: &'a EngineParams,
    targets: &'a [CalibrationTarget],
    scenario: Scenario,
    guesses: Vec<Option<EngineState>>,
}

impl Evaluator<'_> {
    fn outputs(&mut self, params: &EngineParams) -> Result<Vec<EngineOutputs>, EngineError> {
        let mut out = Vec::with_capacity(self.targets.len());
        for (i, t) in self.targets.iter().enumerate() {
            let s = match &self.guesses[i] {
                Some(g) => steady_state_solve_from(g, &t.valve_pos, params, &self.scenario)
                    .or_else(|_| steady_state_solve(&t.valve_pos, params, &self.scenario))?,
                None => steady_state_solve(&t.valve_pos, params, &self.scenario)?,
            };
            self.guesses[i] = Some(s);
            out.push(derived_outputs(&s, params, &self.scenario)?);
        }
        Ok(out)
    }

    fn residuals(&mut self, theta: &[f64; FREE_COEFFS]) -> Result<Vec<f64>, EngineError> {
        let params = apply(self.base, theta);
        let outs = self.outputs(&params)?;
        Ok(self
            .targets
            .iter()
            .zip(&outs)
            .flat_map(|(t, o)| t.residuals(o).into_iter().map(|e| e.2))
            .collect())
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

/// Levenberg-Marquardt fit of the free plant coefficients to equilibrium targets.
/// Fails with the per-target residuals if any scaled residual exceeds 1.
pub fn calibrate(
    initial: &EngineParams,
    targets: &[CalibrationTarget],
    options: CalibrationOptions,
) -> Result<(EngineParams, CalibrationReport), EngineError> {
    if targets.is_empty() {
        return Err(EngineError::InvalidParams("calibrate needs at least one target".into()));
    }
    initial.validate()?;
    let mut ev = Evaluator {
        base: initial,
        targets,
        scenario: Scenario::nominal(100.0),
        guesses: vec![None; targets.len()],
    };
    let mut theta = [0.0; FREE_COEFFS];
    let mut r = ev.residuals(&theta)?;
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        if c < 1e-20 {
            break;
        }
        let m = r.len();
        let mut jac = vec![[0.0; FREE_COEFFS]; m];
        for j in 0..FREE_COEFFS {
            let mut tp = theta;
            tp[j] += options.fd_step;
            let rp = ev.residuals(&tp)?;
            for i in 0..m {
                jac[i][j] = (rp[i] - r[i]) / options.fd_step;
            }
        }
        let mut jtj = vec![vec![0.0; FREE_COEFFS]; FREE_COEFFS];
        let mut jtr = [0.0; FREE_COEFFS];
        for i in 0..m {
            for a in 0..FREE_COEFFS {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..FREE_COEFFS {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..20 {
            let mut lhs = jtj.clone();
            for a in 0..FREE_COEFFS {
                lhs[a][a] += mu * (jtj[a][a] + 1e-9);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = solve_dense(lhs, rhs) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = theta;
            for a in 0..FREE_COEFFS {
                cand[a] += delta[a];
            }
            match ev.residuals(&cand) {
                Ok(rn) if cost(&rn) < c => {
                    let rel = (c - cost(&rn)) / c.max(1e-300);
                    theta = cand;
                    r = rn;
                    c = cost(&r);
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if rel < 1e-8 {
                        mu = f64::INFINITY;
                    }
                    break;
                }
                _ => mu *= 10.0,
            }
        }
        if !accepted || !mu.is_finite() {
            break;
        }
    }

    let params = apply(initial, &theta);
    let outs = ev.outputs(&params)?;
    let report = CalibrationReport {
        iterations,
        cost: c,
        coefficients: FREE_NAMES.iter().zip(theta).map(|(n, v)| (n.to_string(), v)).collect(),
        targets: targets
            .iter()
            .zip(&outs)
            .map(|(t, o)| TargetReport {
                name: t.name.clone(),
                entries: t.residuals(o).into_iter().map(|(q, v, r)| (q.to_string(), v, r)).collect(),
            })
            .collect(),
    };
    if report.max_scaled_residual() > 1.0 {
        return Err(EngineError::CalibrationFailed { report: Box::new(report) });
    }
    Ok((params, report))
}

/// Find GG valve end positions `[VGO, VGH, VGC]` that hold the requested
/// chamber pressure and mixture ratios at equilibrium.
pub fn trim_end_positions(
    p_cc: f64,
    mr_gg: f64,
    mr_pi: f64,
    start: [f64; 5],
    params: &EngineParams,
) -> Result<[f64; 5], EngineError> {
    let scenario = Scenario::nominal(p_cc / 1e5);
    let mut guess: Option<EngineState> = None;
    let mut resid = |pos: &[f64; 5]| -> Result<[f64; 3], EngineError> {
        let s = match &guess {
            Some(g) => steady_state_solve_from(g, pos, params, &scenario)?,
            None => steady_state_solve(pos, params, &scenario)?,
        };
        guess = Some(s);
        let o = derived_outputs(&s, params, &scenario)?;
        Ok([(o.p_cc - p_cc) / 1e5, (o.mr_gg - mr_gg) * 10.0, (o.mr_pi - mr_pi) * 10.0])
    };
    let mut pos = start;
    let mut r = resid(&pos)?;
    for _ in 0..30 {
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-9 {
            return Ok(pos);
        }
        let mut jac = vec![vec![0.0; 3]; 3];
        for j in 0..3 {
            let mut pp = pos;
            pp[2 + j] += 1e-6;
            let rp = resid(&pp)?;
            for i in 0..3 {
                jac[i][j] = (rp[i] - r[i]) / 1e-6;
            }
        }
        let d = solve_dense(jac, r.iter().map(|v| -v).collect())
            .ok_or(EngineError::NoConvergence { residual: n })?;
        for j in 0..3 {
            pos[2 + j] = (pos[2 + j] + d[j]).clamp(0.05, 1.0);
        }
        r = resid(&pos)?;
    }
    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-6 {
        Ok(pos)
    } else {
        Err(EngineError::NoConvergence { residual: n })
    }
}
