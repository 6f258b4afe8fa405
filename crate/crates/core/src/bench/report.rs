use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::episode::Trajectory;
use super::sweep::{Stats, SummaryRow, SummaryTable, SweepResult};
use super::BenchError;

/// Trajectories of one controller at one target, typically a full sweep.
#[derive(Debug, Clone)]
pub struct TrajectoryGroup {
    pub controller: String,
    pub target_bar: f64,
    pub trajectories: Vec<Trajectory>,
}

#[derive(serde::Serialize)]
struct FlatRow<'a> {
    controller: &'a str,
    target_bar: f64,
    scenarios: usize,
    failed: usize,
    reward_mean: f64,
    reward_sd: f64,
    p_cc_min: f64,
    p_cc_max: f64,
    p_cc_mean: f64,
    p_cc_sd: f64,
    mr_gg_min: f64,
    mr_gg_max: f64,
    mr_gg_mean: f64,
    mr_gg_sd: f64,
    mr_pi_min: f64,
    mr_pi_max: f64,
    mr_pi_mean: f64,
    mr_pi_sd: f64,
    iae_pcc_mean: f64,
    iae_pcc_sd: f64,
    iae_mrgg_mean: f64,
    iae_mrgg_sd: f64,
    iae_mrpi_mean: f64,
    iae_mrpi_sd: f64,
}

impl<'a> From<&'a SummaryRow> for FlatRow<'a> {
    fn from(r: &'a SummaryRow) -> Self {
        Self {
            controller: &r.controller,
            target_bar: r.target_bar,
            scenarios: r.scenarios,
            failed: r.failed,
            reward_mean: r.reward.mean,
            reward_sd: r.reward.sd,
            p_cc_min: r.p_cc.min,
            p_cc_max: r.p_cc.max,
            p_cc_mean: r.p_cc.mean,
            p_cc_sd: r.p_cc.sd,
            mr_gg_min: r.mr_gg.min,
            mr_gg_max: r.mr_gg.max,
            mr_gg_mean: r.mr_gg.mean,
            mr_gg_sd: r.mr_gg.sd,
            mr_pi_min: r.mr_pi.min,
            mr_pi_max: r.mr_pi.max,
            mr_pi_mean: r.mr_pi.mean,
            mr_pi_sd: r.mr_pi.sd,
            iae_pcc_mean: r.iae_pcc.mean,
            iae_pcc_sd: r.iae_pcc.sd,
            iae_mrgg_mean: r.iae_mrgg.mean,
            iae_mrgg_sd: r.iae_mrgg.sd,
            iae_mrpi_mean: r.iae_mrpi.mean,
            iae_mrpi_sd: r.iae_mrpi.sd,
        }
    }
}

pub fn write_summary_csv(table: &SummaryTable, path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &table.rows {
        w.serialize(FlatRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct EpisodeRow<'a> {
    controller: &'a str,
    target_bar: f64,
    eta_lox: f64,
    eta_lh2: f64,
    failed: bool,
    error: &'a str,
    cumulative_reward: f64,
    p_cc_bar: f64,
    mr_gg: f64,
    mr_pi: f64,
    p_gg_bar: f64,
    iae_pcc: f64,
    iae_mrgg: f64,
    iae_mrpi: f64,
}

/// Per-scenario metrics of a sweep; failed episodes keep their error text.
pub fn write_episodes_csv(result: &SweepResult, path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for e in &result.episodes {
        let (m, error) = match &e.result {
            Ok((_, m)) => (*m, ""),
            Err(msg) => (super::EpisodeMetrics::default(), msg.as_str()),
        };
        w.serialize(EpisodeRow {
            controller: &result.row.controller,
            target_bar: result.row.target_bar,
            eta_lox: e.scenario.eta_lox,
            eta_lh2: e.scenario.eta_lh2,
            failed: e.result.is_err(),
            error,
            cumulative_reward: m.cumulative_reward,
            p_cc_bar: m.steady.p_cc_bar,
            mr_gg: m.steady.mr_gg,
            mr_pi: m.steady.mr_pi,
            p_gg_bar: m.steady.p_gg_bar,
            iae_pcc: m.iae_pcc,
            iae_mrgg: m.iae_mrgg,
            iae_mrpi: m.iae_mrpi,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One CSV row per control step.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t", "p_cc", "p_gg", "mr_gg", "mr_pi", "mr_cc", "thrust", "t_gg", "m_main_ox", "m_main_fu", "m_gg_ox",
        "m_gg_fu", "m_nozzle", "m_turbine", "cmd_vgo", "cmd_vgh", "cmd_vgc", "r_sp", "r_gg", "r_valve", "reward",
        "done",
    ])?;
    for r in &traj.records {
        let o = &r.outputs;
        let f = &o.flows;
        let vals = [
            r.t,
            o.p_cc,
            o.p_gg,
            o.mr_gg,
            o.mr_pi,
            o.mr_cc,
            o.thrust,
            o.t_gg,
            f.main_ox,
            f.main_fu,
            f.gg_ox,
            f.gg_fu,
            f.nozzle,
            f.turbine,
            r.action.cmd_vgo,
            r.action.cmd_vgh,
            r.action.cmd_vgc,
            r.reward.r_sp,
            r.reward.r_gg,
            r.reward.r_valve,
            r.reward.total,
        ];
        let mut rec: Vec<String> = vals.iter().map(|v| format!("{v:.10e}")).collect();
        rec.push(u8::from(r.done).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_stats(name: &str, s: &Stats, prec: usize) -> String {
    format!(
        "| {name} | {:.p$} | {:.p$} | {:.p$} | {:.p$} |\n",
        s.mean,
        s.sd,
        s.min,
        s.max,
        p = prec
    )
}

/// Markdown with a nominal-scenario table and one row-group per controller and target.
pub fn markdown(table: &SummaryTable, nominal: &[(String, f64, super::EpisodeMetrics)]) -> String {
    let mut s = String::from("# Start-up control benchmark\n\n");
    if !nominal.is_empty() {
        s.push_str("## Nominal efficiency\n\n");
        s.push_str("| Controller | Target [bar] | Reward | p_cc [bar] | MR_GG | MR_PI | IAE p_cc | IAE MR_GG | IAE MR_PI |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for (c, p, m) in nominal {
            let _ = writeln!(
                s,
                "| {c} | {p:.0} | {:.2} | {:.1} | {:.2} | {:.2} | {:.1} | {:.2} | {:.2} |",
                m.cumulative_reward,
                m.steady.p_cc_bar,
                m.steady.mr_gg,
                m.steady.mr_pi,
                m.iae_pcc,
                m.iae_mrgg,
                m.iae_mrpi
            );
        }
        s.push('\n');
    }
    s.push_str("## Turbine-efficiency sweep\n\n");
    for r in &table.rows {
        let _ = writeln!(s, "### {}, {:.0} bar\n", r.controller, r.target_bar);
        let _ = writeln!(s, "{} scenarios, {} failed\n", r.scenarios, r.failed);
        s.push_str("| Quantity | mean | sd | min | max |\n|---|---|---|---|---|\n");
        s.push_str(&fmt_stats("Cumulative reward", &r.reward, 2));
        s.push_str(&fmt_stats("p_cc [bar]", &r.p_cc, 1));
        s.push_str(&fmt_stats("MR_GG", &r.mr_gg, 3));
        s.push_str(&fmt_stats("MR_PI", &r.mr_pi, 3));
        s.push_str(&fmt_stats("IAE p_cc", &r.iae_pcc, 1));
        s.push_str(&fmt_stats("IAE MR_GG", &r.iae_mrgg, 2));
        s.push_str(&fmt_stats("IAE MR_PI", &r.iae_mrpi, 2));
        s.push('\n');
    }
    s
}

type Series = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Nominal trace plus min/max envelope across the group, per step.
fn envelope(group: &TrajectoryGroup, f: impl Fn(&super::StepRecord) -> f64) -> Option<Series> {
    let nominal = group
        .trajectories
        .iter()
        .find(|t| t.scenario.eta_lox == 1.0 && t.scenario.eta_lh2 == 1.0)
        .or_else(|| group.trajectories.first())?;
    let n = group.trajectories.iter().map(|t| t.records.len()).min()?;
    let t: Vec<f64> = nominal.records[..n].iter().map(|r| r.t).collect();
    let mid: Vec<f64> = nominal.records[..n].iter().map(&f).collect();
    let mut lo = mid.clone();
    let mut hi = mid.clone();
    for tr in &group.trajectories {
        for (i, r) in tr.records[..n].iter().enumerate() {
            let v = f(r);
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    Some((t, mid, lo, hi))
}

fn plot_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> BenchError {
    BenchError::Plot(e.to_string())
}

/// Controlled variables against time, shaded with the range over the group.
pub fn plot_group(group: &TrajectoryGroup, path: &Path) -> Result<(), BenchError> {
    let panels: [(&str, f64, Box<dyn Fn(&super::StepRecord) -> f64>); 3] = [
        ("p_cc [bar]", group.target_bar, Box::new(|r| r.outputs.p_cc / 1e5)),
        ("MR_GG", 0.9, Box::new(|r| r.outputs.mr_gg)),
        ("MR_PI", 5.2, Box::new(|r| r.outputs.mr_pi)),
    ];
    let root = SVGBackend::new(path, (900, 900)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let areas = root.split_evenly((3, 1));
    for ((label, reference, f), area) in panels.iter().zip(areas.iter()) {
        let Some((t, mid, lo, hi)) = envelope(group, f) else {
            continue;
        };
        let ymin = lo.iter().cloned().fold(*reference, f64::min);
        let ymax = hi.iter().cloned().fold(*reference, f64::max);
        let pad = 0.05 * (ymax - ymin).max(1e-6);
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .caption(format!("{} {:.0} bar: {}", group.controller, group.target_bar, label), ("sans-serif", 16))
            .build_cartesian_2d(t[0]..t[t.len() - 1], (ymin - pad)..(ymax + pad))
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc("t [s]").draw().map_err(plot_err)?;
        let band: Vec<(f64, f64)> = t.iter().zip(&hi).map(|(&a, &b)| (a, b)).chain(t.iter().zip(&lo).rev().map(|(&a, &b)| (a, b))).collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, BLUE.mix(0.2).filled())))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(t.iter().zip(&mid).map(|(&a, &b)| (a, b)), BLUE.stroke_width(2)))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                [(t[0], *reference), (t[t.len() - 1], *reference)],
                BLACK.mix(0.6),
            ))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn file_stem(controller: &str, target_bar: f64) -> String {
    format!("{}_{:.0}bar", controller.to_lowercase(), target_bar)
}

/// Write summary CSV, markdown report, per-episode trajectory CSVs and plots.
pub fn report(
    table: &SummaryTable,
    nominal: &[(String, f64, super::EpisodeMetrics)],
    groups: &[TrajectoryGroup],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let csv_path = out_dir.join("summary.csv");
    write_summary_csv(table, &csv_path)?;
    written.push(csv_path);
    let md_path = out_dir.join("report.md");
    fs::write(&md_path, markdown(table, nominal))?;
    written.push(md_path);
    for g in groups.iter().filter(|g| !g.trajectories.is_empty()) {
        let stem = file_stem(&g.controller, g.target_bar);
        let plot = out_dir.join(format!("{stem}.svg"));
        plot_group(g, &plot)?;
        written.push(plot);
        let tdir = out_dir.join("trajectories");
        fs::create_dir_all(&tdir)?;
        for tr in &g.trajectories {
            let p = tdir.join(format!(
                "{stem}_eta{:.2}_{:.2}.csv",
                tr.scenario.eta_lox, tr.scenario.eta_lh2
            ));
            write_trajectory_csv(tr, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}
