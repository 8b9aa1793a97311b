//! Per-run CSV logs, metrics summaries and the controller comparison table.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use aphi_core::sim::{LogRow, MetricsReport, SimLog};

use crate::CliError;

/// Column names of the per-run CSV, in order.
pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for prefix in ["q", "qd", "qt", "T", "dhat", "h"] {
        cols.extend((1..=6).map(|i| format!("{prefix}{i}")));
    }
    cols.push("qp_status".to_string());
    cols.extend(["fc_x", "fc_y", "fc_z", "cart_x", "cart_v"].map(String::from));
    cols
}

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_record(row: &LogRow) -> Vec<String> {
    let mut rec = Vec::with_capacity(43);
    rec.push(num(row.t));
    for v in [&row.q, &row.q_d, &row.q_t, &row.thrust, &row.d_hat, &row.h] {
        rec.extend(v.iter().map(|x| num(*x)));
    }
    rec.push(row.status.as_str().to_string());
    rec.extend(row.contact_force.iter().map(|x| num(*x)));
    rec.push(num(row.cart_x));
    rec.push(num(row.cart_v));
    rec
}

pub fn write_csv<W: Write>(log: &SimLog, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for row in &log.rows {
        w.write_record(csv_record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(log: &SimLog, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(log, std::io::BufWriter::new(file)).map_err(|e| CliError::Csv { path: path.to_path_buf(), source: e })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), num)
}

/// Flat `key=value` lines, one quantity per line.
pub fn metrics_text(log: &SimLog, m: &MetricsReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("scenario", log.scenario.clone());
    kv("controller", log.controller.as_str().to_string());
    kv("seed", log.seed.to_string());
    kv("rows", m.rows.to_string());
    kv("completed", m.completed.to_string());
    kv("error", log.error.as_ref().map_or_else(|| "none".to_string(), |e| e.to_string()));
    const AXES: [&str; 6] = ["x", "y", "z", "roll", "pitch", "yaw"];
    for (name, v) in [
        ("rms_tracking", &m.rms_tracking),
        ("max_overshoot", &m.max_overshoot),
        ("steady_state_error", &m.steady_state_error),
    ] {
        for (axis, x) in AXES.iter().zip(v.iter()) {
            kv(&format!("{name}_{axis}"), num(*x));
        }
    }
    kv("steady_state_position_error", num(m.steady_state_position_error()));
    kv("thrust_min", num(m.thrust_min));
    kv("thrust_max", num(m.thrust_max));
    kv("raw_thrust_min", num(m.raw_thrust_min));
    kv("raw_thrust_max", num(m.raw_thrust_max));
    kv("violation_steps", m.violation_steps.to_string());
    kv("raw_violation_steps", m.raw_violation_steps.to_string());
    kv("relaxed_steps", m.relaxed_steps.to_string());
    kv("qp_error_steps", m.qp_error_steps.to_string());
    kv("breakaway_time", opt(m.breakaway_time));
    kv("resettling_time", opt(m.resettling_time));
    kv("max_contact_force", num(m.max_contact_force));
    kv("final_cart_x", num(m.final_cart_x));
    for (i, w) in log.warnings.iter().enumerate() {
        kv(&format!("warning_{}", i + 1), w.clone());
    }
    s
}

type Cell<'a> = Box<dyn Fn(&SimLog, &MetricsReport) -> String + 'a>;

/// Side-by-side table, one column per run.
pub fn comparison_table(runs: &[(&SimLog, &MetricsReport)]) -> String {
    let fmt = |v: f64| format!("{v:.4}");
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt);
    let lines: Vec<(&str, Cell<'_>)> = vec![
        ("completed", Box::new(|_, m| m.completed.to_string())),
        ("rows", Box::new(|_, m| m.rows.to_string())),
        ("rms tracking x [m]", Box::new(move |_, m| fmt(m.rms_tracking[0]))),
        ("rms tracking z [m]", Box::new(move |_, m| fmt(m.rms_tracking[2]))),
        ("max overshoot x [m]", Box::new(move |_, m| fmt(m.max_overshoot[0]))),
        ("max overshoot z [m]", Box::new(move |_, m| fmt(m.max_overshoot[2]))),
        ("steady-state position error [m]", Box::new(move |_, m| fmt(m.steady_state_position_error()))),
        ("thrust min [N]", Box::new(move |_, m| fmt(m.thrust_min))),
        ("thrust max [N]", Box::new(move |_, m| fmt(m.thrust_max))),
        ("raw thrust min [N]", Box::new(move |_, m| fmt(m.raw_thrust_min))),
        ("raw thrust max [N]", Box::new(move |_, m| fmt(m.raw_thrust_max))),
        ("steps out of bounds", Box::new(|_, m| m.violation_steps.to_string())),
        ("raw steps out of bounds", Box::new(|_, m| m.raw_violation_steps.to_string())),
        ("relaxed QP steps", Box::new(|_, m| m.relaxed_steps.to_string())),
        ("max contact force [N]", Box::new(move |_, m| fmt(m.max_contact_force))),
        ("breakaway time [s]", Box::new(move |_, m| fmt_opt(m.breakaway_time))),
        ("resettling time [s]", Box::new(move |_, m| fmt_opt(m.resettling_time))),
    ];
    let headers: Vec<&str> = runs.iter().map(|(l, _)| l.controller.as_str()).collect();
    let label_width = lines.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("metric".len());
    let cells: Vec<Vec<String>> = lines.iter().map(|(_, f)| runs.iter().map(|(l, m)| f(l, m)).collect()).collect();
    let col_width: Vec<usize> = (0..runs.len())
        .map(|j| cells.iter().map(|r| r[j].len()).chain([headers[j].len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "metric");
    for (h, w) in headers.iter().zip(&col_width) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for ((label, _), row) in lines.iter().zip(&cells) {
        let _ = write!(out, "{label:<label_width$}");
        for (c, w) in row.iter().zip(&col_width) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
    for (l, _) in runs {
        if let Some(e) = &l.error {
            let _ = writeln!(out, "{}: {e}", l.controller.as_str());
        }
    }
    out
}
