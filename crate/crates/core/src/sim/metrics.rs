//! Summary statistics of a simulation log.

use libm::sqrt;

use super::log::{LogRow, SimLog, StepStatus};
use crate::qp_solver::QpStatus;
use crate::Vector6;

/// Position error below which the vehicle counts as settled (m).
pub const RESETTLE_THRESHOLD: f64 = 0.05;
/// How long the error must stay below the threshold (s).
pub const RESETTLE_HOLD: f64 = 1.0;
/// Trailing window used for the steady-state error (s).
pub const STEADY_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: usize,
    pub completed: bool,
    /// RMS of `q - q_d` per axis.
    pub rms_tracking: Vector6,
    /// Largest overshoot past each target, or largest excursion on axes whose
    /// target did not move.
    pub max_overshoot: Vector6,
    /// Mean `|q_d - q|` over the trailing window.
    pub steady_state_error: Vector6,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub raw_thrust_min: f64,
    pub raw_thrust_max: f64,
    /// Rows with any logged thrust outside `[t_min, t_max]`.
    pub violation_steps: usize,
    pub raw_violation_steps: usize,
    pub relaxed_steps: usize,
    pub qp_error_steps: usize,
    pub breakaway_time: Option<f64>,
    /// Time from breakaway until `|p - p_d|` enters and stays within the
    /// threshold for the hold time.
    pub resettling_time: Option<f64>,
    pub max_contact_force: f64,
    pub final_cart_x: f64,
}

impl MetricsReport {
    /// Euclidean norm of the positional steady-state error.
    pub fn steady_state_position_error(&self) -> f64 {
        let e = &self.steady_state_error;
        sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    }
}

fn position_error(row: &LogRow) -> f64 {
    (row.position() - row.desired_position()).norm()
}

/// Time after `after` until `|p - p_d|` drops below `threshold` and stays there
/// for `hold` seconds. `None` if that never happens within the log.
pub fn resettling_time(rows: &[LogRow], after: f64, threshold: f64, hold: f64) -> Option<f64> {
    let mut entered: Option<f64> = None;
    for row in rows.iter().filter(|r| r.t >= after) {
        if position_error(row) < threshold {
            let start = *entered.get_or_insert(row.t);
            if row.t - start >= hold - 1e-9 {
                return Some(start - after);
            }
        } else {
            entered = None;
        }
    }
    None
}

fn out_of_bounds(t: &Vector6, lo: f64, hi: f64) -> bool {
    t.iter().any(|v| *v < lo || *v > hi)
}

pub fn metrics(log: &SimLog) -> MetricsReport {
    let rows = &log.rows;
    let n = rows.len().max(1) as f64;
    let mut sq = Vector6::zeros();
    let mut report = MetricsReport {
        rows: rows.len(),
        completed: log.completed(),
        rms_tracking: Vector6::zeros(),
        max_overshoot: Vector6::zeros(),
        steady_state_error: Vector6::zeros(),
        thrust_min: f64::INFINITY,
        thrust_max: f64::NEG_INFINITY,
        raw_thrust_min: f64::INFINITY,
        raw_thrust_max: f64::NEG_INFINITY,
        violation_steps: 0,
        raw_violation_steps: 0,
        relaxed_steps: 0,
        qp_error_steps: 0,
        breakaway_time: log.breakaway_time,
        resettling_time: None,
        max_contact_force: 0.0,
        final_cart_x: rows.last().map_or(0.0, |r| r.cart_x),
    };

    for row in rows {
        let e = row.q - row.q_d;
        sq += e.component_mul(&e);
        report.thrust_min = report.thrust_min.min(row.thrust.min());
        report.thrust_max = report.thrust_max.max(row.thrust.max());
        report.raw_thrust_min = report.raw_thrust_min.min(row.thrust_raw.min());
        report.raw_thrust_max = report.raw_thrust_max.max(row.thrust_raw.max());
        report.violation_steps += out_of_bounds(&row.thrust, log.t_min, log.t_max) as usize;
        report.raw_violation_steps += out_of_bounds(&row.thrust_raw, log.t_min, log.t_max) as usize;
        match row.status {
            StepStatus::Qp(QpStatus::Relaxed) => report.relaxed_steps += 1,
            StepStatus::Qp(QpStatus::Error) => report.qp_error_steps += 1,
            _ => {}
        }
        report.max_contact_force = report.max_contact_force.max(row.contact_force.norm());
    }
    report.rms_tracking = (sq / n).map(sqrt);
    report.max_overshoot = overshoot(rows);

    if let Some(last) = rows.last() {
        let window: alloc::vec::Vec<&LogRow> = rows.iter().filter(|r| r.t >= last.t - STEADY_WINDOW).collect();
        let sum = window.iter().fold(Vector6::zeros(), |acc, r| acc + (r.q_d - r.q).abs());
        report.steady_state_error = sum / window.len() as f64;
    }
    if let Some(t_break) = log.breakaway_time {
        report.resettling_time = resettling_time(rows, t_break, RESETTLE_THRESHOLD, RESETTLE_HOLD);
    }
    report
}

/// Per-axis overshoot, evaluated separately on every constant-target segment.
/// An axis whose target moved is measured past the new target in the direction
/// of the move; otherwise its largest excursion from the target counts.
fn overshoot(rows: &[LogRow]) -> Vector6 {
    let mut worst = Vector6::zeros();
    let mut start = 0;
    let mut previous = rows.first().map_or(Vector6::zeros(), |r| r.q);
    while start < rows.len() {
        let target = rows[start].q_t;
        let end = rows[start..].iter().position(|r| r.q_t != target).map_or(rows.len(), |k| start + k);
        for i in 0..6 {
            let span = target[i] - previous[i];
            let seg = rows[start..end].iter().map(|r| r.q[i] - target[i]);
            let value = if span.abs() > 1e-9 {
                seg.map(|d| d * span.signum()).fold(0.0f64, f64::max)
            } else {
                seg.map(f64::abs).fold(0.0f64, f64::max)
            };
            worst[i] = worst[i].max(value);
        }
        previous = target;
        start = end;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerVariant;
    use crate::Vector3;
    use alloc::string::String;
    use alloc::vec::Vec;

    fn row(t: f64) -> LogRow {
        let q = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        LogRow {
            t,
            q,
            q_dot: Vector6::zeros(),
            q_d: q,
            q_d_dot: Vector6::zeros(),
            q_t: q,
            thrust: Vector6::repeat(5.9),
            thrust_raw: Vector6::repeat(5.9),
            h: Vector6::zeros(),
            d_hat: Vector6::zeros(),
            d_true: Vector6::zeros(),
            beta_hat: Vector6::zeros(),
            beta: Vector6::zeros(),
            q_dd_d: Vector6::zeros(),
            status: StepStatus::Qp(QpStatus::Optimal),
            slack_norm: 0.0,
            contact_force: Vector3::zeros(),
            cart_x: 0.0,
            cart_v: 0.0,
            plug_attached: false,
        }
    }

    fn log(rows: Vec<LogRow>) -> SimLog {
        SimLog {
            scenario: String::from("synthetic"),
            controller: ControllerVariant::SafetyFilter,
            seed: 0,
            t_min: 1.0,
            t_max: 15.0,
            rows,
            breakaway_time: None,
            warnings: Vec::new(),
            error: None,
        }
    }

    fn times(n: usize, dt: f64) -> impl Iterator<Item = f64> {
        (0..n).map(move |k| k as f64 * dt)
    }

    #[test]
    fn perfect_hover_has_no_error() {
        let m = metrics(&log(times(1001, 1e-3).map(row).collect()));
        assert_eq!(m.rows, 1001);
        assert_eq!(m.rms_tracking, Vector6::zeros());
        assert_eq!(m.max_overshoot, Vector6::zeros());
        assert_eq!(m.violation_steps, 0);
        assert_eq!(m.relaxed_steps, 0);
        assert!(m.completed);
    }

    #[test]
    fn single_violation_is_counted() {
        let mut rows: Vec<LogRow> = times(100, 1e-2).map(row).collect();
        rows[40].thrust[0] = 15.2;
        rows[41].thrust_raw[3] = 0.5;
        rows[42].status = StepStatus::Qp(QpStatus::Relaxed);
        let m = metrics(&log(rows));
        assert_eq!(m.violation_steps, 1);
        assert_eq!(m.raw_violation_steps, 1);
        assert_eq!(m.thrust_max, 15.2);
        assert_eq!(m.relaxed_steps, 1);
    }

    #[test]
    fn resettling_after_breakaway() {
        // Error of 0.2 m until t = 12.3 s, then zero.
        let rows: Vec<LogRow> = times(2001, 0.01)
            .map(|t| {
                let mut r = row(t);
                if (10.0..12.3 - 1e-9).contains(&t) {
                    r.q[0] += 0.2;
                }
                r
            })
            .collect();
        let mut l = log(rows);
        l.breakaway_time = Some(10.0);
        let m = metrics(&l);
        assert!((m.resettling_time.unwrap() - 2.3).abs() < 1e-9);
    }

    #[test]
    fn brief_dip_does_not_count_as_settled() {
        let rows: Vec<LogRow> = times(1001, 0.01)
            .map(|t| {
                let mut r = row(t);
                if !(2.0..2.5).contains(&t) && t < 5.0 {
                    r.q[0] += 0.2;
                }
                r
            })
            .collect();
        let t = resettling_time(&rows, 0.0, RESETTLE_THRESHOLD, RESETTLE_HOLD).unwrap();
        assert!((t - 5.0).abs() < 1e-9);
        assert!(resettling_time(&rows[..560], 0.0, RESETTLE_THRESHOLD, RESETTLE_HOLD).is_none());
    }

    #[test]
    fn overshoot_past_a_step_target() {
        let rows: Vec<LogRow> = times(300, 0.01)
            .map(|t| {
                let mut r = row(t);
                if t >= 1.0 {
                    r.q_t[0] = 1.0;
                    // Rises to 1.1 then settles on the target.
                    r.q[0] = if t < 2.0 { t - 1.0 } else { (1.1 - 0.1 * (t - 2.0)).max(1.0) };
                }
                r.q[2] += if t < 1.0 { 0.0 } else { -0.03 };
                r
            })
            .collect();
        let m = metrics(&log(rows));
        assert!((m.max_overshoot[0] - 0.1).abs() < 0.011);
        assert!((m.max_overshoot[2] - 0.03).abs() < 1e-12);
    }
}
