use alloc::string::String;
use alloc::vec::Vec;

use crate::controller::ControllerVariant;
use crate::error::Error;
use crate::qp_solver::QpStatus;
use crate::{Vector3, Vector6};

/// Outcome of the safety filter at one control step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepStatus {
    Qp(QpStatus),
    /// The variant runs without the QP.
    Off,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Qp(s) => s.as_str(),
            Self::Off => "off",
        }
    }

    pub fn is_relaxed(&self) -> bool {
        *self == Self::Qp(QpStatus::Relaxed)
    }
}

/// One control step, recorded at its start time.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: Vector6,
    pub q_dot: Vector6,
    pub q_d: Vector6,
    pub q_d_dot: Vector6,
    pub q_t: Vector6,
    /// Thrust command after the variant's own clamp.
    pub thrust: Vector6,
    /// Thrust command before any clamp.
    pub thrust_raw: Vector6,
    /// Barrier values of `thrust`.
    pub h: Vector6,
    pub d_hat: Vector6,
    /// True lumped disturbance of the nominal model at this instant.
    pub d_true: Vector6,
    pub beta_hat: Vector6,
    /// Residual term computed from the true disturbance.
    pub beta: Vector6,
    /// Desired acceleration applied over the step.
    pub q_dd_d: Vector6,
    pub status: StepStatus,
    pub slack_norm: f64,
    /// Sum of wall, plug and cart forces on the tool tip (world frame).
    pub contact_force: Vector3,
    pub cart_x: f64,
    pub cart_v: f64,
    pub plug_attached: bool,
}

impl LogRow {
    pub fn position(&self) -> Vector3 {
        self.q.fixed_rows::<3>(0).into_owned()
    }

    pub fn desired_position(&self) -> Vector3 {
        self.q_d.fixed_rows::<3>(0).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub scenario: String,
    pub controller: ControllerVariant,
    pub seed: u64,
    pub t_min: f64,
    pub t_max: f64,
    pub rows: Vec<LogRow>,
    /// Time of the first step without the plug attached.
    pub breakaway_time: Option<f64>,
    pub warnings: Vec<String>,
    /// Set when the run stopped early; `rows` then holds the partial history.
    pub error: Option<Error>,
}

impl SimLog {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}
