//! Scenario records and the four built-in interaction scenarios.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::controller::{ControllerGains, ControllerVariant};
use crate::dynamics::VehicleParams;
use crate::environment::{
    CartConfig, EndEffectorConfig, PlugConfig, WallConfig, WindConfig, DEFAULT_WRENCH_CAP,
};
use crate::error::{invalid, Error};
use crate::observer::ObserverGains;
use crate::safety_filter::{BarrierConfig, TargetGenConfig};
use crate::{Vector3, Vector6};

/// Piecewise-constant target poses. Each entry holds from its time until the next.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSchedule {
    pub points: Vec<(f64, Vector6)>,
}

impl TargetSchedule {
    pub fn constant(q_t: Vector6) -> Self {
        Self { points: vec![(0.0, q_t)] }
    }

    /// Target at `t`; before the first entry the first target applies.
    pub fn at(&self, t: f64) -> Vector6 {
        let mut current = self.points[0].1;
        for (time, q) in &self.points {
            if *time <= t {
                current = *q;
            } else {
                break;
            }
        }
        current
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.points.is_empty() {
            return Err(invalid("TargetSchedule: at least one target is required"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (t, q) in &self.points {
            if !t.is_finite() || *t < prev {
                return Err(invalid("TargetSchedule: times must be finite and non-decreasing"));
            }
            if !q.iter().all(|v| v.is_finite()) {
                return Err(invalid("TargetSchedule: targets must be finite"));
            }
            if q[4].abs() >= 0.5 * core::f64::consts::PI {
                return Err(invalid("TargetSchedule: target pitch must satisfy |pitch| < pi/2"));
            }
            prev = *t;
        }
        Ok(())
    }
}

/// Multiplicative mismatch between the true plant and the controller's model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantMismatch {
    pub mass_scale: f64,
    pub inertia_scale: f64,
}

impl PlantMismatch {
    pub const NONE: Self = Self { mass_scale: 1.0, inertia_scale: 1.0 };

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mass_scale > 0.0 && self.mass_scale.is_finite()) {
            return Err(invalid("PlantMismatch: mass_scale must be > 0"));
        }
        if !(self.inertia_scale > 0.0 && self.inertia_scale.is_finite()) {
            return Err(invalid("PlantMismatch: inertia_scale must be > 0"));
        }
        Ok(())
    }
}

impl Default for PlantMismatch {
    fn default() -> Self {
        Self { mass_scale: 1.05, inertia_scale: 1.10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    /// Control and integration step (s).
    pub dt: f64,
    pub controller: ControllerVariant,
    pub schedule: TargetSchedule,
    /// Initial pose; the vehicle starts at rest.
    pub initial_pose: Vector6,
    /// Parameters known to the controller.
    pub nominal: VehicleParams,
    pub mismatch: PlantMismatch,
    pub gains: ControllerGains,
    pub observer: ObserverGains,
    pub barrier: BarrierConfig,
    pub target_gen: TargetGenConfig,
    pub end_effector: EndEffectorConfig,
    pub wall: Option<WallConfig>,
    pub plug: Option<PlugConfig>,
    pub cart: Option<CartConfig>,
    pub wind: WindConfig,
    /// Limit realized motor thrusts to `[t_min, t_max]` of the barrier config.
    pub motor_saturation: bool,
    /// Hold thrusts and desired acceleration over each step; otherwise the control
    /// law is re-evaluated at every integrator stage.
    pub zero_order_hold: bool,
    /// Abort when any single interaction force exceeds this (N).
    pub wrench_cap: f64,
}

/// Names accepted by [`Scenario::preset`].
pub const PRESETS: [&str; 5] = ["hover", "wall_push", "plug_pull_firm", "cart_push", "plug_extract"];

/// Start pose shared by the presets: level hover 1 m above the origin.
pub fn home_pose() -> Vector6 {
    Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
}

fn shifted_x(dx: f64) -> Vector6 {
    let mut q = home_pose();
    q[0] += dx;
    q
}

impl Scenario {
    /// Hover at the home pose with no environment.
    pub fn hover() -> Self {
        Self {
            name: "hover".to_string(),
            duration: 10.0,
            dt: 1e-3,
            controller: ControllerVariant::SafetyFilter,
            schedule: TargetSchedule::constant(home_pose()),
            initial_pose: home_pose(),
            nominal: VehicleParams::nominal(),
            mismatch: PlantMismatch::default(),
            gains: ControllerGains::nominal(),
            observer: ObserverGains::nominal(),
            barrier: BarrierConfig::nominal(),
            target_gen: TargetGenConfig::nominal(),
            end_effector: EndEffectorConfig::default(),
            wall: None,
            plug: None,
            cart: None,
            wind: WindConfig::calm(),
            motor_saturation: true,
            zero_order_hold: true,
            wrench_cap: DEFAULT_WRENCH_CAP,
        }
    }

    /// Push a static wall: the target puts the tool 0.3 m beyond the wall surface.
    pub fn wall_push() -> Self {
        let wall = WallConfig::default();
        let tool_reach = EndEffectorConfig::default().offset_body[0];
        let target = wall.plane_point[0] + 0.3 - tool_reach;
        Self {
            name: "wall_push".to_string(),
            duration: 60.0,
            schedule: TargetSchedule { points: vec![(0.0, home_pose()), (2.0, shifted_x(target))] },
            target_gen: TargetGenConfig { k_dp: 0.5, ..TargetGenConfig::nominal() },
            wall: Some(wall),
            ..Self::hover()
        }
    }

    fn plug_at_home_tool() -> PlugConfig {
        let tip = home_pose().fixed_rows::<3>(0) + EndEffectorConfig::default().offset_body;
        PlugConfig { anchor: Vector3::from(tip), ..PlugConfig::default() }
    }

    /// Pull on a plug that never comes out; the target is 0.2 m behind the socket.
    pub fn plug_pull_firm() -> Self {
        Self {
            name: "plug_pull_firm".to_string(),
            duration: 30.0,
            schedule: TargetSchedule { points: vec![(0.0, home_pose()), (2.0, shifted_x(-0.2))] },
            target_gen: TargetGenConfig { k_dp: 5.0, ..TargetGenConfig::nominal() },
            plug: Some(PlugConfig { break_force: f64::INFINITY, ..Self::plug_at_home_tool() }),
            ..Self::hover()
        }
    }

    /// Push a wheeled cart past its goal line.
    pub fn cart_push() -> Self {
        let cart = CartConfig::default();
        let tool_reach = EndEffectorConfig::default().offset_body[0];
        Self {
            name: "cart_push".to_string(),
            duration: 40.0,
            schedule: TargetSchedule {
                points: vec![(0.0, home_pose()), (2.0, shifted_x(cart.goal_line + 0.3 - tool_reach))],
            },
            target_gen: TargetGenConfig { k_dp: 0.5, ..TargetGenConfig::nominal() },
            cart: Some(cart),
            ..Self::hover()
        }
    }

    /// Pull a plug out of its socket; it breaks free once the pull exceeds its
    /// holding force.
    pub fn plug_extract() -> Self {
        Self {
            name: "plug_extract".to_string(),
            duration: 20.0,
            wind: WindConfig { noise_std: 0.1, seed: 1, ..WindConfig::calm() },
            plug: Some(Self::plug_at_home_tool()),
            ..Self::plug_pull_firm()
        }
    }

    pub fn preset(name: &str) -> Result<Self, Error> {
        match name {
            "hover" => Ok(Self::hover()),
            "wall_push" => Ok(Self::wall_push()),
            "plug_pull_firm" => Ok(Self::plug_pull_firm()),
            "cart_push" => Ok(Self::cart_push()),
            "plug_extract" => Ok(Self::plug_extract()),
            other => Err(invalid(alloc::format!(
                "Scenario: unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Parameters of the simulated vehicle.
    pub fn plant(&self) -> VehicleParams {
        self.nominal.scaled(self.mismatch.mass_scale, self.mismatch.inertia_scale)
    }

    /// Number of integration steps; the log has one more row.
    pub fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.wind.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("Scenario: duration must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= self.duration) {
            return Err(invalid("Scenario: dt must be > 0 and no longer than the duration"));
        }
        if (self.duration / self.dt - self.steps() as f64).abs() > 1e-6 {
            return Err(invalid("Scenario: duration must be a whole number of steps"));
        }
        if !self.initial_pose.iter().all(|v| v.is_finite()) {
            return Err(invalid("Scenario: initial_pose must be finite"));
        }
        if !(self.wrench_cap > 0.0) {
            return Err(invalid("Scenario: wrench_cap must be > 0"));
        }
        crate::dynamics::check_attitude(&self.initial_pose.fixed_rows::<3>(3).into_owned())?;
        self.schedule.validate()?;
        self.nominal.validate()?;
        self.mismatch.validate()?;
        self.plant().validate()?;
        self.gains.validate()?;
        self.observer.validate()?;
        self.barrier.validate()?;
        self.target_gen.validate()?;
        self.end_effector.validate()?;
        if let Some(w) = &self.wall {
            w.validate()?;
        }
        if let Some(p) = &self.plug {
            p.validate()?;
        }
        if let Some(c) = &self.cart {
            c.validate()?;
        }
        self.wind.validate()
    }
}
