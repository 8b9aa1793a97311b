//! TOML scenario files.
//!
//! A file names a built-in preset with `scenario = "<name>"` and overrides any
//! subset of its fields. All quantities are SI. Angles are radians unless given
//! as a string with a `deg` suffix, e.g. `tilt = "15deg"`.
//!
//! ```toml
//! scenario = "wall_push"
//! duration = 30.0
//! controller = "safety_filter"   # or no_filter, direct_clamp (none, clamp, filter)
//! seed = 3
//! initial_pose = [0.0, 0.0, 1.0, 0.0, 0.0, "5deg"]
//!
//! [[targets]]                     # replaces the preset's schedule
//! time = 2.0
//! pose = [0.45, 0.0, 1.0, 0.0, 0.0, 0.0]
//!
//! [vehicle]          # mass, inertia ([3] diagonal or [[3]; 3]), arm_length, tilt, torque_coeff, gravity
//! [mismatch]         # mass_scale, inertia_scale
//! [gains]            # kp, kd
//! [observer]         # gamma_zeta, gamma_chi, mu
//! [barrier]          # t_min, t_max, gamma, k_beta, sigma
//! [target_generator] # k_a, delta_min, delta_max, k_dp
//! [end_effector]     # offset
//! [wall]             # enabled, plane_point, normal, stiffness, damping
//! [plug]             # enabled, anchor, stiffness, damping, break_force
//! [cart]             # enabled, mass, viscous_friction, coulomb_friction,
//!                    # contact_stiffness, contact_damping, initial_position, goal_line
//! [wind]             # mean_force, gust_amplitude, gust_frequency, noise_std
//! ```
//!
//! Six-vectors accept a scalar that applies to every axis.

use std::path::Path;

use aphi_core::controller::ControllerVariant;
use aphi_core::environment::{CartConfig, PlugConfig, WallConfig};
use aphi_core::sim::{Scenario, TargetSchedule};
use aphi_core::{Matrix3, Vector3, Vector6};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// An angle in radians; deserializes from a number or a `"<value>deg"` string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl Angle {
    fn parse(text: &str) -> Result<f64, String> {
        let trimmed = text.trim();
        let value = trimmed
            .strip_suffix("deg")
            .ok_or_else(|| format!("angle '{text}' must be a number (radians) or end in 'deg'"))?;
        let deg: f64 = value.trim().parse().map_err(|_| format!("angle '{text}' is not a number"))?;
        Ok(deg.to_radians())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAngle {
    Number(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawAngle::deserialize(d)? {
            RawAngle::Number(v) => Ok(Angle(v)),
            RawAngle::Text(s) => Angle::parse(&s).map(Angle).map_err(de::Error::custom),
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

/// `[x, y, z, roll, pitch, yaw]`; only the last three take a `deg` suffix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(pub Vector6);

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<RawAngle>::deserialize(d)?;
        if raw.len() != 6 {
            return Err(de::Error::invalid_length(raw.len(), &"6 entries [x, y, z, roll, pitch, yaw]"));
        }
        let mut q = Vector6::zeros();
        for (i, entry) in raw.into_iter().enumerate() {
            q[i] = match entry {
                RawAngle::Number(v) => v,
                RawAngle::Text(s) if i >= 3 => Angle::parse(&s).map_err(de::Error::custom)?,
                RawAngle::Text(s) => {
                    return Err(de::Error::custom(format!("position entry '{s}' must be a number in metres")))
                }
            };
        }
        Ok(Pose(q))
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

/// Six-vector written either as a scalar or as six entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Six(pub Vector6);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSix {
    Scalar(f64),
    Array([f64; 6]),
}

impl<'de> Deserialize<'de> for Six {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawSix::deserialize(d) {
            Ok(RawSix::Scalar(v)) => Ok(Six(Vector6::repeat(v))),
            Ok(RawSix::Array(a)) => Ok(Six(Vector6::from_row_slice(&a))),
            Err(_) => Err(de::Error::custom("expected a number or an array of 6 numbers")),
        }
    }
}

impl Serialize for Six {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

fn v3(a: [f64; 3]) -> Vector3 {
    Vector3::from_row_slice(&a)
}

fn a3(v: &Vector3) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Inertia as a diagonal or a full 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Inertia {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl Inertia {
    fn matrix(&self) -> Matrix3 {
        match self {
            Self::Diagonal(d) => Matrix3::from_diagonal(&v3(*d)),
            Self::Full(rows) => Matrix3::from_fn(|r, c| rows[r][c]),
        }
    }

    fn from_matrix(m: &Matrix3) -> Self {
        if (0..3).all(|r| (0..3).all(|c| r == c || m[(r, c)] == 0.0)) {
            Self::Diagonal([m[(0, 0)], m[(1, 1)], m[(2, 2)]])
        } else {
            Self::Full(core::array::from_fn(|r| core::array::from_fn(|c| m[(r, c)])))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub time: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<Inertia>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt: Option<Angle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque_coeff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<Six>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_zeta: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_chi: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Six>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_beta: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Six>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TargetGenSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_a: Option<Six>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_dp: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EndEffectorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WallSection {
    /// `false` removes the wall; defaults to `true` when the table is present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane_point: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlugSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    /// `inf` for a plug that never comes out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub break_force: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CartSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub viscous_friction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coulomb_friction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contact_stiffness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contact_damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_position: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_line: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WindSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_force: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gust_amplitude: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gust_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

/// On-disk scenario: a preset name plus optional overrides.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motor_saturation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_order_hold: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrench_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_pose: Option<Pose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<TargetEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_generator: Option<TargetGenSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end_effector: Option<EndEffectorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plug: Option<PlugSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cart: Option<CartSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wind: Option<WindSection>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Applies `section` over `current`, starting from `default` when the preset has
/// no such element. `enabled = false` removes it.
fn overlay<C: Copy, S>(
    current: Option<C>,
    section: Option<S>,
    enabled: impl Fn(&S) -> Option<bool>,
    default: C,
    apply: impl Fn(&mut C, S),
) -> Option<C> {
    let Some(section) = section else {
        return current;
    };
    if enabled(&section) == Some(false) {
        return None;
    }
    let mut cfg = current.unwrap_or(default);
    apply(&mut cfg, section);
    Some(cfg)
}

impl ScenarioFile {
    /// Builds the scenario without validating it.
    pub fn to_scenario(&self) -> Result<Scenario, aphi_core::Error> {
        let mut s = Scenario::preset(&self.scenario)?;
        set(&mut s.name, self.name.clone());
        set(&mut s.duration, self.duration);
        set(&mut s.dt, self.dt);
        if let Some(c) = &self.controller {
            s.controller = c.parse()?;
        }
        set(&mut s.wind.seed, self.seed);
        set(&mut s.motor_saturation, self.motor_saturation);
        set(&mut s.zero_order_hold, self.zero_order_hold);
        set(&mut s.wrench_cap, self.wrench_cap);
        set(&mut s.initial_pose, self.initial_pose.map(|p| p.0));
        if let Some(targets) = &self.targets {
            s.schedule = TargetSchedule { points: targets.iter().map(|e| (e.time, e.pose.0)).collect() };
        }
        if let Some(v) = &self.vehicle {
            let n = &mut s.nominal;
            set(&mut n.mass, v.mass);
            set(&mut n.inertia, v.inertia.map(|i| i.matrix()));
            set(&mut n.arm_length, v.arm_length);
            set(&mut n.tilt, v.tilt.map(|a| a.0));
            set(&mut n.torque_coeff, v.torque_coeff);
            set(&mut n.gravity, v.gravity);
        }
        if let Some(m) = &self.mismatch {
            set(&mut s.mismatch.mass_scale, m.mass_scale);
            set(&mut s.mismatch.inertia_scale, m.inertia_scale);
        }
        if let Some(g) = &self.gains {
            set(&mut s.gains.kp, g.kp.map(|v| v.0));
            set(&mut s.gains.kd, g.kd.map(|v| v.0));
        }
        if let Some(o) = &self.observer {
            set(&mut s.observer.gamma_zeta, o.gamma_zeta.map(|v| v.0));
            set(&mut s.observer.gamma_chi, o.gamma_chi.map(|v| v.0));
            set(&mut s.observer.mu, o.mu.map(|v| v.0));
        }
        if let Some(b) = &self.barrier {
            set(&mut s.barrier.t_min, b.t_min);
            set(&mut s.barrier.t_max, b.t_max);
            set(&mut s.barrier.gamma, b.gamma.map(|v| v.0));
            set(&mut s.barrier.k_beta, b.k_beta.map(|v| v.0));
            set(&mut s.barrier.sigma, b.sigma.map(|v| v.0));
        }
        if let Some(t) = &self.target_generator {
            set(&mut s.target_gen.k_a, t.k_a.map(|v| v.0));
            set(&mut s.target_gen.delta_min, t.delta_min);
            set(&mut s.target_gen.delta_max, t.delta_max);
            set(&mut s.target_gen.k_dp, t.k_dp);
        }
        if let Some(e) = &self.end_effector {
            set(&mut s.end_effector.offset_body, e.offset.map(v3));
        }
        s.wall = overlay(s.wall, self.wall.clone(), |w| w.enabled, WallConfig::default(), |c, w| {
            set(&mut c.plane_point, w.plane_point.map(v3));
            set(&mut c.normal, w.normal.map(v3));
            set(&mut c.stiffness, w.stiffness);
            set(&mut c.damping, w.damping);
        });
        s.plug = overlay(s.plug, self.plug.clone(), |p| p.enabled, PlugConfig::default(), |c, p| {
            set(&mut c.anchor, p.anchor.map(v3));
            set(&mut c.stiffness, p.stiffness);
            set(&mut c.damping, p.damping);
            set(&mut c.break_force, p.break_force);
        });
        s.cart = overlay(s.cart, self.cart.clone(), |c| c.enabled, CartConfig::default(), |c, k| {
            set(&mut c.mass, k.mass);
            set(&mut c.viscous_friction, k.viscous_friction);
            set(&mut c.coulomb_friction, k.coulomb_friction);
            set(&mut c.contact_stiffness, k.contact_stiffness);
            set(&mut c.contact_damping, k.contact_damping);
            set(&mut c.initial_position, k.initial_position);
            set(&mut c.goal_line, k.goal_line);
        });
        if let Some(w) = &self.wind {
            set(&mut s.wind.mean_force, w.mean_force.map(v3));
            set(&mut s.wind.gust_amplitude, w.gust_amplitude.map(v3));
            set(&mut s.wind.gust_frequency, w.gust_frequency);
            set(&mut s.wind.noise_std, w.noise_std);
        }
        Ok(s)
    }

    /// Fully explicit file for `s`: every field is written, so loading it back
    /// reproduces `s` whatever the preset defaults are.
    pub fn from_scenario(s: &Scenario) -> Self {
        let base = if aphi_core::sim::PRESETS.contains(&s.name.as_str()) { s.name.as_str() } else { "hover" };
        let n = &s.nominal;
        Self {
            scenario: base.to_string(),
            name: Some(s.name.clone()),
            duration: Some(s.duration),
            dt: Some(s.dt),
            controller: Some(s.controller.as_str().to_string()),
            seed: Some(s.wind.seed),
            motor_saturation: Some(s.motor_saturation),
            zero_order_hold: Some(s.zero_order_hold),
            wrench_cap: Some(s.wrench_cap),
            initial_pose: Some(Pose(s.initial_pose)),
            targets: Some(s.schedule.points.iter().map(|(t, q)| TargetEntry { time: *t, pose: Pose(*q) }).collect()),
            vehicle: Some(VehicleSection {
                mass: Some(n.mass),
                inertia: Some(Inertia::from_matrix(&n.inertia)),
                arm_length: Some(n.arm_length),
                tilt: Some(Angle(n.tilt)),
                torque_coeff: Some(n.torque_coeff),
                gravity: Some(n.gravity),
            }),
            mismatch: Some(MismatchSection {
                mass_scale: Some(s.mismatch.mass_scale),
                inertia_scale: Some(s.mismatch.inertia_scale),
            }),
            gains: Some(GainsSection { kp: Some(Six(s.gains.kp)), kd: Some(Six(s.gains.kd)) }),
            observer: Some(ObserverSection {
                gamma_zeta: Some(Six(s.observer.gamma_zeta)),
                gamma_chi: Some(Six(s.observer.gamma_chi)),
                mu: Some(Six(s.observer.mu)),
            }),
            barrier: Some(BarrierSection {
                t_min: Some(s.barrier.t_min),
                t_max: Some(s.barrier.t_max),
                gamma: Some(Six(s.barrier.gamma)),
                k_beta: Some(Six(s.barrier.k_beta)),
                sigma: Some(Six(s.barrier.sigma)),
            }),
            target_generator: Some(TargetGenSection {
                k_a: Some(Six(s.target_gen.k_a)),
                delta_min: Some(s.target_gen.delta_min),
                delta_max: Some(s.target_gen.delta_max),
                k_dp: Some(s.target_gen.k_dp),
            }),
            end_effector: Some(EndEffectorSection { offset: Some(a3(&s.end_effector.offset_body)) }),
            wall: Some(match &s.wall {
                Some(w) => WallSection {
                    enabled: Some(true),
                    plane_point: Some(a3(&w.plane_point)),
                    normal: Some(a3(&w.normal)),
                    stiffness: Some(w.stiffness),
                    damping: Some(w.damping),
                },
                None => WallSection { enabled: Some(false), ..Default::default() },
            }),
            plug: Some(match &s.plug {
                Some(p) => PlugSection {
                    enabled: Some(true),
                    anchor: Some(a3(&p.anchor)),
                    stiffness: Some(p.stiffness),
                    damping: Some(p.damping),
                    break_force: Some(p.break_force),
                },
                None => PlugSection { enabled: Some(false), ..Default::default() },
            }),
            cart: Some(match &s.cart {
                Some(c) => CartSection {
                    enabled: Some(true),
                    mass: Some(c.mass),
                    viscous_friction: Some(c.viscous_friction),
                    coulomb_friction: Some(c.coulomb_friction),
                    contact_stiffness: Some(c.contact_stiffness),
                    contact_damping: Some(c.contact_damping),
                    initial_position: Some(c.initial_position),
                    goal_line: Some(c.goal_line),
                },
                None => CartSection { enabled: Some(false), ..Default::default() },
            }),
            wind: Some(WindSection {
                mean_force: Some(a3(&s.wind.mean_force)),
                gust_amplitude: Some(a3(&s.wind.gust_amplitude)),
                gust_frequency: Some(s.wind.gust_frequency),
                noise_std: Some(s.wind.noise_std),
            }),
        }
    }
}

/// Parses, defaults and validates scenario text. `origin` labels diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| CliError::Parse { origin: origin.to_string(), message: e.to_string() })?;
    let scenario = file.to_scenario().map_err(|e| CliError::Validation { origin: origin.to_string(), source: e })?;
    scenario.validate().map_err(|e| CliError::Validation { origin: origin.to_string(), source: e })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

/// TOML text that [`parse_scenario`] turns back into `s`.
pub fn serialize_scenario(s: &Scenario) -> Result<String, CliError> {
    toml::to_string(&ScenarioFile::from_scenario(s)).map_err(|e| CliError::Serialize(e.to_string()))
}

/// Controller names as accepted on the command line.
pub fn parse_controller(s: &str) -> Result<ControllerVariant, String> {
    s.parse::<ControllerVariant>().map_err(|e| e.to_string())
}
