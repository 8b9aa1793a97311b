//! Penalty-contact interaction models and the fan-wind disturbance.
//!
//! Contact forces act at the tool tip `p_e = p + R r_e`. A world force `F` there
//! enters the generalized coordinates as `[F; Q^T (r_e x R^T F)]`.

use core::f64::consts::PI;

use libm::sin;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{euler_rate_map, norm3, rotation_matrix, GeneralizedWrench, PlantState};
use crate::error::{invalid, Error};
use crate::Vector3;

/// Default cap on any single interaction force (N).
pub const DEFAULT_WRENCH_CAP: f64 = 200.0;

/// Cart speeds below this are treated as stuck for Coulomb friction (m/s).
pub const STICTION_SPEED: f64 = 1e-4;

fn finite3(v: &Vector3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn non_negative(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorConfig {
    /// Tool tip in the body frame (m).
    pub offset_body: Vector3,
}

impl EndEffectorConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !finite3(&self.offset_body) {
            return Err(invalid("EndEffectorConfig: offset_body must be finite"));
        }
        Ok(())
    }
}

impl Default for EndEffectorConfig {
    fn default() -> Self {
        Self { offset_body: Vector3::new(0.35, 0.0, 0.0) }
    }
}

/// Tool-tip position and velocity in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolTip {
    pub position: Vector3,
    pub velocity: Vector3,
}

pub fn tool_tip(state: &PlantState, ee: &EndEffectorConfig) -> Result<ToolTip, Error> {
    let phi = state.attitude();
    let omega = euler_rate_map(&phi)? * state.attitude_rate();
    let r = rotation_matrix(&phi);
    Ok(ToolTip {
        position: state.position() + r * ee.offset_body,
        velocity: state.velocity() + r * omega.cross(&ee.offset_body),
    })
}

/// A world-frame force at the tool tip and its generalized wrench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub force: Vector3,
    pub wrench: GeneralizedWrench,
}

impl Contact {
    pub fn none() -> Self {
        Self { force: Vector3::zeros(), wrench: GeneralizedWrench::zero() }
    }

    pub fn at_tool(state: &PlantState, ee: &EndEffectorConfig, force: Vector3) -> Result<Self, Error> {
        let phi = state.attitude();
        let q = euler_rate_map(&phi)?;
        let moment_body = ee.offset_body.cross(&(rotation_matrix(&phi).transpose() * force));
        Ok(Self { force, wrench: GeneralizedWrench::from_parts(force, q.transpose() * moment_body) })
    }
}

/// Flat rigid wall. `normal` points into the wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallConfig {
    pub plane_point: Vector3,
    pub normal: Vector3,
    pub stiffness: f64,
    pub damping: f64,
}

impl WallConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !finite3(&self.plane_point) {
            return Err(invalid("WallConfig: plane_point must be finite"));
        }
        if !finite3(&self.normal) || (norm3(&self.normal) - 1.0).abs() > 1e-9 {
            return Err(invalid("WallConfig: normal must have unit length"));
        }
        if !non_negative(self.stiffness) || !non_negative(self.damping) {
            return Err(invalid("WallConfig: stiffness and damping must be >= 0"));
        }
        Ok(())
    }
}

impl Default for WallConfig {
    fn default() -> Self {
        Self {
            plane_point: Vector3::new(0.5, 0.0, 0.0),
            normal: Vector3::x(),
            stiffness: 500.0,
            damping: 50.0,
        }
    }
}

/// Unilateral spring-damper: pushes back along `-normal`, never pulls.
pub fn wall_wrench(state: &PlantState, wall: &WallConfig, ee: &EndEffectorConfig) -> Result<Contact, Error> {
    let tip = tool_tip(state, ee)?;
    let depth = wall.normal.dot(&(tip.position - wall.plane_point));
    if depth <= 0.0 {
        return Ok(Contact::none());
    }
    let rate = wall.normal.dot(&tip.velocity);
    let push = (wall.stiffness * depth + wall.damping * rate).max(0.0);
    Contact::at_tool(state, ee, -wall.normal * push)
}

/// Bilateral spring-damper tying the tool tip to `anchor` until the spring force
/// exceeds `break_force`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugConfig {
    pub anchor: Vector3,
    pub stiffness: f64,
    pub damping: f64,
    /// `f64::INFINITY` for a plug that never comes out.
    pub break_force: f64,
}

impl PlugConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !finite3(&self.anchor) {
            return Err(invalid("PlugConfig: anchor must be finite"));
        }
        if !non_negative(self.stiffness) || !non_negative(self.damping) {
            return Err(invalid("PlugConfig: stiffness and damping must be >= 0"));
        }
        if !(self.break_force > 0.0) {
            return Err(invalid("PlugConfig: break_force must be > 0"));
        }
        Ok(())
    }
}

impl Default for PlugConfig {
    fn default() -> Self {
        Self { anchor: Vector3::new(0.35, 0.0, 1.0), stiffness: 800.0, damping: 40.0, break_force: 4.5 }
    }
}

/// Plug force while `attached`, plus the attachment flag for the next step.
/// The step that crosses `break_force` still carries the force; detachment latches.
pub fn plug_wrench(
    state: &PlantState,
    plug: &PlugConfig,
    ee: &EndEffectorConfig,
    attached: bool,
) -> Result<(Contact, bool), Error> {
    if !attached {
        return Ok((Contact::none(), false));
    }
    let tip = tool_tip(state, ee)?;
    let stretch = tip.position - plug.anchor;
    let spring = norm3(&stretch) * plug.stiffness;
    let force = -stretch * plug.stiffness - tip.velocity * plug.damping;
    Ok((Contact::at_tool(state, ee, force)?, spring <= plug.break_force))
}

/// Wheeled cart pushed along world x through a compliant face at `position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartConfig {
    pub mass: f64,
    pub viscous_friction: f64,
    pub coulomb_friction: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub initial_position: f64,
    /// Face position counted as a completed push (m).
    pub goal_line: f64,
}

impl CartConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("CartConfig: mass must be > 0"));
        }
        if !non_negative(self.viscous_friction) || !non_negative(self.coulomb_friction) {
            return Err(invalid("CartConfig: frictions must be >= 0"));
        }
        if !non_negative(self.contact_stiffness) || !non_negative(self.contact_damping) {
            return Err(invalid("CartConfig: contact stiffness and damping must be >= 0"));
        }
        if !self.initial_position.is_finite() || !self.goal_line.is_finite() {
            return Err(invalid("CartConfig: positions must be finite"));
        }
        Ok(())
    }
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            mass: 2.0,
            viscous_friction: 4.0,
            coulomb_friction: 1.5,
            contact_stiffness: 500.0,
            contact_damping: 50.0,
            initial_position: 0.5,
            goal_line: 1.0,
        }
    }
}

/// Cart face position and velocity along x.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartState {
    pub x: f64,
    pub v: f64,
}

/// Instantaneous cart interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartForces {
    /// Force on the cart along +x; the vehicle receives the opposite.
    pub contact: f64,
    /// Friction force opposing the cart's motion.
    pub friction: f64,
    pub accel: f64,
}

/// Compression of the cart face by the tool tip and its rate.
fn cart_contact_force(tip: &ToolTip, cart: &CartState, cfg: &CartConfig) -> f64 {
    let depth = tip.position[0] - cart.x;
    if depth <= 0.0 {
        return 0.0;
    }
    let rate = tip.velocity[0] - cart.v;
    (cfg.contact_stiffness * depth + cfg.contact_damping * rate).max(0.0)
}

/// Coulomb friction with a stick band: inside the band static friction balances
/// the contact force up to `coulomb_friction`.
fn cart_friction(contact: f64, v: f64, cfg: &CartConfig) -> f64 {
    let coulomb = if v.abs() >= STICTION_SPEED {
        cfg.coulomb_friction * v.signum()
    } else if contact.abs() <= cfg.coulomb_friction {
        contact
    } else {
        cfg.coulomb_friction * contact.signum()
    };
    coulomb + cfg.viscous_friction * v
}

pub fn cart_forces(state: &PlantState, cart: &CartState, cfg: &CartConfig, ee: &EndEffectorConfig) -> Result<CartForces, Error> {
    let tip = tool_tip(state, ee)?;
    let contact = cart_contact_force(&tip, cart, cfg);
    let friction = cart_friction(contact, cart.v, cfg);
    Ok(CartForces { contact, friction, accel: (contact - friction) / cfg.mass })
}

/// Cart contact as seen by the vehicle.
pub fn cart_wrench(state: &PlantState, cart: &CartState, cfg: &CartConfig, ee: &EndEffectorConfig) -> Result<Contact, Error> {
    let f = cart_forces(state, cart, cfg, ee)?;
    if f.contact == 0.0 {
        return Ok(Contact::none());
    }
    Contact::at_tool(state, ee, Vector3::new(-f.contact, 0.0, 0.0))
}

/// Result of advancing the cart alone by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartStep {
    pub cart: CartState,
    /// Impulse delivered to the cart by the contact over the step (N s).
    pub contact_impulse: f64,
    pub friction_impulse: f64,
    /// Step-averaged wrench on the vehicle.
    pub vehicle: Contact,
}

/// Advances the cart over `dt` with RK4, holding the vehicle state fixed.
pub fn cart_step(
    cart: &CartState,
    state: &PlantState,
    cfg: &CartConfig,
    ee: &EndEffectorConfig,
    dt: f64,
) -> Result<CartStep, Error> {
    if !(dt > 0.0) {
        return Err(invalid("cart_step: dt must be > 0"));
    }
    let eval = |c: &CartState| cart_forces(state, c, cfg, ee);
    let shift = |c: &CartState, k: (f64, f64), h: f64| CartState { x: c.x + k.0 * h, v: c.v + k.1 * h };
    let f1 = eval(cart)?;
    let k1 = (cart.v, f1.accel);
    let c2 = shift(cart, k1, dt / 2.0);
    let f2 = eval(&c2)?;
    let k2 = (c2.v, f2.accel);
    let c3 = shift(cart, k2, dt / 2.0);
    let f3 = eval(&c3)?;
    let k3 = (c3.v, f3.accel);
    let c4 = shift(cart, k3, dt);
    let f4 = eval(&c4)?;
    let k4 = (c4.v, f4.accel);

    let avg = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    let contact = avg(f1.contact, f2.contact, f3.contact, f4.contact);
    let friction = avg(f1.friction, f2.friction, f3.friction, f4.friction);
    let next = CartState {
        x: cart.x + dt * avg(k1.0, k2.0, k3.0, k4.0),
        v: cart.v + dt * avg(k1.1, k2.1, k3.1, k4.1),
    };
    Ok(CartStep {
        cart: next,
        contact_impulse: contact * dt,
        friction_impulse: friction * dt,
        vehicle: Contact::at_tool(state, ee, Vector3::new(-contact, 0.0, 0.0))?,
    })
}

/// Fan wind: mean plus sinusoidal gust plus white noise, force only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindConfig {
    pub mean_force: Vector3,
    pub gust_amplitude: Vector3,
    /// Hz.
    pub gust_frequency: f64,
    /// Per-axis standard deviation (N).
    pub noise_std: f64,
    pub seed: u64,
}

impl WindConfig {
    pub fn calm() -> Self {
        Self {
            mean_force: Vector3::zeros(),
            gust_amplitude: Vector3::zeros(),
            gust_frequency: 0.0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !finite3(&self.mean_force) || !finite3(&self.gust_amplitude) {
            return Err(invalid("WindConfig: forces must be finite"));
        }
        if !non_negative(self.gust_frequency) {
            return Err(invalid("WindConfig: gust_frequency must be >= 0"));
        }
        if !non_negative(self.noise_std) {
            return Err(invalid("WindConfig: noise_std must be >= 0"));
        }
        Ok(())
    }

    pub fn is_calm(&self) -> bool {
        self.mean_force == Vector3::zeros() && self.gust_amplitude == Vector3::zeros() && self.noise_std == 0.0
    }
}

impl Default for WindConfig {
    fn default() -> Self {
        Self::calm()
    }
}

/// Seeded Gaussian noise source for the wind.
#[derive(Debug, Clone)]
pub struct WindNoise {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl WindNoise {
    pub fn new(cfg: &WindConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let normal = if cfg.noise_std > 0.0 {
            Some(Normal::new(0.0, cfg.noise_std).map_err(|_| invalid("WindConfig: noise_std must be >= 0"))?)
        } else {
            None
        };
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(cfg.seed), normal })
    }

    pub fn sample(&mut self) -> Vector3 {
        match &self.normal {
            Some(n) => Vector3::from_fn(|_, _| n.sample(&mut self.rng)),
            None => Vector3::zeros(),
        }
    }
}

/// Wind wrench at time `t`, drawing one noise sample from `noise`.
pub fn wind_wrench(t: f64, cfg: &WindConfig, noise: &mut WindNoise) -> GeneralizedWrench {
    wind_force(t, cfg, &noise.sample())
}

/// Deterministic part of the wind plus a given noise sample.
pub fn wind_force(t: f64, cfg: &WindConfig, noise: &Vector3) -> GeneralizedWrench {
    let gust = cfg.gust_amplitude * sin(2.0 * PI * cfg.gust_frequency * t);
    GeneralizedWrench::from_parts(cfg.mean_force + gust + noise, Vector3::zeros())
}
