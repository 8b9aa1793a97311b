//! Euler-Lagrange model of the tilted-hexarotor aerial manipulator.
//!
//! The same functions serve as the "true" plant and as the nominal model used
//! by the observer and controller; only the [`VehicleParams`] differ.

use core::f64::consts::FRAC_PI_2;

use libm::{cos, sin, sqrt};
use nalgebra::Cholesky;

use crate::error::{invalid, Error};
use crate::{Matrix3, Matrix6, Vector3, Vector6};

/// Half-width of the band around pitch = +-pi/2 that is rejected as singular.
pub const PITCH_GUARD: f64 = 1e-6;

/// Largest accepted condition number of the allocation matrix.
pub const MAX_ALLOCATION_CONDITION: f64 = 1e12;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Physical constants of the vehicle (arm included as a lumped rigid body).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Body-frame inertia, kg m^2.
    pub inertia: Matrix3,
    /// Distance from the body origin to each propeller, m.
    pub arm_length: f64,
    /// Motor tilt angle, rad.
    pub tilt: f64,
    /// Thrust-to-torque coefficient, m.
    pub torque_coeff: f64,
    /// m/s^2
    pub gravity: f64,
}

impl VehicleParams {
    /// Nominal model used in the experiments: 3.50 kg, diag(0.035, 0.035, 0.045),
    /// 15 degree tilt, g = 9.81. Arm length and torque coefficient are not reported
    /// and default to an F550-sized frame with 9-inch propellers.
    pub fn nominal() -> Self {
        Self {
            mass: 3.50,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.035, 0.035, 0.045)),
            arm_length: 0.275,
            tilt: 15.0_f64.to_radians(),
            torque_coeff: 0.016,
            gravity: 9.81,
        }
    }

    /// Copy with mass and inertia multiplied, used to build a mismatched plant.
    pub fn scaled(&self, mass_scale: f64, inertia_scale: f64) -> Self {
        Self {
            mass: self.mass * mass_scale,
            inertia: self.inertia * inertia_scale,
            ..*self
        }
    }

    pub fn p1(&self) -> f64 {
        self.arm_length * cos(self.tilt) + self.torque_coeff * sin(self.tilt)
    }

    pub fn p2(&self) -> f64 {
        self.arm_length * sin(self.tilt) - self.torque_coeff * cos(self.tilt)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("VehicleParams: mass must be > 0"));
        }
        let j = &self.inertia;
        let scale = j.amax().max(f64::MIN_POSITIVE);
        if !j.iter().all(|v| v.is_finite()) || (j - j.transpose()).amax() > 1e-12 * scale {
            return Err(invalid("VehicleParams: inertia must be symmetric"));
        }
        if Cholesky::new(*j).is_none() {
            return Err(invalid("VehicleParams: inertia must be positive definite"));
        }
        if !(self.tilt > 0.0 && self.tilt < FRAC_PI_2) {
            return Err(invalid("VehicleParams: tilt must lie in (0, pi/2)"));
        }
        if !(self.arm_length > 0.0 && self.arm_length.is_finite()) {
            return Err(invalid("VehicleParams: arm_length must be > 0"));
        }
        if !(self.torque_coeff > 0.0 && self.torque_coeff.is_finite()) {
            return Err(invalid("VehicleParams: torque_coeff must be > 0"));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(invalid("VehicleParams: gravity must be > 0"));
        }
        Ok(())
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Generalized coordinates `q = [p; phi]` and their rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub q: Vector6,
    pub q_dot: Vector6,
}

impl PlantState {
    pub fn new(q: Vector6, q_dot: Vector6) -> Self {
        Self { q, q_dot }
    }

    /// At rest at the given pose.
    pub fn at_rest(q: Vector6) -> Self {
        Self { q, q_dot: Vector6::zeros() }
    }

    pub fn position(&self) -> Vector3 {
        self.q.fixed_rows::<3>(0).into_owned()
    }

    pub fn attitude(&self) -> Vector3 {
        self.q.fixed_rows::<3>(3).into_owned()
    }

    pub fn velocity(&self) -> Vector3 {
        self.q_dot.fixed_rows::<3>(0).into_owned()
    }

    pub fn attitude_rate(&self) -> Vector3 {
        self.q_dot.fixed_rows::<3>(3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.q_dot.iter()).all(|v| v.is_finite())
    }
}

/// A generalized wrench: world-frame force in rows 1-3, generalized torque in rows 4-6.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedWrench(pub Vector6);

impl GeneralizedWrench {
    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn from_parts(force: Vector3, torque: Vector3) -> Self {
        let mut w = Vector6::zeros();
        w.fixed_rows_mut::<3>(0).copy_from(&force);
        w.fixed_rows_mut::<3>(3).copy_from(&torque);
        Self(w)
    }

    pub fn force(&self) -> Vector3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn torque(&self) -> Vector3 {
        self.0.fixed_rows::<3>(3).into_owned()
    }
}

impl core::ops::Add for GeneralizedWrench {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

/// Per-motor thrusts in N.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThrustVector(pub Vector6);

impl ThrustVector {
    /// Elementwise clamp into `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self(self.0.map(|t| t.clamp(lo, hi)))
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }
}

/// Rejects attitudes whose pitch is within [`PITCH_GUARD`] of +-pi/2.
pub fn check_attitude(phi: &Vector3) -> Result<(), Error> {
    let pitch = phi[1];
    if !pitch.is_finite() || pitch.abs() >= FRAC_PI_2 - PITCH_GUARD {
        return Err(Error::SingularAttitude { pitch });
    }
    Ok(())
}

/// Body-rate map `Q` with `omega = Q * phi_dot` for ZYX angles `[roll; pitch; yaw]`.
pub fn euler_rate_map(phi: &Vector3) -> Result<Matrix3, Error> {
    check_attitude(phi)?;
    Ok(euler_rate_map_unchecked(phi))
}

fn euler_rate_map_unchecked(phi: &Vector3) -> Matrix3 {
    let (sr, cr) = (sin(phi[0]), cos(phi[0]));
    let (sp, cp) = (sin(phi[1]), cos(phi[1]));
    #[rustfmt::skip]
    let q = Matrix3::new(
        1.0, 0.0, -sp,
        0.0,  cr, sr * cp,
        0.0, -sr, cr * cp,
    );
    q
}

/// Partial derivatives `dQ/dphi_k`, k = roll, pitch, yaw.
pub fn euler_rate_map_partials(phi: &Vector3) -> [Matrix3; 3] {
    let (sr, cr) = (sin(phi[0]), cos(phi[0]));
    let (sp, cp) = (sin(phi[1]), cos(phi[1]));
    #[rustfmt::skip]
    let d_roll = Matrix3::new(
        0.0, 0.0, 0.0,
        0.0, -sr, cr * cp,
        0.0, -cr, -sr * cp,
    );
    #[rustfmt::skip]
    let d_pitch = Matrix3::new(
        0.0, 0.0, -cp,
        0.0, 0.0, -sr * sp,
        0.0, 0.0, -cr * sp,
    );
    [d_roll, d_pitch, Matrix3::zeros()]
}

/// Time derivative of `Q` along `phi_dot`.
pub fn euler_rate_map_derivative(phi: &Vector3, phi_dot: &Vector3) -> Matrix3 {
    let d = euler_rate_map_partials(phi);
    d[0] * phi_dot[0] + d[1] * phi_dot[1]
}

/// Body-to-world rotation `Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn rotation_matrix(phi: &Vector3) -> Matrix3 {
    let [rz, ry, rx] = elementary_rotations(phi);
    rz * ry * rx
}

fn elementary_rotations(phi: &Vector3) -> [Matrix3; 3] {
    let (sr, cr) = (sin(phi[0]), cos(phi[0]));
    let (sp, cp) = (sin(phi[1]), cos(phi[1]));
    let (sy, cy) = (sin(phi[2]), cos(phi[2]));
    #[rustfmt::skip]
    let rx = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0,  cr, -sr,
        0.0,  sr,  cr,
    );
    #[rustfmt::skip]
    let ry = Matrix3::new(
         cp, 0.0,  sp,
        0.0, 1.0, 0.0,
        -sp, 0.0,  cp,
    );
    #[rustfmt::skip]
    let rz = Matrix3::new(
         cy, -sy, 0.0,
         sy,  cy, 0.0,
        0.0, 0.0, 1.0,
    );
    [rz, ry, rx]
}

/// Partial derivatives `dR/dphi_k`, k = roll, pitch, yaw.
pub fn rotation_matrix_partials(phi: &Vector3) -> [Matrix3; 3] {
    let [rz, ry, rx] = elementary_rotations(phi);
    let (sr, cr) = (sin(phi[0]), cos(phi[0]));
    let (sp, cp) = (sin(phi[1]), cos(phi[1]));
    let (sy, cy) = (sin(phi[2]), cos(phi[2]));
    #[rustfmt::skip]
    let drx = Matrix3::new(
        0.0, 0.0, 0.0,
        0.0, -sr, -cr,
        0.0,  cr, -sr,
    );
    #[rustfmt::skip]
    let dry = Matrix3::new(
        -sp, 0.0,  cp,
        0.0, 0.0, 0.0,
        -cp, 0.0, -sp,
    );
    #[rustfmt::skip]
    let drz = Matrix3::new(
        -sy, -cy, 0.0,
         cy, -sy, 0.0,
        0.0, 0.0, 0.0,
    );
    [rz * ry * drx, rz * dry * rx, drz * ry * rx]
}

/// `[v]x`, the cross-product matrix.
pub fn skew(v: &Vector3) -> Matrix3 {
    #[rustfmt::skip]
    let m = Matrix3::new(
         0.0, -v[2],  v[1],
         v[2],  0.0, -v[0],
        -v[1],  v[0],  0.0,
    );
    m
}

/// `M(phi) = blkdiag{m I3, Q^T J Q}`.
pub fn mass_matrix(phi: &Vector3, params: &VehicleParams) -> Result<Matrix6, Error> {
    let q = euler_rate_map(phi)?;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).fill_diagonal(params.mass);
    m.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(q.transpose() * params.inertia * q));
    Ok(m)
}

/// `C(phi, phi_dot) = [0; Q^T (J Qdot phi_dot + [Q phi_dot]x J Q phi_dot)]`.
pub fn coriolis_vector(
    phi: &Vector3,
    phi_dot: &Vector3,
    params: &VehicleParams,
) -> Result<Vector6, Error> {
    let q = euler_rate_map(phi)?;
    let q_dot = euler_rate_map_derivative(phi, phi_dot);
    let omega = q * phi_dot;
    let j = &params.inertia;
    let rot = q.transpose() * (j * (q_dot * phi_dot) + omega.cross(&(j * omega)));
    let mut c = Vector6::zeros();
    c.fixed_rows_mut::<3>(3).copy_from(&rot);
    Ok(c)
}

/// `G = [m g e3; 0]`.
pub fn gravity_vector(params: &VehicleParams) -> Vector6 {
    let mut g = Vector6::zeros();
    g[2] = params.mass * params.gravity;
    g
}

/// The constant thrust-to-body-wrench map of the tilted hexarotor.
pub fn allocation_matrix(params: &VehicleParams) -> Result<Matrix6, Error> {
    let (sa, ca) = (sin(params.tilt), cos(params.tilt));
    let (p1, p2) = (params.p1(), params.p2());
    let h = 0.5;
    let r = SQRT3_2;
    #[rustfmt::skip]
    let xi = Matrix6::new(
         h * sa,     -sa,  h * sa,  h * sa,     -sa,  h * sa,
        -r * sa,     0.0,  r * sa, -r * sa,     0.0,  r * sa,
             ca,      ca,      ca,      ca,      ca,      ca,
        -h * p1,     -p1, -h * p1,  h * p1,      p1,  h * p1,
         r * p1,     0.0, -r * p1, -r * p1,     0.0,  r * p1,
             p2,     -p2,      p2,     -p2,      p2,     -p2,
    );
    let sv = xi.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_ALLOCATION_CONDITION) {
        return Err(Error::NonInvertibleAllocation { condition });
    }
    Ok(xi)
}

/// Allocation matrix with its cached inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub matrix: Matrix6,
    pub inverse: Matrix6,
}

impl Allocation {
    pub fn new(params: &VehicleParams) -> Result<Self, Error> {
        let matrix = allocation_matrix(params)?;
        let inverse = matrix
            .lu()
            .try_inverse()
            .ok_or(Error::NonInvertibleAllocation { condition: f64::INFINITY })?;
        Ok(Self { matrix, inverse })
    }
}

/// `tau = B(phi) Xi T` with `B = blkdiag{R, Q^T}`.
pub fn thrust_to_wrench(
    thrust: &ThrustVector,
    phi: &Vector3,
    alloc: &Allocation,
) -> Result<GeneralizedWrench, Error> {
    let q = euler_rate_map(phi)?;
    let body = alloc.matrix * thrust.0;
    let force = rotation_matrix(phi) * body.fixed_rows::<3>(0);
    let torque = q.transpose() * body.fixed_rows::<3>(3);
    Ok(GeneralizedWrench::from_parts(force, torque))
}

/// `T = Xi^-1 B^-1(phi) tau`.
pub fn wrench_to_thrust(
    tau: &GeneralizedWrench,
    phi: &Vector3,
    alloc: &Allocation,
) -> Result<ThrustVector, Error> {
    let q = euler_rate_map(phi)?;
    let body_force = rotation_matrix(phi).transpose() * tau.force();
    let body_moment = q
        .transpose()
        .lu()
        .solve(&tau.torque())
        .ok_or(Error::SingularAttitude { pitch: phi[1] })?;
    let body = GeneralizedWrench::from_parts(body_force, body_moment);
    Ok(ThrustVector(alloc.inverse * body.0))
}

/// `q_ddot = M^-1 (tau + tau_ext - C - G)`.
pub fn forward_dynamics(
    state: &PlantState,
    tau: &GeneralizedWrench,
    tau_ext: &GeneralizedWrench,
    params: &VehicleParams,
) -> Result<Vector6, Error> {
    let phi = state.attitude();
    let q = euler_rate_map(&phi)?;
    let c = coriolis_vector(&phi, &state.attitude_rate(), params)?;
    let rhs = tau.0 + tau_ext.0 - c - gravity_vector(params);

    let lin = rhs.fixed_rows::<3>(0) / params.mass;
    let m_rot = q.transpose() * params.inertia * q;
    let ang = m_rot
        .lu()
        .solve(&rhs.fixed_rows::<3>(3).into_owned())
        .ok_or(Error::SingularAttitude { pitch: phi[1] })?;
    Ok(GeneralizedWrench::from_parts(lin, ang).0)
}

/// Kinetic plus potential energy `1/2 q_dot^T M q_dot + m g p_z`.
pub fn total_energy(state: &PlantState, params: &VehicleParams) -> Result<f64, Error> {
    let m = mass_matrix(&state.attitude(), params)?;
    Ok(0.5 * state.q_dot.dot(&(m * state.q_dot)) + params.mass * params.gravity * state.q[2])
}

/// Equal per-motor hover thrust `m g / (6 cos(alpha))`.
pub fn hover_thrust(params: &VehicleParams) -> f64 {
    params.mass * params.gravity / (6.0 * cos(params.tilt))
}

pub(crate) fn norm3(v: &Vector3) -> f64 {
    sqrt(v.dot(v))
}
