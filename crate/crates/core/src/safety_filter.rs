//! Motor-thrust barrier functions and the QP safety filter.
//!
//! Each motor gets a barrier `h_i = ((T_M - T_m)/2)^2 - (T_i - (T_M + T_m)/2)^2`,
//! non-negative exactly when `T_i` lies in `[T_m, T_M]`. Under the DOB control law
//! the commanded thrust is `T(x) = J_a(phi) w(x)` with
//!
//! ```text
//!     J_a = Xi^-1 blkdiag{m_hat R^T, J_hat Q}
//!     w   = Kd (q_d_dot - q_dot) + Kp (q_d - q) + mu^-1 Gamma_zeta (zeta - q_dot) + chi
//! ```
//!
//! so `dT/dx` is available in closed form. The filter picks the desired
//! acceleration closest to the target-generator output subject to
//! `L_f h + L_g h u + beta_hat + gamma h >= sigma` for every motor.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::controller::{commanded, ClosedLoopModel};
use crate::dynamics::{
    euler_rate_map, euler_rate_map_partials, mass_matrix, rotation_matrix, rotation_matrix_partials,
    GeneralizedWrench, ThrustVector,
};
use crate::error::{invalid, Error};
use crate::qp_solver::{self, QpError, QpProblem, QpStatus, DEFAULT_SLACK_WEIGHT};
use crate::{Matrix3, Matrix6, Vector3, Vector6};

pub type StateVector = SVector<f64, 36>;
pub type ThrustJacobian = SMatrix<f64, 6, 36>;

/// Solver tolerance used by [`filter_step`].
pub const QP_TOLERANCE: f64 = 1e-10;

/// `x = [q; q_dot; zeta; chi; q_d; q_d_dot]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState(pub StateVector);

impl AugmentedState {
    pub fn from_parts(
        q: &Vector6,
        q_dot: &Vector6,
        zeta: &Vector6,
        chi: &Vector6,
        q_d: &Vector6,
        q_d_dot: &Vector6,
    ) -> Self {
        let mut x = StateVector::zeros();
        for (k, part) in [q, q_dot, zeta, chi, q_d, q_d_dot].into_iter().enumerate() {
            x.fixed_rows_mut::<6>(6 * k).copy_from(part);
        }
        Self(x)
    }

    fn block(&self, k: usize) -> Vector6 {
        self.0.fixed_rows::<6>(6 * k).into_owned()
    }

    pub fn q(&self) -> Vector6 {
        self.block(0)
    }
    pub fn q_dot(&self) -> Vector6 {
        self.block(1)
    }
    pub fn zeta(&self) -> Vector6 {
        self.block(2)
    }
    pub fn chi(&self) -> Vector6 {
        self.block(3)
    }
    pub fn q_d(&self) -> Vector6 {
        self.block(4)
    }
    pub fn q_d_dot(&self) -> Vector6 {
        self.block(5)
    }

    pub fn phi(&self) -> Vector3 {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Thrust bounds and the per-motor constants of the robust barrier constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub gamma: Vector6,
    pub k_beta: Vector6,
    pub sigma: Vector6,
}

impl BarrierConfig {
    /// `T in [1, 15] N`, `gamma = 10`, `k_beta = 10.1`, `sigma = 15` on every motor.
    pub fn nominal() -> Self {
        Self {
            t_min: 1.0,
            t_max: 15.0,
            gamma: Vector6::repeat(10.0),
            k_beta: Vector6::repeat(10.1),
            sigma: Vector6::repeat(15.0),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_max + self.t_min)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.t_max - self.t_min)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_min < self.t_max) {
            return Err(invalid("BarrierConfig: t_min must be < t_max"));
        }
        if !self.gamma.iter().all(|g| *g > 0.0 && g.is_finite()) {
            return Err(invalid("BarrierConfig: gamma entries must be > 0"));
        }
        if !self.k_beta.iter().zip(self.gamma.iter()).all(|(k, g)| k > g && k.is_finite()) {
            return Err(invalid("BarrierConfig: k_beta entries must exceed gamma"));
        }
        if !self.sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(invalid("BarrierConfig: sigma entries must be > 0"));
        }
        Ok(())
    }
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Internal states `xi` of the residual estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualState {
    pub xi: Vector6,
}

impl ResidualState {
    /// `xi = k_beta h`, which zeroes the initial estimate.
    pub fn initialize(h: &Vector6, cfg: &BarrierConfig) -> Self {
        Self { xi: cfg.k_beta.component_mul(h) }
    }
}

/// Second-order target generator shaping `q_d` toward `q_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGenConfig {
    pub k_a: Vector6,
    pub delta_min: f64,
    pub delta_max: f64,
    pub k_dp: f64,
}

impl TargetGenConfig {
    /// `k_a = 1` on x, y, z, yaw and `5` on roll, pitch; damping in `[1, 5]`, `k_dp = 0.5`.
    pub fn nominal() -> Self {
        Self {
            k_a: Vector6::new(1.0, 1.0, 1.0, 5.0, 5.0, 1.0),
            delta_min: 1.0,
            delta_max: 5.0,
            k_dp: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.k_a.iter().all(|k| *k > 0.0 && k.is_finite()) {
            return Err(invalid("TargetGenConfig: k_a entries must be > 0"));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta_max && self.delta_max.is_finite()) {
            return Err(invalid("TargetGenConfig: need 0 < delta_min <= delta_max"));
        }
        if !(self.k_dp >= 0.0 && self.k_dp.is_finite()) {
            return Err(invalid("TargetGenConfig: k_dp must be >= 0"));
        }
        Ok(())
    }
}

impl Default for TargetGenConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

pub fn barrier_values(thrust: &ThrustVector, cfg: &BarrierConfig) -> Vector6 {
    let (mid, half) = (cfg.midpoint(), cfg.half_width());
    thrust.0.map(|t| half * half - (t - mid) * (t - mid))
}

fn blkdiag(a: &Matrix3, b: &Matrix3) -> Matrix6 {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(b);
    m
}

/// `J_a(phi) = Xi^-1 B^-1(phi) M_hat(phi)`, the map from `M_hat^-1 tau` to thrusts.
pub fn allocation_jacobian(phi: &Vector3, model: &ClosedLoopModel) -> Result<Matrix6, Error> {
    let q = euler_rate_map(phi)?;
    let p = &model.nominal;
    let inner = blkdiag(&(rotation_matrix(phi).transpose() * p.mass), &(p.inertia * q));
    Ok(model.allocation.inverse * inner)
}

/// `dJ_a/dphi_k` for roll, pitch, yaw.
pub fn allocation_jacobian_partials(phi: &Vector3, model: &ClosedLoopModel) -> Result<[Matrix6; 3], Error> {
    euler_rate_map(phi)?;
    let p = &model.nominal;
    let dr = rotation_matrix_partials(phi);
    let dq = euler_rate_map_partials(phi);
    Ok(core::array::from_fn(|k| {
        model.allocation.inverse * blkdiag(&(dr[k].transpose() * p.mass), &(p.inertia * dq[k]))
    }))
}

/// `w(x) = M_hat^-1 tau`, the acceleration fed through `J_a`.
fn filtered_command(x: &AugmentedState, model: &ClosedLoopModel) -> Vector6 {
    let g = &model.gains;
    g.kd.component_mul(&(x.q_d_dot() - x.q_dot()))
        + g.kp.component_mul(&(x.q_d() - x.q()))
        + model.observer.zeta_rate().component_mul(&(x.zeta() - x.q_dot()))
        + x.chi()
}

/// Closed-form `dT/dx` (6 x 36).
pub fn thrust_state_jacobian(x: &AugmentedState, model: &ClosedLoopModel) -> Result<ThrustJacobian, Error> {
    let phi = x.phi();
    let ja = allocation_jacobian(&phi, model)?;
    let dja = allocation_jacobian_partials(&phi, model)?;
    let w = filtered_command(x, model);
    let kp = Matrix6::from_diagonal(&model.gains.kp);
    let kd = Matrix6::from_diagonal(&model.gains.kd);
    let lz = Matrix6::from_diagonal(&model.observer.zeta_rate());

    let mut d_q = -ja * kp;
    for (k, d) in dja.iter().enumerate() {
        let col = d_q.column(3 + k) + d * w;
        d_q.set_column(3 + k, &col);
    }
    let mut jac = ThrustJacobian::zeros();
    let blocks = [d_q, -ja * (kd + lz), ja * lz, ja, ja * kp, ja * kd];
    for (k, b) in blocks.iter().enumerate() {
        jac.fixed_view_mut::<6, 6>(0, 6 * k).copy_from(b);
    }
    Ok(jac)
}

/// Augmented-state rate `f(x) + g u + rho(x, d_tilde)` with `u = q_dd_d` and
/// `d_tilde = d - d_hat` the estimation error of the lumped disturbance.
pub fn closed_loop_rate(
    x: &AugmentedState,
    u: &Vector6,
    d_tilde: &Vector6,
    model: &ClosedLoopModel,
) -> Result<StateVector, Error> {
    let g = &model.gains;
    let lz = model.observer.zeta_rate();
    let lc = model.observer.chi_rate();
    let pd = g.kd.component_mul(&(x.q_d_dot() - x.q_dot())) + g.kp.component_mul(&(x.q_d() - x.q()));
    let zeta_err = lz.component_mul(&(x.zeta() - x.q_dot()));

    let mut q_ddot = pd;
    if d_tilde.iter().any(|v| *v != 0.0) {
        let m = mass_matrix(&x.phi(), &model.nominal)?;
        q_ddot += m.lu().solve(d_tilde).ok_or(Error::SingularAttitude { pitch: x.phi()[1] })?;
    } else {
        euler_rate_map(&x.phi())?;
    }
    let parts = [x.q_dot(), q_ddot, -zeta_err, lc.component_mul(&(pd + zeta_err)), x.q_d_dot(), *u];
    let mut out = StateVector::zeros();
    for (k, p) in parts.iter().enumerate() {
        out.fixed_rows_mut::<6>(6 * k).copy_from(p);
    }
    Ok(out)
}

/// Drift `f(x)` of the closed loop with a perfect disturbance estimate.
pub fn closed_loop_drift(x: &AugmentedState, model: &ClosedLoopModel) -> Result<StateVector, Error> {
    closed_loop_rate(x, &Vector6::zeros(), &Vector6::zeros(), model)
}

/// Barrier values and their Lie derivatives at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval {
    pub tau: GeneralizedWrench,
    pub thrust: ThrustVector,
    pub h: Vector6,
    /// `dh/dx`, row i for motor i.
    pub dh_dx: ThrustJacobian,
    pub lf: Vector6,
    /// `L_g h`, row i for motor i.
    pub lg: Matrix6,
}

pub fn lie_derivatives(
    x: &AugmentedState,
    model: &ClosedLoopModel,
    cfg: &BarrierConfig,
) -> Result<BarrierEval, Error> {
    let (tau, thrust) = commanded(x, model)?;
    let h = barrier_values(&thrust, cfg);
    let jac = thrust_state_jacobian(x, model)?;
    let mut dh_dx = jac;
    for i in 0..6 {
        let scale = -2.0 * (thrust.0[i] - cfg.midpoint());
        dh_dx.row_mut(i).scale_mut(scale);
    }
    let lf = dh_dx * closed_loop_drift(x, model)?;
    let lg = dh_dx.fixed_view::<6, 6>(0, 30).into_owned();
    Ok(BarrierEval { tau, thrust, h, dh_dx, lf, lg })
}

/// `beta_hat = k_beta h - xi`.
pub fn residual_estimate(h: &Vector6, res: &ResidualState, cfg: &BarrierConfig) -> Vector6 {
    cfg.k_beta.component_mul(h) - res.xi
}

/// `xi_dot = k_beta (L_f h + L_g h u + beta_hat)`.
pub fn residual_state_rate(
    eval: &BarrierEval,
    res: &ResidualState,
    u: &Vector6,
    cfg: &BarrierConfig,
) -> Vector6 {
    let beta_hat = residual_estimate(&eval.h, res, cfg);
    cfg.k_beta.component_mul(&(eval.lf + eval.lg * u + beta_hat))
}

/// Per-axis damping ratio, growing from `delta_min` toward `delta_max` with `|q_d - q_t|`.
pub fn damping_ratio(q_t: &Vector6, q_d: &Vector6, gen: &TargetGenConfig) -> Vector6 {
    Vector6::from_fn(|i, _| {
        let s = gen.k_dp * (q_d[i] - q_t[i]).abs();
        gen.delta_min + s / (1.0 + s) * (gen.delta_max - gen.delta_min)
    })
}

/// `q_dd_t = -2 k_a delta_v q_d_dot + k_a^2 (q_t - q_d)`, pulling `q_d` toward `q_t`.
pub fn target_acceleration(
    q_t: &Vector6,
    q_d: &Vector6,
    q_d_dot: &Vector6,
    gen: &TargetGenConfig,
) -> Vector6 {
    let delta = damping_ratio(q_t, q_d, gen);
    Vector6::from_fn(|i, _| {
        let k = gen.k_a[i];
        -2.0 * k * delta[i] * q_d_dot[i] + k * k * (q_t[i] - q_d[i])
    })
}

/// QP data: `min |u - u_t|^2  s.t.  a u <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterQp {
    pub a: Matrix6,
    pub b: Vector6,
    pub u_t: Vector6,
}

impl FilterQp {
    pub fn to_problem(&self) -> Result<QpProblem, QpError> {
        QpProblem::new(
            DVector::from_column_slice(self.u_t.as_slice()),
            DMatrix::from_column_slice(6, 6, self.a.as_slice()),
            DVector::from_column_slice(self.b.as_slice()),
        )
    }
}

/// `a = -L_g h`, `b = gamma h + L_f h + beta_hat - sigma`, `u_t = q_dd_t`.
pub fn assemble_qp(eval: &BarrierEval, beta_hat: &Vector6, q_dd_t: &Vector6, cfg: &BarrierConfig) -> FilterQp {
    FilterQp {
        a: -eval.lg,
        b: cfg.gamma.component_mul(&eval.h) + eval.lf + beta_hat - cfg.sigma,
        u_t: *q_dd_t,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// Filtered desired acceleration.
    pub q_dd_d: Vector6,
    /// Target-generator output before filtering.
    pub q_dd_t: Vector6,
    pub status: QpStatus,
    pub slack_norm: f64,
    pub beta_hat: Vector6,
    pub eval: BarrierEval,
}

/// Target acceleration followed by the barrier QP. An infeasible QP is replaced by
/// its slack relaxation (status `Relaxed`); if that also fails the target
/// acceleration passes through with status `Error`.
pub fn filter_step(
    x: &AugmentedState,
    res: &ResidualState,
    q_t: &Vector6,
    model: &ClosedLoopModel,
    cfg: &BarrierConfig,
    gen: &TargetGenConfig,
) -> Result<FilterOutput, Error> {
    let eval = lie_derivatives(x, model, cfg)?;
    let beta_hat = residual_estimate(&eval.h, res, cfg);
    let q_dd_t = target_acceleration(q_t, &x.q_d(), &x.q_d_dot(), gen);
    let qp = assemble_qp(&eval, &beta_hat, &q_dd_t, cfg);

    let solved = qp.to_problem().and_then(|p| match qp_solver::solve(&p, QP_TOLERANCE) {
        Err(QpError::Infeasible | QpError::MaxIterations) => {
            qp_solver::solve_relaxed(&p, QP_TOLERANCE, DEFAULT_SLACK_WEIGHT)
        }
        other => other,
    });
    let (q_dd_d, status, slack_norm) = match solved {
        Ok(s) => (Vector6::from_column_slice(s.u.as_slice()), s.status, s.slack_norm),
        Err(_) => (q_dd_t, QpStatus::Error, f64::NAN),
    };
    Ok(FilterOutput { q_dd_d, q_dd_t, status, slack_norm, beta_hat, eval })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::commanded_thrusts;
    use crate::dynamics::hover_thrust;
    use crate::observer::ObserverState;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> ClosedLoopModel {
        ClosedLoopModel::nominal()
    }

    fn hover_state(m: &ClosedLoopModel) -> AugmentedState {
        let q = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let obs = ObserverState::initialize(&q, &Vector6::zeros(), &m.nominal).unwrap();
        AugmentedState::from_parts(&q, &Vector6::zeros(), &obs.zeta, &obs.chi, &q, &Vector6::zeros())
    }

    fn vec6(range: f64) -> impl Strategy<Value = Vector6> {
        proptest::array::uniform6(-range..range).prop_map(|a| Vector6::from_row_slice(&a))
    }

    /// States around hover with |roll|, |pitch| <= 0.5.
    fn state() -> impl Strategy<Value = AugmentedState> {
        (vec6(1.0), vec6(0.5), vec6(0.5), vec6(1.0), vec6(0.5), vec6(0.5)).prop_map(|(p, v, z, c, qd, qdd)| {
            let m = model();
            let mut q = p;
            q[3] *= 0.5;
            q[4] *= 0.5;
            let hover = hover_state(&m);
            AugmentedState::from_parts(&q, &v, &(v + z), &(hover.chi() + c), &(q + qd * 0.2), &qdd)
        })
    }

    fn fd_jacobian(x: &AugmentedState, m: &ClosedLoopModel, step: f64) -> ThrustJacobian {
        let mut jac = ThrustJacobian::zeros();
        for j in 0..36 {
            let (mut xp, mut xm) = (*x, *x);
            xp.0[j] += step;
            xm.0[j] -= step;
            let tp = commanded_thrusts(&xp, m).unwrap().0;
            let tm = commanded_thrusts(&xm, m).unwrap().0;
            jac.set_column(j, &((tp - tm) / (2.0 * step)));
        }
        jac
    }

    fn relative_error(a: &ThrustJacobian, b: &ThrustJacobian) -> f64 {
        (a - b).amax() / b.amax()
    }

    #[test]
    fn barrier_value_examples() {
        let cfg = BarrierConfig::nominal();
        let h = barrier_values(&ThrustVector(Vector6::new(8.0, 1.0, 15.0, 16.0, 0.0, 4.0)), &cfg);
        assert_eq!(h[0], 49.0);
        assert_eq!(h[1], 0.0);
        assert_eq!(h[2], 0.0);
        assert_eq!(h[3], -15.0);
        assert_eq!(h[4], -15.0);
        assert_eq!(h[5], 33.0);
    }

    #[test]
    fn augmented_state_blocks_round_trip() {
        let parts: [Vector6; 6] = core::array::from_fn(|k| Vector6::repeat(k as f64));
        let x = AugmentedState::from_parts(&parts[0], &parts[1], &parts[2], &parts[3], &parts[4], &parts[5]);
        assert_eq!(
            [x.q(), x.q_dot(), x.zeta(), x.chi(), x.q_d(), x.q_d_dot()],
            parts
        );
    }

    #[test]
    fn desired_rate_block_is_ja_kd() {
        let m = model();
        let x = hover_state(&m);
        let jac = thrust_state_jacobian(&x, &m).unwrap();
        let ja = allocation_jacobian(&x.phi(), &m).unwrap();
        assert_eq!(jac.fixed_view::<6, 6>(0, 30).into_owned(), ja * Matrix6::from_diagonal(&m.gains.kd));
    }

    #[test]
    fn jacobian_matches_finite_differences_at_hover() {
        let m = model();
        let x = hover_state(&m);
        let jac = thrust_state_jacobian(&x, &m).unwrap();
        assert!(relative_error(&jac, &fd_jacobian(&x, &m, 1e-6)) < 1e-4);
    }

    #[test]
    fn translational_columns_are_proportional_only() {
        let m = model();
        let mut x = hover_state(&m);
        x.0[3] = 0.3;
        x.0[4] = -0.2;
        x.0[5] = 1.0;
        let jac = thrust_state_jacobian(&x, &m).unwrap();
        let ja = allocation_jacobian(&x.phi(), &m).unwrap();
        let expected = -ja * Matrix6::from_diagonal(&m.gains.kp);
        assert_eq!(jac.fixed_view::<6, 3>(0, 0).into_owned(), expected.fixed_view::<6, 3>(0, 0).into_owned());
    }

    #[test]
    fn hover_thrusts_through_ja() {
        let m = model();
        let x = hover_state(&m);
        let t = allocation_jacobian(&x.phi(), &m).unwrap() * filtered_command(&x, &m);
        for ti in t.iter() {
            assert_relative_eq!(*ti, hover_thrust(&m.nominal), epsilon = 1e-10);
        }
    }

    #[test]
    fn midpoint_thrust_zeroes_lie_rows() {
        // Scale chi so every motor sits exactly at the midpoint thrust.
        let m = model();
        let cfg = BarrierConfig::nominal();
        let mut x = hover_state(&m);
        let chi = x.chi() * (cfg.midpoint() / hover_thrust(&m.nominal));
        x.0.fixed_rows_mut::<6>(18).copy_from(&chi);
        x.0[7] = 0.3;
        let eval = lie_derivatives(&x, &m, &cfg).unwrap();
        // Translational velocity perturbs the thrusts, so only check motors still at the midpoint.
        x.0[7] = 0.0;
        let eval0 = lie_derivatives(&x, &m, &cfg).unwrap();
        for i in 0..6 {
            assert_relative_eq!(eval0.thrust.0[i], 8.0, epsilon = 1e-12);
            assert!(eval0.lf[i].abs() < 1e-9);
            assert!(eval0.lg.row(i).amax() < 1e-9);
        }
        assert!(eval.lg.amax() > 0.0);
    }

    #[test]
    fn drift_structural_zero() {
        let m = model();
        let q = Vector6::new(0.1, -0.2, 1.0, 0.1, 0.05, 0.3);
        let v = Vector6::new(0.2, 0.1, -0.1, 0.05, 0.0, -0.1);
        let x = AugmentedState::from_parts(&q, &v, &v, &Vector6::repeat(2.0), &q, &v);
        let f = closed_loop_drift(&x, &m).unwrap();
        assert_eq!(f.fixed_rows::<18>(6).into_owned(), SVector::<f64, 18>::zeros());
        assert_eq!(f.fixed_rows::<6>(0).into_owned(), v);
        assert_eq!(f.fixed_rows::<6>(24).into_owned(), v);
        assert_eq!(f.fixed_rows::<6>(30).into_owned(), Vector6::zeros());
    }

    #[test]
    fn residual_examples() {
        let cfg = BarrierConfig::nominal();
        let h = Vector6::repeat(49.0);
        let res = ResidualState::initialize(&h, &cfg);
        assert_eq!(residual_estimate(&h, &res, &cfg), Vector6::zeros());
        let res = ResidualState { xi: Vector6::repeat(400.0) };
        assert_relative_eq!(residual_estimate(&h, &res, &cfg)[0], 94.9, epsilon = 1e-12);
    }

    #[test]
    fn residual_rate_examples() {
        let m = model();
        let mut cfg = BarrierConfig::nominal();
        let eval = lie_derivatives(&hover_state(&m), &m, &cfg).unwrap();
        let res = ResidualState::initialize(&eval.h, &cfg);
        // At hover every Lie derivative vanishes.
        let rate = residual_state_rate(&eval, &res, &Vector6::zeros(), &cfg);
        assert!(rate.amax() < 1e-9);
        cfg.k_beta = Vector6::zeros();
        let moved = ResidualState { xi: Vector6::repeat(3.0) };
        assert_eq!(residual_state_rate(&eval, &moved, &Vector6::repeat(1.0), &cfg), Vector6::zeros());
    }

    #[test]
    fn target_acceleration_examples() {
        let gen = TargetGenConfig::nominal();
        let q = Vector6::new(0.3, 0.0, 1.0, 0.0, 0.0, 0.2);
        assert_eq!(target_acceleration(&q, &q, &Vector6::zeros(), &gen), Vector6::zeros());

        let gen = TargetGenConfig { k_a: Vector6::repeat(1.0), delta_min: 1.0, delta_max: 5.0, k_dp: 0.5 };
        let q_t = Vector6::repeat(2.0);
        let q_d = Vector6::zeros();
        assert_relative_eq!(damping_ratio(&q_t, &q_d, &gen)[0], 3.0, epsilon = 1e-15);
        // Damping term -2 * 1 * 3 * 1 = -6, stiffness term +1 * 2 toward the target.
        let a = target_acceleration(&q_t, &q_d, &Vector6::repeat(1.0), &gen);
        assert_relative_eq!(a[0], -4.0, epsilon = 1e-15);
    }

    #[test]
    fn damping_ratio_is_monotone_and_bounded() {
        let gen = TargetGenConfig { k_dp: 5.0, ..TargetGenConfig::nominal() };
        let mut prev = 0.0;
        for k in 0..=2000 {
            let gap = k as f64 * 0.01;
            let d = damping_ratio(&Vector6::repeat(gap), &Vector6::zeros(), &gen)[0];
            assert!(d >= prev);
            assert!((gen.delta_min..=gen.delta_max).contains(&d));
            prev = d;
        }
        let far = damping_ratio(&Vector6::repeat(1e6), &Vector6::zeros(), &gen)[0];
        assert!(prev < far && gen.delta_max - far < 1e-5);
    }

    #[test]
    fn midpoint_qp_is_unconstrained() {
        let cfg = BarrierConfig::nominal();
        let eval = BarrierEval {
            tau: GeneralizedWrench::zero(),
            thrust: ThrustVector(Vector6::repeat(8.0)),
            h: Vector6::repeat(49.0),
            dh_dx: ThrustJacobian::zeros(),
            lf: Vector6::zeros(),
            lg: Matrix6::zeros(),
        };
        let beta_hat = Vector6::repeat(2.0);
        let qp = assemble_qp(&eval, &beta_hat, &Vector6::repeat(1.0), &cfg);
        assert_eq!(qp.a, Matrix6::zeros());
        assert_eq!(qp.b, Vector6::repeat(10.0 * 49.0 + 2.0 - 15.0));
    }

    #[test]
    fn hover_filter_passes_target_through() {
        let m = model();
        let cfg = BarrierConfig::nominal();
        let x = hover_state(&m);
        let eval = lie_derivatives(&x, &m, &cfg).unwrap();
        let res = ResidualState::initialize(&eval.h, &cfg);
        let out = filter_step(&x, &res, &x.q(), &m, &cfg, &TargetGenConfig::nominal()).unwrap();
        assert_eq!(out.status, QpStatus::Optimal);
        assert!(out.q_dd_d.amax() < 1e-12);
        assert!(out.q_dd_t.amax() < 1e-12);
    }

    #[test]
    fn inactive_constraints_return_target() {
        let m = model();
        let cfg = BarrierConfig::nominal();
        let x = hover_state(&m);
        let eval = lie_derivatives(&x, &m, &cfg).unwrap();
        let res = ResidualState::initialize(&eval.h, &cfg);
        let mut q_t = x.q();
        q_t[0] += 0.05;
        let out = filter_step(&x, &res, &q_t, &m, &cfg, &TargetGenConfig::nominal()).unwrap();
        assert_eq!(out.status, QpStatus::Optimal);
        assert!((out.q_dd_d - out.q_dd_t).amax() < 1e-9);
    }

    fn rk4(x: &AugmentedState, u: &Vector6, m: &ClosedLoopModel, dt: f64) -> AugmentedState {
        let z = Vector6::zeros();
        let f = |s: &StateVector| closed_loop_rate(&AugmentedState(*s), u, &z, m).unwrap();
        let k1 = f(&x.0);
        let k2 = f(&(x.0 + k1 * (dt / 2.0)));
        let k3 = f(&(x.0 + k2 * (dt / 2.0)));
        let k4 = f(&(x.0 + k3 * dt));
        AugmentedState(x.0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
    }

    #[test]
    fn pushing_along_a_row_lowers_its_barrier() {
        let m = model();
        let cfg = BarrierConfig::nominal();
        // A strong upward and forward error drives some motors toward the upper bound.
        let mut x = hover_state(&m);
        x.0[26] += 0.8;
        x.0[24] += 0.3;
        x.0[7] = -0.5;
        let eval = lie_derivatives(&x, &m, &cfg).unwrap();
        let i = eval.thrust.0.map(|t| (t - cfg.midpoint()).abs()).imax();
        assert!(eval.thrust.0[i] > 10.0);
        let qp = assemble_qp(&eval, &Vector6::zeros(), &Vector6::zeros(), &cfg);
        let dir = qp.a.row(i).transpose().normalize() * 5.0;
        let dt = 1e-3;
        let h_free = barrier_values(&commanded_thrusts(&rk4(&x, &Vector6::zeros(), &m, dt), &m).unwrap(), &cfg);
        let h_push = barrier_values(&commanded_thrusts(&rk4(&x, &dir, &m, dt), &m).unwrap(), &cfg);
        assert!(h_push[i] < h_free[i]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jacobian_matches_finite_differences(x in state()) {
            let m = model();
            let jac = thrust_state_jacobian(&x, &m).unwrap();
            prop_assert!(relative_error(&jac, &fd_jacobian(&x, &m, 1e-6)) < 1e-4);
        }

        #[test]
        fn lie_derivatives_match_independent_assembly(x in state()) {
            let m = model();
            let cfg = BarrierConfig::nominal();
            let eval = lie_derivatives(&x, &m, &cfg).unwrap();
            let fd = fd_jacobian(&x, &m, 1e-6);
            let f = closed_loop_drift(&x, &m).unwrap();
            for i in 0..6 {
                let c = -2.0 * (eval.thrust.0[i] - 8.0);
                let lf = c * fd.row(i).dot(&f.transpose());
                let lg = fd.fixed_view::<1, 6>(i, 30) * c;
                let scale = eval.lf.amax().max(1.0);
                prop_assert!((lf - eval.lf[i]).abs() / scale < 1e-4);
                prop_assert!((lg - eval.lg.row(i)).amax() / eval.lg.amax().max(1.0) < 1e-4);
            }
        }

        #[test]
        fn lie_derivatives_predict_barrier_rate(x in state(), u in vec6(2.0)) {
            let m = model();
            let cfg = BarrierConfig::nominal();
            let eval = lie_derivatives(&x, &m, &cfg).unwrap();
            let predicted = eval.lf + eval.lg * u;
            let dt = 1e-4;
            let back = rk4(&x, &u, &m, -dt);
            let fwd = rk4(&x, &u, &m, dt);
            let hp = barrier_values(&commanded_thrusts(&fwd, &m).unwrap(), &cfg);
            let hm = barrier_values(&commanded_thrusts(&back, &m).unwrap(), &cfg);
            let measured = (hp - hm) / (2.0 * dt);
            let scale = predicted.amax().max(1.0);
            prop_assert!((measured - predicted).amax() / scale < 1e-3);
        }

        #[test]
        fn qp_rhs_matches_printed_definition(x in state(), xi in vec6(50.0), u_t in vec6(3.0)) {
            let m = model();
            let cfg = BarrierConfig::nominal();
            let eval = lie_derivatives(&x, &m, &cfg).unwrap();
            let res = ResidualState { xi };
            let beta_hat = residual_estimate(&eval.h, &res, &cfg);
            let qp = assemble_qp(&eval, &beta_hat, &u_t, &cfg);
            for i in 0..6 {
                let b_hat = cfg.gamma[i] * eval.h[i] + eval.lf[i] + (cfg.k_beta[i] * eval.h[i] - xi[i]);
                prop_assert!((qp.b[i] - (b_hat - cfg.sigma[i])).abs() <= 1e-9 * b_hat.abs().max(1.0));
                prop_assert_eq!(qp.a.row(i).into_owned(), -eval.lg.row(i).into_owned());
            }
            prop_assert_eq!(qp.u_t, u_t);
        }

        #[test]
        fn filtered_acceleration_satisfies_constraints(x in state(), q_t in vec6(1.0)) {
            let m = model();
            let cfg = BarrierConfig::nominal();
            let eval = lie_derivatives(&x, &m, &cfg).unwrap();
            let res = ResidualState::initialize(&eval.h, &cfg);
            let out = filter_step(&x, &res, &(x.q() + q_t), &m, &cfg, &TargetGenConfig::nominal()).unwrap();
            if out.status == QpStatus::Optimal {
                let qp = assemble_qp(&out.eval, &out.beta_hat, &out.q_dd_t, &cfg);
                let slack = qp.a * out.q_dd_d - qp.b;
                prop_assert!(slack.max() <= 1e-6 * qp.b.amax().max(1.0));
            }
        }
    }
}
