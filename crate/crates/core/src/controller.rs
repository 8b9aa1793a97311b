//! DOB-based tracking law and the two comparison baselines.

use core::fmt;
use core::str::FromStr;

use crate::dynamics::{
    coriolis_vector, gravity_vector, mass_matrix, wrench_to_thrust, Allocation, GeneralizedWrench,
    ThrustVector, VehicleParams,
};
use crate::error::{invalid, Error};
use crate::observer::{disturbance_estimate, ObserverGains, ObserverState};
use crate::safety_filter::AugmentedState;
use crate::{Vector3, Vector6};

/// Diagonal PD gains acting on `e = q_d - q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp: Vector6,
    pub kd: Vector6,
}

impl ControllerGains {
    /// Experimental gains: Kp = diag(6, 6, 8, 70, 70, 55), Kd = diag(4, 4, 5, 30, 30, 15).
    pub fn nominal() -> Self {
        Self {
            kp: Vector6::new(6.0, 6.0, 8.0, 70.0, 70.0, 55.0),
            kd: Vector6::new(4.0, 4.0, 5.0, 30.0, 30.0, 15.0),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.kp.iter().all(|k| *k > 0.0 && k.is_finite()) {
            return Err(invalid("ControllerGains: kp entries must be > 0"));
        }
        if !self.kd.iter().all(|k| *k > 0.0 && k.is_finite()) {
            return Err(invalid("ControllerGains: kd entries must be > 0"));
        }
        Ok(())
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Which controller runs in closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerVariant {
    /// Target generator drives `q_d` directly, no QP.
    NoFilter,
    /// Track the raw target and clamp the resulting thrusts.
    DirectClamp,
    /// Target generator followed by the thrust-barrier QP.
    SafetyFilter,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 3] = [Self::NoFilter, Self::DirectClamp, Self::SafetyFilter];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoFilter => "no_filter",
            Self::DirectClamp => "direct_clamp",
            Self::SafetyFilter => "safety_filter",
        }
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerVariant {
    type Err = Error;

    /// Accepts both the long names and the CLI short forms `none`, `clamp`, `filter`.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "no_filter" | "none" => Ok(Self::NoFilter),
            "direct_clamp" | "clamp" => Ok(Self::DirectClamp),
            "safety_filter" | "filter" => Ok(Self::SafetyFilter),
            other => Err(invalid(alloc::format!(
                "ControllerVariant: unknown controller '{other}' (expected none, clamp or filter)"
            ))),
        }
    }
}

/// Everything the controller knows about the vehicle: nominal parameters, the
/// allocation built from them, and the controller and observer gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopModel {
    pub nominal: VehicleParams,
    pub allocation: Allocation,
    pub gains: ControllerGains,
    pub observer: ObserverGains,
}

impl ClosedLoopModel {
    pub fn new(
        nominal: VehicleParams,
        gains: ControllerGains,
        observer: ObserverGains,
    ) -> Result<Self, Error> {
        nominal.validate()?;
        gains.validate()?;
        observer.validate()?;
        Ok(Self {
            allocation: Allocation::new(&nominal)?,
            nominal,
            gains,
            observer,
        })
    }

    /// Nominal parameters with the experimental gains.
    pub fn nominal() -> Self {
        Self::new(VehicleParams::nominal(), ControllerGains::nominal(), ObserverGains::nominal())
            .expect("built-in parameters are valid")
    }
}

fn attitude(v: &Vector6) -> Vector3 {
    v.fixed_rows::<3>(3).into_owned()
}

/// `tau = M_hat (Kd e_dot + Kp e) + C_hat + G_hat - d_hat`.
pub fn control_wrench(
    q: &Vector6,
    q_dot: &Vector6,
    q_d: &Vector6,
    q_d_dot: &Vector6,
    d_hat: &GeneralizedWrench,
    nominal: &VehicleParams,
    gains: &ControllerGains,
) -> Result<GeneralizedWrench, Error> {
    let phi = attitude(q);
    let m = mass_matrix(&phi, nominal)?;
    let c = coriolis_vector(&phi, &attitude(q_dot), nominal)?;
    let e = q_d - q;
    let e_dot = q_d_dot - q_dot;
    let accel = gains.kd.component_mul(&e_dot) + gains.kp.component_mul(&e);
    Ok(GeneralizedWrench(m * accel + c + gravity_vector(nominal) - d_hat.0))
}

/// Thrusts commanded at augmented state `x`: observer estimate, control wrench,
/// then inverse allocation.
pub fn commanded_thrusts(x: &AugmentedState, model: &ClosedLoopModel) -> Result<ThrustVector, Error> {
    Ok(commanded(x, model)?.1)
}

/// Control wrench and thrusts at `x`.
pub(crate) fn commanded(
    x: &AugmentedState,
    model: &ClosedLoopModel,
) -> Result<(GeneralizedWrench, ThrustVector), Error> {
    let (q, q_dot) = (x.q(), x.q_dot());
    let obs = ObserverState::new(x.zeta(), x.chi());
    let d_hat = disturbance_estimate(&obs, &q, &q_dot, &model.nominal, &model.observer)?;
    let tau = control_wrench(&q, &q_dot, &x.q_d(), &x.q_d_dot(), &d_hat, &model.nominal, &model.gains)?;
    let thrust = wrench_to_thrust(&tau, &attitude(&q), &model.allocation)?;
    Ok((tau, thrust))
}

/// Output of [`baseline_direct_clamp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedThrust {
    /// Before clamping.
    pub raw: ThrustVector,
    /// Elementwise clamp of `raw` into `[t_min, t_max]`.
    pub clamped: ThrustVector,
}

/// Second baseline: track the raw target `q_t` with zero desired velocity and clamp
/// each motor thrust into `[t_min, t_max]`.
pub fn baseline_direct_clamp(
    q: &Vector6,
    q_dot: &Vector6,
    q_t: &Vector6,
    d_hat: &GeneralizedWrench,
    model: &ClosedLoopModel,
    t_min: f64,
    t_max: f64,
) -> Result<ClampedThrust, Error> {
    let tau = control_wrench(q, q_dot, q_t, &Vector6::zeros(), d_hat, &model.nominal, &model.gains)?;
    let raw = wrench_to_thrust(&tau, &attitude(q), &model.allocation)?;
    Ok(ClampedThrust { raw, clamped: raw.clamped(t_min, t_max) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hover_thrust, thrust_to_wrench};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> ClosedLoopModel {
        ClosedLoopModel::nominal()
    }

    #[test]
    fn hover_wrench_is_gravity() {
        let m = model();
        let q = Vector6::zeros();
        let z = Vector6::zeros();
        let tau = control_wrench(&q, &z, &q, &z, &GeneralizedWrench::zero(), &m.nominal, &m.gains).unwrap();
        assert_relative_eq!(tau.0, Vector6::new(0.0, 0.0, 34.335, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn proportional_term_substitution() {
        let m = model();
        let z = Vector6::zeros();
        let tau =
            control_wrench(&z, &z, &Vector6::x(), &z, &GeneralizedWrench::zero(), &m.nominal, &m.gains).unwrap();
        assert_relative_eq!(tau.0[0], 21.0, epsilon = 1e-12);
    }

    #[test]
    fn hover_thrusts_from_augmented_state() {
        let m = model();
        let q = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let obs = ObserverState::initialize(&q, &Vector6::zeros(), &m.nominal).unwrap();
        let x = AugmentedState::from_parts(&q, &Vector6::zeros(), &obs.zeta, &obs.chi, &q, &Vector6::zeros());
        let t = commanded_thrusts(&x, &m).unwrap();
        for i in 0..6 {
            assert_relative_eq!(t.0[i], hover_thrust(&m.nominal), epsilon = 1e-10);
            assert_relative_eq!(t.0[i], 5.9243, epsilon = 1e-4);
        }
    }

    #[test]
    fn gravity_estimate_cancels_everything() {
        let m = model();
        let z = Vector6::zeros();
        let d_hat = GeneralizedWrench(gravity_vector(&m.nominal));
        let tau = control_wrench(&z, &z, &z, &z, &d_hat, &m.nominal, &m.gains).unwrap();
        assert_eq!(tau.0, Vector6::zeros());
        let t = wrench_to_thrust(&tau, &Vector3::zeros(), &m.allocation).unwrap();
        assert_eq!(t.0, Vector6::zeros());
    }

    #[test]
    fn clamp_is_identity_inside_bounds() {
        let m = model();
        let z = Vector6::zeros();
        let out = baseline_direct_clamp(&z, &z, &z, &GeneralizedWrench::zero(), &m, 1.0, 15.0).unwrap();
        assert_eq!(out.raw, out.clamped);
    }

    #[test]
    fn clamp_saturates_both_ends() {
        let t = ThrustVector(Vector6::new(20.0, 0.2, 5.0, 5.0, 5.0, 5.0)).clamped(1.0, 15.0);
        assert_eq!(t.0[0], 15.0);
        assert_eq!(t.0[1], 1.0);
        assert_eq!(t.0[2], 5.0);
    }

    #[test]
    fn variant_names_parse() {
        for v in ControllerVariant::ALL {
            assert_eq!(v.as_str().parse::<ControllerVariant>().unwrap(), v);
        }
        assert_eq!("none".parse::<ControllerVariant>().unwrap(), ControllerVariant::NoFilter);
        assert_eq!("clamp".parse::<ControllerVariant>().unwrap(), ControllerVariant::DirectClamp);
        assert_eq!("filter".parse::<ControllerVariant>().unwrap(), ControllerVariant::SafetyFilter);
        assert!("pid".parse::<ControllerVariant>().is_err());
    }

    fn vec6(range: f64) -> impl Strategy<Value = Vector6> {
        proptest::array::uniform6(-range..range).prop_map(|a| Vector6::from_row_slice(&a))
    }

    fn pose() -> impl Strategy<Value = Vector6> {
        (vec6(2.0), vec6(0.4)).prop_map(|(p, a)| {
            let mut q = p;
            q.fixed_rows_mut::<3>(3).copy_from(&a.fixed_rows::<3>(0));
            q
        })
    }

    proptest! {
        #[test]
        fn wrench_matches_independent_expression(
            q in pose(), q_dot in vec6(1.0), q_d in vec6(1.0), q_d_dot in vec6(1.0), d in vec6(5.0)
        ) {
            let m = model();
            let tau = control_wrench(&q, &q_dot, &q_d, &q_d_dot, &GeneralizedWrench(d), &m.nominal, &m.gains).unwrap();

            // Written out block by block.
            let (roll, pitch) = (q[3], q[4]);
            let (sr, cr, sp, cp) = (roll.sin(), roll.cos(), pitch.sin(), pitch.cos());
            let qm = crate::Matrix3::new(1.0, 0.0, -sp, 0.0, cr, sr * cp, 0.0, -sr, cr * cp);
            let j = m.nominal.inertia;
            let rd = q_dot.fixed_rows::<3>(3).into_owned();
            let qdot_m = crate::Matrix3::new(
                0.0, 0.0, -cp * rd[1],
                0.0, -sr * rd[0], cr * cp * rd[0] - sr * sp * rd[1],
                0.0, -cr * rd[0], -sr * cp * rd[0] - cr * sp * rd[1],
            );
            let mut expected = Vector6::zeros();
            for i in 0..3 {
                let a = m.gains.kd[i] * (q_d_dot[i] - q_dot[i]) + m.gains.kp[i] * (q_d[i] - q[i]);
                expected[i] = m.nominal.mass * a - d[i];
            }
            expected[2] += m.nominal.mass * m.nominal.gravity;
            let a_rot = crate::Vector3::from_fn(|i, _| {
                m.gains.kd[i + 3] * (q_d_dot[i + 3] - q_dot[i + 3]) + m.gains.kp[i + 3] * (q_d[i + 3] - q[i + 3])
            });
            let w = qm * rd;
            let rot = qm.transpose() * j * qm * a_rot + qm.transpose() * (j * qdot_m * rd + w.cross(&(j * w)));
            for i in 0..3 {
                expected[i + 3] = rot[i] - d[i + 3];
            }
            prop_assert!((tau.0 - expected).amax() < 1e-10);
        }

        #[test]
        fn wrench_is_affine_in_errors_and_estimate(
            q in pose(), q_dot in vec6(1.0), e1 in vec6(1.0), e2 in vec6(1.0), d1 in vec6(3.0), d2 in vec6(3.0),
            s in -2.0..2.0f64,
        ) {
            let m = model();
            let zero = Vector6::zeros();
            let f = |e: &Vector6, d: &Vector6| {
                control_wrench(&q, &q_dot, &(q + e), &(q_dot + e), &GeneralizedWrench(*d), &m.nominal, &m.gains).unwrap().0
            };
            let base = f(&zero, &zero);
            let combined = f(&(e1 + e2 * s), &(d1 + d2 * s)) - base;
            let parts = (f(&e1, &d1) - base) + (f(&e2, &d2) - base) * s;
            prop_assert!((combined - parts).amax() < 1e-9);
        }

        #[test]
        fn commanded_thrusts_reproduce_wrench(
            q in pose(), q_dot in vec6(1.0), zeta in vec6(1.0), chi in vec6(3.0), q_d in vec6(1.0), q_d_dot in vec6(1.0)
        ) {
            let m = model();
            let x = AugmentedState::from_parts(&q, &q_dot, &zeta, &chi, &q_d, &q_d_dot);
            let (tau, t) = commanded(&x, &m).unwrap();
            let back = thrust_to_wrench(&t, &x.phi(), &m.allocation).unwrap();
            prop_assert!((back.0 - tau.0).amax() < 1e-10);
        }

        #[test]
        fn direct_clamp_stays_in_bounds(q in pose(), q_dot in vec6(2.0), q_t in vec6(3.0), d in vec6(20.0)) {
            let m = model();
            let out = baseline_direct_clamp(&q, &q_dot, &q_t, &GeneralizedWrench(d), &m, 1.0, 15.0).unwrap();
            prop_assert!(out.clamped.0.iter().all(|t| (1.0..=15.0).contains(t)));
        }
    }
}
