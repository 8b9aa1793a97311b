//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use aphi_core::controller::{commanded_thrusts, ClosedLoopModel};
use aphi_core::observer::ObserverState;
use aphi_core::qp_solver::QpProblem;
use aphi_core::safety_filter::{
    barrier_values, closed_loop_rate, AugmentedState, BarrierConfig, StateVector, ThrustJacobian,
};
use aphi_core::{Matrix6, Vector6};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform6(rng: &mut ChaCha8Rng, range: f64) -> Vector6 {
    Vector6::from_fn(|_, _| rng.random_range(-range..range))
}

/// `n = m = 6` instance whose feasible set contains a random interior-or-boundary point.
/// The target is spread wide so that most instances have active constraints.
pub fn random_feasible_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let (n, m) = (6, 6);
    let a = DMatrix::from_fn(m, n, |_, _| gaussian(rng));
    let anchor = DVector::from_fn(n, |_, _| gaussian(rng));
    let margin = DVector::from_fn(m, |_, _| if rng.random_bool(0.3) { 0.0 } else { gaussian(rng).abs() });
    let b = &a * anchor + margin;
    let target = DVector::from_fn(n, |_, _| 3.0 * gaussian(rng));
    QpProblem::new(target, a, b).unwrap()
}

/// Possibly infeasible instance with more constraints than variables.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let a = DMatrix::from_fn(m, n, |_, _| gaussian(rng));
    let b = DVector::from_fn(m, |_, _| gaussian(rng));
    let target = DVector::from_fn(n, |_, _| 2.0 * gaussian(rng));
    QpProblem::new(target, a, b).unwrap()
}

/// Brute-force solution by enumerating every candidate active set: for each subset,
/// project the target onto the affine set where those rows are tight and keep the
/// feasible candidate closest to the target. `None` when no candidate is feasible,
/// which means the polyhedron is empty.
pub fn enumerate_qp(p: &QpProblem, feas_tol: f64) -> Option<(DVector<f64>, f64)> {
    let m = p.num_constraints();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let u = if rows.is_empty() {
            p.target.clone()
        } else {
            let a_s = DMatrix::from_fn(rows.len(), p.num_vars(), |r, c| p.a[(rows[r], c)]);
            let b_s = DVector::from_fn(rows.len(), |r, _| p.b[rows[r]]);
            let gram = &a_s * a_s.transpose();
            let Some(lambda) = gram.lu().solve(&(&a_s * &p.target - b_s)) else {
                continue;
            };
            &p.target - a_s.transpose() * lambda
        };
        if p.max_violation(&u) > feas_tol {
            continue;
        }
        let obj = p.objective(&u);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((u, obj));
        }
    }
    best
}

/// Closed-loop model of the nominal vehicle with the experimental gains.
pub fn model() -> ClosedLoopModel {
    ClosedLoopModel::nominal()
}

pub fn hover_state(m: &ClosedLoopModel) -> AugmentedState {
    let q = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
    let obs = ObserverState::initialize(&q, &Vector6::zeros(), &m.nominal).unwrap();
    AugmentedState::from_parts(&q, &Vector6::zeros(), &obs.zeta, &obs.chi, &q, &Vector6::zeros())
}

/// Random state around hover with |roll|, |pitch| <= 0.5 rad and tracking errors
/// large enough to move the thrusts well away from the hover value.
pub fn random_state(rng: &mut ChaCha8Rng, m: &ClosedLoopModel) -> AugmentedState {
    let mut q = uniform6(rng, 1.0);
    q[3] *= 0.5;
    q[4] *= 0.5;
    let v = uniform6(rng, 0.5);
    let zeta = v + uniform6(rng, 0.5);
    let chi = hover_state(m).chi() + uniform6(rng, 1.0);
    let q_d = q + uniform6(rng, 0.1);
    let q_d_dot = uniform6(rng, 0.5);
    AugmentedState::from_parts(&q, &v, &zeta, &chi, &q_d, &q_d_dot)
}

pub fn barrier(x: &AugmentedState, m: &ClosedLoopModel, cfg: &BarrierConfig) -> Vector6 {
    barrier_values(&commanded_thrusts(x, m).unwrap(), cfg)
}

/// Central differences of the commanded thrusts in every state coordinate.
pub fn fd_thrust_jacobian(x: &AugmentedState, m: &ClosedLoopModel, step: f64) -> ThrustJacobian {
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

/// Directional derivative of `h` along `dir`, by central differences.
pub fn fd_directional(
    x: &AugmentedState,
    dir: &StateVector,
    m: &ClosedLoopModel,
    cfg: &BarrierConfig,
    step: f64,
) -> Vector6 {
    let s = step / dir.amax().max(1.0);
    let hp = barrier(&AugmentedState(x.0 + dir * s), m, cfg);
    let hm = barrier(&AugmentedState(x.0 - dir * s), m, cfg);
    (hp - hm) / (2.0 * s)
}

/// `L_f h` and `L_g h` from finite differences of `h` only: the drift direction is
/// the closed-loop rate with zero input, and the columns of `g` are unit vectors
/// in the `q_d_dot` block.
pub fn fd_lie(x: &AugmentedState, m: &ClosedLoopModel, cfg: &BarrierConfig, step: f64) -> (Vector6, Matrix6) {
    let f = closed_loop_rate(x, &Vector6::zeros(), &Vector6::zeros(), m).unwrap();
    let lf = fd_directional(x, &f, m, cfg, step);
    let mut lg = Matrix6::zeros();
    for j in 0..6 {
        let mut e = StateVector::zeros();
        e[30 + j] = 1.0;
        lg.set_column(j, &fd_directional(x, &e, m, cfg, step));
    }
    (lf, lg)
}

/// One classic RK4 step of the closed loop with held input.
pub fn rk4(x: &AugmentedState, u: &Vector6, d: &Vector6, m: &ClosedLoopModel, dt: f64) -> AugmentedState {
    let f = |y: &StateVector| closed_loop_rate(&AugmentedState(*y), u, d, m).unwrap();
    let k1 = f(&x.0);
    let k2 = f(&(x.0 + k1 * (dt / 2.0)));
    let k3 = f(&(x.0 + k2 * (dt / 2.0)));
    let k4 = f(&(x.0 + k3 * dt));
    AugmentedState(x.0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// `dh/dt` at `x` from `h` sampled one small step forward and backward along the
/// simulated trajectory.
pub fn trajectory_hdot(
    x: &AugmentedState,
    u: &Vector6,
    d: &Vector6,
    m: &ClosedLoopModel,
    cfg: &BarrierConfig,
    dt: f64,
) -> Vector6 {
    let hp = barrier(&rk4(x, u, d, m, dt), m, cfg);
    let hm = barrier(&rk4(x, u, d, m, -dt), m, cfg);
    (hp - hm) / (2.0 * dt)
}

/// Norm-wise relative error `max|a - b| / max|b|`.
pub fn relative_error<R: nalgebra::Dim, C: nalgebra::Dim, S1, S2>(
    a: &nalgebra::Matrix<f64, R, C, S1>,
    b: &nalgebra::Matrix<f64, R, C, S2>,
) -> f64
where
    S1: nalgebra::RawStorage<f64, R, C>,
    S2: nalgebra::RawStorage<f64, R, C>,
{
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        diff = diff.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
