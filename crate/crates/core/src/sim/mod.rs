//! Fixed-step closed-loop simulator.
//!
//! Each step reads the target, runs the controller variant once (safety filter,
//! plain target generator, or direct clamp), then integrates plant, observer,
//! residual estimator, desired trajectory and cart jointly with classical RK4.
//! Environment forces are evaluated at every RK4 stage; plug breakaway and the
//! wind noise sample are updated at step boundaries only.

pub mod log;
pub mod metrics;
pub mod scenario;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::SVector;

pub use self::log::{LogRow, SimLog, StepStatus};
pub use self::metrics::{metrics, MetricsReport};
pub use self::scenario::{home_pose, PlantMismatch, Scenario, TargetSchedule, PRESETS};

use crate::controller::{baseline_direct_clamp, ClosedLoopModel, ControllerVariant};
use crate::dynamics::{
    coriolis_vector, forward_dynamics, gravity_vector, mass_matrix, thrust_to_wrench, Allocation, PlantState,
    ThrustVector, VehicleParams,
};
use crate::environment::{
    cart_forces, cart_wrench, plug_wrench, wall_wrench, wind_force, CartState, Contact, WindNoise,
};
use crate::error::Error;
use crate::observer::{disturbance_estimate, observer_rates, ObserverState};
use crate::safety_filter::{
    barrier_values, closed_loop_rate, filter_step, lie_derivatives, residual_estimate, residual_state_rate,
    target_acceleration, AugmentedState, BarrierEval, ResidualState, StateVector,
};
use crate::{Vector3, Vector6};

/// Any packed state entry above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// `[x (36); xi (6); cart position; cart velocity]`.
pub type PackedState = SVector<f64, 44>;

const XI: usize = 36;
const CART: usize = 42;

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(y: &SVector<f64, N>, t: f64, dt: f64, mut f: F) -> Result<SVector<f64, N>, Error>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, Error>,
{
    let k1 = f(t, y)?;
    rk4_finish(y, &k1, t, dt, f)
}

/// RK4 step with the first stage already evaluated.
fn rk4_finish<const N: usize, F>(
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    t: f64,
    dt: f64,
    mut f: F,
) -> Result<SVector<f64, N>, Error>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, Error>,
{
    let half = 0.5 * dt;
    let k2 = f(t + half, &(y + k1 * half))?;
    let k3 = f(t + half, &(y + k2 * half))?;
    let k4 = f(t + dt, &(y + k3 * dt))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Everything integrated by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub x: AugmentedState,
    pub res: ResidualState,
    pub cart: CartState,
    pub plug_attached: bool,
}

impl SimState {
    pub fn plant(&self) -> PlantState {
        PlantState::new(self.x.q(), self.x.q_dot())
    }

    pub fn observer(&self) -> ObserverState {
        ObserverState::new(self.x.zeta(), self.x.chi())
    }

    fn pack(&self) -> PackedState {
        let mut y = PackedState::zeros();
        y.fixed_rows_mut::<36>(0).copy_from(&self.x.0);
        y.fixed_rows_mut::<6>(XI).copy_from(&self.res.xi);
        y[CART] = self.cart.x;
        y[CART + 1] = self.cart.v;
        y
    }
}

fn unpack(y: &PackedState) -> (AugmentedState, ResidualState, CartState) {
    (
        AugmentedState(y.fixed_rows::<36>(0).into_owned()),
        ResidualState { xi: y.fixed_rows::<6>(XI).into_owned() },
        CartState { x: y[CART], v: y[CART + 1] },
    )
}

/// Controller output held over a step (or recomputed per stage).
#[derive(Debug, Clone)]
struct Control {
    thrust: ThrustVector,
    thrust_raw: ThrustVector,
    u: Vector6,
    status: StepStatus,
    slack_norm: f64,
    beta_hat: Vector6,
    eval: BarrierEval,
}

/// Quantities evaluated at one integrator stage.
struct StageOutput {
    rate: PackedState,
    contact_force: Vector3,
}

/// Deterministic closed-loop simulator for one scenario.
pub struct Simulator {
    scenario: Scenario,
    model: ClosedLoopModel,
    plant: VehicleParams,
    plant_allocation: Allocation,
    wind: WindNoise,
    wind_sample: Vector3,
    state: SimState,
}

impl Simulator {
    pub fn new(scenario: &Scenario) -> Result<Self, Error> {
        scenario.validate()?;
        let model = ClosedLoopModel::new(scenario.nominal, scenario.gains, scenario.observer)?;
        let plant = scenario.plant();
        let q0 = scenario.initial_pose;
        let v0 = Vector6::zeros();
        let obs = ObserverState::initialize(&q0, &v0, &model.nominal)?;
        let (q_d, q_d_dot) = match scenario.controller {
            ControllerVariant::DirectClamp => (scenario.schedule.at(0.0), v0),
            _ => (q0, v0),
        };
        let x = AugmentedState::from_parts(&q0, &v0, &obs.zeta, &obs.chi, &q_d, &q_d_dot);
        let eval = lie_derivatives(&x, &model, &scenario.barrier)?;
        let res = ResidualState::initialize(&eval.h, &scenario.barrier);
        let cart = scenario
            .cart
            .map(|c| CartState { x: c.initial_position, v: 0.0 })
            .unwrap_or_default();
        Ok(Self {
            model,
            plant_allocation: Allocation::new(&plant)?,
            plant,
            wind: WindNoise::new(&scenario.wind)?,
            wind_sample: Vector3::zeros(),
            state: SimState { t: 0.0, step: 0, x, res, cart, plug_attached: scenario.plug.is_some() },
            scenario: scenario.clone(),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn model(&self) -> &ClosedLoopModel {
        &self.model
    }

    fn target(&self, t: f64) -> Vector6 {
        self.scenario.schedule.at(t)
    }

    fn control(&self, x: &AugmentedState, res: &ResidualState, q_t: &Vector6) -> Result<Control, Error> {
        let s = &self.scenario;
        match s.controller {
            ControllerVariant::SafetyFilter => {
                let out = filter_step(x, res, q_t, &self.model, &s.barrier, &s.target_gen)?;
                Ok(Control {
                    thrust: out.eval.thrust,
                    thrust_raw: out.eval.thrust,
                    u: out.q_dd_d,
                    status: StepStatus::Qp(out.status),
                    slack_norm: out.slack_norm,
                    beta_hat: out.beta_hat,
                    eval: out.eval,
                })
            }
            ControllerVariant::NoFilter => {
                let eval = lie_derivatives(x, &self.model, &s.barrier)?;
                Ok(Control {
                    thrust: eval.thrust,
                    thrust_raw: eval.thrust,
                    u: target_acceleration(q_t, &x.q_d(), &x.q_d_dot(), &s.target_gen),
                    status: StepStatus::Off,
                    slack_norm: 0.0,
                    beta_hat: residual_estimate(&eval.h, res, &s.barrier),
                    eval,
                })
            }
            ControllerVariant::DirectClamp => {
                let eval = lie_derivatives(x, &self.model, &s.barrier)?;
                let obs = ObserverState::new(x.zeta(), x.chi());
                let d_hat = disturbance_estimate(&obs, &x.q(), &x.q_dot(), &self.model.nominal, &self.model.observer)?;
                let clamp = baseline_direct_clamp(
                    &x.q(),
                    &x.q_dot(),
                    &x.q_d(),
                    &d_hat,
                    &self.model,
                    s.barrier.t_min,
                    s.barrier.t_max,
                )?;
                Ok(Control {
                    thrust: clamp.clamped,
                    thrust_raw: clamp.raw,
                    u: Vector6::zeros(),
                    status: StepStatus::Off,
                    slack_norm: 0.0,
                    beta_hat: residual_estimate(&eval.h, res, &s.barrier),
                    eval,
                })
            }
        }
    }

    fn contact(&self, plant: &PlantState, cart: &CartState, attached: bool) -> Result<Contact, Error> {
        let s = &self.scenario;
        let ee = &s.end_effector;
        let mut total = Contact::none();
        let mut add = |c: Contact| {
            total.force += c.force;
            total.wrench = total.wrench + c.wrench;
        };
        if let Some(wall) = &s.wall {
            add(wall_wrench(plant, wall, ee)?);
        }
        if let Some(plug) = &s.plug {
            add(plug_wrench(plant, plug, ee, attached)?.0);
        }
        if let Some(cfg) = &s.cart {
            add(cart_wrench(plant, cart, cfg, ee)?);
        }
        Ok(total)
    }

    /// Packed-state rate at time `t`. `held` is the step's control under
    /// zero-order hold; otherwise the control law is evaluated here.
    fn stage(
        &self,
        t: f64,
        y: &PackedState,
        held: Option<&Control>,
        first_stage: bool,
        attached: bool,
    ) -> Result<StageOutput, Error> {
        let s = &self.scenario;
        let (x, res, cart) = unpack(y);
        let computed;
        let control = match held {
            Some(c) => c,
            None => {
                computed = self.control(&x, &res, &self.target(t))?;
                &computed
            }
        };
        let plant = PlantState::new(x.q(), x.q_dot());
        let phi = x.phi();

        let tau_cmd = thrust_to_wrench(&control.thrust, &phi, &self.model.allocation)?;
        let applied = if s.motor_saturation {
            control.thrust.clamped(s.barrier.t_min, s.barrier.t_max)
        } else {
            control.thrust
        };
        let tau_plant = thrust_to_wrench(&applied, &phi, &self.plant_allocation)?;

        let contact = self.contact(&plant, &cart, attached)?;
        let wind = wind_force(t, &s.wind, &self.wind_sample);
        let ext = contact.wrench + wind;
        let magnitude = ext.force().norm();
        if !(magnitude <= s.wrench_cap) {
            return Err(Error::EnvironmentWrenchCap { t, magnitude, cap: s.wrench_cap });
        }

        let q_ddot = forward_dynamics(&plant, &tau_plant, &ext, &self.plant)?;
        let obs = ObserverState::new(x.zeta(), x.chi());
        let (zeta_dot, chi_dot) =
            observer_rates(&obs, &x.q(), &x.q_dot(), &tau_cmd, &self.model.nominal, &self.model.observer)?;

        // Residual estimator at this stage's state.
        let stage_eval;
        let eval = if held.is_none() || first_stage {
            &control.eval
        } else {
            stage_eval = lie_derivatives(&x, &self.model, &s.barrier)?;
            &stage_eval
        };
        let xi_dot = residual_state_rate(eval, &res, &control.u, &s.barrier);

        let mut rate = PackedState::zeros();
        let (q_d_dot, u) = match s.controller {
            ControllerVariant::DirectClamp => (Vector6::zeros(), Vector6::zeros()),
            _ => (x.q_d_dot(), control.u),
        };
        let parts = [x.q_dot(), q_ddot, zeta_dot, chi_dot, q_d_dot, u, xi_dot];
        for (k, p) in parts.iter().enumerate() {
            rate.fixed_rows_mut::<6>(6 * k).copy_from(p);
        }
        if let Some(cfg) = &s.cart {
            let f = cart_forces(&plant, &cart, cfg, &s.end_effector)?;
            rate[CART] = cart.v;
            rate[CART + 1] = f.accel;
        }
        Ok(StageOutput { rate, contact_force: contact.force })
    }

    /// Log row for the current state; `first` holds the true packed-state rate there.
    fn record(&self, control: &Control, first: &StageOutput) -> Result<LogRow, Error> {
        let st = &self.state;
        let x = &st.x;
        let nominal = &self.model.nominal;
        let phi = x.phi();
        let obs = st.observer();
        let d_hat = disturbance_estimate(&obs, &x.q(), &x.q_dot(), nominal, &self.model.observer)?;

        // d = M_hat q_ddot + C_hat + G_hat - tau with the true acceleration.
        let q_ddot: Vector6 = first.rate.fixed_rows::<6>(6).into_owned();
        let tau_cmd = thrust_to_wrench(&control.thrust, &phi, &self.model.allocation)?;
        let d_true = mass_matrix(&phi, nominal)? * q_ddot
            + coriolis_vector(&phi, &x.q_dot().fixed_rows::<3>(3).into_owned(), nominal)?
            + gravity_vector(nominal)
            - tau_cmd.0;

        // beta = dh/dx (x_dot - f(x) - g u).
        let x_dot: StateVector = first.rate.fixed_rows::<36>(0).into_owned();
        let model_rate = closed_loop_rate(x, &control.u, &Vector6::zeros(), &self.model)?;
        let beta = control.eval.dh_dx * (x_dot - model_rate);

        Ok(LogRow {
            t: st.t,
            q: x.q(),
            q_dot: x.q_dot(),
            q_d: x.q_d(),
            q_d_dot: x.q_d_dot(),
            q_t: self.target(st.t),
            thrust: control.thrust.0,
            thrust_raw: control.thrust_raw.0,
            h: barrier_values(&control.thrust, &self.scenario.barrier),
            d_hat: d_hat.0,
            d_true,
            beta_hat: control.beta_hat,
            beta,
            q_dd_d: control.u,
            status: control.status,
            slack_norm: control.slack_norm,
            contact_force: first.contact_force,
            cart_x: st.cart.x,
            cart_v: st.cart.v,
            plug_attached: st.plug_attached,
        })
    }

    /// Control, log row and stage-one rate at the current state.
    fn evaluate(&mut self) -> Result<(Control, StageOutput, LogRow), Error> {
        let q_t = self.target(self.state.t);
        if self.scenario.controller == ControllerVariant::DirectClamp {
            let x = &mut self.state.x;
            x.0.fixed_rows_mut::<6>(24).copy_from(&q_t);
            x.0.fixed_rows_mut::<6>(30).fill(0.0);
        }
        self.wind_sample = self.wind.sample();
        let control = self.control(&self.state.x, &self.state.res, &q_t)?;
        let y = self.state.pack();
        let first = self.stage(self.state.t, &y, Some(&control), true, self.state.plug_attached)?;
        let row = self.record(&control, &first)?;
        Ok((control, first, row))
    }

    /// Runs one control step and returns the row logged at its start.
    pub fn step(&mut self) -> Result<LogRow, Error> {
        let (control, first, row) = self.evaluate()?;
        self.advance(&control, &first)?;
        Ok(row)
    }

    /// Integrates from the current state over one step.
    fn advance(&mut self, control: &Control, first: &StageOutput) -> Result<(), Error> {
        let dt = self.scenario.dt;
        let t = self.state.t;
        let attached = self.state.plug_attached;

        let y0 = self.state.pack();
        let held = self.scenario.zero_order_hold.then_some(control);
        let y1 = rk4_finish(&y0, &first.rate, t, dt, |ts, y| Ok(self.stage(ts, y, held, false, attached)?.rate))?;

        let next_t = (self.state.step + 1) as f64 * dt;
        if !y1.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::NumericalDivergence { t: next_t, limit: DIVERGENCE_LIMIT });
        }
        let still_attached = match (&self.scenario.plug, attached) {
            (Some(plug), true) => plug_wrench(&self.state.plant(), plug, &self.scenario.end_effector, true)?.1,
            _ => false,
        };
        let (x, res, cart) = unpack(&y1);
        self.state = SimState { t: next_t, step: self.state.step + 1, x, res, cart, plug_attached: still_attached };
        Ok(())
    }

    /// Row for the final state, without integrating further.
    pub fn final_row(&mut self) -> Result<LogRow, Error> {
        Ok(self.evaluate()?.2)
    }

    /// Runs to the end of the scenario, keeping the partial log on failure.
    pub fn run(mut self) -> SimLog {
        let steps = self.scenario.steps();
        let mut log = SimLog {
            scenario: self.scenario.name.clone(),
            controller: self.scenario.controller,
            seed: self.scenario.wind.seed,
            t_min: self.scenario.barrier.t_min,
            t_max: self.scenario.barrier.t_max,
            rows: Vec::with_capacity(steps + 1),
            breakaway_time: None,
            warnings: Vec::new(),
            error: None,
        };
        for k in 0..=steps {
            let was_attached = self.state.plug_attached;
            let (control, first, row) = match self.evaluate() {
                Ok(v) => v,
                Err(e) => {
                    log.error = Some(e);
                    break;
                }
            };
            if k == 0 {
                let sigma = &self.scenario.barrier.sigma;
                if let Some(i) = (0..6).find(|&i| row.beta[i].abs() > sigma[i]) {
                    log.warnings.push(format!(
                        "initial residual |beta_{}| = {:.3} exceeds sigma = {}",
                        i + 1,
                        row.beta[i].abs(),
                        sigma[i]
                    ));
                }
            }
            log.rows.push(row);
            if k == steps {
                break;
            }
            if let Err(e) = self.advance(&control, &first) {
                log.error = Some(e);
                break;
            }
            if was_attached && !self.state.plug_attached && log.breakaway_time.is_none() {
                log.breakaway_time = Some(self.state.t);
            }
        }
        log
    }
}

/// Validates and runs `scenario`. Errors during the run are reported in
/// [`SimLog::error`] alongside the partial log.
pub fn run(scenario: &Scenario) -> Result<SimLog, Error> {
    Ok(Simulator::new(scenario)?.run())
}
