//! Disturbance observer estimating the lumped disturbance `d` of the nominal model.
//!
//! `zeta` low-pass filters `q_dot` and `chi` filters `M_hat^-1 tau`; the estimate
//! is `d_hat = -M_hat (mu^-1 Gamma_zeta (zeta - q_dot) + chi) + C_hat + G_hat`.

use crate::dynamics::{coriolis_vector, gravity_vector, mass_matrix, GeneralizedWrench, VehicleParams};
use crate::error::{invalid, Error};
use crate::{Vector3, Vector6};

/// Filter states of the observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub zeta: Vector6,
    pub chi: Vector6,
}

impl ObserverState {
    pub fn new(zeta: Vector6, chi: Vector6) -> Self {
        Self { zeta, chi }
    }

    /// `zeta = q_dot` and `chi` chosen so that `d_hat = 0` at the initial state.
    pub fn initialize(
        q: &Vector6,
        q_dot: &Vector6,
        nominal: &VehicleParams,
    ) -> Result<Self, Error> {
        let phi = attitude(q);
        let m = mass_matrix(&phi, nominal)?;
        let c = coriolis_vector(&phi, &attitude(q_dot), nominal)?;
        let rhs = c + gravity_vector(nominal);
        let chi = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularAttitude { pitch: phi[1] })?;
        Ok(Self { zeta: *q_dot, chi })
    }
}

/// Diagonal observer gains `Gamma_zeta`, `Gamma_chi` and `mu`, stored as their diagonals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub gamma_zeta: Vector6,
    pub gamma_chi: Vector6,
    pub mu: Vector6,
}

impl ObserverGains {
    /// Experimental values: Gamma = diag(1, 1, 1, 0.1, 0.1, 0.5) for both filters,
    /// mu = 0.80 on roll/pitch and 0.95 elsewhere.
    pub fn nominal() -> Self {
        let gamma = Vector6::new(1.0, 1.0, 1.0, 0.10, 0.10, 0.50);
        Self {
            gamma_zeta: gamma,
            gamma_chi: gamma,
            mu: Vector6::new(0.95, 0.95, 0.95, 0.80, 0.80, 0.95),
        }
    }

    /// Diagonal of `mu^-1 Gamma_zeta`.
    pub fn zeta_rate(&self) -> Vector6 {
        self.gamma_zeta.component_div(&self.mu)
    }

    /// Diagonal of `mu^-1 Gamma_chi`.
    pub fn chi_rate(&self) -> Vector6 {
        self.gamma_chi.component_div(&self.mu)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.gamma_zeta.iter().all(|g| *g > 0.0 && g.is_finite()) {
            return Err(invalid("ObserverGains: gamma_zeta entries must be > 0"));
        }
        if !self.gamma_chi.iter().all(|g| *g > 0.0 && g.is_finite()) {
            return Err(invalid("ObserverGains: gamma_chi entries must be > 0"));
        }
        if !self.mu.iter().all(|m| *m > 0.0 && *m < 1.0) {
            return Err(invalid("ObserverGains: mu entries must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self::nominal()
    }
}

fn attitude(v: &Vector6) -> Vector3 {
    v.fixed_rows::<3>(3).into_owned()
}

/// Lumped-disturbance estimate `d_hat`.
pub fn disturbance_estimate(
    obs: &ObserverState,
    q: &Vector6,
    q_dot: &Vector6,
    nominal: &VehicleParams,
    gains: &ObserverGains,
) -> Result<GeneralizedWrench, Error> {
    let phi = attitude(q);
    let m = mass_matrix(&phi, nominal)?;
    let c = coriolis_vector(&phi, &attitude(q_dot), nominal)?;
    let filtered = gains.zeta_rate().component_mul(&(obs.zeta - q_dot)) + obs.chi;
    Ok(GeneralizedWrench(-(m * filtered) + c + gravity_vector(nominal)))
}

/// Filter rates `(zeta_dot, chi_dot)` for the control wrench `tau`.
pub fn observer_rates(
    obs: &ObserverState,
    q: &Vector6,
    q_dot: &Vector6,
    tau: &GeneralizedWrench,
    nominal: &VehicleParams,
    gains: &ObserverGains,
) -> Result<(Vector6, Vector6), Error> {
    let phi = attitude(q);
    let m = mass_matrix(&phi, nominal)?;
    let m_inv_tau = m
        .lu()
        .solve(&tau.0)
        .ok_or(Error::SingularAttitude { pitch: phi[1] })?;
    let zeta_dot = -gains.zeta_rate().component_mul(&(obs.zeta - q_dot));
    let chi_dot = -gains.chi_rate().component_mul(&(obs.chi - m_inv_tau));
    Ok((zeta_dot, chi_dot))
}
