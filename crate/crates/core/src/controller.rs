//! Gradient-flow and hybrid restarted accelerated controllers.
//!
//! Both controllers see the plant only through the measured output y.

use nalgebra::DVector;

use crate::cost::Cost;
use crate::error::{Error, Result};
use crate::plant::SteadyStateMap;

/// Tolerance for u3 reaching Δ.
pub const JUMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NesterovParams {
    pub kappa: f64,
    pub rho: f64,
    pub delta: f64,
    /// Restart period end; `f64::INFINITY` disables resets.
    pub big_delta: f64,
    pub r0: bool,
}

impl NesterovParams {
    pub fn new(kappa: f64, rho: f64, delta: f64, big_delta: f64, r0: bool) -> Result<Self> {
        if !(kappa > 0.0) || !(rho > 0.0 && rho <= 4.0) || !(delta > 0.0) || !(big_delta > delta) {
            return Err(Error::InvalidArgument(format!(
                "controller needs kappa > 0, 0 < rho <= 4, 0 < delta < Delta (got {kappa}, {rho}, {delta}, {big_delta})"
            )));
        }
        Ok(Self { kappa, rho, delta, big_delta, r0 })
    }

    pub fn resets(&self) -> bool {
        self.big_delta.is_finite()
    }

    /// Δ² − δ² > 2ρ/(κμ); returns (lhs, rhs).
    pub fn restart_margin(&self, mu: f64) -> (f64, f64) {
        (
            self.big_delta * self.big_delta - self.delta * self.delta,
            2.0 * self.rho / (self.kappa * mu),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientControllerState {
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NesterovControllerState {
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub u3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerConfig {
    Gradient,
    Nesterov(NesterovParams),
}

fn check_y(cost: &Cost, map: &SteadyStateMap, u: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
    cost.check_dims(map)?;
    if u.len() != map.g.ncols() || y.len() != map.g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries, y has {}; map G is {:?}",
            u.len(),
            y.len(),
            map.g.shape()
        )));
    }
    Ok(())
}

/// ∇h(u) + Gᵀ∇g(y) evaluated on the measurement.
fn measured_gradient(cost: &Cost, map: &SteadyStateMap, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    cost.grad_h(u) + map.g.transpose() * cost.grad_g(y)
}

/// u̇ = −∇h(u) − Gᵀ∇g(y).
pub fn gradient_flow_field(cost: &Cost, map: &SteadyStateMap, u: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_y(cost, map, u, y)?;
    Ok(-measured_gradient(cost, map, u, y))
}

/// (u̇₁, u̇₂, u̇₃) = ((ρ/u₃)(u₂ − u₁), −(κu₃/ρ)(∇h(u₁) + Gᵀ∇g(y)), 1).
pub fn nesterov_flow_field(
    cost: &Cost,
    map: &SteadyStateMap,
    state: &NesterovControllerState,
    params: &NesterovParams,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    check_y(cost, map, &state.u1, y)?;
    if state.u3 < params.delta - JUMP_TOL || state.u3 > params.big_delta + JUMP_TOL {
        return Err(Error::TimerOutOfRange {
            u3: state.u3,
            lo: params.delta,
            hi: params.big_delta,
        });
    }
    let du1 = (&state.u2 - &state.u1) * (params.rho / state.u3);
    let du2 = measured_gradient(cost, map, &state.u1, y) * (-params.kappa * state.u3 / params.rho);
    Ok((du1, du2, 1.0))
}

/// u₁⁺ = u₁, u₂⁺ = u₁ (r₀ = 1) or u₂ (r₀ = 0), u₃⁺ = δ.
pub fn nesterov_jump(state: &NesterovControllerState, params: &NesterovParams) -> Result<NesterovControllerState> {
    if state.u3 < params.big_delta - JUMP_TOL {
        return Err(Error::JumpNotEnabled {
            u3: state.u3,
            big_delta: params.big_delta,
        });
    }
    Ok(NesterovControllerState {
        u1: state.u1.clone(),
        u2: if params.r0 { state.u1.clone() } else { state.u2.clone() },
        u3: params.delta,
    })
}

/// t_now + (Δ − u₃); infinite when resets are disabled.
pub fn next_controller_jump_time(state: &NesterovControllerState, params: &NesterovParams, t_now: f64) -> f64 {
    if params.resets() {
        t_now + (params.big_delta - state.u3).max(0.0)
    } else {
        f64::INFINITY
    }
}
