//! Ready-made instances: the two-cell traffic model, seeded random plants and
//! scalar presets.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{ControllerConfig, NesterovParams};
use crate::cost::{Cost, QuadraticCost, QuarticCost};
use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{random_plant, LtiMode, SwitchedPlant};
use crate::report::StaticBounds;
use crate::sim::{
    CertificateOptions, InitialConditions, IntegratorConfig, Scenario, SignalSource, SwitchingConfig,
};
use crate::switching::DwellTimeParams;

/// Demand, supply and turning ratios of the two-cell traffic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtmParams {
    pub d1: f64,
    pub d2: f64,
    pub s1: f64,
    pub s2: f64,
    pub r12: f64,
    pub r21: f64,
}

impl Default for CtmParams {
    fn default() -> Self {
        Self { d1: 0.79, d2: 0.67, s1: 1.33, s2: 0.71, r12: 0.79, r21: 0.47 }
    }
}

impl CtmParams {
    pub fn mode_matrices(&self) -> [DMatrix<f64>; 2] {
        let CtmParams { d1, d2, s1, s2, r12, r21 } = *self;
        [
            DMatrix::from_row_slice(2, 2, &[-d1 + r21 * s1, 0.0, -s1 + r12 * d1, -(1.0 - r21) * d2]),
            DMatrix::from_row_slice(2, 2, &[-(1.0 - r12) * d1, -s2 + r21 * d2, 0.0, -d2 + r12 * s2]),
        ]
    }
}

/// Two-cell traffic plant with C = I, D = 0.
///
/// Controlled: inflow u enters both cells through B₁ = [1; 1] with E₁ = I; mode 2
/// uses B₂ = A₂A₁⁻¹B₁ and E₂ = A₂A₁⁻¹E₁ so both modes share one steady-state map.
/// Uncontrolled: B = 0 and E = I in both modes.
pub fn build_ctm(params: &CtmParams, controlled: bool) -> Result<SwitchedPlant> {
    let [a1, a2] = params.mode_matrices();
    let eye = DMatrix::identity(2, 2);
    let modes = if controlled {
        let b1 = DMatrix::from_element(2, 1, 1.0);
        let a1_inv_b = linalg::solve(&a1, &b1).ok_or(Error::SingularA)?;
        let a1_inv_e = linalg::solve(&a1, &eye).ok_or(Error::SingularA)?;
        let b2 = &a2 * a1_inv_b;
        let e2 = &a2 * a1_inv_e;
        vec![LtiMode::new(a1, b1, eye.clone())?, LtiMode::new(a2, b2, e2)?]
    } else {
        let b = DMatrix::zeros(2, 1);
        vec![LtiMode::new(a1, b.clone(), eye.clone())?, LtiMode::new(a2, b, eye.clone())?]
    };
    SwitchedPlant::new(modes, eye, DMatrix::zeros(2, 2))
}

/// Sets ε = `eps_fraction`·ε̄ per mode and, for switched scenarios with dwell
/// parameters, τ_d = `tau_factor`·(dwell bound). Returns the bounds used.
pub fn apply_certified_defaults(sc: &mut Scenario, eps_fraction: Option<f64>, tau_factor: Option<f64>) -> Result<StaticBounds> {
    let bounds = StaticBounds::new(sc)?;
    if let Some(frac) = eps_fraction {
        if bounds.eps_bar.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidArgument("epsilon_fraction needs a finite positive time-scale bound".into()));
        }
        sc.epsilon = bounds.eps_bar.iter().map(|e| frac * e).collect();
    }
    if let Some(factor) = tau_factor {
        let bound = bounds
            .dwell_bound
            .ok_or_else(|| Error::InvalidArgument("tau_d_factor needs a dwell-time bound".into()))?;
        let n0 = sc.switching.dwell.map_or(1, |d| d.n0);
        // A zero bound (identical modes) still needs a positive τ_d.
        let tau_d = if bound > 0.0 { factor * bound } else { factor };
        sc.switching.dwell = Some(DwellTimeParams::new(tau_d, n0)?);
    }
    Ok(bounds)
}

/// Largest step allowed by the stiffness guard.
pub fn default_step(epsilon: &[f64]) -> f64 {
    epsilon.iter().copied().fold(f64::INFINITY, f64::min) / 10.0
}

fn spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    linalg::symmetrize(&(&l * l.transpose() / k as f64 + DMatrix::identity(k, k) * 0.5))
}

fn uniform_vector(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0))
}

/// Two-mode (n, m, p, q) = (10, 5, 5, 6) plant with a seeded quadratic cost,
/// constant disturbance and gradient flow at ε = ε̄/2, τ_d = 2·(dwell bound).
pub fn build_random_instance(seed: u64) -> Result<Scenario> {
    random_instance(seed, 2)
}

/// Single-mode variant of [`build_random_instance`].
pub fn build_random_single_mode(seed: u64) -> Result<Scenario> {
    random_instance(seed, 1)
}

fn random_instance(seed: u64, num_modes: usize) -> Result<Scenario> {
    let (n, m, p, q) = (10, 5, 5, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = random_plant(&mut rng, n, m, p, q, num_modes, 0.5)?;
    let r = spd(&mut rng, m);
    let qy = spd(&mut rng, p);
    let y_ref = uniform_vector(&mut rng, p);
    let w = uniform_vector(&mut rng, q);
    let x0 = uniform_vector(&mut rng, n);
    let u0 = uniform_vector(&mut rng, m);
    let switching = if num_modes > 1 {
        SwitchingConfig {
            dwell: Some(DwellTimeParams::new(1.0, 1)?),
            source: SignalSource::Generated {
                seed,
                rate: 1.0,
                jump_probability: 0.5,
                tau0: None,
                initial_mode: 0,
            },
        }
    } else {
        SwitchingConfig::single_mode()
    };
    let mut sc = Scenario {
        plant,
        cost: Cost::Quadratic(QuadraticCost::new(r, qy, y_ref)?),
        controller: ControllerConfig::Gradient,
        switching,
        epsilon: vec![1.0; num_modes],
        disturbance: Disturbance::constant(w),
        integrator: IntegratorConfig { step: 1.0, horizon: 1.0, sample_every: 10 },
        initial: InitialConditions { x0: Some(x0), u0: Some(u0), u2: None, u3: None },
        certificates: CertificateOptions::default(),
    };
    let bounds = apply_certified_defaults(&mut sc, Some(0.5), (num_modes > 1).then_some(2.0))?;
    // Several closed-loop time constants ℓ/μ², and at least a few dwell windows.
    let k = &bounds.constants;
    let settle = 12.0 * k.ell / (k.mu * k.mu);
    let dwell = sc.switching.dwell.map_or(0.0, |d| 4.0 * d.tau_d);
    sc.integrator.horizon = settle.max(dwell);
    sc.integrator.step = default_step(&sc.epsilon);
    sc.integrator.sample_every = ((sc.integrator.horizon / sc.integrator.step) / 2000.0).ceil().max(1.0) as usize;
    Ok(sc)
}

/// Scalar plant ẋ = −x + u + w, y = x.
pub fn scalar_plant() -> SwitchedPlant {
    let one = DMatrix::from_element(1, 1, 1.0);
    SwitchedPlant::new(
        vec![LtiMode::new(-one.clone(), one.clone(), one.clone()).expect("scalar mode")],
        one,
        DMatrix::zeros(1, 1),
    )
    .expect("scalar plant")
}

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

/// Scalar plant with cost ½u² + ½(y − y_ref)², w constant, and the given
/// controller at ε = ½·(its time-scale bound).
pub fn scalar_quadratic(controller: ControllerConfig, w: f64, y_ref: f64, horizon: f64) -> Result<Scenario> {
    scalar_quadratic_weighted(controller, 0.5, w, y_ref, horizon)
}

/// As [`scalar_quadratic`] with both cost weights set to `weight`, so μ = ℓ = 2·weight.
pub fn scalar_quadratic_weighted(
    controller: ControllerConfig,
    weight: f64,
    w: f64,
    y_ref: f64,
    horizon: f64,
) -> Result<Scenario> {
    let r = DMatrix::from_element(1, 1, weight);
    let mut sc = Scenario {
        plant: scalar_plant(),
        cost: Cost::Quadratic(QuadraticCost::new(r.clone(), r, scalar(y_ref))?),
        controller,
        switching: SwitchingConfig::single_mode(),
        epsilon: vec![1.0],
        disturbance: Disturbance::constant(scalar(w)),
        integrator: IntegratorConfig { step: 1.0, horizon, sample_every: 20 },
        initial: InitialConditions { x0: Some(scalar(0.0)), u0: Some(scalar(0.0)), u2: None, u3: None },
        certificates: CertificateOptions::default(),
    };
    apply_certified_defaults(&mut sc, Some(0.5), None)?;
    sc.integrator.step = default_step(&sc.epsilon);
    Ok(sc)
}

/// Scalar plant with cost ¼(y − 1)⁴, w = 0 and the practical restarted
/// controller (r₀ = 0) at ε = `eps_scale`·ε₀, ε₀ the practical bound.
pub fn scalar_quartic(big_delta: f64, eps_scale: f64, horizon: f64) -> Result<Scenario> {
    let params = NesterovParams::new(1.0, 1.0, 1.0, big_delta, false)?;
    let mut sc = Scenario {
        plant: scalar_plant(),
        cost: Cost::Quartic(QuarticCost { y_ref: 1.0 }),
        controller: ControllerConfig::Nesterov(params),
        switching: SwitchingConfig::single_mode(),
        epsilon: vec![1.0],
        disturbance: Disturbance::constant(scalar(0.0)),
        integrator: IntegratorConfig { step: 1.0, horizon, sample_every: 50 },
        initial: InitialConditions { x0: Some(scalar(0.0)), u0: Some(scalar(0.0)), u2: None, u3: None },
        certificates: CertificateOptions::default(),
    };
    apply_certified_defaults(&mut sc, Some(eps_scale), None)?;
    sc.integrator.step = default_step(&sc.epsilon);
    Ok(sc)
}

/// Traffic instance in closed loop with the gradient flow. Controlled runs use
/// cost ½u² + ½‖y − y_ref‖² at ε = ε̄/2 with τ_d = 2·(dwell bound); uncontrolled
/// runs switch every `fast_period` and keep u = 0.
pub fn ctm_scenario(controlled: bool, fast_period: f64) -> Result<Scenario> {
    let params = CtmParams::default();
    let plant = build_ctm(&params, controlled)?;
    let w = DVector::from_vec(vec![0.3, 0.2]);
    let y_ref = DVector::from_vec(vec![1.0, 2.0]);
    let cost = Cost::Quadratic(QuadraticCost::new(
        DMatrix::from_element(1, 1, 0.5),
        DMatrix::identity(2, 2) * 0.5,
        y_ref,
    )?);
    if controlled {
        let mut sc = Scenario {
            plant,
            cost,
            controller: ControllerConfig::Gradient,
            switching: SwitchingConfig {
                dwell: Some(DwellTimeParams::new(1.0, 1)?),
                source: SignalSource::Generated {
                    seed: 7,
                    rate: 1.0,
                    jump_probability: 0.5,
                    tau0: None,
                    initial_mode: 0,
                },
            },
            epsilon: vec![1.0; 2],
            disturbance: Disturbance::constant(w),
            integrator: IntegratorConfig { step: 1.0, horizon: 1.0, sample_every: 20 },
            initial: InitialConditions { x0: Some(DVector::zeros(2)), u0: Some(DVector::zeros(1)), u2: None, u3: None },
            certificates: CertificateOptions::default(),
        };
        let bounds = apply_certified_defaults(&mut sc, Some(0.5), Some(2.0))?;
        let k = &bounds.constants;
        let tau_d = sc.switching.dwell.map_or(0.0, |d| d.tau_d);
        sc.integrator.horizon = (30.0 * k.ell / (k.mu * k.mu)).max(20.0 * tau_d);
        sc.integrator.step = default_step(&sc.epsilon);
        Ok(sc)
    } else {
        let horizon = 200.0;
        let events = (0..)
            .map(|k| (k as f64 * fast_period, k % 2))
            .take_while(|e| e.0 < horizon)
            .collect();
        Ok(Scenario {
            plant,
            cost: Cost::Quadratic(QuadraticCost::new(DMatrix::from_element(1, 1, 0.5), DMatrix::identity(2, 2) * 0.5, DVector::zeros(2))?),
            controller: ControllerConfig::Gradient,
            switching: SwitchingConfig { dwell: None, source: SignalSource::Explicit(events) },
            epsilon: vec![1.0; 2],
            disturbance: Disturbance::constant(w),
            integrator: IntegratorConfig { step: fast_period.min(1.0) / 20.0, horizon, sample_every: 20 },
            initial: InitialConditions { x0: Some(DVector::from_vec(vec![1.0, 1.0])), ..Default::default() },
            certificates: CertificateOptions::default(),
        })
    }
}
