//! Closed-loop hybrid simulation over hybrid time (t, j).
//!
//! Plant flows ẋ = (1/εσ)(Aσx + Bσu + Eσw) are integrated with fixed-step RK4
//! together with the controller flow. Steps are split exactly at plant switches
//! and controller resets; a switch coinciding with a reset is applied first.

use nalgebra::{DMatrix, DVector};

use crate::controller::{ControllerConfig, NesterovParams, JUMP_TOL};
use crate::cost::Cost;
use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{steady_state_maps, StabilityCertificate, SteadyStateMap, SwitchedPlant};
use crate::switching::{generate_signal, DwellTimeParams, GeneratorParams, SwitchingSignal};

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Events as (time, 0-based mode); the first must be at t = 0.
    Explicit(Vec<(f64, usize)>),
    Generated {
        seed: u64,
        rate: f64,
        jump_probability: f64,
        tau0: Option<f64>,
        initial_mode: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingConfig {
    pub dwell: Option<DwellTimeParams>,
    pub source: SignalSource,
}

impl SwitchingConfig {
    pub fn single_mode() -> Self {
        Self {
            dwell: None,
            source: SignalSource::Explicit(vec![(0.0, 0)]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    /// Record every k-th step in addition to event and final samples.
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialConditions {
    pub x0: Option<DVector<f64>>,
    pub u0: Option<DVector<f64>>,
    pub u2: Option<DVector<f64>>,
    pub u3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOverride {
    pub p: Option<DMatrix<f64>>,
    pub q: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOptions {
    pub varrho: Option<f64>,
    /// Per-mode (P, Q) or Q-only overrides; `None` means Q = I.
    pub overrides: Vec<Option<CertificateOverride>>,
    /// Ball radius for the local quartic constants.
    pub quartic_radius: f64,
    pub nu0: f64,
    /// θ and ϱ of the practical-convergence bound α(s, j).
    pub alpha_theta: Option<f64>,
    pub alpha_varrho: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            varrho: None,
            overrides: Vec::new(),
            quartic_radius: 1.5,
            nu0: 0.5,
            alpha_theta: None,
            alpha_varrho: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: SwitchedPlant,
    pub cost: Cost,
    pub controller: ControllerConfig,
    pub switching: SwitchingConfig,
    pub epsilon: Vec<f64>,
    pub disturbance: Disturbance,
    pub integrator: IntegratorConfig,
    pub initial: InitialConditions,
    pub certificates: CertificateOptions,
}

impl Scenario {
    /// Steady-state map of mode 1, used by the controller model.
    pub fn map(&self) -> Result<SteadyStateMap> {
        steady_state_maps(&self.plant.modes[0], &self.plant.c, &self.plant.d)
    }

    pub fn controller_dim(&self) -> usize {
        let m = self.plant.m();
        match self.controller {
            ControllerConfig::Gradient => m,
            ControllerConfig::Nesterov(_) => 2 * m + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p, q) = (self.plant.n(), self.plant.m(), self.plant.p(), self.plant.q());
        let s = self.plant.num_modes();
        if self.cost.input_dim() != Some(m) || self.cost.output_dim() != p {
            return Err(Error::DimensionMismatch(format!(
                "cost dimensions (m={:?}, p={}) do not match plant (m={m}, p={p})",
                self.cost.input_dim(),
                self.cost.output_dim()
            )));
        }
        if self.disturbance.dim() != q {
            return Err(Error::DimensionMismatch(format!(
                "disturbance has {} channels, plant expects q={q}",
                self.disturbance.dim()
            )));
        }
        self.disturbance.validate()?;
        if self.epsilon.len() != s || self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "need {s} positive epsilon values, got {:?}",
                self.epsilon
            )));
        }
        let IntegratorConfig { step, horizon, sample_every } = self.integrator;
        if !(step > 0.0) || !(horizon > 0.0) || !horizon.is_finite() || sample_every == 0 {
            return Err(Error::InvalidArgument("integrator needs step > 0, finite horizon > 0, sample_every >= 1".into()));
        }
        let limit = self.epsilon.iter().copied().fold(f64::INFINITY, f64::min) / 10.0;
        if step > limit * (1.0 + 1e-12) {
            return Err(Error::StiffnessBudgetExceeded { step, limit });
        }
        if let Some(x0) = &self.initial.x0 {
            if x0.len() != n {
                return Err(Error::DimensionMismatch(format!("x0 has {} entries, n={n}", x0.len())));
            }
        }
        for v in [&self.initial.u0, &self.initial.u2].into_iter().flatten() {
            if v.len() != m {
                return Err(Error::DimensionMismatch(format!("initial input has {} entries, m={m}", v.len())));
            }
        }
        if !self.certificates.overrides.is_empty() && self.certificates.overrides.len() != s {
            return Err(Error::InvalidArgument(format!(
                "certificate overrides given for {} of {s} modes",
                self.certificates.overrides.len()
            )));
        }
        if let ControllerConfig::Nesterov(np) = &self.controller {
            NesterovParams::new(np.kappa, np.rho, np.delta, np.big_delta, np.r0)?;
            if let Some(u3) = self.initial.u3 {
                if u3 < np.delta || u3 > np.big_delta {
                    return Err(Error::TimerOutOfRange { u3, lo: np.delta, hi: np.big_delta });
                }
            }
        }
        match &self.switching.source {
            SignalSource::Explicit(events) => {
                SwitchingSignal::new(events.clone(), horizon, s)?;
            }
            SignalSource::Generated { initial_mode, .. } => {
                if self.switching.dwell.is_none() {
                    return Err(Error::InvalidArgument("generated switching needs tau_d and N0".into()));
                }
                if *initial_mode >= s {
                    return Err(Error::InvalidArgument("initial mode out of range".into()));
                }
            }
        }
        Ok(())
    }

    pub fn realize_signal(&self) -> Result<SwitchingSignal> {
        let horizon = self.integrator.horizon;
        match &self.switching.source {
            SignalSource::Explicit(events) => SwitchingSignal::new(events.clone(), horizon, self.plant.num_modes()),
            SignalSource::Generated { seed, rate, jump_probability, tau0, initial_mode } => {
                let dwell = self
                    .switching
                    .dwell
                    .ok_or_else(|| Error::InvalidArgument("generated switching needs tau_d and N0".into()))?;
                generate_signal(&GeneratorParams {
                    dwell,
                    num_modes: self.plant.num_modes(),
                    horizon,
                    seed: *seed,
                    rate: *rate,
                    jump_probability: *jump_probability,
                    tau0: *tau0,
                    initial_mode: *initial_mode,
                })
            }
        }
    }

    /// Timer rate and initial value of the dwell-time automaton.
    pub fn timer_rate_and_start(&self) -> (f64, f64) {
        let n0 = self.switching.dwell.map_or(0.0, |d| d.n0 as f64);
        match &self.switching.source {
            SignalSource::Generated { rate, tau0, .. } => (*rate, tau0.unwrap_or(n0)),
            SignalSource::Explicit(_) => (1.0, n0),
        }
    }

    pub fn stability_certificates(&self) -> Result<Vec<StabilityCertificate>> {
        self.plant
            .modes
            .iter()
            .enumerate()
            .map(|(i, mode)| match self.certificates.overrides.get(i).cloned().flatten() {
                None => StabilityCertificate::default_for(&mode.a),
                Some(CertificateOverride { p: None, q }) => StabilityCertificate::from_lyapunov(&mode.a, &q),
                Some(CertificateOverride { p: Some(p), q }) => StabilityCertificate::from_pair(&mode.a, p, q),
            })
            .collect()
    }

    pub fn initial_state(&self) -> DVector<f64> {
        let (n, m) = (self.plant.n(), self.plant.m());
        let mut z = DVector::zeros(n + self.controller_dim());
        if let Some(x0) = &self.initial.x0 {
            z.rows_mut(0, n).copy_from(x0);
        }
        let u0 = self.initial.u0.clone().unwrap_or_else(|| DVector::zeros(m));
        z.rows_mut(n, m).copy_from(&u0);
        if let ControllerConfig::Nesterov(np) = &self.controller {
            let u2 = self.initial.u2.clone().unwrap_or(u0);
            z.rows_mut(n + m, m).copy_from(&u2);
            z[n + 2 * m] = self.initial.u3.unwrap_or(np.delta);
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    PlantSwitch,
    ControllerReset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: HybridTime,
    pub sigma: usize,
    pub tau: f64,
    /// x followed by the controller state (u, or u1, u2, u3).
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc {
    pub n: usize,
    pub m: usize,
    pub nesterov: bool,
    pub samples: Vec<Sample>,
    /// Jumps at their pre-jump hybrid time; each moves j to j + 1.
    pub jumps: Vec<(HybridTime, JumpKind)>,
    /// Time at which the state became non-finite, if it did.
    pub divergence: Option<f64>,
    pub signal: SwitchingSignal,
}

impl HybridArc {
    pub fn x(&self, s: &Sample) -> DVector<f64> {
        DVector::from_column_slice(&s.state[..self.n])
    }

    /// Plant input u (gradient) or u1 (Nesterov).
    pub fn u(&self, s: &Sample) -> DVector<f64> {
        DVector::from_column_slice(&s.state[self.n..self.n + self.m])
    }

    pub fn u2(&self, s: &Sample) -> Option<DVector<f64>> {
        self.nesterov
            .then(|| DVector::from_column_slice(&s.state[self.n + self.m..self.n + 2 * self.m]))
    }

    pub fn u3(&self, s: &Sample) -> Option<f64> {
        self.nesterov.then(|| s.state[self.n + 2 * self.m])
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("arc has at least one sample")
    }

    pub fn count(&self, kind: JumpKind) -> usize {
        self.jumps.iter().filter(|j| j.1 == kind).count()
    }

    /// Checks hybrid-domain well-formedness; returns a description of the first defect.
    pub fn check_well_formed(&self) -> std::result::Result<(), String> {
        let dim = self.samples.first().map(|s| s.state.len());
        for pair in self.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if Some(b.state.len()) != dim {
                return Err(format!("state dimension changes at t={}", b.time.t));
            }
            if b.time.j == a.time.j {
                if !(b.time.t > a.time.t) {
                    return Err(format!("time does not increase at j={}", a.time.j));
                }
            } else if b.time.j != a.time.j + 1 || b.time.t != a.time.t {
                return Err(format!("bad jump from {:?} to {:?}", a.time, b.time));
            }
        }
        let final_j = self.samples.last().map_or(0, |s| s.time.j);
        if final_j != self.jumps.len() {
            return Err(format!("j = {final_j} but {} jumps recorded", self.jumps.len()));
        }
        Ok(())
    }
}

/// Pointwise optimum, equilibria and suboptimality for a scenario.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub cost: Cost,
    pub map: SteadyStateMap,
    /// Per mode (−A⁻¹B, −A⁻¹E).
    pub gains: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    // u* = k_ref − k_w w for the quadratic cost.
    k_ref: DVector<f64>,
    k_w: DMatrix<f64>,
}

impl Oracle {
    pub fn new(plant: &SwitchedPlant, cost: &Cost) -> Result<Self> {
        let map = steady_state_maps(&plant.modes[0], &plant.c, &plant.d)?;
        cost.check_dims(&map)?;
        let gains = plant
            .modes
            .iter()
            .map(|m| m.equilibrium_gains())
            .collect::<Result<Vec<_>>>()?;
        let (k_ref, k_w) = match cost {
            Cost::Quadratic(c) => {
                let gt_q = map.g.transpose() * &c.qy;
                let lhs = &c.r + &gt_q * &map.g;
                let rhs = &gt_q * &c.y_ref;
                let k_ref = linalg::solve(&lhs, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))
                    .ok_or_else(|| Error::NotSolvable("R + G^T Qy G is singular".into()))?;
                let k_w = linalg::solve(&lhs, &(&gt_q * &map.h))
                    .ok_or_else(|| Error::NotSolvable("R + G^T Qy G is singular".into()))?;
                (DVector::from_column_slice(k_ref.as_slice()), k_w)
            }
            Cost::Quartic(_) => {
                if map.g[(0, 0)] == 0.0 {
                    return Err(Error::NotSolvable("quartic cost with G = 0".into()));
                }
                (DVector::zeros(1), DMatrix::zeros(1, 1))
            }
        };
        Ok(Self { cost: cost.clone(), map, gains, k_ref, k_w })
    }

    pub fn u_star(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.cost {
            Cost::Quadratic(_) => &self.k_ref - &self.k_w * w,
            Cost::Quartic(c) => DVector::from_element(1, (c.y_ref - (&self.map.h * w)[0]) / self.map.g[(0, 0)]),
        }
    }

    pub fn x_star(&self, sigma: usize, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let (xu, xw) = &self.gains[sigma];
        xu * u + xw * w
    }

    pub fn f_gap(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let u_star = self.u_star(w);
        (self.cost.f(&self.map, u, w) - self.cost.f(&self.map, &u_star, w)).max(0.0)
    }
}

struct Dynamics<'a> {
    n: usize,
    m: usize,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    e: Vec<DMatrix<f64>>,
    c: &'a DMatrix<f64>,
    d: &'a DMatrix<f64>,
    gt: DMatrix<f64>,
    cost: &'a Cost,
    dist: &'a Disturbance,
    nesterov: Option<NesterovParams>,
    w: DVector<f64>,
    y: DVector<f64>,
    gy: DVector<f64>,
    scratch: DVector<f64>,
    ubuf: DVector<f64>,
    grad: DVector<f64>,
}

impl<'a> Dynamics<'a> {
    fn new(sc: &'a Scenario, map: &SteadyStateMap) -> Self {
        let (n, m, p, q) = (sc.plant.n(), sc.plant.m(), sc.plant.p(), sc.plant.q());
        let scaled = |f: &dyn Fn(&crate::plant::LtiMode) -> &DMatrix<f64>| -> Vec<DMatrix<f64>> {
            sc.plant
                .modes
                .iter()
                .zip(&sc.epsilon)
                .map(|(mode, eps)| f(mode) / *eps)
                .collect()
        };
        Self {
            n,
            m,
            a: scaled(&|md| &md.a),
            b: scaled(&|md| &md.b),
            e: scaled(&|md| &md.e),
            c: &sc.plant.c,
            d: &sc.plant.d,
            gt: map.g.transpose(),
            cost: &sc.cost,
            dist: &sc.disturbance,
            nesterov: match sc.controller {
                ControllerConfig::Nesterov(p) => Some(p),
                ControllerConfig::Gradient => None,
            },
            w: DVector::zeros(q),
            y: DVector::zeros(p),
            gy: DVector::zeros(p),
            scratch: DVector::zeros(p),
            ubuf: DVector::zeros(m),
            grad: DVector::zeros(m),
        }
    }

    /// ∇h(u) + Gᵀ∇g(y) for u in `ubuf` and y in `y`, written to `grad`.
    fn controller_gradient(&mut self) {
        self.cost.grad_h_into(&self.ubuf, &mut self.grad);
        self.cost.grad_g_into(&self.y, &mut self.scratch, &mut self.gy);
        self.grad.gemv(1.0, &self.gt, &self.gy, 1.0);
    }

    fn eval(&mut self, t: f64, sigma: usize, z: &DVector<f64>, dz: &mut DVector<f64>) {
        let (n, m) = (self.n, self.m);
        self.dist.value_into(t, &mut self.w);
        {
            let x = z.rows(0, n);
            let u = z.rows(n, m);
            let mut dx = dz.rows_mut(0, n);
            dx.gemv(1.0, &self.a[sigma], &x, 0.0);
            dx.gemv(1.0, &self.b[sigma], &u, 1.0);
            dx.gemv(1.0, &self.e[sigma], &self.w, 1.0);
            self.y.gemv(1.0, self.c, &x, 0.0);
            self.y.gemv(1.0, self.d, &self.w, 1.0);
        }
        self.ubuf.copy_from(&z.rows(n, m));
        self.controller_gradient();
        match self.nesterov {
            None => dz.rows_mut(n, m).copy_from(&(-&self.grad)),
            Some(p) => {
                let u3 = z[n + 2 * m];
                let a = p.rho / u3;
                let b = -p.kappa * u3 / p.rho;
                for i in 0..m {
                    dz[n + i] = a * (z[n + m + i] - z[n + i]);
                    dz[n + m + i] = b * self.grad[i];
                }
                dz[n + 2 * m] = 1.0;
            }
        }
    }
}

struct Rk4 {
    k1: DVector<f64>,
    k2: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    tmp: DVector<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k1: DVector::zeros(dim),
            k2: DVector::zeros(dim),
            k3: DVector::zeros(dim),
            k4: DVector::zeros(dim),
            tmp: DVector::zeros(dim),
        }
    }

    fn step(&mut self, dyns: &mut Dynamics, t: f64, h: f64, sigma: usize, z: &mut DVector<f64>) {
        dyns.eval(t, sigma, z, &mut self.k1);
        self.tmp.copy_from(z);
        self.tmp.axpy(0.5 * h, &self.k1, 1.0);
        dyns.eval(t + 0.5 * h, sigma, &self.tmp, &mut self.k2);
        self.tmp.copy_from(z);
        self.tmp.axpy(0.5 * h, &self.k2, 1.0);
        dyns.eval(t + 0.5 * h, sigma, &self.tmp, &mut self.k3);
        self.tmp.copy_from(z);
        self.tmp.axpy(h, &self.k3, 1.0);
        dyns.eval(t + h, sigma, &self.tmp, &mut self.k4);
        z.axpy(h / 6.0, &self.k1, 1.0);
        z.axpy(h / 3.0, &self.k2, 1.0);
        z.axpy(h / 3.0, &self.k3, 1.0);
        z.axpy(h / 6.0, &self.k4, 1.0);
    }
}

fn same_time(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn simulate(sc: &Scenario) -> Result<HybridArc> {
    sc.validate()?;
    let map = sc.map()?;
    if let ControllerConfig::Nesterov(p) = &sc.controller {
        if p.r0 && p.resets() {
            if let Cost::Quadratic(q) = &sc.cost {
                let mu = crate::cost::cost_constants(q, &map).mu;
                let (lhs, rhs) = p.restart_margin(mu);
                if !(lhs > rhs) {
                    return Err(Error::RestartConditionViolated { lhs, rhs });
                }
            }
        }
    }
    let signal = sc.realize_signal()?;
    let (n, m) = (sc.plant.n(), sc.plant.m());
    let nesterov = match sc.controller {
        ControllerConfig::Nesterov(p) => Some(p),
        ControllerConfig::Gradient => None,
    };
    let horizon = sc.integrator.horizon;
    let h = sc.integrator.step;
    let stride = sc.integrator.sample_every;
    let (rate, tau_start) = sc.timer_rate_and_start();
    let (tau_d, n0) = sc.switching.dwell.map_or((f64::INFINITY, 0.0), |d| (d.tau_d, d.n0 as f64));

    let mut dyns = Dynamics::new(sc, &map);
    let mut z = sc.initial_state();
    let mut rk = Rk4::new(z.len());
    let mut arc = HybridArc {
        n,
        m,
        nesterov: nesterov.is_some(),
        samples: Vec::new(),
        jumps: Vec::new(),
        divergence: None,
        signal: signal.clone(),
    };
    let mut t = 0.0;
    let mut j = 0usize;
    let mut sigma = signal.events[0].1;
    let mut tau = tau_start;
    let mut next_switch = 1usize;
    let record = |arc: &mut HybridArc, t: f64, j: usize, sigma: usize, tau: f64, z: &DVector<f64>| {
        arc.samples.push(Sample {
            time: HybridTime { t, j },
            sigma,
            tau,
            state: z.as_slice().to_vec(),
        });
    };
    record(&mut arc, t, j, sigma, tau, &z);
    let u3_idx = n + 2 * m;
    let mut steps = 0usize;

    while t < horizon && !same_time(t, horizon) {
        let t_switch = signal.events.get(next_switch).map_or(f64::INFINITY, |e| e.0);
        let t_reset = match nesterov {
            Some(p) if p.resets() => t + (p.big_delta - z[u3_idx]).max(0.0),
            _ => f64::INFINITY,
        };
        let t_next = t_switch.min(t_reset).min(horizon);
        let span = t_next - t;
        if span > 0.0 {
            let k = ((span / h) - 1e-9).ceil().max(1.0) as usize;
            let dt = span / k as f64;
            let u3_start = nesterov.map(|_| z[u3_idx]);
            for i in 0..k {
                let ti = t + i as f64 * dt;
                rk.step(&mut dyns, ti, dt, sigma, &mut z);
                tau = (tau + rate * dt / tau_d).min(n0);
                steps += 1;
                if !z.iter().all(|v| v.is_finite()) {
                    arc.divergence = Some(ti + dt);
                    return Ok(arc);
                }
                if i + 1 < k && steps % stride == 0 {
                    record(&mut arc, ti + dt, j, sigma, tau, &z);
                }
            }
            if let Some(u3) = u3_start {
                // The timer flows at unit rate; remove accumulated rounding.
                z[u3_idx] = u3 + span;
            }
        }
        t = t_next;
        record(&mut arc, t, j, sigma, tau, &z);
        if same_time(t, t_switch) {
            arc.jumps.push((HybridTime { t, j }, JumpKind::PlantSwitch));
            sigma = signal.events[next_switch].1;
            next_switch += 1;
            if sc.switching.dwell.is_some() {
                tau -= 1.0;
            }
            j += 1;
            record(&mut arc, t, j, sigma, tau, &z);
        }
        if let Some(p) = nesterov {
            if same_time(t, t_reset) && z[u3_idx] >= p.big_delta - JUMP_TOL - 1e-12 * p.big_delta {
                arc.jumps.push((HybridTime { t, j }, JumpKind::ControllerReset));
                if p.r0 {
                    for i in 0..m {
                        z[n + m + i] = z[n + i];
                    }
                }
                z[u3_idx] = p.delta;
                j += 1;
                record(&mut arc, t, j, sigma, tau, &z);
            }
        }
    }
    Ok(arc)
}

/// ‖(x, u₁) − (x*(t), u*(t))‖ per sample.
pub fn tracking_error(arc: &HybridArc, oracle: &Oracle, dist: &Disturbance) -> Vec<(HybridTime, f64)> {
    arc.samples
        .iter()
        .map(|s| {
            let w = dist.value(s.time.t);
            let u = arc.u(s);
            let u_star = oracle.u_star(&w);
            let x_star = oracle.x_star(s.sigma, &u_star, &w);
            let ex = (arc.x(s) - x_star).norm_squared();
            let eu = (u - u_star).norm_squared();
            (s.time, (ex + eu).sqrt())
        })
        .collect()
}

/// f(u₁) − f(u*) per sample.
pub fn suboptimality(arc: &HybridArc, oracle: &Oracle, dist: &Disturbance) -> Vec<(HybridTime, f64)> {
    arc.samples
        .iter()
        .map(|s| (s.time, oracle.f_gap(&arc.u(s), &dist.value(s.time.t))))
        .collect()
}
