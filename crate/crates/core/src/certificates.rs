//! Closed-form stability certificates and runtime Lyapunov/E-ISS monitors.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::controller::NesterovParams;
use crate::cost::CostConstants;
use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm};
use crate::plant::{LtiMode, StabilityCertificate, SteadyStateMap};
use crate::sim::{HybridArc, HybridTime, JumpKind, Oracle, Sample};
use crate::switching::DwellTimeParams;
use crate::disturbance::Disturbance;

/// Norms and eigenvalue bounds of one mode entering every certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBounds {
    pub norm_c: f64,
    pub norm_g: f64,
    pub norm_h: f64,
    /// ‖PA⁻¹B‖
    pub norm_pab: f64,
    /// ‖PA⁻¹E‖
    pub norm_pae: f64,
    pub lambda_min_q: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
}

pub fn mode_bounds(
    mode: &LtiMode,
    cert: &StabilityCertificate,
    c: &DMatrix<f64>,
    map: &SteadyStateMap,
) -> Result<ModeBounds> {
    let a_inv_b = linalg::solve(&mode.a, &mode.b).ok_or(Error::SingularA)?;
    let a_inv_e = linalg::solve(&mode.a, &mode.e).ok_or(Error::SingularA)?;
    Ok(ModeBounds {
        norm_c: spectral_norm(c),
        norm_g: map.norm_g,
        norm_h: map.norm_h,
        norm_pab: spectral_norm(&(&cert.p * a_inv_b)),
        norm_pae: spectral_norm(&(&cert.p * a_inv_e)),
        lambda_min_q: cert.lambda_min_q,
        lambda_min_p: cert.lambda_min_p,
        lambda_max_p: cert.lambda_max_p,
    })
}

/// ε̄ = λ̲(Q)/(4ℓ_y‖C‖‖G‖‖PA⁻¹B‖); `f64::INFINITY` when the denominator vanishes.
pub fn gradient_epsilon_bound(b: &ModeBounds, ell_y: f64) -> f64 {
    let den = 4.0 * ell_y * b.norm_c * b.norm_g * b.norm_pab;
    if den == 0.0 {
        f64::INFINITY
    } else {
        b.lambda_min_q / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCoeffs {
    pub theta: f64,
    pub a_bar: f64,
    pub a_under: f64,
    pub r: [f64; 2],
}

pub fn gradient_coeffs(b: &ModeBounds, k: &CostConstants) -> GradientCoeffs {
    let coupling = k.ell_y * b.norm_c * b.norm_g;
    let theta = coupling / (coupling + 2.0 * b.norm_pab);
    GradientCoeffs {
        theta,
        a_bar: ((1.0 - theta) * k.ell / 2.0).max(theta * b.lambda_max_p),
        a_under: ((1.0 - theta) * k.mu / 2.0).min(theta * b.lambda_min_p),
        r: [
            2.0 * theta * b.norm_pae,
            (1.0 - theta) * k.ell_y * b.norm_h * b.norm_g,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellBound {
    pub a_bar: f64,
    pub a_under: f64,
    pub ln_ratio: f64,
    pub tau_min: f64,
}

/// τ_d^min = (ℓ/2μ²)·ln(ā/a̲) with ā, a̲ taken over all modes.
pub fn gradient_dwell_bound(coeffs: &[GradientCoeffs], k: &CostConstants) -> DwellBound {
    let a_bar = coeffs.iter().map(|c| c.a_bar).fold(f64::NEG_INFINITY, f64::max);
    let a_under = coeffs.iter().map(|c| c.a_under).fold(f64::INFINITY, f64::min);
    let ln_ratio = (a_bar / a_under).ln();
    DwellBound {
        a_bar,
        a_under,
        ln_ratio,
        tau_min: k.ell / (2.0 * k.mu * k.mu) * ln_ratio,
    }
}

/// Admissible ϱ interval (ln(ā/a̲), 2μ²τ_d/ℓ).
pub fn gradient_varrho_window(bound: &DwellBound, k: &CostConstants, tau_d: f64) -> (f64, f64) {
    (bound.ln_ratio, 2.0 * k.mu * k.mu * tau_d / k.ell)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EissCoefficients {
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub d0: f64,
    pub varrho: f64,
}

/// Switching data for the switched E-ISS coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchedParams {
    pub dwell: DwellTimeParams,
    pub varrho: f64,
}

/// E-ISS coefficients of the gradient loop. With `switched = None` the single
/// mode `coeffs[0]` is used; `k` is the decrease constant entering d₀ (d̃ = k).
pub fn gradient_eiss_coeffs(
    coeffs: &[GradientCoeffs],
    k_cost: &CostConstants,
    switched: Option<SwitchedParams>,
    k: f64,
) -> Result<EissCoefficients> {
    let mu = k_cost.mu;
    let scale = if k > 0.0 { std::f64::consts::SQRT_2 / (k * mu.powi(2).min(1.0)) } else { f64::INFINITY };
    let b_rate = 2.0 * mu * mu / k_cost.ell;
    match switched {
        None => {
            let c = &coeffs[0];
            Ok(EissCoefficients {
                a0: (c.a_bar / c.a_under).sqrt(),
                b0: b_rate,
                c0: 0.0,
                d0: norm2(c.r) * scale,
                varrho: 0.0,
            })
        }
        Some(SwitchedParams { dwell, varrho }) => {
            let bound = gradient_dwell_bound(coeffs, k_cost);
            let (lo, hi) = gradient_varrho_window(&bound, k_cost, dwell.tau_d);
            if !(lo < hi) {
                return Err(Error::EmptyVarrhoWindow { lo, hi });
            }
            if !(varrho > lo && varrho < hi) {
                return Err(Error::InvalidArgument(format!(
                    "varrho = {varrho} outside admissible window ({lo}, {hi})"
                )));
            }
            let r_max = coeffs.iter().map(|c| norm2(c.r)).fold(0.0, f64::max);
            Ok(EissCoefficients {
                a0: (bound.a_bar * (dwell.n0 as f64 * varrho).exp() / bound.a_under).sqrt(),
                b0: b_rate - varrho / dwell.tau_d,
                c0: varrho - bound.ln_ratio,
                d0: r_max * scale,
                varrho,
            })
        }
    }
}

fn norm2(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFormParams {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub delta: f64,
    pub phi: f64,
    pub nu: f64,
    pub gamma: f64,
    pub theta: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl QuadFormParams {
    pub fn matrix(&self) -> Matrix2<f64> {
        let off = -0.5 * ((1.0 - self.theta) * self.eta + self.theta * self.delta);
        Matrix2::new(
            self.theta * (self.alpha / self.epsilon - self.beta - self.b * self.phi),
            off,
            off,
            (1.0 - self.theta) * (self.gamma - self.b * self.nu),
        )
    }

    /// θ = η/(η + δ), the optimizer of the feasible ε.
    pub fn optimal_theta(&self) -> f64 {
        self.eta / (self.eta + self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaA2Report {
    pub pd: bool,
    pub minors: (f64, f64),
    pub eps_star: f64,
    pub min_eigenvalue: f64,
}

pub fn lemma_a2_check(p: &QuadFormParams) -> LemmaA2Report {
    let m = p.matrix();
    let m11 = m[(0, 0)];
    let det = m11 * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let tr = m11 + m[(1, 1)];
    let disc = ((m11 - m[(1, 1)]).powi(2) + 4.0 * m[(0, 1)].powi(2)).sqrt();
    LemmaA2Report {
        pd: m11 > 0.0 && det > 0.0,
        minors: (m11, det),
        eps_star: p.alpha * p.gamma / (p.beta * p.gamma + p.eta * p.delta),
        min_eigenvalue: 0.5 * (tr - disc),
    }
}

/// Quadratic-form template of the gradient loop at time-scale ε, with θ at its optimizer and b = 0.
pub fn gradient_quad_form(b: &ModeBounds, k: &CostConstants, epsilon: f64) -> QuadFormParams {
    let coupling = k.ell_y * b.norm_c * b.norm_g;
    let mut p = QuadFormParams {
        alpha: b.lambda_min_q,
        beta: 2.0 * coupling * b.norm_pab,
        eta: coupling,
        delta: 2.0 * b.norm_pab,
        phi: b.lambda_max_p,
        nu: k.ell / (2.0 * k.mu * k.mu),
        gamma: 1.0,
        theta: 0.5,
        b: 0.0,
        epsilon,
    };
    p.theta = p.optimal_theta();
    p
}

/// k = λ̲(M̂)/2; non-positive when ε is infeasible.
pub fn decrease_constant(p: &QuadFormParams) -> f64 {
    lemma_a2_check(p).min_eigenvalue / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCertificate {
    pub modes: Vec<GradientCoeffs>,
    pub eps_bar: Vec<f64>,
    pub bound: DwellBound,
}

impl GradientCertificate {
    pub fn new(bounds: &[ModeBounds], k: &CostConstants) -> Self {
        let modes: Vec<_> = bounds.iter().map(|b| gradient_coeffs(b, k)).collect();
        Self {
            eps_bar: bounds.iter().map(|b| gradient_epsilon_bound(b, k.ell_y)).collect(),
            bound: gradient_dwell_bound(&modes, k),
            modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NesterovCertificate {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub delta_coeff: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub a_under: Vec<f64>,
    pub eps_bar: Vec<f64>,
    pub r: Vec<[f64; 2]>,
    pub a_bar_max: f64,
    pub a_under_min: f64,
    pub b: f64,
    pub c: f64,
    pub gamma: f64,
    pub tau_under: f64,
    pub restart_ok: bool,
    /// False when δκμ² ≤ 2ρ and c falls back to Δ − δ.
    pub c_log_branch: bool,
}

pub fn nesterov_constants(
    bounds: &[ModeBounds],
    k: &CostConstants,
    params: &NesterovParams,
) -> Result<NesterovCertificate> {
    let NesterovParams { kappa, rho, delta, big_delta, r0 } = *params;
    if !big_delta.is_finite() {
        return Err(Error::InvalidArgument("certificates need a finite Delta".into()));
    }
    let (mu, ell, ell_y) = (k.mu, k.ell, k.ell_y);
    let (lhs, rhs) = params.restart_margin(mu);
    let restart_ok = lhs > rhs;
    if r0 && !restart_ok {
        return Err(Error::RestartConditionViolated { lhs, rhs });
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let gamma = (rho / (4.0 * big_delta)).min(kappa * delta * mu / (8.0 * rho));
    let b = (delta * mu / (4.0 * ell * big_delta * big_delta)).min(rho * rho / (2.0 * kappa * ell * big_delta));
    let branch_den = delta * kappa * mu * mu - 2.0 * rho;
    let c_log_branch = branch_den > 0.0;
    let c = if c_log_branch {
        (big_delta * big_delta * kappa * mu * mu / branch_den).ln().max(big_delta - delta)
    } else {
        big_delta - delta
    };
    let mut cert = NesterovCertificate {
        theta: Vec::new(),
        eta: Vec::new(),
        delta_coeff: Vec::new(),
        a_bar: Vec::new(),
        a_under: Vec::new(),
        eps_bar: Vec::new(),
        r: Vec::new(),
        a_bar_max: f64::NEG_INFINITY,
        a_under_min: f64::INFINITY,
        b,
        c,
        gamma,
        tau_under: 0.0,
        restart_ok,
        c_log_branch,
    };
    for mb in bounds {
        let coupling = ell_y * mb.norm_c * mb.norm_g;
        let eta = 2.0 * sqrt2 * kappa * big_delta * coupling / rho;
        let dcoef = 2.0 * big_delta.exp() * rho * mb.norm_pab / delta;
        let theta = eta / (eta + dcoef);
        let a_bar = ((1.0 - theta) * kappa * ell * big_delta * big_delta / (2.0 * rho))
            .max(theta * mb.lambda_max_p * big_delta.exp());
        let a_under = ((1.0 - theta) / 2.0)
            .min((1.0 - theta) * kappa * mu * delta * delta / (4.0 * rho))
            .min(theta * mb.lambda_min_p * delta.exp());
        let den = gamma * delta * mb.lambda_max_p + 2.0 * sqrt2 * kappa * big_delta * coupling * mb.norm_pab;
        let eps_bar = if den == 0.0 {
            f64::INFINITY
        } else {
            (delta - big_delta).exp() * gamma * mb.lambda_min_q * delta / den
        };
        cert.theta.push(theta);
        cert.eta.push(eta);
        cert.delta_coeff.push(dcoef);
        cert.a_bar.push(a_bar);
        cert.a_under.push(a_under);
        cert.eps_bar.push(eps_bar);
        cert.r.push([
            2.0 * theta * mb.norm_pae,
            (1.0 - theta) * sqrt2 * kappa * ell_y * big_delta * big_delta / (2.0 * rho) * mb.norm_h * mb.norm_g,
        ]);
        cert.a_bar_max = cert.a_bar_max.max(a_bar);
        cert.a_under_min = cert.a_under_min.min(a_under);
    }
    cert.tau_under = (cert.a_bar_max.ln() - cert.a_under_min.ln()) / b;
    Ok(cert)
}

/// Time-scale bound of the practical (convex-only) result:
/// λ̲(Q)δ/(12Δℓ_yρ‖C‖‖G‖‖PA⁻¹B‖)·min{ρ/(κΔ), δℓ₀/(2ρℓ)}.
pub fn nesterov_practical_epsilon(b: &ModeBounds, k: &CostConstants, params: &NesterovParams) -> f64 {
    let NesterovParams { kappa, rho, delta, big_delta, .. } = *params;
    let den = 12.0 * big_delta * k.ell_y * rho * b.norm_c * b.norm_g * b.norm_pab;
    if den == 0.0 {
        return f64::INFINITY;
    }
    b.lambda_min_q * delta / den * (rho / (kappa * big_delta)).min(delta * k.ell0 / (2.0 * rho * k.ell))
}

/// Quadratic-form template whose threshold equals the accelerated ε̄σ.
pub fn nesterov_quad_form(
    mb: &ModeBounds,
    k: &CostConstants,
    params: &NesterovParams,
    gamma: f64,
    epsilon: f64,
) -> QuadFormParams {
    let NesterovParams { kappa, rho, delta, big_delta, .. } = *params;
    let eta = 2.0 * std::f64::consts::SQRT_2 * kappa * big_delta * k.ell_y * mb.norm_c * mb.norm_g / rho;
    let mut p = QuadFormParams {
        alpha: (delta - big_delta).exp() * delta * mb.lambda_min_q,
        beta: delta * mb.lambda_max_p,
        eta,
        delta: rho * mb.norm_pab,
        phi: 0.0,
        nu: 0.0,
        gamma,
        theta: 0.5,
        b: 0.0,
        epsilon,
    };
    p.theta = p.optimal_theta();
    p
}

/// E-ISS coefficients of the accelerated loop. The single-mode case uses mode
/// `mode`; the switched case takes ϱ in (ln(ā/a̲), bτ_d) and bounds the
/// per-jump decrease by min{ϱ − ln(ā/a̲), c}. `k` is the decrease constant (d̃ = k).
pub fn nesterov_eiss_coeffs(
    cert: &NesterovCertificate,
    mode: usize,
    switched: Option<SwitchedParams>,
    k: f64,
) -> Result<EissCoefficients> {
    let inv_k = if k > 0.0 { 1.0 / k } else { f64::INFINITY };
    match switched {
        None => Ok(EissCoefficients {
            a0: (cert.a_bar[mode] / cert.a_under[mode]).sqrt(),
            b0: cert.b,
            c0: cert.c,
            d0: norm2(cert.r[mode]) * inv_k,
            varrho: 0.0,
        }),
        Some(SwitchedParams { dwell, varrho }) => {
            let ln_ratio = (cert.a_bar_max / cert.a_under_min).ln();
            let (lo, hi) = (ln_ratio, cert.b * dwell.tau_d);
            if !(lo < hi) {
                return Err(Error::EmptyVarrhoWindow { lo, hi });
            }
            if !(varrho > lo && varrho < hi) {
                return Err(Error::InvalidArgument(format!(
                    "varrho = {varrho} outside admissible window ({lo}, {hi})"
                )));
            }
            let r_max = cert.r.iter().map(|r| norm2(*r)).fold(0.0, f64::max);
            Ok(EissCoefficients {
                a0: (cert.a_bar_max * (dwell.n0 as f64 * varrho).exp() / cert.a_under_min).sqrt(),
                b0: cert.b - varrho / dwell.tau_d,
                c0: (varrho - ln_ratio).min(cert.c),
                d0: r_max * inv_k,
                varrho,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorKind {
    Gradient,
    Nesterov(NesterovParams),
}

/// Lyapunov functions V = (1−θ)V₁ + θV₂ per mode, and W = e^{ϱτ}Vσ.
#[derive(Debug, Clone)]
pub struct LyapunovMonitor {
    pub kind: MonitorKind,
    pub theta: Vec<f64>,
    pub p: Vec<DMatrix<f64>>,
    pub varrho: f64,
    pub oracle: Oracle,
}

impl LyapunovMonitor {
    fn split(&self, arc_n: usize, m: usize, state: &[f64]) -> (DVector<f64>, DVector<f64>, Option<(DVector<f64>, f64)>) {
        let x = DVector::from_column_slice(&state[..arc_n]);
        let u = DVector::from_column_slice(&state[arc_n..arc_n + m]);
        let rest = match self.kind {
            MonitorKind::Nesterov(_) => Some((
                DVector::from_column_slice(&state[arc_n + m..arc_n + 2 * m]),
                state[arc_n + 2 * m],
            )),
            MonitorKind::Gradient => None,
        };
        (x, u, rest)
    }

    fn x_tilde(&self, sigma: usize, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        x - self.oracle.x_star(sigma, u, w)
    }

    /// V at a sample; W when `tau` is given.
    pub fn value(&self, n: usize, sigma: usize, state: &[f64], w: &DVector<f64>, tau: Option<f64>) -> f64 {
        let m = self.oracle.map.g.ncols();
        let (x, u, rest) = self.split(n, m, state);
        let xt = self.x_tilde(sigma, &x, &u, w);
        let theta = self.theta[sigma];
        let quad = xt.dot(&(&self.p[sigma] * &xt));
        let gap = self.oracle.f_gap(&u, w);
        let v = match (&self.kind, rest) {
            (MonitorKind::Nesterov(np), Some((u2, u3))) => {
                let u_star = self.oracle.u_star(w);
                let v1 = 0.5
                    * ((&u2 - &u).norm_squared()
                        + (&u2 - &u_star).norm_squared()
                        + np.kappa * u3 * u3 / np.rho * gap);
                (1.0 - theta) * v1 + theta * u3.exp() * quad
            }
            _ => (1.0 - theta) * gap + theta * quad,
        };
        match tau {
            Some(tau) => (self.varrho * tau).exp() * v,
            None => v,
        }
    }

    /// ‖z̃‖ in the Lyapunov coordinates: (x̃, u − u*) or (x̃, u₁ − u*, u₂ − u*).
    pub fn error_norm(&self, n: usize, sigma: usize, state: &[f64], w: &DVector<f64>) -> f64 {
        let m = self.oracle.map.g.ncols();
        let (x, u, rest) = self.split(n, m, state);
        let u_star = self.oracle.u_star(w);
        let mut sq = self.x_tilde(sigma, &x, &u, w).norm_squared() + (&u - &u_star).norm_squared();
        if let Some((u2, _)) = rest {
            sq += (u2 - &u_star).norm_squared();
        }
        sq.sqrt()
    }

    /// Practical-convergence weight α = θα_p + (1−θ)α_c with
    /// α_p = x̃ᵀPx̃e^{ϱu₃}, α_c = ¼‖u₁−u₂‖² + ¼‖u₂−u*‖² + κδ²(f(u₁) − f*).
    pub fn practical_alpha(&self, n: usize, sigma: usize, state: &[f64], w: &DVector<f64>, theta: f64, varrho: f64) -> f64 {
        let MonitorKind::Nesterov(np) = &self.kind else {
            return f64::NAN;
        };
        let m = self.oracle.map.g.ncols();
        let (x, u1, rest) = self.split(n, m, state);
        let (u2, u3) = rest.expect("accelerated state");
        let xt = self.x_tilde(sigma, &x, &u1, w);
        let alpha_p = xt.dot(&(&self.p[sigma] * &xt)) * (varrho * u3).exp();
        let u_star = self.oracle.u_star(w);
        let alpha_c = 0.25 * (&u1 - &u2).norm_squared()
            + 0.25 * (&u2 - &u_star).norm_squared()
            + np.kappa * np.delta * np.delta * self.oracle.f_gap(&u1, w);
        theta * alpha_p + (1.0 - theta) * alpha_c
    }
}

/// Lyapunov value at every arc sample.
pub fn lyapunov_series(arc: &HybridArc, monitor: &LyapunovMonitor, dist: &Disturbance, weighted: bool) -> Vec<f64> {
    arc.samples
        .iter()
        .map(|s| monitor.value(arc.n, s.sigma, &s.state, &dist.value(s.time.t), weighted.then_some(s.tau)))
        .collect()
}

/// ‖z̃‖ in Lyapunov coordinates at every arc sample.
pub fn error_series(arc: &HybridArc, monitor: &LyapunovMonitor, dist: &Disturbance) -> Vec<(HybridTime, f64)> {
    arc.samples
        .iter()
        .map(|s| (s.time, monitor.error_norm(arc.n, s.sigma, &s.state, &dist.value(s.time.t))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// max over samples of ‖z̃‖ − bound·(1 + tol); ≤ 0 when the envelope holds.
    pub max_violation: f64,
    pub first_violation: Option<HybridTime>,
    /// max over samples of ‖z̃‖ / bound.
    pub max_ratio: f64,
}

pub const ENVELOPE_TOL: f64 = 1e-6;

/// Envelope value a₀(e^{−(b₀t + c₀j)/2}‖z̃(0,0)‖ + d₀ sup‖ẇ‖).
pub fn envelope(coeffs: &EissCoefficients, time: HybridTime, z0_err: f64, sup_wdot: f64) -> f64 {
    let decay = (-(coeffs.b0 * time.t + coeffs.c0 * time.j as f64) / 2.0).exp();
    let ball = if sup_wdot == 0.0 { 0.0 } else { coeffs.d0 * sup_wdot };
    coeffs.a0 * (decay * z0_err + ball)
}

pub fn eiss_envelope_check(
    errors: &[(HybridTime, f64)],
    coeffs: &EissCoefficients,
    z0_err: f64,
    sup_wdot: f64,
) -> EnvelopeReport {
    // Absolute slack for rounding once the state reaches machine precision.
    let floor = 1e-13 * (1.0 + z0_err);
    let mut report = EnvelopeReport {
        holds: true,
        max_violation: f64::NEG_INFINITY,
        first_violation: None,
        max_ratio: 0.0,
    };
    for &(time, err) in errors {
        let bound = envelope(coeffs, time, z0_err, sup_wdot);
        let excess = err - bound * (1.0 + ENVELOPE_TOL) - floor;
        if excess > report.max_violation {
            report.max_violation = excess;
        }
        if bound > floor {
            report.max_ratio = report.max_ratio.max(err / bound);
        }
        if excess > 0.0 && report.first_violation.is_none() {
            report.first_violation = Some(time);
            report.holds = false;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecreaseMode {
    FlowRate,
    JumpContraction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreaseReport {
    pub holds: bool,
    /// Flow: largest log-derivative of V. Jump: largest V⁺/V.
    pub worst: f64,
    pub checked: usize,
    pub first_failure: Option<HybridTime>,
}

/// Relative V level below which samples are treated as numerically converged.
pub const MONITOR_FLOOR: f64 = 1e-12;

/// Flow mode: (ln V(b) − ln V(a))/(t_b − t_a) ≤ −rate(1 − tol) on consecutive flow samples
/// with tol = 0.05 + `step`. Jump mode: V⁺/V ≤ e^{−rate}(1 + 1e-9) at controller resets.
pub fn lyapunov_decrease_check(
    arc: &HybridArc,
    values: &[f64],
    mode: DecreaseMode,
    rate: f64,
    step: f64,
) -> DecreaseReport {
    let v0 = values.first().copied().unwrap_or(0.0);
    let floor = MONITOR_FLOOR * v0;
    let mut report = DecreaseReport {
        holds: true,
        worst: f64::NEG_INFINITY,
        checked: 0,
        first_failure: None,
    };
    let fail = |report: &mut DecreaseReport, time: HybridTime| {
        report.holds = false;
        report.first_failure.get_or_insert(time);
    };
    match mode {
        DecreaseMode::FlowRate => {
            let limit = -rate * (1.0 - (0.05 + step));
            for (i, pair) in arc.samples.windows(2).enumerate() {
                let (a, b): (&Sample, &Sample) = (&pair[0], &pair[1]);
                if a.time.j != b.time.j || values[i] <= floor || values[i + 1] <= floor {
                    continue;
                }
                let slope = (values[i + 1].ln() - values[i].ln()) / (b.time.t - a.time.t);
                report.checked += 1;
                report.worst = report.worst.max(slope);
                if slope > limit {
                    fail(&mut report, a.time);
                }
            }
        }
        DecreaseMode::JumpContraction => {
            let limit = (-rate).exp() * (1.0 + 1e-9);
            for (i, pair) in arc.samples.windows(2).enumerate() {
                let (a, b) = (&pair[0], &pair[1]);
                if b.time.j != a.time.j + 1 || values[i] <= floor {
                    continue;
                }
                let kind = arc.jumps.get(a.time.j).map(|j| j.1);
                if kind != Some(JumpKind::ControllerReset) {
                    continue;
                }
                let ratio = values[i + 1] / values[i];
                report.checked += 1;
                report.worst = report.worst.max(ratio);
                if ratio > limit {
                    fail(&mut report, a.time);
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PracticalBoundReport {
    pub holds: bool,
    /// Largest f(u₁) − f* − (min_{s<t} α(s)/u₃(t)² + ν).
    pub max_excess: f64,
    pub first_failure: Option<HybridTime>,
    pub checked: usize,
}

/// Checks f(u₁(t,j)) − f* ≤ α(s,j)/u₃(t,j)² + ν for all s < t in each flow interval.
pub fn practical_bound_check(
    arc: &HybridArc,
    monitor: &LyapunovMonitor,
    dist: &Disturbance,
    theta: f64,
    varrho: f64,
    nu: f64,
) -> PracticalBoundReport {
    let mut report = PracticalBoundReport {
        holds: true,
        max_excess: f64::NEG_INFINITY,
        first_failure: None,
        checked: 0,
    };
    let mut alpha_min = f64::INFINITY;
    let mut current_j = usize::MAX;
    for s in &arc.samples {
        let w = dist.value(s.time.t);
        if s.time.j != current_j {
            current_j = s.time.j;
            alpha_min = f64::INFINITY;
        }
        if alpha_min.is_finite() {
            let u3 = arc.u3(s).unwrap_or(1.0);
            let gap = monitor.oracle.f_gap(&arc.u(s), &w);
            let excess = gap - (alpha_min / (u3 * u3) + nu);
            report.checked += 1;
            report.max_excess = report.max_excess.max(excess);
            if excess > 0.0 {
                report.holds = false;
                report.first_failure.get_or_insert(s.time);
            }
        }
        alpha_min = alpha_min.min(monitor.practical_alpha(arc.n, s.sigma, &s.state, &w, theta, varrho));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_bounds(p: f64, q: f64) -> ModeBounds {
        // A = −1, B = E = C = 1, so ‖PA⁻¹B‖ = ‖PA⁻¹E‖ = P.
        ModeBounds {
            norm_c: 1.0,
            norm_g: 1.0,
            norm_h: 1.0,
            norm_pab: p,
            norm_pae: p,
            lambda_min_q: q,
            lambda_min_p: p,
            lambda_max_p: p,
        }
    }

    fn consts(ell_u: f64, ell_y: f64, mu: f64) -> CostConstants {
        CostConstants { ell_u, ell_y, ell: ell_u + ell_y, mu, ell0: mu / 2.0, nu0: 0.0 }
    }

    #[test]
    fn epsilon_bound_scalar() {
        let b = scalar_bounds(0.5, 1.0);
        assert_eq!(gradient_epsilon_bound(&b, 1.0), 0.5);
        assert!(gradient_epsilon_bound(&b, 0.0).is_infinite());
        let doubled = ModeBounds { lambda_min_q: 2.0, ..b };
        assert_eq!(gradient_epsilon_bound(&doubled, 1.0), 1.0);
    }

    #[test]
    fn coeffs_scalar() {
        let k = consts(2.0, 2.0, 4.0);
        let c = gradient_coeffs(&scalar_bounds(0.5, 1.0), &CostConstants { ell_y: 1.0, ..k });
        assert_eq!(c.theta, 0.5);
        assert_eq!(c.a_bar, 1.0);
        assert_eq!(c.a_under, 0.25);
    }

    #[test]
    fn dwell_bound_plug_in() {
        let k = CostConstants { ell_u: 0.0, ell_y: 4.0, ell: 4.0, mu: 2.0, ell0: 1.0, nu0: 0.0 };
        let c = GradientCoeffs { theta: 0.5, a_bar: std::f64::consts::E, a_under: 1.0, r: [0.0; 2] };
        let b = gradient_dwell_bound(&[c], &k);
        assert!((b.tau_min - 0.5).abs() < 1e-15);
        let same = GradientCoeffs { a_bar: 1.0, ..c };
        assert_eq!(gradient_dwell_bound(&[same], &k).tau_min, 0.0);
    }

    #[test]
    fn lemma_a2_example() {
        let p = QuadFormParams {
            alpha: 1.0, beta: 1.0, eta: 1.0, delta: 1.0, phi: 1.0, nu: 1.0, gamma: 1.0,
            theta: 0.5, b: 0.0, epsilon: 0.1,
        };
        let r = lemma_a2_check(&p);
        assert!(r.pd);
        assert!((r.minors.0 - 4.5).abs() < 1e-12);
        assert!((r.minors.1 - 2.0).abs() < 1e-12);
        assert_eq!(r.eps_star, 0.5);
        let heavy = QuadFormParams { b: 1.0, ..p };
        assert!(!lemma_a2_check(&heavy).pd);
    }

    #[test]
    fn practical_epsilon_all_ones() {
        let b = scalar_bounds(1.0, 1.0);
        let k = CostConstants { ell_u: 0.0, ell_y: 1.0, ell: 1.0, mu: 0.0, ell0: 1.0, nu0: 1.0 };
        let p = NesterovParams::new(1.0, 1.0, 1.0, 2.0, false).unwrap();
        assert!((nesterov_practical_epsilon(&b, &k, &p) - 1.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn nesterov_eps_threshold_matches_quad_form() {
        let b = scalar_bounds(0.5, 1.0);
        let k = consts(1.0, 1.0, 2.0);
        let p = NesterovParams::new(1.0, 1.0, 1.0, 2.0, true).unwrap();
        let cert = nesterov_constants(&[b], &k, &p).unwrap();
        let qf = nesterov_quad_form(&b, &k, &p, cert.gamma, cert.eps_bar[0] / 2.0);
        assert!((lemma_a2_check(&qf).eps_star / cert.eps_bar[0] - 1.0).abs() < 1e-12);
        assert!(decrease_constant(&qf) > 0.0);
    }

    #[test]
    fn envelope_detects_tightened_rate() {
        let errs: Vec<_> = (0..100)
            .map(|i| {
                let t = i as f64 * 0.1;
                (HybridTime { t, j: 0 }, (-t).exp())
            })
            .collect();
        let c = EissCoefficients { a0: 1.0, b0: 2.0, c0: 0.0, d0: 0.0, varrho: 0.0 };
        assert!(eiss_envelope_check(&errs, &c, 1.0, 0.0).holds);
        let tight = EissCoefficients { b0: 4.0, ..c };
        let r = eiss_envelope_check(&errs, &tight, 1.0, 0.0);
        assert!(!r.holds);
        assert_eq!(r.first_violation.unwrap().t, 0.1);
    }
}
