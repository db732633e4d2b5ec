//! Certificate analysis of a whole scenario and its text/key-value reports.

use std::fmt::Write as _;

use crate::certificates::{
    self, decrease_constant, gradient_quad_form, mode_bounds, nesterov_constants, nesterov_eiss_coeffs,
    nesterov_practical_epsilon, nesterov_quad_form, EissCoefficients, GradientCertificate, LyapunovMonitor,
    ModeBounds, MonitorKind, NesterovCertificate, SwitchedParams,
};
use crate::controller::ControllerConfig;
use crate::cost::{constants_for, Cost, CostConstants};
use crate::error::Result;
use crate::plant::{check_common_maps, mode_eigenvalues, CommonMapsReport, StabilityCertificate, SteadyStateMap};
use crate::sim::{Oracle, Scenario, SignalSource};

/// ε-independent bounds: per-mode ε̄ and the dwell-time bound.
#[derive(Debug, Clone)]
pub struct StaticBounds {
    pub constants: CostConstants,
    pub map: SteadyStateMap,
    pub certs: Vec<StabilityCertificate>,
    pub bounds: Vec<ModeBounds>,
    pub gradient: Option<GradientCertificate>,
    pub nesterov: Option<NesterovCertificate>,
    /// Time-scale bound the controller must respect in each mode.
    pub eps_bar: Vec<f64>,
    /// Which formula produced `eps_bar`.
    pub eps_source: &'static str,
    pub dwell_bound: Option<f64>,
    pub notes: Vec<String>,
}

impl StaticBounds {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let map = sc.map()?;
        let constants = constants_for(&sc.cost, &map, sc.certificates.quartic_radius, sc.certificates.nu0);
        let certs = sc.stability_certificates()?;
        let bounds = sc
            .plant
            .modes
            .iter()
            .zip(&certs)
            .map(|(mode, cert)| mode_bounds(mode, cert, &sc.plant.c, &map))
            .collect::<Result<Vec<_>>>()?;
        let mut notes = Vec::new();
        let quadratic = matches!(sc.cost, Cost::Quadratic(_));
        let (gradient, nesterov, eps_bar, eps_source, dwell_bound) = match &sc.controller {
            ControllerConfig::Gradient => {
                let g = GradientCertificate::new(&bounds, &constants);
                let eps = g.eps_bar.clone();
                let dwell = g.bound.tau_min;
                (Some(g), None, eps, "gradient", Some(dwell))
            }
            ControllerConfig::Nesterov(p) if !p.resets() => {
                notes.push("restarts disabled (Delta = inf): no certificate applies".into());
                (None, None, vec![0.0; bounds.len()], "none", None)
            }
            ControllerConfig::Nesterov(p) => {
                let cert = match nesterov_constants(&bounds, &constants, p) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        notes.push(format!("accelerated constants unavailable: {e}"));
                        None
                    }
                };
                if let Some(c) = &cert {
                    if !c.c_log_branch {
                        notes.push("delta*kappa*mu^2 <= 2*rho: c uses the Delta - delta branch alone".into());
                    }
                }
                if p.r0 && quadratic {
                    let eps = cert.as_ref().map_or(vec![0.0; bounds.len()], |c| c.eps_bar.clone());
                    let dwell = cert.as_ref().map(|c| c.tau_under);
                    (None, cert, eps, "accelerated", dwell)
                } else {
                    let eps = bounds.iter().map(|b| nesterov_practical_epsilon(b, &constants, p)).collect();
                    (None, cert, eps, "practical", None)
                }
            }
        };
        Ok(Self {
            constants,
            map,
            certs,
            bounds,
            gradient,
            nesterov,
            eps_bar,
            eps_source,
            dwell_bound,
            notes,
        })
    }
}

/// Everything needed to monitor a simulated arc against its certificates.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub bounds: StaticBounds,
    pub oracle: Oracle,
    pub common_maps: CommonMapsReport,
    /// Decrease constant k = λ̲(M̂)/2 at the configured ε (minimum over modes).
    pub k: f64,
    pub switched: bool,
    pub varrho_window: Option<(f64, f64)>,
    pub eiss: Option<EissCoefficients>,
    pub monitor: LyapunovMonitor,
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let bounds = StaticBounds::new(sc)?;
        let oracle = Oracle::new(&sc.plant, &sc.cost)?;
        let common_maps = check_common_maps(&sc.plant, 1e-8)?;
        let mut notes = bounds.notes.clone();
        let switched = sc.plant.num_modes() > 1
            && match &sc.switching.source {
                SignalSource::Explicit(events) => events.len() > 1,
                SignalSource::Generated { .. } => true,
            };
        let k_cost = &bounds.constants;
        let initial_mode = sc.realize_signal().map(|s| s.events[0].1).unwrap_or(0);
        let mut k = f64::INFINITY;
        let mut varrho_window = None;
        let mut eiss = None;
        let (kind, theta) = match &sc.controller {
            ControllerConfig::Gradient => {
                let g = bounds.gradient.as_ref().expect("gradient certificate");
                for (b, eps) in bounds.bounds.iter().zip(&sc.epsilon) {
                    k = k.min(decrease_constant(&gradient_quad_form(b, k_cost, *eps)));
                }
                if switched {
                    match sc.switching.dwell {
                        Some(dwell) => {
                            let window = certificates::gradient_varrho_window(&g.bound, k_cost, dwell.tau_d);
                            varrho_window = Some(window);
                            let varrho = sc.certificates.varrho.unwrap_or(0.5 * (window.0 + window.1));
                            match certificates::gradient_eiss_coeffs(
                                &g.modes,
                                k_cost,
                                Some(SwitchedParams { dwell, varrho }),
                                k,
                            ) {
                                Ok(c) => eiss = Some(c),
                                Err(e) => notes.push(format!("E-ISS coefficients unavailable: {e}")),
                            }
                        }
                        None => notes.push("switched scenario without dwell parameters: no E-ISS envelope".into()),
                    }
                } else {
                    eiss = certificates::gradient_eiss_coeffs(&g.modes[initial_mode..=initial_mode], k_cost, None, k).ok();
                }
                (MonitorKind::Gradient, g.modes.iter().map(|c| c.theta).collect::<Vec<_>>())
            }
            ControllerConfig::Nesterov(p) => {
                let theta = match &bounds.nesterov {
                    Some(cert) => cert.theta.clone(),
                    None => vec![0.5; sc.plant.num_modes()],
                };
                if let (Some(cert), true, true) = (&bounds.nesterov, p.r0, k_cost.mu > 0.0) {
                    for (b, eps) in bounds.bounds.iter().zip(&sc.epsilon) {
                        k = k.min(decrease_constant(&nesterov_quad_form(b, k_cost, p, cert.gamma, *eps)));
                    }
                    if switched {
                        if let Some(dwell) = sc.switching.dwell {
                            let lo = (cert.a_bar_max / cert.a_under_min).ln();
                            let window = (lo, cert.b * dwell.tau_d);
                            varrho_window = Some(window);
                            let varrho = sc.certificates.varrho.unwrap_or(0.5 * (window.0 + window.1));
                            match nesterov_eiss_coeffs(cert, 0, Some(SwitchedParams { dwell, varrho }), k) {
                                Ok(c) => eiss = Some(c),
                                Err(e) => notes.push(format!("E-ISS coefficients unavailable: {e}")),
                            }
                        }
                    } else {
                        eiss = nesterov_eiss_coeffs(cert, initial_mode, None, k).ok();
                    }
                }
                (MonitorKind::Nesterov(*p), theta)
            }
        };
        let monitor = LyapunovMonitor {
            kind,
            theta,
            p: bounds.certs.iter().map(|c| c.p.clone()).collect(),
            varrho: eiss.map_or(0.0, |c| c.varrho),
            oracle: oracle.clone(),
        };
        Ok(Self {
            bounds,
            oracle,
            common_maps,
            k,
            switched,
            varrho_window,
            eiss,
            monitor,
            notes,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub pass: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub lines: Vec<CheckLine>,
    pub values: Vec<(String, String)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass != Some(false))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let tag = match line.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "N/A ",
            };
            let _ = writeln!(out, "{tag} {:<24} {}", line.label, line.detail);
        }
        out
    }

    /// Flat `key = value` document.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn certificate_report(sc: &Scenario) -> Result<CertificateReport> {
    sc.validate()?;
    let an = Analysis::new(sc)?;
    let sb = &an.bounds;
    let mut lines = Vec::new();
    let mut values: Vec<(String, String)> = Vec::new();
    let k = &sb.constants;
    for (key, v) in [("ell_u", k.ell_u), ("ell_y", k.ell_y), ("ell", k.ell), ("mu", k.mu), ("ell0", k.ell0), ("nu0", k.nu0)] {
        values.push((format!("constants.{key}"), format!("{v:e}")));
    }
    for (i, mode) in sc.plant.modes.iter().enumerate() {
        let ev = mode_eigenvalues(mode)?;
        let max_re = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let listed: Vec<String> = ev
            .iter()
            .map(|z| if z.im == 0.0 { format!("{:.4}", z.re) } else { format!("{:.4}{:+.4}i", z.re, z.im) })
            .collect();
        lines.push(CheckLine {
            label: format!("mode {} Hurwitz", i + 1),
            pass: Some(max_re < crate::linalg::HURWITZ_TOL),
            detail: format!("eigenvalues {{{}}}", listed.join(", ")),
        });
        values.push((format!("mode{}.max_real_eigenvalue", i + 1), format!("{max_re:e}")));
    }
    lines.push(CheckLine {
        label: "common steady-state maps".into(),
        pass: if sc.plant.num_modes() > 1 { Some(an.common_maps.common) } else { None },
        detail: format!("max deviation {}", fmt(an.common_maps.max_deviation)),
    });
    for (i, (bar, eps)) in sb.eps_bar.iter().zip(&sc.epsilon).enumerate() {
        let ok = *eps < *bar;
        lines.push(CheckLine {
            label: format!("mode {} epsilon", i + 1),
            pass: Some(ok),
            detail: format!("epsilon {} vs bound {} ({})", fmt(*eps), fmt(*bar), sb.eps_source),
        });
        values.push((format!("mode{}.eps_bar", i + 1), format!("{bar:e}")));
        values.push((format!("mode{}.epsilon", i + 1), format!("{eps:e}")));
    }
    if let ControllerConfig::Nesterov(p) = &sc.controller {
        if p.resets() && k.mu > 0.0 {
            let (lhs, rhs) = p.restart_margin(k.mu);
            lines.push(CheckLine {
                label: "restart condition".into(),
                pass: if p.r0 { Some(lhs > rhs) } else { None },
                detail: format!("Delta^2 - delta^2 = {} vs 2 rho/(kappa mu) = {}", fmt(lhs), fmt(rhs)),
            });
        }
        if let Some(c) = &sb.nesterov {
            for (key, v) in [("b", c.b), ("c", c.c), ("gamma", c.gamma), ("tau_under", c.tau_under)] {
                values.push((format!("accelerated.{key}"), format!("{v:e}")));
            }
        }
    }
    match (an.switched, sb.dwell_bound, sc.switching.dwell) {
        (true, Some(bound), Some(dwell)) => {
            lines.push(CheckLine {
                label: "dwell time".into(),
                pass: Some(dwell.tau_d > bound),
                detail: format!("tau_d {} vs bound {}", fmt(dwell.tau_d), fmt(bound)),
            });
            values.push(("dwell.bound".into(), format!("{bound:e}")));
            values.push(("dwell.tau_d".into(), format!("{:e}", dwell.tau_d)));
        }
        (true, _, _) => lines.push(CheckLine {
            label: "dwell time".into(),
            pass: Some(false),
            detail: "no dwell-time certificate for this configuration".into(),
        }),
        (false, _, _) => lines.push(CheckLine {
            label: "dwell time".into(),
            pass: None,
            detail: "single mode: not applicable".into(),
        }),
    }
    if let Some((lo, hi)) = an.varrho_window {
        lines.push(CheckLine {
            label: "varrho window".into(),
            pass: Some(lo < hi),
            detail: format!("({}, {})", fmt(lo), fmt(hi)),
        });
    }
    match &an.eiss {
        Some(c) => {
            lines.push(CheckLine {
                label: "E-ISS coefficients".into(),
                pass: Some(c.b0 > 0.0 && c.a0.is_finite()),
                detail: format!("a0 {} b0 {} c0 {} d0 {} varrho {}", fmt(c.a0), fmt(c.b0), fmt(c.c0), fmt(c.d0), fmt(c.varrho)),
            });
            for (key, v) in [("a0", c.a0), ("b0", c.b0), ("c0", c.c0), ("d0", c.d0), ("varrho", c.varrho)] {
                values.push((format!("eiss.{key}"), format!("{v:e}")));
            }
        }
        None => lines.push(CheckLine {
            label: "E-ISS coefficients".into(),
            pass: None,
            detail: "not available for this configuration".into(),
        }),
    }
    if sb.eps_source == "none" {
        lines.push(CheckLine {
            label: "controller certificate".into(),
            pass: Some(false),
            detail: "restarts disabled".into(),
        });
    }
    for note in &an.notes {
        lines.push(CheckLine {
            label: "note".into(),
            pass: None,
            detail: note.clone(),
        });
    }
    Ok(CertificateReport { lines, values })
}
