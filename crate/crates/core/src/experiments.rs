//! Named experiment presets. Each preset builds a set of arms, runs them
//! concurrently and evaluates its pass/fail checks.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificates::{
    eiss_envelope_check, error_series, lyapunov_decrease_check, practical_bound_check, DecreaseMode,
};
use crate::controller::{ControllerConfig, NesterovParams};
use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::instances::{
    apply_certified_defaults, build_random_instance, build_random_single_mode, ctm_scenario, default_step,
    scalar_quadratic, scalar_quadratic_weighted, scalar_quartic, CtmParams,
};
use crate::linalg::eigenvalues;
use crate::output::{write_csv, ArcSeries, RunSummary};
use crate::report::Analysis;
use crate::sim::{simulate, HybridArc, Scenario};
use crate::switching::validate_adt;

const QUARTIC_COMPARISON_HORIZON: f64 = 60.0;

pub const EXPERIMENTS: &[&str] = &[
    "grad-regulation",
    "grad-switched",
    "grad-tracking",
    "nesterov-regulation",
    "nesterov-switched",
    "nesterov-tracking",
    "quartic",
    "ctm",
    "grad-vs-nesterov",
];

/// One simulated arm with its monitors.
#[derive(Debug, Clone)]
pub struct Arm {
    pub name: String,
    pub scenario: Scenario,
    pub analysis: Analysis,
    pub arc: HybridArc,
    pub series: ArcSeries,
    pub summary: RunSummary,
}

impl Arm {
    pub fn run(name: &str, scenario: Scenario) -> Result<Self> {
        let analysis = Analysis::new(&scenario)?;
        let arc = simulate(&scenario)?;
        let series = ArcSeries::new(&scenario, &analysis, &arc);
        let summary = RunSummary::new(&arc, &series);
        Ok(Self {
            name: name.to_string(),
            scenario,
            analysis,
            arc,
            series,
            summary,
        })
    }

    /// Largest tracking error over the last `fraction` of the horizon.
    pub fn tail_max(&self, fraction: f64) -> f64 {
        let from = (1.0 - fraction) * self.scenario.integrator.horizon;
        self.arc
            .samples
            .iter()
            .zip(&self.series.err_track)
            .filter(|(s, _)| s.time.t >= from)
            .map(|(_, e)| *e)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First time after which the tracking error stays at or below `threshold`.
    pub fn settling_time(&self, threshold: f64) -> Option<f64> {
        let mut last_above = None;
        for (s, e) in self.arc.samples.iter().zip(&self.series.err_track) {
            if !(*e <= threshold) {
                last_above = Some(s.time.t);
            }
        }
        match last_above {
            None => Some(0.0),
            Some(t) if t >= self.arc.last().time.t => None,
            Some(t) => self.arc.samples.iter().map(|s| s.time.t).find(|&u| u > t),
        }
    }

    pub fn final_error(&self) -> f64 {
        if self.arc.divergence.is_some() {
            f64::INFINITY
        } else {
            self.summary.final_error
        }
    }
}

pub fn run_arms(arms: Vec<(String, Scenario)>) -> Result<Vec<Arm>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = arms
            .into_iter()
            .map(|(name, sc)| scope.spawn(move || Arm::run(&name, sc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("experiment arm panicked".into()))))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    pub seed: u64,
    pub arms: Vec<Arm>,
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentResult {
    fn new(name: &str, seed: u64, arms: Vec<Arm>) -> Self {
        Self {
            name: name.to_string(),
            seed,
            arms,
            metrics: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn arm(&self, name: &str) -> &Arm {
        self.arms.iter().find(|a| a.name == name).expect("arm exists")
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.push((key.into(), value));
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    /// Summary document in TOML.
    pub fn summary_toml(&self) -> String {
        use toml::{Table, Value};
        let mut doc = Table::new();
        let mut head = Table::new();
        head.insert("name".into(), Value::String(self.name.clone()));
        head.insert("seed".into(), Value::Integer(self.seed as i64));
        head.insert("all_pass".into(), Value::Boolean(self.all_pass()));
        doc.insert("experiment".into(), Value::Table(head));
        let mut arms = Table::new();
        for arm in &self.arms {
            let mut t = Table::new();
            t.insert("final_time".into(), Value::Float(arm.summary.final_time));
            t.insert("final_error".into(), Value::Float(arm.summary.final_error));
            t.insert("plant_switches".into(), Value::Integer(arm.summary.plant_switches as i64));
            t.insert("controller_resets".into(), Value::Integer(arm.summary.controller_resets as i64));
            t.insert("diverged".into(), Value::Boolean(arm.summary.divergence.is_some()));
            t.insert(
                "epsilon".into(),
                Value::Array(arm.scenario.epsilon.iter().map(|e| Value::Float(*e)).collect()),
            );
            arms.insert(arm.name.clone(), Value::Table(t));
        }
        doc.insert("arms".into(), Value::Table(arms));
        let mut metrics = Table::new();
        for (k, v) in &self.metrics {
            metrics.insert(k.clone(), Value::Float(*v));
        }
        doc.insert("metrics".into(), Value::Table(metrics));
        let mut checks = Table::new();
        for c in &self.checks {
            let mut t = Table::new();
            t.insert("pass".into(), Value::Boolean(c.pass));
            t.insert("detail".into(), Value::String(c.detail.clone()));
            checks.insert(c.name.clone(), Value::Table(t));
        }
        doc.insert("checks".into(), Value::Table(checks));
        doc.insert(
            "notes".into(),
            Value::Array(self.notes.iter().map(|n| Value::String(n.clone())).collect()),
        );
        toml::to_string(&doc).unwrap_or_default()
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("experiment {} (seed {})\n", self.name, self.seed);
        for arm in &self.arms {
            out.push_str(&format!("  arm {:<16} {}\n", arm.name, arm.summary.render()));
        }
        for (k, v) in &self.metrics {
            out.push_str(&format!("  {k} = {v:.6e}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!("  {} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }

    /// Writes `<arm>.csv` per arm and `summary.toml` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for arm in &self.arms {
            let file = fs::File::create(dir.join(format!("{}.csv", arm.name)))?;
            write_csv(BufWriter::new(file), &arm.scenario, &arm.arc, &arm.series)?;
        }
        fs::write(dir.join("summary.toml"), self.summary_toml())?;
        Ok(())
    }
}

pub fn run_experiment(name: &str, seed: u64) -> Result<ExperimentResult> {
    match name {
        "grad-regulation" => grad_regulation(seed),
        "grad-switched" => grad_switched(seed),
        "grad-tracking" => grad_tracking(seed),
        "nesterov-regulation" => nesterov_regulation(seed),
        "nesterov-switched" => nesterov_switched(seed),
        "nesterov-tracking" => nesterov_tracking(seed),
        "quartic" => quartic(seed),
        "ctm" => ctm(seed),
        "grad-vs-nesterov" => grad_vs_nesterov(seed),
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

fn envelope_check(res: &mut ExperimentResult, arm_name: &str) {
    let arm = res.arm(arm_name);
    let an = &arm.analysis;
    let Some(coeffs) = an.eiss else {
        res.check(format!("{arm_name}.envelope"), false, "no E-ISS coefficients");
        return;
    };
    let errors = error_series(&arm.arc, &an.monitor, &arm.scenario.disturbance);
    let sup = arm.scenario.disturbance.sup_derivative();
    let rep = eiss_envelope_check(&errors, &coeffs, errors[0].1, sup);
    let diverged = arm.arc.divergence.is_some();
    let detail = format!(
        "max ratio {:.3e}, a0 {:.3e} b0 {:.3e} c0 {:.3e} d0 {:.3e}",
        rep.max_ratio, coeffs.a0, coeffs.b0, coeffs.c0, coeffs.d0
    );
    res.metric(format!("{arm_name}.envelope_max_ratio"), rep.max_ratio);
    res.check(format!("{arm_name}.envelope"), rep.holds && !diverged, detail);
}

fn adt_check(res: &mut ExperimentResult, arm_name: &str) {
    let arm = res.arm(arm_name);
    let Some(dwell) = arm.scenario.switching.dwell else {
        res.check(format!("{arm_name}.adt"), false, "no dwell parameters");
        return;
    };
    let rep = validate_adt(&arm.arc.signal, &dwell);
    let switches = arm.summary.plant_switches;
    res.check(
        format!("{arm_name}.adt"),
        rep.valid && switches > 0,
        format!("{switches} switches, worst excess {:.3e}", rep.worst_excess),
    );
}

fn grad_regulation(seed: u64) -> Result<ExperimentResult> {
    let sc = build_random_single_mode(seed)?;
    let mut res = ExperimentResult::new("grad-regulation", seed, run_arms(vec![("gradient".into(), sc)])?);
    envelope_check(&mut res, "gradient");
    Ok(res)
}

fn grad_switched(seed: u64) -> Result<ExperimentResult> {
    let sc = build_random_instance(seed)?;
    let mut res = ExperimentResult::new("grad-switched", seed, run_arms(vec![("gradient".into(), sc)])?);
    envelope_check(&mut res, "gradient");
    adt_check(&mut res, "gradient");
    Ok(res)
}

/// Sinusoid with frequency ω along a seeded unit direction, scaled so that sup‖ẇ‖ = `sup`.
fn sinusoid(seed: u64, q: usize, offset: DVector<f64>, sup: f64, omega: f64, freeze_at: Option<f64>) -> Disturbance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157);
    let dir = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
    let dir = &dir / dir.norm();
    Disturbance::Sinusoid {
        offset,
        amplitude: dir * (sup / omega),
        omega,
        phase: 0.0,
        freeze_at,
    }
}

fn tracking_arms(base: &Scenario, seed: u64, horizon: f64) -> Vec<(String, Scenario)> {
    let q = base.plant.q();
    let offset = base.disturbance.value(0.0);
    let omega = 0.5;
    let mut arms = Vec::new();
    for (name, sup, freeze) in [("sup0.1", 0.1, None), ("sup1", 1.0, None), ("frozen", 1.0, Some(0.5 * horizon))] {
        let mut sc = base.clone();
        sc.disturbance = sinusoid(seed, q, offset.clone(), sup, omega, freeze);
        sc.integrator.horizon = horizon;
        sc.integrator.sample_every = ((horizon / sc.integrator.step) / 4000.0).ceil().max(1.0) as usize;
        arms.push((name.to_string(), sc));
    }
    arms
}

fn tracking_checks(res: &mut ExperimentResult) {
    let mut limsup = [0.0; 2];
    for (i, (name, sup)) in [("sup0.1", 0.1), ("sup1", 1.0)].into_iter().enumerate() {
        let arm = res.arm(name);
        let tail = arm.tail_max(0.2);
        let gain = arm.analysis.eiss.map_or(f64::NAN, |c| c.a0 * c.d0);
        limsup[i] = tail;
        res.metric(format!("{name}.limsup"), tail);
        res.metric(format!("{name}.iss_bound"), gain * sup);
        res.check(
            format!("{name}.iss_bound"),
            tail <= gain * sup,
            format!("limsup {tail:.3e} vs a0 d0 sup|dw| = {:.3e}", gain * sup),
        );
    }
    let ratio = limsup[1] / limsup[0];
    res.metric("limsup_ratio", ratio);
    res.check("linear_scaling", (5.0..=20.0).contains(&ratio), format!("limsup ratio {ratio:.3} for a 10x sup|dw| ratio"));
    let frozen = res.arm("frozen").final_error();
    res.metric("frozen.final_error", frozen);
    res.check("frozen.converges", frozen < 1e-4, format!("final error {frozen:.3e} after freezing at mid-horizon"));
}

fn grad_tracking(seed: u64) -> Result<ExperimentResult> {
    let base = build_random_single_mode(seed)?;
    let horizon = 2.0 * base.integrator.horizon.max(60.0);
    let mut res = ExperimentResult::new("grad-tracking", seed, run_arms(tracking_arms(&base, seed, horizon))?);
    tracking_checks(&mut res);
    Ok(res)
}

/// Restarted accelerated controller on the scalar instance: κ = ρ = δ = 1, Δ = 2, r₀ = 1, w = 1.
pub fn scalar_nesterov(big_delta: f64, horizon: f64) -> Result<Scenario> {
    scalar_quadratic(
        ControllerConfig::Nesterov(NesterovParams::new(1.0, 1.0, 1.0, big_delta, true)?),
        1.0,
        0.0,
        horizon,
    )
}

fn nesterov_regulation(seed: u64) -> Result<ExperimentResult> {
    let restarted = scalar_nesterov(2.0, 40.0)?;
    let mut unrestarted = restarted.clone();
    if let ControllerConfig::Nesterov(p) = &mut unrestarted.controller {
        p.big_delta = f64::INFINITY;
    }
    let mut res = ExperimentResult::new(
        "nesterov-regulation",
        seed,
        run_arms(vec![("restarted".into(), restarted), ("no-restart".into(), unrestarted)])?,
    );
    envelope_check(&mut res, "restarted");
    let arm = res.arm("restarted");
    let values = crate::certificates::lyapunov_series(&arm.arc, &arm.analysis.monitor, &arm.scenario.disturbance, false);
    let c = arm.analysis.bounds.nesterov.as_ref().map_or(f64::NAN, |n| n.c);
    let rep = lyapunov_decrease_check(&arm.arc, &values, DecreaseMode::JumpContraction, c, arm.scenario.integrator.step);
    res.metric("restarted.worst_reset_ratio", rep.worst);
    res.metric("restarted.exp_minus_c", (-c).exp());
    res.check(
        "restarted.reset_contraction",
        rep.holds && rep.checked > 0,
        format!("{} resets, worst V+/V {:.4} vs e^-c {:.4}", rep.checked, rep.worst, (-c).exp()),
    );
    let fin = res.arm("restarted").final_error();
    let unr = res.arm("no-restart").final_error();
    res.metric("restarted.final_error", fin);
    res.metric("no-restart.final_error", unr);
    res.check("restarted.converges", fin <= 1e-3, format!("final error {fin:.3e}"));
    res.check(
        "no-restart.degrades",
        !(unr <= 10.0 * fin),
        format!("terminal error {unr:.3e} vs 10x restarted {:.3e}", 10.0 * fin),
    );
    Ok(res)
}

fn nesterov_on_random(seed: u64, num_modes_two: bool) -> Result<Scenario> {
    let mut sc = if num_modes_two { build_random_instance(seed)? } else { build_random_single_mode(seed)? };
    sc.controller = ControllerConfig::Nesterov(NesterovParams::new(1.0, 1.0, 1.0, 2.0, true)?);
    let bounds = apply_certified_defaults(&mut sc, Some(0.5), num_modes_two.then_some(2.0))?;
    let cert = bounds
        .nesterov
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("accelerated certificate unavailable".into()))?;
    let tau_d = sc.switching.dwell.map_or(0.0, |d| d.tau_d);
    sc.integrator.horizon = (8.0 / cert.b).min(400.0).max(2.0 * tau_d).max(20.0);
    sc.integrator.step = default_step(&sc.epsilon);
    sc.integrator.sample_every = ((sc.integrator.horizon / sc.integrator.step) / 4000.0).ceil().max(1.0) as usize;
    Ok(sc)
}

fn nesterov_switched(seed: u64) -> Result<ExperimentResult> {
    let sc = nesterov_on_random(seed, true)?;
    let mut res = ExperimentResult::new("nesterov-switched", seed, run_arms(vec![("nesterov".into(), sc)])?);
    envelope_check(&mut res, "nesterov");
    adt_check(&mut res, "nesterov");
    Ok(res)
}

fn nesterov_tracking(seed: u64) -> Result<ExperimentResult> {
    let base = nesterov_on_random(seed, false)?;
    let horizon = base.integrator.horizon;
    let mut res = ExperimentResult::new("nesterov-tracking", seed, run_arms(tracking_arms(&base, seed, horizon))?);
    tracking_checks(&mut res);
    Ok(res)
}

/// Quartic arms: Δ = 2 at ε₀, ε₀/2, ε₀/4 and Δ = 5 at its own ε₀.
fn quartic(seed: u64) -> Result<ExperimentResult> {
    let horizon = 20.0;
    let arms = vec![
        ("delta2-eps1".to_string(), scalar_quartic(2.0, 1.0, horizon)?),
        ("delta2-eps2".to_string(), scalar_quartic(2.0, 0.5, horizon)?),
        ("delta2-eps4".to_string(), scalar_quartic(2.0, 0.25, horizon)?),
        ("delta5-eps1".to_string(), scalar_quartic(5.0, 1.0, horizon)?),
    ];
    let mut res = ExperimentResult::new("quartic", seed, run_arms(arms)?);
    let mut tails = Vec::new();
    for name in ["delta2-eps1", "delta2-eps2", "delta2-eps4"] {
        let arm = res.arm(name);
        let tail = arm.tail_max(0.2);
        let theta = arm.scenario.certificates.alpha_theta.unwrap_or(arm.analysis.monitor.theta[0]);
        let varrho = arm.scenario.certificates.alpha_varrho;
        let rep = practical_bound_check(&arm.arc, &arm.analysis.monitor, &arm.scenario.disturbance, theta, varrho, tail);
        tails.push(tail);
        res.metric(format!("{name}.residual"), tail);
        res.metric(format!("{name}.practical_max_excess"), rep.max_excess);
        res.check(
            format!("{name}.practical_bound"),
            rep.holds,
            format!(
                "f - f* <= alpha/u3^2 + nu with nu = {tail:.4e}: max excess {:.3e} over {} samples",
                rep.max_excess, rep.checked
            ),
        );
    }
    res.check(
        "residual.finite",
        tails.iter().all(|t| t.is_finite()),
        format!("residuals {:?}", tails.iter().map(|t| format!("{t:.6e}")).collect::<Vec<_>>()),
    );
    res.check(
        "residual.monotone_in_epsilon",
        tails[1] < tails[0] && tails[2] < tails[1],
        format!("{:.9e} > {:.9e} > {:.9e}", tails[0], tails[1], tails[2]),
    );
    let d5 = res.arm("delta5-eps1").tail_max(0.2);
    res.metric("delta5-eps1.residual", d5);
    res.notes.push(format!(
        "restart period ordering: residual {:.4e} with Delta = 2, {:.4e} with Delta = 5",
        tails[0], d5
    ));
    Ok(res)
}

fn ctm(seed: u64) -> Result<ExperimentResult> {
    let controlled = ctm_scenario(true, 0.0)?;
    let uncontrolled = ctm_scenario(false, 0.5)?;
    let mut res = ExperimentResult::new(
        "ctm",
        seed,
        run_arms(vec![("controlled".into(), controlled), ("uncontrolled".into(), uncontrolled)])?,
    );
    for (i, a) in CtmParams::default().mode_matrices().iter().enumerate() {
        let ev = eigenvalues(a)?;
        for (k, z) in ev.iter().enumerate() {
            res.metric(format!("mode{}.eigenvalue{}", i + 1, k + 1), z.re);
        }
        let max = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        res.check(
            format!("mode{}.hurwitz", i + 1),
            max < 0.0,
            format!("eigenvalues {:?}", ev.iter().map(|z| format!("{:.4}", z.re)).collect::<Vec<_>>()),
        );
    }
    let arm = res.arm("controlled");
    let common = arm.analysis.common_maps;
    let fin = arm.final_error();
    let visited = arm.arc.samples.iter().map(|s| s.sigma).collect::<std::collections::BTreeSet<_>>().len();
    res.check("common_maps", common.common, format!("max deviation {:.3e}", common.max_deviation));
    res.check("controlled.converges", fin <= 1e-4, format!("final error {fin:.3e}"));
    res.check("controlled.both_modes", visited == 2, format!("{visited} modes visited"));
    envelope_check(&mut res, "controlled");
    let un = res.arm("uncontrolled");
    let start = un.arc.samples[0].state[..2].iter().map(|v| v * v).sum::<f64>().sqrt();
    let end = un.arc.last().state[..2].iter().map(|v| v * v).sum::<f64>().sqrt();
    let diverged = un.arc.divergence.is_some();
    res.metric("uncontrolled.state_growth", end / start);
    res.notes.push(format!(
        "uncontrolled fast switching: |x| grows by {:.3e} over the horizon{}",
        end / start,
        if diverged { " and diverges" } else { "" }
    ));
    Ok(res)
}

fn grad_vs_nesterov(seed: u64) -> Result<ExperimentResult> {
    // μ = ℓ = 0.2 < 1, where the √μ rate of the accelerated flow wins.
    let weight = 0.1;
    let horizon = 30.0;
    let gradient = scalar_quadratic_weighted(ControllerConfig::Gradient, weight, 1.0, 0.0, horizon)?;
    let params = NesterovParams::new(1.0, 1.0, 1.0, 4.5, true)?;
    let mut nesterov = scalar_quadratic_weighted(ControllerConfig::Nesterov(params), weight, 1.0, 0.0, horizon)?;
    let eps = gradient.epsilon[0].min(nesterov.epsilon[0]);
    let mut gradient_same = gradient;
    for sc in [&mut gradient_same, &mut nesterov] {
        sc.epsilon = vec![eps];
        sc.integrator.step = default_step(&sc.epsilon);
        sc.integrator.sample_every = 100;
    }
    let quartic_nest = scalar_quartic(2.0, 1.0, QUARTIC_COMPARISON_HORIZON)?;
    let mut quartic_grad = quartic_nest.clone();
    quartic_grad.controller = ControllerConfig::Gradient;
    let mut res = ExperimentResult::new(
        "grad-vs-nesterov",
        seed,
        run_arms(vec![
            ("quadratic-gradient".into(), gradient_same),
            ("quadratic-nesterov".into(), nesterov),
            ("quartic-gradient".into(), quartic_grad),
            ("quartic-nesterov".into(), quartic_nest),
        ])?,
    );
    let tg = res.arm("quadratic-gradient").settling_time(1e-2);
    let tn = res.arm("quadratic-nesterov").settling_time(1e-2);
    res.metric("quadratic-gradient.time_to_1e-2", tg.unwrap_or(f64::INFINITY));
    res.metric("quadratic-nesterov.time_to_1e-2", tn.unwrap_or(f64::INFINITY));
    res.check(
        "acceleration",
        matches!((tn, tg), (Some(n), Some(g)) if n < g),
        format!("time to 1e-2: accelerated {tn:?}, gradient {tg:?}"),
    );
    let eg = res.arm("quartic-gradient").final_error();
    let en = res.arm("quartic-nesterov").tail_max(0.2);
    res.metric("quartic-gradient.final_error", eg);
    res.metric("quartic-nesterov.residual", en);
    res.check(
        "accuracy",
        eg < en,
        format!("gradient terminal error {eg:.6e}, accelerated practical residual {en:.6e}"),
    );
    Ok(res)
}
