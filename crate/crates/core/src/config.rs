//! TOML scenario files.
//!
//! Modes are numbered from 1 in files and from 0 internally. Derived entries
//! (`epsilon_fraction`, `tau_d_factor`, a plant `generator`, a seeded cost,
//! an omitted step) are resolved on load; [`emit_scenario`] writes the resolved
//! scenario with every value inline.

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::controller::{ControllerConfig, NesterovParams};
use crate::cost::{Cost, QuadraticCost, QuarticCost};
use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::instances::{apply_certified_defaults, default_step};
use crate::linalg;
use crate::plant::{random_plant, LtiMode, SwitchedPlant};
use crate::sim::{
    CertificateOptions, CertificateOverride, InitialConditions, IntegratorConfig, Scenario, SignalSource,
    SwitchingConfig,
};
use crate::switching::{DwellTimeParams, SwitchingSignal};

type Mat = Spanned<Vec<Vec<f64>>>;
type Vector = Spanned<Vec<f64>>;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    plant: Spanned<RawPlant>,
    cost: Spanned<RawCost>,
    controller: Spanned<RawController>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    switching: Option<Spanned<RawSwitching>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disturbance: Option<Spanned<RawDisturbance>>,
    integrator: Spanned<RawIntegrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<RawInitial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificates: Option<Spanned<RawCertificates>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawPlant {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    C: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    D: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<Spanned<Vec<Spanned<RawMode>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<Spanned<RawGenerator>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawMode {
    A: Mat,
    B: Mat,
    E: Mat,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawGenerator {
    seed: u64,
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    S: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawCost {
    kind: Spanned<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    R: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    Qy: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_ref: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawController {
    kind: Spanned<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    Delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r0: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon_fraction: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSwitching {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    N0: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_d_factor: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<Spanned<Vec<RawEvent>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jump_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_mode: Option<Spanned<usize>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: f64,
    mode: usize,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: Spanned<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    freeze_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Spanned<Vec<RawKnot>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawKnot {
    t: f64,
    value: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<Spanned<f64>>,
    horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_every: Option<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u0: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u2: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u3: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawCertificates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    varrho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quartic_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_varrho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overrides: Option<Vec<Spanned<RawOverride>>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawOverride {
    mode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    P: Option<Mat>,
    Q: Mat,
}

struct Ctx<'a> {
    path: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        let (line, column) = line_col(self.src, span.start);
        Error::Parse {
            path: self.path.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn wrap(&self, span: Range<usize>, e: Error) -> Error {
        self.err(span, e.to_string())
    }

    fn matrix(&self, m: &Mat, name: &str, shape: Option<(usize, usize)>) -> Result<DMatrix<f64>> {
        let rows = m.get_ref();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(self.err(m.span(), format!("{name} must be a non-empty rectangular array of rows")));
        }
        if let Some((r, c)) = shape {
            if (rows.len(), cols) != (r, c) {
                return Err(self.err(m.span(), format!("{name} is {}x{cols}, expected {r}x{c}", rows.len())));
            }
        }
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    fn vector(&self, v: &Vector, name: &str, len: usize) -> Result<DVector<f64>> {
        if v.get_ref().len() != len {
            return Err(self.err(v.span(), format!("{name} has {} entries, expected {len}", v.get_ref().len())));
        }
        Ok(DVector::from_column_slice(v.get_ref()))
    }

    fn required<'b, T>(&self, v: &'b Option<T>, span: Range<usize>, name: &str) -> Result<&'b T> {
        v.as_ref().ok_or_else(|| self.err(span, format!("missing field `{name}`")))
    }
}

/// 1-based line and column (in characters) of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[start..].chars().count() + 1)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&src, &path.display().to_string())
}

/// Parses a scenario document; `path` only labels error messages.
pub fn parse_scenario(src: &str, path: &str) -> Result<Scenario> {
    let ctx = Ctx { path, src };
    let raw: RawScenario = toml::from_str(src).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        ctx.err(span, e.message().trim().to_string())
    })?;
    build(&ctx, raw)
}

fn build(ctx: &Ctx, raw: RawScenario) -> Result<Scenario> {
    let plant = build_plant(ctx, &raw.plant)?;
    let (n, m, p, q, s) = (plant.n(), plant.m(), plant.p(), plant.q(), plant.num_modes());
    let cost = build_cost(ctx, &raw.cost, m, p)?;
    let rc = raw.controller.get_ref();
    let controller = match rc.kind.get_ref().as_str() {
        "gradient" => ControllerConfig::Gradient,
        "nesterov" => {
            let span = raw.controller.span();
            let params = NesterovParams::new(
                *ctx.required(&rc.kappa, span.clone(), "kappa")?,
                *ctx.required(&rc.rho, span.clone(), "rho")?,
                *ctx.required(&rc.delta, span.clone(), "delta")?,
                *ctx.required(&rc.Delta, span.clone(), "Delta")?,
                rc.r0.unwrap_or(true),
            )
            .map_err(|e| ctx.wrap(span, e))?;
            ControllerConfig::Nesterov(params)
        }
        other => return Err(ctx.err(rc.kind.span(), format!("unknown controller kind '{other}' (gradient | nesterov)"))),
    };
    let epsilon = match (&rc.epsilon, &rc.epsilon_fraction) {
        (Some(eps), None) => {
            let v = ctx.vector(eps, "epsilon", s)?;
            if v.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(ctx.err(eps.span(), "epsilon values must be finite and positive"));
            }
            v.as_slice().to_vec()
        }
        (None, Some(frac)) => {
            if !(*frac.get_ref() > 0.0) {
                return Err(ctx.err(frac.span(), "epsilon_fraction must be positive"));
            }
            vec![1.0; s]
        }
        (Some(eps), Some(_)) => return Err(ctx.err(eps.span(), "give either epsilon or epsilon_fraction")),
        (None, None) => return Err(ctx.err(raw.controller.span(), "missing field `epsilon` or `epsilon_fraction`")),
    };
    let (switching, tau_d_factor) = build_switching(ctx, raw.switching.as_ref(), s)?;
    let disturbance = match &raw.disturbance {
        None => Disturbance::constant(DVector::zeros(q)),
        Some(d) => build_disturbance(ctx, d, q)?,
    };
    let ri = raw.integrator.get_ref();
    let horizon = ri.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ctx.err(raw.integrator.span(), "horizon must be finite and positive"));
    }
    let sample_every = ri.sample_every.unwrap_or(1);
    if sample_every == 0 {
        return Err(ctx.err(raw.integrator.span(), "sample_every must be at least 1"));
    }
    let initial = match &raw.initial {
        None => InitialConditions::default(),
        Some(ri) => InitialConditions {
            x0: ri.x0.as_ref().map(|v| ctx.vector(v, "x0", n)).transpose()?,
            u0: ri.u0.as_ref().map(|v| ctx.vector(v, "u0", m)).transpose()?,
            u2: ri.u2.as_ref().map(|v| ctx.vector(v, "u2", m)).transpose()?,
            u3: ri.u3.as_ref().map(|v| *v.get_ref()),
        },
    };
    if let (Some(ri), ControllerConfig::Nesterov(np)) = (&raw.initial, &controller) {
        if let Some(u3) = &ri.u3 {
            if !(*u3.get_ref() >= np.delta && *u3.get_ref() <= np.big_delta) {
                return Err(ctx.err(u3.span(), format!("u3 must lie in [{}, {}]", np.delta, np.big_delta)));
            }
        }
    }
    let certificates = build_certificates(ctx, raw.certificates.as_ref(), s, n)?;
    let mut sc = Scenario {
        plant,
        cost,
        controller,
        switching,
        epsilon,
        disturbance,
        integrator: IntegratorConfig { step: 1.0, horizon, sample_every },
        initial,
        certificates,
    };
    let needs_bounds = rc.epsilon_fraction.is_some() || tau_d_factor.is_some();
    if needs_bounds {
        let span = rc
            .epsilon_fraction
            .as_ref()
            .map_or_else(|| tau_d_factor.as_ref().expect("factor").0.clone(), |f| f.span());
        apply_certified_defaults(
            &mut sc,
            rc.epsilon_fraction.as_ref().map(|f| *f.get_ref()),
            tau_d_factor.as_ref().map(|f| f.1),
        )
        .map_err(|e| ctx.wrap(span, e))?;
    }
    sc.integrator.step = match &ri.step {
        Some(step) => {
            if !(*step.get_ref() > 0.0) {
                return Err(ctx.err(step.span(), "step must be positive"));
            }
            let limit = default_step(&sc.epsilon);
            if *step.get_ref() > limit * (1.0 + 1e-12) {
                return Err(ctx.wrap(step.span(), Error::StiffnessBudgetExceeded { step: *step.get_ref(), limit }));
            }
            *step.get_ref()
        }
        None => default_step(&sc.epsilon),
    };
    if let SignalSource::Explicit(events) = &sc.switching.source {
        let span = raw.switching.as_ref().map_or(0..0, |s| s.span());
        SwitchingSignal::new(events.clone(), horizon, s).map_err(|e| ctx.wrap(span, e))?;
    }
    sc.validate().map_err(|e| ctx.wrap(0..0, e))?;
    sc.stability_certificates()
        .map_err(|e| ctx.wrap(raw.certificates.as_ref().map_or(raw.plant.span(), |c| c.span()), e))?;
    Ok(sc)
}

fn build_plant(ctx: &Ctx, raw: &Spanned<RawPlant>) -> Result<SwitchedPlant> {
    let rp = raw.get_ref();
    match (&rp.modes, &rp.generator) {
        (Some(_), Some(g)) => Err(ctx.err(g.span(), "give either plant.modes or plant.generator")),
        (None, None) => Err(ctx.err(raw.span(), "plant needs [[plant.modes]] or [plant.generator]")),
        (None, Some(g)) => {
            let gr = g.get_ref();
            if rp.C.is_some() || rp.D.is_some() {
                return Err(ctx.err(g.span(), "a generated plant draws its own C and D"));
            }
            if gr.n == 0 || gr.m == 0 || gr.p == 0 || gr.q == 0 || gr.S == 0 {
                return Err(ctx.err(g.span(), "generator dimensions must be positive"));
            }
            let margin = gr.margin.unwrap_or(0.5);
            if !(margin > 0.0) {
                return Err(ctx.err(g.span(), "margin must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(gr.seed);
            random_plant(&mut rng, gr.n, gr.m, gr.p, gr.q, gr.S, margin).map_err(|e| ctx.wrap(g.span(), e))
        }
        (Some(modes), None) => {
            let first = modes.get_ref().first().ok_or_else(|| ctx.err(modes.span(), "plant needs at least one mode"))?;
            let a0 = ctx.matrix(&first.get_ref().A, "A", None)?;
            let n = a0.nrows();
            let b0 = ctx.matrix(&first.get_ref().B, "B", None)?;
            let e0 = ctx.matrix(&first.get_ref().E, "E", None)?;
            let (m, q) = (b0.ncols(), e0.ncols());
            let c = ctx.matrix(ctx.required(&rp.C, raw.span(), "C")?, "C", None)?;
            if c.ncols() != n {
                return Err(ctx.err(rp.C.as_ref().expect("C").span(), format!("C has {} columns, expected n = {n}", c.ncols())));
            }
            let p = c.nrows();
            let d = match &rp.D {
                Some(d) => ctx.matrix(d, "D", Some((p, q)))?,
                None => DMatrix::zeros(p, q),
            };
            let mut built = Vec::new();
            for mode in modes.get_ref() {
                let rm = mode.get_ref();
                let a = ctx.matrix(&rm.A, "A", Some((n, n)))?;
                let b = ctx.matrix(&rm.B, "B", Some((n, m)))?;
                let e = ctx.matrix(&rm.E, "E", Some((n, q)))?;
                built.push(LtiMode::new(a, b, e).map_err(|e| ctx.wrap(mode.span(), e))?);
            }
            SwitchedPlant::new(built, c, d).map_err(|e| ctx.wrap(modes.span(), e))
        }
    }
}

fn seeded_spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    linalg::symmetrize(&(&l * l.transpose() / k as f64 + DMatrix::identity(k, k) * 0.5))
}

fn build_cost(ctx: &Ctx, raw: &Spanned<RawCost>, m: usize, p: usize) -> Result<Cost> {
    let rc = raw.get_ref();
    match rc.kind.get_ref().as_str() {
        "quadratic" => {
            let (r, qy, y_ref) = match rc.seed {
                Some(seed) => {
                    if rc.R.is_some() || rc.Qy.is_some() || rc.y_ref.is_some() {
                        return Err(ctx.err(raw.span(), "a seeded cost draws its own R, Qy and y_ref"));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let r = seeded_spd(&mut rng, m);
                    let qy = seeded_spd(&mut rng, p);
                    let y_ref = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
                    (r, qy, y_ref)
                }
                None => (
                    ctx.matrix(ctx.required(&rc.R, raw.span(), "R")?, "R", Some((m, m)))?,
                    ctx.matrix(ctx.required(&rc.Qy, raw.span(), "Qy")?, "Qy", Some((p, p)))?,
                    match &rc.y_ref {
                        Some(v) => ctx.vector(v, "y_ref", p)?,
                        None => DVector::zeros(p),
                    },
                ),
            };
            Ok(Cost::Quadratic(QuadraticCost::new(r, qy, y_ref).map_err(|e| ctx.wrap(raw.span(), e))?))
        }
        "quartic" => {
            if rc.R.is_some() || rc.Qy.is_some() || rc.seed.is_some() {
                return Err(ctx.err(raw.span(), "quartic cost takes only y_ref"));
            }
            if (m, p) != (1, 1) {
                return Err(ctx.err(raw.span(), format!("quartic cost needs a scalar plant (m = p = 1), got m = {m}, p = {p}")));
            }
            let y_ref = match &rc.y_ref {
                Some(v) => ctx.vector(v, "y_ref", 1)?[0],
                None => 0.0,
            };
            Ok(Cost::Quartic(QuarticCost { y_ref }))
        }
        other => Err(ctx.err(rc.kind.span(), format!("unknown cost kind '{other}' (quadratic | quartic)"))),
    }
}

type Factor = (Range<usize>, f64);

fn build_switching(ctx: &Ctx, raw: Option<&Spanned<RawSwitching>>, s: usize) -> Result<(SwitchingConfig, Option<Factor>)> {
    let Some(raw) = raw else {
        return Ok((SwitchingConfig::single_mode(), None));
    };
    let rs = raw.get_ref();
    let n0 = rs.N0.unwrap_or(1);
    let factor = rs.tau_d_factor.as_ref().map(|f| (f.span(), *f.get_ref()));
    let dwell = match (rs.tau_d, &rs.tau_d_factor) {
        (Some(_), Some(f)) => return Err(ctx.err(f.span(), "give either tau_d or tau_d_factor")),
        (Some(tau_d), None) => Some(DwellTimeParams::new(tau_d, n0).map_err(|e| ctx.wrap(raw.span(), e))?),
        (None, Some(f)) => {
            if !(*f.get_ref() > 0.0) {
                return Err(ctx.err(f.span(), "tau_d_factor must be positive"));
            }
            Some(DwellTimeParams::new(1.0, n0).map_err(|e| ctx.wrap(raw.span(), e))?)
        }
        (None, None) => {
            if rs.N0.is_some() {
                return Err(ctx.err(raw.span(), "N0 given without tau_d"));
            }
            None
        }
    };
    let generated = rs.seed.is_some() || rs.rate.is_some() || rs.jump_probability.is_some() || rs.initial_mode.is_some() || rs.tau0.is_some();
    let source = match (&rs.events, generated) {
        (Some(ev), true) => return Err(ctx.err(ev.span(), "give either events or generator fields (seed, rate, ...)")),
        (Some(ev), false) => {
            let mut events = Vec::with_capacity(ev.get_ref().len());
            for e in ev.get_ref() {
                if e.mode == 0 || e.mode > s {
                    return Err(ctx.err(ev.span(), format!("event mode {} outside 1..={s}", e.mode)));
                }
                events.push((e.t, e.mode - 1));
            }
            SignalSource::Explicit(events)
        }
        (None, true) => {
            if dwell.is_none() {
                return Err(ctx.err(raw.span(), "generated switching needs tau_d or tau_d_factor"));
            }
            let initial_mode = match &rs.initial_mode {
                Some(im) if *im.get_ref() == 0 || *im.get_ref() > s => {
                    return Err(ctx.err(im.span(), format!("initial_mode outside 1..={s}")));
                }
                Some(im) => im.get_ref() - 1,
                None => 0,
            };
            SignalSource::Generated {
                seed: rs.seed.unwrap_or(0),
                rate: rs.rate.unwrap_or(1.0),
                jump_probability: rs.jump_probability.unwrap_or(0.5),
                tau0: rs.tau0,
                initial_mode,
            }
        }
        (None, false) => SignalSource::Explicit(vec![(0.0, 0)]),
    };
    Ok((SwitchingConfig { dwell, source }, factor))
}

fn build_disturbance(ctx: &Ctx, raw: &Spanned<RawDisturbance>, q: usize) -> Result<Disturbance> {
    let rd = raw.get_ref();
    let span = raw.span();
    let d = match rd.kind.get_ref().as_str() {
        "constant" => Disturbance::Constant {
            value: match &rd.value {
                Some(v) => ctx.vector(v, "value", q)?,
                None => DVector::zeros(q),
            },
        },
        "sinusoid" => Disturbance::Sinusoid {
            offset: match &rd.offset {
                Some(v) => ctx.vector(v, "offset", q)?,
                None => DVector::zeros(q),
            },
            amplitude: ctx.vector(ctx.required(&rd.amplitude, span.clone(), "amplitude")?, "amplitude", q)?,
            omega: *ctx.required(&rd.omega, span.clone(), "omega")?,
            phase: rd.phase.unwrap_or(0.0),
            freeze_at: rd.freeze_at,
        },
        "piecewise_linear" => {
            let knots = ctx.required(&rd.knots, span.clone(), "knots")?;
            let mut out = Vec::new();
            for k in knots.get_ref() {
                if k.value.len() != q {
                    return Err(ctx.err(knots.span(), format!("knot value has {} entries, expected {q}", k.value.len())));
                }
                out.push((k.t, DVector::from_column_slice(&k.value)));
            }
            Disturbance::PiecewiseLinear {
                knots: out,
                smoothing: *ctx.required(&rd.smoothing, span.clone(), "smoothing")?,
            }
        }
        other => {
            return Err(ctx.err(
                rd.kind.span(),
                format!("unknown disturbance kind '{other}' (constant | sinusoid | piecewise_linear)"),
            ))
        }
    };
    d.validate().map_err(|e| ctx.wrap(span, e))?;
    Ok(d)
}

fn build_certificates(ctx: &Ctx, raw: Option<&Spanned<RawCertificates>>, s: usize, n: usize) -> Result<CertificateOptions> {
    let mut opts = CertificateOptions::default();
    let Some(raw) = raw else {
        return Ok(opts);
    };
    let rc = raw.get_ref();
    opts.varrho = rc.varrho;
    if let Some(r) = rc.quartic_radius {
        opts.quartic_radius = r;
    }
    if let Some(v) = rc.nu0 {
        opts.nu0 = v;
    }
    opts.alpha_theta = rc.alpha_theta;
    if let Some(v) = rc.alpha_varrho {
        opts.alpha_varrho = v;
    }
    if !(opts.quartic_radius > 0.0) || !(opts.nu0 > 0.0) || !(opts.alpha_varrho > 0.0) {
        return Err(ctx.err(raw.span(), "quartic_radius, nu0 and alpha_varrho must be positive"));
    }
    if let Some(th) = opts.alpha_theta {
        if !(th > 0.0 && th < 1.0) {
            return Err(ctx.err(raw.span(), "alpha_theta must lie in (0, 1)"));
        }
    }
    if let Some(list) = &rc.overrides {
        opts.overrides = vec![None; s];
        for o in list {
            let ro = o.get_ref();
            if ro.mode == 0 || ro.mode > s {
                return Err(ctx.err(o.span(), format!("override mode {} outside 1..={s}", ro.mode)));
            }
            if opts.overrides[ro.mode - 1].is_some() {
                return Err(ctx.err(o.span(), format!("duplicate override for mode {}", ro.mode)));
            }
            opts.overrides[ro.mode - 1] = Some(CertificateOverride {
                p: ro.P.as_ref().map(|p| ctx.matrix(p, "P", Some((n, n)))).transpose()?,
                q: ctx.matrix(&ro.Q, "Q", Some((n, n)))?,
            });
        }
    }
    Ok(opts)
}

fn sp<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

fn rows(m: &DMatrix<f64>) -> Mat {
    sp((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
}

fn vecv(v: &DVector<f64>) -> Vector {
    sp(v.as_slice().to_vec())
}

/// Writes a scenario with all derived values resolved inline.
pub fn emit_scenario(sc: &Scenario) -> Result<String> {
    let plant = RawPlant {
        C: Some(rows(&sc.plant.c)),
        D: Some(rows(&sc.plant.d)),
        modes: Some(sp(sc
            .plant
            .modes
            .iter()
            .map(|m| sp(RawMode { A: rows(&m.a), B: rows(&m.b), E: rows(&m.e) }))
            .collect())),
        generator: None,
    };
    let cost = match &sc.cost {
        Cost::Quadratic(c) => RawCost {
            kind: sp("quadratic".into()),
            R: Some(rows(&c.r)),
            Qy: Some(rows(&c.qy)),
            y_ref: Some(vecv(&c.y_ref)),
            seed: None,
        },
        Cost::Quartic(c) => RawCost {
            kind: sp("quartic".into()),
            R: None,
            Qy: None,
            y_ref: Some(sp(vec![c.y_ref])),
            seed: None,
        },
    };
    let mut controller = RawController {
        kind: sp("gradient".into()),
        kappa: None,
        rho: None,
        delta: None,
        Delta: None,
        r0: None,
        epsilon: Some(sp(sc.epsilon.clone())),
        epsilon_fraction: None,
    };
    if let ControllerConfig::Nesterov(p) = &sc.controller {
        controller.kind = sp("nesterov".into());
        controller.kappa = Some(p.kappa);
        controller.rho = Some(p.rho);
        controller.delta = Some(p.delta);
        controller.Delta = Some(p.big_delta);
        controller.r0 = Some(p.r0);
    }
    let mut switching = RawSwitching {
        tau_d: sc.switching.dwell.map(|d| d.tau_d),
        N0: sc.switching.dwell.map(|d| d.n0),
        tau_d_factor: None,
        events: None,
        seed: None,
        rate: None,
        jump_probability: None,
        tau0: None,
        initial_mode: None,
    };
    match &sc.switching.source {
        SignalSource::Explicit(events) => {
            switching.events = Some(sp(events.iter().map(|&(t, mode)| RawEvent { t, mode: mode + 1 }).collect()));
        }
        SignalSource::Generated { seed, rate, jump_probability, tau0, initial_mode } => {
            switching.seed = Some(*seed);
            switching.rate = Some(*rate);
            switching.jump_probability = Some(*jump_probability);
            switching.tau0 = *tau0;
            switching.initial_mode = Some(sp(initial_mode + 1));
        }
    }
    let empty_dist = RawDisturbance {
        kind: sp(String::new()),
        value: None,
        offset: None,
        amplitude: None,
        omega: None,
        phase: None,
        freeze_at: None,
        knots: None,
        smoothing: None,
    };
    let disturbance = match &sc.disturbance {
        Disturbance::Constant { value } => RawDisturbance {
            kind: sp("constant".into()),
            value: Some(vecv(value)),
            ..empty_dist
        },
        Disturbance::Sinusoid { offset, amplitude, omega, phase, freeze_at } => RawDisturbance {
            kind: sp("sinusoid".into()),
            offset: Some(vecv(offset)),
            amplitude: Some(vecv(amplitude)),
            omega: Some(*omega),
            phase: Some(*phase),
            freeze_at: *freeze_at,
            ..empty_dist
        },
        Disturbance::PiecewiseLinear { knots, smoothing } => RawDisturbance {
            kind: sp("piecewise_linear".into()),
            knots: Some(sp(knots
                .iter()
                .map(|(t, v)| RawKnot { t: *t, value: v.as_slice().to_vec() })
                .collect())),
            smoothing: Some(*smoothing),
            ..empty_dist
        },
    };
    let init = &sc.initial;
    let initial = RawInitial {
        x0: init.x0.as_ref().map(vecv),
        u0: init.u0.as_ref().map(vecv),
        u2: init.u2.as_ref().map(vecv),
        u3: init.u3.map(sp),
    };
    let co = &sc.certificates;
    let overrides: Vec<_> = co
        .overrides
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            o.as_ref().map(|o| {
                sp(RawOverride {
                    mode: i + 1,
                    P: o.p.as_ref().map(rows),
                    Q: rows(&o.q),
                })
            })
        })
        .collect();
    let certificates = RawCertificates {
        varrho: co.varrho,
        quartic_radius: Some(co.quartic_radius),
        nu0: Some(co.nu0),
        alpha_theta: co.alpha_theta,
        alpha_varrho: Some(co.alpha_varrho),
        overrides: (!overrides.is_empty()).then_some(overrides),
    };
    let raw = RawScenario {
        plant: sp(plant),
        cost: sp(cost),
        controller: sp(controller),
        switching: Some(sp(switching)),
        disturbance: Some(sp(disturbance)),
        integrator: sp(RawIntegrator {
            step: Some(sp(sc.integrator.step)),
            horizon: sc.integrator.horizon,
            sample_every: Some(sc.integrator.sample_every),
        }),
        initial: Some(initial),
        certificates: Some(sp(certificates)),
    };
    toml::to_string(&raw).map_err(|e| Error::InvalidArgument(format!("cannot serialize scenario: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"
[plant]
C = [[1.0]]
[[plant.modes]]
A = [[-1.0]]
B = [[1.0]]
E = [[1.0]]

[cost]
kind = "quadratic"
R = [[0.5]]
Qy = [[0.5]]

[controller]
kind = "gradient"
epsilon_fraction = 0.5

[integrator]
horizon = 5.0
"#;

    #[test]
    fn parses_minimal_scalar() {
        let sc = parse_scenario(SCALAR, "mem").unwrap();
        assert_eq!(sc.plant.n(), 1);
        assert!((sc.epsilon[0] - 0.25).abs() < 1e-15);
        assert!((sc.integrator.step - 0.025).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let sc = parse_scenario(SCALAR, "mem").unwrap();
        let text = emit_scenario(&sc).unwrap();
        assert_eq!(parse_scenario(&text, "emitted").unwrap(), sc);
    }

    #[test]
    fn syntax_error_is_positioned() {
        let bad = SCALAR.replace("horizon = 5.0", "horizon = ");
        match parse_scenario(&bad, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 19),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_error_points_at_field() {
        let bad = SCALAR.replace("B = [[1.0]]", "B = [[1.0], [2.0]]");
        match parse_scenario(&bad, "mem") {
            Err(Error::Parse { line, column, message, .. }) => {
                assert_eq!((line, column), (6, 5));
                assert!(message.contains("expected 1x1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = SCALAR.replace("horizon = 5.0", "horizon = 5.0\nstepp = 0.1");
        assert!(matches!(parse_scenario(&bad, "mem"), Err(Error::Parse { line: 20, .. })));
    }
}
