//! Per-sample monitor series and CSV output.

use std::fmt::Write as _;
use std::io::Write;

use crate::certificates::{envelope, error_series, lyapunov_series};
use crate::error::Result;
use crate::report::Analysis;
use crate::sim::{suboptimality, tracking_error, HybridArc, JumpKind, Scenario};

/// Monitor values aligned with `arc.samples`.
#[derive(Debug, Clone)]
pub struct ArcSeries {
    pub err_track: Vec<f64>,
    pub f_gap: Vec<f64>,
    /// V, or the dwell-weighted W on switched scenarios.
    pub lyapunov: Vec<f64>,
    /// ‖z̃‖ in Lyapunov coordinates.
    pub error: Vec<f64>,
    /// E-ISS envelope; NaN when no coefficients are available.
    pub envelope: Vec<f64>,
}

impl ArcSeries {
    pub fn new(sc: &Scenario, an: &Analysis, arc: &HybridArc) -> Self {
        let dist = &sc.disturbance;
        let err_track = tracking_error(arc, &an.oracle, dist).into_iter().map(|p| p.1).collect();
        let f_gap = suboptimality(arc, &an.oracle, dist).into_iter().map(|p| p.1).collect();
        let lyapunov = lyapunov_series(arc, &an.monitor, dist, an.switched);
        let errors = error_series(arc, &an.monitor, dist);
        let z0 = errors.first().map_or(0.0, |e| e.1);
        let sup = dist.sup_derivative();
        let envelope = errors
            .iter()
            .map(|&(time, _)| an.eiss.as_ref().map_or(f64::NAN, |c| envelope(c, time, z0, sup)))
            .collect();
        Self {
            err_track,
            f_gap,
            lyapunov,
            error: errors.into_iter().map(|e| e.1).collect(),
            envelope,
        }
    }
}

/// Final tracking error, jump counts and divergence flag of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub final_time: f64,
    pub final_error: f64,
    pub plant_switches: usize,
    pub controller_resets: usize,
    pub divergence: Option<f64>,
}

impl RunSummary {
    pub fn new(arc: &HybridArc, series: &ArcSeries) -> Self {
        Self {
            final_time: arc.last().time.t,
            final_error: series.err_track.last().copied().unwrap_or(f64::NAN),
            plant_switches: arc.count(JumpKind::PlantSwitch),
            controller_resets: arc.count(JumpKind::ControllerReset),
            divergence: arc.divergence,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "final t = {:.6e}, tracking error = {:.6e}, plant switches = {}, controller resets = {}",
            self.final_time, self.final_error, self.plant_switches, self.controller_resets
        );
        if let Some(t) = self.divergence {
            let _ = write!(out, ", diverged at t = {t:.6e}");
        }
        out
    }
}

fn num(out: &mut String, v: f64) {
    // 17 significant digits.
    let _ = write!(out, ",{v:.16e}");
}

/// Writes one record per arc sample; jumps appear as two records with equal t.
pub fn write_csv<W: Write>(mut w: W, sc: &Scenario, arc: &HybridArc, series: &ArcSeries) -> Result<()> {
    let (n, m, p) = (arc.n, arc.m, sc.plant.p());
    let mut header = String::from("t,j,sigma,tau");
    for i in 0..n {
        let _ = write!(header, ",x_{i}");
    }
    if arc.nesterov {
        for i in 0..m {
            let _ = write!(header, ",u1_{i}");
        }
        for i in 0..m {
            let _ = write!(header, ",u2_{i}");
        }
        header.push_str(",u3");
    } else {
        for i in 0..m {
            let _ = write!(header, ",u_{i}");
        }
    }
    for i in 0..p {
        let _ = write!(header, ",y_{i}");
    }
    header.push_str(",err_track,f_gap,V,envelope,diverged\n");
    w.write_all(header.as_bytes())?;
    let c = &sc.plant.c;
    let d = &sc.plant.d;
    let last = arc.samples.len().saturating_sub(1);
    let mut line = String::new();
    for (k, s) in arc.samples.iter().enumerate() {
        line.clear();
        let _ = write!(line, "{:.16e},{},{}", s.time.t, s.time.j, s.sigma + 1);
        num(&mut line, s.tau);
        for v in &s.state {
            num(&mut line, *v);
        }
        let y = c * arc.x(s) + d * sc.disturbance.value(s.time.t);
        for v in y.iter() {
            num(&mut line, *v);
        }
        for v in [series.err_track[k], series.f_gap[k], series.lyapunov[k], series.envelope[k]] {
            num(&mut line, v);
        }
        let diverged = k == last && arc.divergence.is_some();
        line.push_str(if diverged { ",1\n" } else { ",0\n" });
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}
