//! Exogenous inputs w(t): constant, sinusoidal and smoothed piecewise-linear.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Disturbance {
    Constant {
        value: DVector<f64>,
    },
    /// w(t) = offset + amplitude·sin(ωt + φ), optionally held constant from the
    /// first peak at or after `freeze_at`.
    Sinusoid {
        offset: DVector<f64>,
        amplitude: DVector<f64>,
        omega: f64,
        phase: f64,
        freeze_at: Option<f64>,
    },
    /// Linear interpolation between knots with quadratic blends of total width
    /// `smoothing` at each knot; constant outside the knot range.
    PiecewiseLinear {
        knots: Vec<(f64, DVector<f64>)>,
        smoothing: f64,
    },
}

impl Disturbance {
    pub fn constant(value: DVector<f64>) -> Self {
        Disturbance::Constant { value }
    }

    pub fn dim(&self) -> usize {
        match self {
            Disturbance::Constant { value } => value.len(),
            Disturbance::Sinusoid { offset, .. } => offset.len(),
            Disturbance::PiecewiseLinear { knots, .. } => knots[0].1.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Disturbance::Constant { .. } => Ok(()),
            Disturbance::Sinusoid { offset, amplitude, omega, .. } => {
                if offset.len() != amplitude.len() {
                    return Err(Error::DimensionMismatch("sinusoid offset and amplitude lengths differ".into()));
                }
                if !omega.is_finite() || *omega < 0.0 {
                    return Err(Error::InvalidArgument("sinusoid frequency must be finite and >= 0".into()));
                }
                Ok(())
            }
            Disturbance::PiecewiseLinear { knots, smoothing } => {
                if knots.is_empty() {
                    return Err(Error::InvalidArgument("piecewise-linear disturbance needs knots".into()));
                }
                let q = knots[0].1.len();
                if knots.iter().any(|k| k.1.len() != q) {
                    return Err(Error::DimensionMismatch("knot values differ in length".into()));
                }
                let min_gap = knots.windows(2).map(|p| p[1].0 - p[0].0).fold(f64::INFINITY, f64::min);
                if min_gap <= 0.0 {
                    return Err(Error::InvalidArgument("knot times must increase strictly".into()));
                }
                if !(*smoothing > 0.0) || *smoothing > min_gap {
                    return Err(Error::InvalidArgument(format!(
                        "smoothing width {smoothing} must lie in (0, min knot gap {min_gap}]"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Time from which a frozen sinusoid stays constant.
    pub fn freeze_time(&self) -> Option<f64> {
        match self {
            Disturbance::Sinusoid { omega, phase, freeze_at: Some(t0), .. } if *omega > 0.0 => {
                // First t ≥ t0 with ωt + φ = π/2 + kπ, where ẇ = 0.
                let k = ((omega * t0 + phase - FRAC_PI_2) / std::f64::consts::PI).ceil();
                Some((FRAC_PI_2 + k * std::f64::consts::PI - phase) / omega)
            }
            Disturbance::Sinusoid { freeze_at: Some(t0), .. } => Some(*t0),
            _ => None,
        }
    }

    pub fn value_into(&self, t: f64, out: &mut DVector<f64>) {
        match self {
            Disturbance::Constant { value } => out.copy_from(value),
            Disturbance::Sinusoid { offset, amplitude, omega, phase, .. } => {
                let te = self.freeze_time().map_or(t, |tf| t.min(tf));
                let s = (omega * te + phase).sin();
                for i in 0..out.len() {
                    out[i] = offset[i] + amplitude[i] * s;
                }
            }
            Disturbance::PiecewiseLinear { knots, smoothing } => pwl_eval(knots, *smoothing, t, out, false),
        }
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.value_into(t, &mut out);
        out
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        match self {
            Disturbance::Constant { .. } => {}
            Disturbance::Sinusoid { amplitude, omega, phase, .. } => {
                if self.freeze_time().is_none_or(|tf| t < tf) {
                    out = amplitude * (omega * (omega * t + phase).cos());
                }
            }
            Disturbance::PiecewiseLinear { knots, smoothing } => pwl_eval(knots, *smoothing, t, &mut out, true),
        }
        out
    }

    /// sup_t ‖ẇ(t)‖ in closed form.
    pub fn sup_derivative(&self) -> f64 {
        match self {
            Disturbance::Constant { .. } => 0.0,
            Disturbance::Sinusoid { amplitude, omega, .. } => omega * amplitude.norm(),
            // Blends are convex combinations of adjacent slopes.
            Disturbance::PiecewiseLinear { knots, .. } => knots
                .windows(2)
                .map(|p| (&p[1].1 - &p[0].1).norm() / (p[1].0 - p[0].0))
                .fold(0.0, f64::max),
        }
    }
}

fn slope(knots: &[(f64, DVector<f64>)], seg: usize, i: usize) -> f64 {
    // Segment `seg` joins knot seg-1 and seg; outer segments are flat.
    if seg == 0 || seg >= knots.len() {
        0.0
    } else {
        (knots[seg].1[i] - knots[seg - 1].1[i]) / (knots[seg].0 - knots[seg - 1].0)
    }
}

fn pwl_eval(knots: &[(f64, DVector<f64>)], width: f64, t: f64, out: &mut DVector<f64>, derivative: bool) {
    let half = 0.5 * width;
    // Segment index: number of knots at or before t.
    let seg = knots.partition_point(|k| k.0 <= t);
    // Nearest knot decides whether t sits inside a blend window.
    let near = if seg == 0 {
        0
    } else if seg == knots.len() || t - knots[seg - 1].0 <= knots[seg].0 - t {
        seg - 1
    } else {
        seg
    };
    let tk = knots[near].0;
    let in_blend = (t - tk).abs() < half;
    for i in 0..out.len() {
        let m_in = slope(knots, near, i);
        let m_out = slope(knots, near + 1, i);
        let vk = knots[near].1[i];
        out[i] = if in_blend {
            let s = t - tk + half;
            if derivative {
                m_in + (m_out - m_in) * s / width
            } else {
                vk + m_in * (t - tk) + (m_out - m_in) * s * s / (2.0 * width)
            }
        } else {
            let m = if t < tk { m_in } else { m_out };
            if derivative {
                m
            } else {
                vk + m * (t - tk)
            }
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn sinusoid_sup_and_freeze() {
        let d = Disturbance::Sinusoid {
            offset: v(&[1.0, 0.0]),
            amplitude: v(&[3.0, 4.0]),
            omega: 0.2,
            phase: 0.0,
            freeze_at: Some(10.0),
        };
        assert!((d.sup_derivative() - 1.0).abs() < 1e-15);
        let tf = d.freeze_time().unwrap();
        assert!(tf >= 10.0 && tf < 10.0 + std::f64::consts::PI / 0.2 + 1e-12);
        assert!(d.derivative(tf - 1e-9).norm() < 1e-8);
        assert_eq!(d.value(tf + 3.0), d.value(tf + 7.0));
        assert_eq!(d.derivative(tf + 1.0).norm(), 0.0);
    }

    #[test]
    fn pwl_is_c1_and_matches_lines() {
        let d = Disturbance::PiecewiseLinear {
            knots: vec![(0.0, v(&[0.0])), (2.0, v(&[2.0])), (4.0, v(&[0.0]))],
            smoothing: 0.5,
        };
        d.validate().unwrap();
        assert!((d.value(1.0)[0] - 1.0).abs() < 1e-15);
        assert!((d.value(3.0)[0] - 1.0).abs() < 1e-15);
        assert_eq!(d.value(10.0)[0], 0.0);
        assert_eq!(d.sup_derivative(), 1.0);
        for &tk in &[0.0, 2.0, 4.0] {
            for &edge in &[-0.25, 0.25] {
                let t = tk + edge;
                let l = d.value(t - 1e-7)[0];
                let r = d.value(t + 1e-7)[0];
                assert!((l - r).abs() < 1e-6);
                let dl = d.derivative(t - 1e-9)[0];
                let dr = d.derivative(t + 1e-9)[0];
                assert!((dl - dr).abs() < 1e-6);
            }
        }
        // Derivative matches finite differences inside a blend.
        let t = 2.1;
        let fd = (d.value(t + 1e-6)[0] - d.value(t - 1e-6)[0]) / 2e-6;
        assert!((fd - d.derivative(t)[0]).abs() < 1e-8);
    }

    #[test]
    fn pwl_validation() {
        let bad = Disturbance::PiecewiseLinear {
            knots: vec![(0.0, v(&[0.0])), (1.0, v(&[1.0]))],
            smoothing: 2.0,
        };
        assert!(bad.validate().is_err());
    }
}
