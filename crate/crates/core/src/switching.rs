//! Average-dwell-time switching signals and the timer automaton that generates them.
//!
//! Modes are 0-based here; files and CSV output use 1-based labels.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Slack on the τ ≥ 1 jump test and on ADT validation.
const BUDGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellTimeParams {
    pub tau_d: f64,
    pub n0: u32,
}

impl DwellTimeParams {
    pub fn new(tau_d: f64, n0: u32) -> Result<Self> {
        if !(tau_d > 0.0) || n0 < 1 {
            return Err(Error::InvalidArgument(format!(
                "dwell parameters need tau_d > 0 and N0 >= 1 (got {tau_d}, {n0})"
            )));
        }
        Ok(Self { tau_d, n0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    pub events: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl SwitchingSignal {
    pub fn constant(mode: usize, horizon: f64) -> Self {
        Self {
            events: vec![(0.0, mode)],
            horizon,
        }
    }

    pub fn new(events: Vec<(f64, usize)>, horizon: f64, num_modes: usize) -> Result<Self> {
        match events.first() {
            Some(&(t, _)) if t == 0.0 => {}
            _ => return Err(Error::InvalidArgument("first switching event must be at t = 0".into())),
        }
        for pair in events.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::InvalidArgument(format!(
                    "switching times must increase strictly ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some(&(_, mode)) = events.iter().find(|(_, m)| *m >= num_modes) {
            return Err(Error::InvalidArgument(format!(
                "mode {} outside 1..={num_modes}",
                mode + 1
            )));
        }
        Ok(Self { events, horizon })
    }

    /// Times of actual switches (every event after the initial one).
    pub fn switch_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().skip(1).map(|e| e.0)
    }

    pub fn num_switches(&self) -> usize {
        self.events.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutomatonState {
    pub tau: f64,
    pub sigma: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdtReport {
    pub valid: bool,
    pub worst_window: (f64, f64),
    pub worst_excess: f64,
}

/// Checks N(t,s) ≤ N₀ + (t − s)/τ_d over every window spanned by switch times.
pub fn validate_adt(signal: &SwitchingSignal, params: &DwellTimeParams) -> AdtReport {
    let times: Vec<f64> = signal.switch_times().collect();
    let n0 = params.n0 as f64;
    let mut worst = AdtReport {
        valid: true,
        worst_window: (0.0, 0.0),
        worst_excess: -n0,
    };
    for i in 0..times.len() {
        for k in i..times.len() {
            let count = (k - i + 1) as f64;
            let excess = count - n0 - (times[k] - times[i]) / params.tau_d;
            if excess > worst.worst_excess {
                worst.worst_excess = excess;
                worst.worst_window = (times[i], times[k]);
            }
        }
    }
    worst.valid = worst.worst_excess <= BUDGET_TOL * (1.0 + n0);
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub dwell: DwellTimeParams,
    pub num_modes: usize,
    pub horizon: f64,
    pub seed: u64,
    pub rate: f64,
    pub jump_probability: f64,
    /// Initial timer value; defaults to N₀.
    pub tau0: Option<f64>,
    pub initial_mode: usize,
}

/// Simulates the timer automaton: τ̇ = rate/τ_d saturating at N₀; on a candidate
/// grid of spacing τ_d/10 a seeded coin decides whether to switch when τ ≥ 1.
pub fn generate_signal(params: &GeneratorParams) -> Result<SwitchingSignal> {
    if !(0.0..=1.0).contains(&params.rate) {
        return Err(Error::InvalidRate(params.rate));
    }
    if !(0.0..=1.0).contains(&params.jump_probability) {
        return Err(Error::InvalidArgument(format!(
            "jump probability {} outside [0, 1]",
            params.jump_probability
        )));
    }
    if params.initial_mode >= params.num_modes {
        return Err(Error::InvalidArgument("initial mode out of range".into()));
    }
    let n0 = params.dwell.n0 as f64;
    let tau0 = params.tau0.unwrap_or(n0);
    if !(0.0..=n0).contains(&tau0) {
        return Err(Error::InvalidArgument(format!("tau0 = {tau0} outside [0, N0]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let spacing = params.dwell.tau_d / 10.0;
    let mut events = vec![(0.0, params.initial_mode)];
    let mut tau = tau0;
    let mut sigma = params.initial_mode;
    let mut last = 0.0;
    let mut k = 1u64;
    loop {
        let t = k as f64 * spacing;
        if t > params.horizon {
            break;
        }
        tau = (tau + params.rate * (t - last) / params.dwell.tau_d).min(n0);
        last = t;
        if params.num_modes > 1 && tau >= 1.0 - BUDGET_TOL && rng.random_bool(params.jump_probability) {
            let pick = rng.random_range(0..params.num_modes - 1);
            sigma = if pick >= sigma { pick + 1 } else { pick };
            tau -= 1.0;
            events.push((t, sigma));
        }
        k += 1;
    }
    Ok(SwitchingSignal {
        events,
        horizon: params.horizon,
    })
}

/// Reconstructs the automaton timer along a signal: (switch time, τ before, τ after).
pub fn timer_trace(signal: &SwitchingSignal, dwell: &DwellTimeParams, rate: f64, tau0: f64) -> Vec<(f64, f64, f64)> {
    let n0 = dwell.n0 as f64;
    let mut tau = tau0;
    let mut last = 0.0;
    signal
        .switch_times()
        .map(|t| {
            tau = (tau + rate * (t - last) / dwell.tau_d).min(n0);
            last = t;
            let before = tau;
            tau -= 1.0;
            (t, before, tau)
        })
        .collect()
}

/// Mode of the last event at or before `t` (right-continuous).
pub fn mode_at(signal: &SwitchingSignal, t: f64) -> Result<usize> {
    if t < 0.0 || t > signal.horizon {
        return Err(Error::OutOfHorizon {
            t,
            horizon: signal.horizon,
        });
    }
    let idx = signal.events.partition_point(|e| e.0 <= t);
    Ok(signal.events[idx - 1].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(times: &[f64]) -> SwitchingSignal {
        let mut events = vec![(0.0, 0)];
        for (i, &t) in times.iter().enumerate() {
            events.push((t, (i + 1) % 2));
        }
        SwitchingSignal::new(events, 10.0, 2).unwrap()
    }

    #[test]
    fn adt_examples() {
        let p = DwellTimeParams::new(1.0, 1).unwrap();
        assert!(validate_adt(&SwitchingSignal::constant(0, 5.0), &p).valid);
        assert!(validate_adt(&signal(&[1.0, 2.0, 3.0]), &p).valid);
        let tight = DwellTimeParams::new(10.0, 1).unwrap();
        let r = validate_adt(&signal(&[1.0, 1.5]), &tight);
        assert!(!r.valid);
        assert_eq!(r.worst_window, (1.0, 1.5));
        assert!((r.worst_excess - 0.95).abs() < 1e-12);
    }

    fn gen(rate: f64, tau0: Option<f64>, seed: u64) -> GeneratorParams {
        GeneratorParams {
            dwell: DwellTimeParams::new(1.0, 1).unwrap(),
            num_modes: 3,
            horizon: 50.0,
            seed,
            rate,
            jump_probability: 0.7,
            tau0,
            initial_mode: 0,
        }
    }

    #[test]
    fn zero_rate_never_switches() {
        let s = generate_signal(&gen(0.0, Some(0.0), 1)).unwrap();
        assert_eq!(s.num_switches(), 0);
        assert!(matches!(generate_signal(&gen(1.5, None, 1)), Err(Error::InvalidRate(_))));
    }

    #[test]
    fn unit_budget_spaces_switches() {
        let s = generate_signal(&gen(1.0, Some(0.0), 9)).unwrap();
        assert!(s.num_switches() > 5);
        let times: Vec<f64> = s.switch_times().collect();
        assert!(times[0] >= 1.0 - 1e-9);
        for pair in times.windows(2) {
            assert!(pair[1] - pair[0] >= 1.0 - 1e-9);
        }
        for pair in s.events.windows(2) {
            assert_ne!(pair[0].1, pair[1].1);
        }
    }

    #[test]
    fn mode_lookup_right_continuous() {
        let s = SwitchingSignal::new(vec![(0.0, 0), (2.0, 1)], 10.0, 2).unwrap();
        assert_eq!(mode_at(&s, 5.0).unwrap(), 1);
        assert_eq!(mode_at(&s, 2.0).unwrap(), 1);
        assert_eq!(mode_at(&s, 1.999).unwrap(), 0);
        assert_eq!(mode_at(&SwitchingSignal::constant(0, 10.0), 5.0).unwrap(), 0);
        assert!(matches!(mode_at(&s, 10.5), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn malformed_signals_rejected() {
        assert!(SwitchingSignal::new(vec![(1.0, 0)], 5.0, 2).is_err());
        assert!(SwitchingSignal::new(vec![(0.0, 0), (1.0, 1), (1.0, 0)], 5.0, 2).is_err());
        assert!(SwitchingSignal::new(vec![(0.0, 2)], 5.0, 2).is_err());
    }
}
