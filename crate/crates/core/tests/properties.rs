use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use feedopt::certificates::*;
use feedopt::config::{emit_scenario, parse_scenario};
use feedopt::controller::{ControllerConfig, NesterovParams};
use feedopt::cost::{grad_f, Cost, QuadraticCost};
use feedopt::instances::*;
use feedopt::linalg::{lyapunov_residual, solve_lyapunov, spectral_norm};
use feedopt::plant::{check_common_maps, random_plant};
use feedopt::report::{Analysis, StaticBounds};
use feedopt::sim::{simulate, InitialConditions};
use feedopt::switching::{generate_signal, timer_trace, validate_adt, DwellTimeParams, GeneratorParams};

fn hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let shift = a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    a - DMatrix::identity(n, n) * (shift + rng.random_range(0.1..2.0))
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lyapunov_residual_is_small(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = hurwitz(&mut rng, n);
        let q = spd(&mut rng, n);
        let p = solve_lyapunov(&a, &q).unwrap();
        prop_assert!(lyapunov_residual(&a, &p, &q) <= 1e-9 * spectral_norm(&q));
        prop_assert!((&p - p.transpose()).amax() <= 1e-9 * p.amax());
        prop_assert!(p.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn generated_signals_respect_adt(
        seed in any::<u64>(),
        tau_d in 0.05f64..5.0,
        n0 in 1u32..4,
        modes in 2usize..5,
        rate in 0.0f64..=1.0,
        p in 0.0f64..=1.0,
    ) {
        let dwell = DwellTimeParams::new(tau_d, n0).unwrap();
        let params = GeneratorParams {
            dwell,
            num_modes: modes,
            horizon: 40.0 * tau_d,
            seed,
            rate,
            jump_probability: p,
            tau0: None,
            initial_mode: 0,
        };
        let signal = generate_signal(&params).unwrap();
        prop_assert!(validate_adt(&signal, &dwell).valid);
        // Timer stays in [0, N0] and every switch spends exactly one unit.
        for (_, before, after) in timer_trace(&signal, &dwell, rate, n0 as f64) {
            prop_assert!(before >= 1.0 - 1e-9 && before <= n0 as f64 + 1e-12);
            prop_assert!((before - after - 1.0).abs() < 1e-12 && after >= -1e-9);
        }
        for w in signal.events.windows(2) {
            prop_assert!(w[1].0 > w[0].0 && w[1].1 != w[0].1 && w[1].1 < modes);
        }
        prop_assert_eq!(generate_signal(&params).unwrap(), signal);
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m, p, q) = (rng.random_range(1..6), rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
        let plant = random_plant(&mut rng, n, m, p, q, 1, 0.5).unwrap();
        let sc = {
            let mut sc = scalar_quadratic(ControllerConfig::Gradient, 1.0, 0.0, 1.0).unwrap();
            sc.plant = plant;
            sc.cost = Cost::Quadratic(QuadraticCost::new(spd(&mut rng, m), spd(&mut rng, p), DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0))).unwrap());
            sc
        };
        let map = sc.map().unwrap();
        let u = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let w = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        let g = grad_f(&sc.cost, &map, &u, &w).unwrap();
        for i in 0..m {
            let h = 1e-5;
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (sc.cost.f(&map, &up, &w) - sc.cost.f(&map, &dn, &w)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn random_plants_share_steady_state_maps(seed in any::<u64>(), modes in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plant = random_plant(&mut rng, 6, 3, 3, 2, modes, 0.5).unwrap();
        let rep = check_common_maps(&plant, 1e-8).unwrap();
        prop_assert!(rep.common, "deviation {}", rep.max_deviation);
    }

    #[test]
    fn lemma_a2_is_sufficient(
        alpha in 0.1f64..10.0, beta in 0.1f64..10.0, eta in 0.1f64..10.0,
        delta in 0.1f64..10.0, gamma in 0.1f64..10.0, frac in 0.01f64..0.99,
    ) {
        let base = QuadFormParams { alpha, beta, eta, delta, phi: 1.0, nu: 1.0, gamma, theta: 0.5, b: 0.0, epsilon: 1.0 };
        let eps_star = lemma_a2_check(&base).eps_star;
        let mut p = QuadFormParams { epsilon: frac * eps_star, ..base };
        p.theta = p.optimal_theta();
        prop_assert!(lemma_a2_check(&p).pd);
        let beyond = QuadFormParams { epsilon: 2.0 * eps_star, ..p };
        prop_assert!(!lemma_a2_check(&beyond).pd);
        let heavy = QuadFormParams { b: gamma / p.nu, ..p };
        prop_assert!(!lemma_a2_check(&heavy).pd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn certificates_are_consistent(seed in 0u64..1000) {
        let sc = build_random_instance(seed).unwrap();
        let sb = StaticBounds::new(&sc).unwrap();
        let g = sb.gradient.as_ref().unwrap();
        for c in &g.modes {
            prop_assert!(c.a_under <= c.a_bar && c.theta > 0.0 && c.theta < 1.0);
        }
        prop_assert!(g.eps_bar.iter().all(|e| *e > 0.0));
        let an = Analysis::new(&sc).unwrap();
        let (lo, hi) = an.varrho_window.unwrap();
        prop_assert!(lo < hi);
    }

    #[test]
    fn arcs_are_well_formed(seed in 0u64..1000) {
        let mut sc = build_random_instance(seed).unwrap();
        sc.integrator.horizon = sc.integrator.horizon.min(30.0);
        let arc = simulate(&sc).unwrap();
        prop_assert!(arc.check_well_formed().is_ok(), "{:?}", arc.check_well_formed());
        prop_assert!(arc.divergence.is_none());
        prop_assert!((arc.last().time.t - sc.integrator.horizon).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_is_invariant(seed in 0u64..1000) {
        let mut sc = build_random_single_mode(seed).unwrap();
        let an = Analysis::new(&sc).unwrap();
        let w = sc.disturbance.value(0.0);
        let u = an.oracle.u_star(&w);
        sc.initial = InitialConditions { x0: Some(an.oracle.x_star(0, &u, &w)), u0: Some(u), u2: None, u3: None };
        sc.integrator.horizon = 5.0;
        let arc = simulate(&sc).unwrap();
        let last = arc.last();
        let err = (arc.u(last) - an.oracle.u_star(&w)).norm() + (arc.x(last) - an.oracle.x_star(0, &arc.u(last), &w)).norm();
        prop_assert!(err <= 1e-6, "drift {err:e}");
    }

    #[test]
    fn lyapunov_bracketing_on_arcs(seed in 0u64..1000) {
        let mut sc = build_random_single_mode(seed).unwrap();
        sc.integrator.horizon = 10.0;
        let an = Analysis::new(&sc).unwrap();
        let arc = simulate(&sc).unwrap();
        let g = &an.bounds.gradient.as_ref().unwrap().modes[0];
        let w = sc.disturbance.value(0.0);
        for s in &arc.samples {
            let v = an.monitor.value(arc.n, s.sigma, &s.state, &w, None);
            let z2 = an.monitor.error_norm(arc.n, s.sigma, &s.state, &w).powi(2);
            prop_assert!(v >= g.a_under * z2 * (1.0 - 1e-9) - 1e-14);
            prop_assert!(v <= g.a_bar * z2 * (1.0 + 1e-9) + 1e-14);
        }
    }

    #[test]
    fn scenario_files_round_trip(seed in 0u64..1000, accelerated in any::<bool>()) {
        let mut sc = build_random_instance(seed).unwrap();
        if accelerated {
            sc.controller = ControllerConfig::Nesterov(NesterovParams::new(1.0, 1.0, 1.0, 3.0, true).unwrap());
        }
        let text = emit_scenario(&sc).unwrap();
        let back = parse_scenario(&text, "emitted").unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(emit_scenario(&back).unwrap(), text);
    }
}

#[test]
fn reset_contraction_without_momentum_reset() {
    // r0 = 0: V must not increase across resets.
    let sc = scalar_quartic(2.0, 1.0, 10.0).unwrap();
    let an = Analysis::new(&sc).unwrap();
    let arc = simulate(&sc).unwrap();
    let v = lyapunov_series(&arc, &an.monitor, &sc.disturbance, false);
    let rep = lyapunov_decrease_check(&arc, &v, DecreaseMode::JumpContraction, 0.0, sc.integrator.step);
    assert!(rep.holds && rep.checked > 0, "{rep:?}");
}

#[test]
fn gradient_flow_rate_holds() {
    let sc = scalar_quadratic(ControllerConfig::Gradient, 1.0, 0.0, 10.0).unwrap();
    let an = Analysis::new(&sc).unwrap();
    let arc = simulate(&sc).unwrap();
    let v = lyapunov_series(&arc, &an.monitor, &sc.disturbance, false);
    let k = &an.bounds.constants;
    let b = 2.0 * k.mu * k.mu / k.ell;
    let rep = lyapunov_decrease_check(&arc, &v, DecreaseMode::FlowRate, b, sc.integrator.step);
    assert!(rep.holds && rep.checked > 0, "{rep:?}");
}

#[test]
fn envelope_rejects_doubled_rate() {
    let sc = build_random_single_mode(3).unwrap();
    let an = Analysis::new(&sc).unwrap();
    let arc = simulate(&sc).unwrap();
    let errors = error_series(&arc, &an.monitor, &sc.disturbance);
    let c = an.eiss.unwrap();
    assert!(eiss_envelope_check(&errors, &c, errors[0].1, 0.0).holds);
    // The decay is several times faster than b0; only a large tightening must trip it.
    let tight = EissCoefficients { b0: 1e3 * c.b0, ..c };
    assert!(!eiss_envelope_check(&errors, &tight, errors[0].1, 0.0).holds);
}
