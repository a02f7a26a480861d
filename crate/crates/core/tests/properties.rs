use proptest::prelude::*;

use hybrid_perturb::analysis::*;
use hybrid_perturb::hybrid::*;
use hybrid_perturb::perturbation::*;
use hybrid_perturb::scenarios::*;

fn example1(gamma: f64, tau: f64, epsilon: f64) -> PerturbedSystem<f64> {
    build_example1(&Example1Params {
        gamma,
        tau,
        epsilon,
        ..Example1Params::default()
    })
    .unwrap()
}

fn example2(gamma: f64, tau: f64, epsilon: f64) -> PerturbedSystem<f64> {
    build_example2(&Example2Params {
        gamma,
        tau,
        epsilon,
        ..Example2Params::default()
    })
    .unwrap()
}

fn check_replay_and_guards(sys: &HybridSystem<f64>, arc: &HybridArc<f64>, tol: f64) -> Result<(), TestCaseError> {
    for jv in arc.jumps() {
        let again = apply_jump(sys, jv.pre).unwrap();
        for (a, b) in again.iter().zip(jv.post) {
            prop_assert!((a - b).abs() <= 1e-12, "replay {a} vs {b}");
        }
        let g = sys.guards().iter().map(|g| g.eval(jv.pre).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(g <= tol, "guard {g} at t = {}", jv.t);
    }
    Ok(())
}

fn default_full(seed: u64, epsilon: f64) -> (FullSystem<f64>, Vec<f64>) {
    let g = GameParams::default();
    let nes = NESControllerParams::reference(seed);
    let uni: Vec<UnicycleParams> = config::DEFAULT_SIGMA
        .iter()
        .map(|&s| UnicycleParams::tuned(s, 2.0 / 9.0))
        .collect();
    let full = build_full_system(&g, &nes, &uni, epsilon, game_measurement(&g)).unwrap();
    let x0 = full.initial_state(&nes, &g, None, None);
    (full, x0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn example_arcs_are_well_formed(
        gamma in 0.0..0.5f64,
        tau in 0.2..2.0f64,
        eps in 1e-3..0.5f64,
        u in 0.0..10.0f64,
        v in 0.0..=1.0f64,
        x in 0.0..10.0f64,
    ) {
        let cfg = SolverConfig::default().with_max_t(5.0).with_record_stride(3);
        for e in [example1(gamma, tau, eps), example2(gamma, tau, eps)] {
            let arc = solve(&e.system, &[u, v, x], &cfg).unwrap();
            prop_assert!(arc.validate().is_ok());
            let js: Vec<usize> = arc.samples().map(|s| s.time.j).collect();
            prop_assert!(js.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
            prop_assert_eq!(arc.n_jumps(), *js.last().unwrap());
            check_replay_and_guards(&e.system, &arc, cfg.guard_tol)?;
        }
    }

    #[test]
    fn solving_is_deterministic(gamma in 0.0..0.5f64, u in 0.0..10.0f64, v in 0.0..=1.0f64) {
        let e = example1(gamma, 0.7, 1e-2);
        let cfg = SolverConfig::default().with_max_t(4.0);
        let a = solve(&e.system, &[u, v, 3.0], &cfg).unwrap();
        let b = solve(&e.system, &[u, v, 3.0], &cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_arc_csv(&a, &mut ca).unwrap();
        write_arc_csv(&b, &mut cb).unwrap();
        prop_assert_eq!(ca, cb);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rk4_is_fourth_order(gamma in 1.0..5.0f64, r in 1.0..5.0f64, frac in 0.0..0.5f64) {
        let sys = HybridSystem::builder(1)
            .flow(move |x: &[f64], dx: &mut [f64]| dx[0] = gamma * (1.0 - x[0] / r))
            .build()
            .unwrap();
        let u0 = frac * r;
        let horizon = 2.0;
        let exact = r - (r - u0) * (-gamma / r * horizon).exp();
        let err = |h: f64| {
            let cfg = SolverConfig::default().with_step(h);
            (integrate_flow(&sys, &[u0], horizon, &cfg).unwrap().state[0] - exact).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        prop_assert!(e1 / e2 >= 8.0, "{e1} / {e2}");
    }

    #[test]
    fn regularity_ignores_sampling(gamma in 0.0..0.3f64, tau in 0.3..2.0f64, stride in 2usize..20) {
        let e = example2(gamma, tau, 1e-2);
        let base = SolverConfig::default().with_max_t(6.0);
        let a = solve(&e.system, &[1.0, 0.0, 1.0], &base).unwrap();
        let b = solve(&e.system, &[1.0, 0.0, 1.0], &base.clone().with_record_stride(stride)).unwrap();
        for t in [0.5 * tau, tau, 1.5 * tau] {
            let ra = classify_jumps(&a, t, RegularityVariant::AllJumps).unwrap();
            let rb = classify_jumps(&b, t, RegularityVariant::AllJumps).unwrap();
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn inflated_manifold_is_closer(
        u in -5.0..15.0f64,
        v in -1.0..2.0f64,
        x in -5.0..15.0f64,
        rho in 1e-3..20.0f64,
    ) {
        let e = example1(0.01, 1.0, 1e-3);
        let ma = ManifoldSet::new(ManifoldKind::MA, &e.slow_attractor, &e.decomposition, &e.steady_state).unwrap();
        let mr = ManifoldSet::new(ManifoldKind::MRho(rho), &e.slow_attractor, &e.decomposition, &e.steady_state).unwrap();
        let p = [u, v, x];
        let (da, dr) = (manifold_distance(&p, &ma), manifold_distance(&p, &mr));
        prop_assert!(dr <= da + 1e-9, "{dr} > {da}");
        prop_assert!(da >= 0.0 && dr >= 0.0);
    }

    #[test]
    fn entry_time_is_monotone(
        ds in proptest::collection::vec(0.0..10.0f64, 1..60),
        r1 in 0.0..10.0f64,
        r2 in 0.0..10.0f64,
    ) {
        let series: Vec<(f64, f64)> = ds.iter().enumerate().map(|(k, &d)| (k as f64 * 0.1, d)).collect();
        let (small, big) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        match (entry_time(&series, small), entry_time(&series, big)) {
            (Some(a), Some(b)) => prop_assert!(a >= b),
            (Some(_), None) => prop_assert!(false, "entered the small ball but not the big one"),
            _ => {}
        }
    }

    #[test]
    fn tail_never_exceeds_sup(gamma in 0.0..0.3f64, u in 0.0..10.0f64, x in 0.0..10.0f64, frac in 0.0..1.0f64) {
        let e = example1(gamma, 1.0, 1e-2);
        let arc = solve(&e.system, &[u, 0.5, x], &SolverConfig::default().with_max_t(5.0)).unwrap();
        let s = trajectory_stats(&arc, &e.attractor, 0.5, 5.0 * frac);
        prop_assert!(s.tail_radius <= s.sup_distance);
        prop_assert!(s.final_distance <= s.tail_radius);
    }

    #[test]
    fn tracking_function_bounds_hold(
        sigma in 1e-3..5e-3f64,
        r in proptest::collection::vec(-1.0..1.0f64, 3),
        scale in 0.0..2.0f64,
        theta in -10.0..10.0f64,
        reference in proptest::array::uniform2(-20.0..20.0f64),
    ) {
        let p = UnicycleParams::tuned(sigma, 2.0 / 9.0);
        prop_assume!(p.bounds_hold(2.0));
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        prop_assume!(n > 1e-6);
        let mut q = vec![0.0; unicycle::AGENT_DIM];
        q[unicycle::X] = reference[0] + r[0] / n * scale;
        q[unicycle::Y] = reference[1] + r[1] / n * scale;
        q[unicycle::THETA_E] = r[2] / n * scale;
        q[unicycle::THETA] = theta;
        let d = unicycle::error_norm(&q, reference);
        let v = unicycle::lyapunov(&p, &q, reference);
        prop_assert!(0.25 * d * d <= v + 1e-12 && v <= d * d + 1e-12, "d = {d}, V = {v}");
    }

    #[test]
    fn nash_residual_is_small(
        sources in proptest::collection::vec(proptest::array::uniform2(-50.0..50.0f64), 1..8),
        c in 0.0..3.0f64,
    ) {
        let g = GameParams { sources, coupling: c };
        let s = solve_nash_quadratic(&g).unwrap();
        let grad = pseudo_gradient(&g, &s.u_star);
        prop_assert!(grad.iter().all(|v| v.abs() <= 1e-10 * 50.0), "{grad:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn composed_arcs_keep_invariants(seed in 0u64..1000, eps in prop::sample::select(vec![1.0, 0.5])) {
        let (full, x0) = default_full(seed, eps);
        let l = full.layout;
        let n1 = l.dim();
        let cfg = SolverConfig::default().with_max_t(0.5);
        let arc = solve(full.system(), &x0, &cfg).unwrap();
        prop_assert!(arc.validate().is_ok());
        check_replay_and_guards(full.system(), &arc, cfg.guard_tol)?;
        for s in arc.samples() {
            for i in 0..l.n {
                let m = l.mu(i);
                for k in 0..2 {
                    let nrm = s.state[m + 2 * k].hypot(s.state[m + 2 * k + 1]);
                    prop_assert!((nrm - 1.0).abs() <= 1e-6);
                }
                // Localized guards may overshoot 1 by at most the guard tolerance.
                let timers = 0.0..=1.0 + cfg.guard_tol;
                let t = s.state[l.timer(i)];
                prop_assert!(timers.contains(&t), "controller timer {t}");
                let pt = s.state[n1 + unicycle::AGENT_DIM * i + unicycle::TIMER];
                prop_assert!(timers.contains(&pt), "plant timer {pt}");
            }
        }
        for jv in arc.jumps().filter(|j| j.tag.map(|t| t.name.as_ref()) == Some("controller")) {
            let reset: Vec<usize> = (0..l.n).filter(|&i| jv.post[l.timer(i)] == 0.0 && jv.pre[l.timer(i)] != 0.0).collect();
            prop_assert_eq!(reset.len(), 1);
        }
    }
}

#[test]
fn example_steady_state_is_consistent() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let e = example1(0.01, 1.0, 1e-3);
    for _ in 0..1000 {
        let x1 = [rng.gen_range(0.0..=10.0), rng.gen_range(0.0..=1.0)];
        assert!(steady_state_residual(&e.system, &e.decomposition, &e.steady_state, &x1) <= 1e-9);
    }
}

#[test]
fn composed_steady_state_is_consistent() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let (full, _) = default_full(0, 1.0);
    let l = full.layout;
    let p = &full.perturbed;
    for _ in 0..100 {
        let mut x1 = vec![0.0; l.dim()];
        for i in 0..l.n {
            x1[l.u(i)] = rng.gen_range(-20.0..20.0);
            x1[l.u(i) + 1] = rng.gen_range(-20.0..20.0);
            x1[l.xi(i)] = rng.gen_range(-100.0..100.0);
            x1[l.xi(i) + 1] = rng.gen_range(-100.0..100.0);
            for k in 0..2 {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                x1[l.mu(i) + 2 * k] = a.cos();
                x1[l.mu(i) + 2 * k + 1] = a.sin();
            }
            x1[l.timer(i)] = rng.gen_range(0.0..1.0);
        }
        assert!(steady_state_residual(&p.system, &p.decomposition, &p.steady_state, &x1) <= 1e-9);
    }
}
