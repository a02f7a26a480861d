use std::sync::Arc;

use hybrid_perturb::analysis::*;
use hybrid_perturb::hybrid::*;
use hybrid_perturb::perturbation::*;
use hybrid_perturb::scenarios::*;

fn reduced_example1(gamma: f64) -> (HybridSystem<f64>, Example1Params) {
    let p = Example1Params {
        gamma,
        ..Example1Params::default()
    };
    let e = build_example1::<f64>(&p).unwrap();
    (make_reduced(&e.system, &e.decomposition, &e.steady_state).unwrap(), p)
}

#[test]
fn constant_arc_has_constant_v() {
    let mut b = ArcBuilder::<f64>::unlabeled(2);
    for k in 0..10 {
        b.push_sample(k as f64 * 0.1, &[0.0, 0.5]).unwrap();
    }
    let arc = b.finish(Termination::MaxT);
    let spec = LyapunovSpec::new(example1_v1, SetDescriptor::boxed(vec![0.0, 0.0], vec![0.0, 1.0]));
    let series = lyapunov_along_arc(&arc, &spec);
    assert_eq!(series.len(), 10);
    assert!(series.iter().all(|s| s.v == 0.0 && s.dv_jump.is_none()));
    assert!(series[..9].iter().all(|s| s.dv_flow == Some(0.0)));
    assert_eq!(series[9].dv_flow, None);
    assert!(check_flow_decrease(&arc, &spec).is_empty());
}

#[test]
fn reduced_jump_decrease_is_exact() {
    let (r, _) = reduced_example1(0.0);
    let arc = solve(&r, &[2.0, 1.0], &SolverConfig::default().with_max_t(0.5)).unwrap();
    let spec = LyapunovSpec::new(example1_v1, SetDescriptor::boxed(vec![0.0, 0.0], vec![0.0, 1.0]));
    let series = lyapunov_along_arc(&arc, &spec);
    assert_eq!(series[0].dv_jump, Some(-2.0));
    assert_eq!(series[0].v, 4.0);
    assert_eq!(series[1].v, 2.0);
}

#[test]
fn example1_reduced_certificate_holds() {
    let (r, p) = reduced_example1(0.01);
    let spec = example1_reduced_lyapunov::<f64>(&p);
    for u0 in [0.5, 3.0, 7.5, 10.0] {
        let arc = solve(&r, &[u0, 0.0], &SolverConfig::default().with_max_t(12.0)).unwrap();
        assert!(arc.n_jumps() >= 11);
        assert!(check_jump_decrease(&arc, &spec).is_empty(), "u0 = {u0}");
        assert!(check_flow_decrease(&arc, &spec).is_empty(), "u0 = {u0}");
        // Pure functions of their inputs.
        assert_eq!(check_flow_decrease(&arc, &spec), check_flow_decrease(&arc, &spec));
        assert_eq!(lyapunov_along_arc(&arc, &spec), lyapunov_along_arc(&arc, &spec));
    }
}

#[test]
fn expanding_jump_is_flagged() {
    let mut b = ArcBuilder::<f64>::unlabeled(2);
    b.push_sample(0.0, &[1.0, 0.0]).unwrap();
    b.push_sample(1.0, &[1.0, 1.0]).unwrap();
    b.push_jump(&[2.0, 0.0], None).unwrap();
    b.push_sample(1.5, &[2.0, 0.5]).unwrap();
    b.push_sample(2.0, &[2.0, 1.0]).unwrap();
    b.push_jump(&[1.0, 0.0], None).unwrap();
    let arc = b.finish(Termination::MaxT);
    let (_, p) = reduced_example1(0.01);
    let spec = example1_reduced_lyapunov::<f64>(&p);
    let v = check_jump_decrease(&arc, &spec);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].j, 1);
    assert_eq!(v[0].value, 7.0);

    let flat = LyapunovSpec::new(|x: &[f64]| x[0], SetDescriptor::point(vec![0.0, 0.0]));
    let mut b = ArcBuilder::<f64>::unlabeled(2);
    b.push_sample(0.0, &[3.0, 0.0]).unwrap();
    b.push_jump(&[2.0, 0.0], None).unwrap();
    b.push_sample(1.0, &[2.0, 0.0]).unwrap();
    assert!(check_jump_decrease(&b.finish(Termination::MaxT), &flat).is_empty());
}

#[test]
fn boundary_layer_derivative() {
    let e = build_example1::<f64>(&Example1Params::default()).unwrap();
    let bl = make_boundary_layer(&e.system, &e.decomposition, &e.slow_attractor, 20.0, LayerVariant::H1).unwrap();
    let arc = solve(&bl, &[0.0, 0.5, 1.0], &SolverConfig::default().with_max_t(0.5)).unwrap();
    let v2 = LyapunovSpec::new(|x: &[f64]| 0.5 * (x[2] - x[0]).powi(2), e.attractor.clone());
    let series = lyapunov_along_arc(&arc, &v2);
    let dv = series[0].dv_flow.unwrap();
    assert!((dv + 1.0).abs() < 1e-3, "{dv}");
    let with_decrease = v2.clone().with_flow_threshold(|_| 0.0);
    assert!(check_flow_decrease(&arc, &with_decrease).is_empty());
}

#[test]
fn forward_difference_is_first_order() {
    let e = build_example1::<f64>(&Example1Params::default()).unwrap();
    let bl = make_boundary_layer(&e.system, &e.decomposition, &e.slow_attractor, 20.0, LayerVariant::H1).unwrap();
    let v2 = LyapunovSpec::new(|x: &[f64]| 0.5 * (x[2] - x[0]).powi(2), e.attractor.clone());
    let err = |h: f64| {
        let arc = solve(&bl, &[0.0, 0.5, 1.0], &SolverConfig::default().with_step(h).with_max_t(0.1)).unwrap();
        (lyapunov_along_arc(&arc, &v2)[0].dv_flow.unwrap() + 1.0).abs()
    };
    let ratio = err(2e-3) / err(1e-3);
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

#[test]
fn diverging_arc_violates_flow_decrease() {
    let sys = HybridSystem::builder(1)
        .flow(|x: &[f64], dx: &mut [f64]| dx[0] = x[0])
        .build()
        .unwrap();
    let arc = solve(&sys, &[1.0], &SolverConfig::default().with_max_t(1.0)).unwrap();
    let set = SetDescriptor::point(vec![0.0]);
    let s2 = set.clone();
    let spec = LyapunovSpec::new(move |x: &[f64]| s2.distance(x).powi(2), set);
    assert!(!check_flow_decrease(&arc, &spec).is_empty());
}

fn unicycle_bounds_spec(p: UnicycleParams, reference: [f64; 2]) -> LyapunovSpec<f64> {
    let mut lo = vec![f64::NEG_INFINITY; unicycle::AGENT_DIM];
    let mut hi = vec![f64::INFINITY; unicycle::AGENT_DIM];
    lo[unicycle::X] = reference[0];
    hi[unicycle::X] = reference[0];
    lo[unicycle::Y] = reference[1];
    hi[unicycle::Y] = reference[1];
    lo[unicycle::THETA_E] = 0.0;
    hi[unicycle::THETA_E] = 0.0;
    LyapunovSpec::new(move |q: &[f64]| unicycle::lyapunov(&p, q, reference), SetDescriptor::boxed(lo, hi))
        .with_bounds(|d| 0.25 * d * d, |d| d * d)
}

#[test]
fn unicycle_equilibrium_arc() {
    let p = UnicycleParams::tuned(2e-3, 2.0 / 9.0);
    let reference = [1.0, -2.0];
    let sys = build_unicycle_agent::<f64>(&p, reference).unwrap();
    let mut q = vec![0.0; unicycle::AGENT_DIM];
    q[unicycle::X] = 1.0;
    q[unicycle::Y] = -2.0;
    q[unicycle::W_HAT] = p.omega_r;
    let arc = solve(&sys, &q, &SolverConfig::default().with_max_t(0.05)).unwrap();
    assert!(arc.n_jumps() >= 20);
    let spec = unicycle_bounds_spec(p, reference).with_flow_threshold(|_| 0.0);
    assert!(check_flow_decrease(&arc, &spec).is_empty());
    assert!(check_jump_decrease(&arc, &spec).is_empty());
    for s in lyapunov_along_arc(&arc, &spec) {
        assert!(s.v.abs() < 1e-20);
        if let Some(d) = s.dv_flow {
            assert!(d.abs() < 1e-12);
        }
    }
}

#[test]
fn unicycle_tracking_decreases_v() {
    let p = UnicycleParams::tuned(2e-3, 2.0 / 9.0);
    let reference = [0.0, 0.0];
    let sys = build_unicycle_agent::<f64>(&p, reference).unwrap();
    let mut q = vec![0.0; unicycle::AGENT_DIM];
    q[unicycle::X] = 0.6;
    q[unicycle::Y] = -0.4;
    q[unicycle::THETA_E] = 0.3;
    q[unicycle::THETA] = -0.3;
    q[unicycle::TIMER] = 1.0;
    let arc = solve(&sys, &q, &SolverConfig::default().with_max_t(40.0).with_record_stride(50)).unwrap();
    let spec = unicycle_bounds_spec(p, reference);
    let v0 = spec.value(&q);
    let v1 = spec.value(arc.last().unwrap().state);
    assert!(v1 < 0.2 * v0, "{v0} -> {v1}");
    let states: Vec<&[f64]> = arc.samples().map(|s| s.state).collect();
    assert!(bound_violations(&spec, states).is_empty());
}

#[test]
fn tracking_function_bounds_on_samples() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for sigma in [2e-3, 3e-3, 4e-3] {
        let p = UnicycleParams::tuned(sigma, 2.0 / 9.0);
        assert!(p.bounds_hold(2.0));
        let spec = unicycle_bounds_spec(p, [0.0, 0.0]);
        let states: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                let mut q = vec![0.0; unicycle::AGENT_DIM];
                let r: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                let scale = 2.0 * rng.gen_range(0.0..1.0f64).cbrt() / n;
                q[unicycle::X] = r[0] * scale;
                q[unicycle::Y] = r[1] * scale;
                q[unicycle::THETA] = rng.gen_range(-3.0..3.0);
                q[unicycle::THETA_E] = r[2] * scale;
                q
            })
            .collect();
        assert!(bound_violations(&spec, states.iter().map(Vec::as_slice)).is_empty());
    }
}

fn example2_factory(p: &ParamPoint) -> hybrid_perturb::Result<Scenario<f64>> {
    let e = build_example2::<f64>(&Example2Params {
        gamma: p.gamma,
        tau: p.tau,
        epsilon: p.epsilon,
        ..Example2Params::default()
    })?;
    Ok(Scenario {
        system: e.system,
        attractor: e.attractor,
        sampler: example2_sampler(),
    })
}

fn refinement_grid() -> Vec<ParamPoint> {
    vec![
        ParamPoint::new(0.1, 1.0, 1e-2, 0.0),
        ParamPoint::new(0.05, 2.0, 5e-3, 0.0),
        ParamPoint::new(0.025, 4.0, 2.5e-3, 0.0),
    ]
}

#[test]
fn example2_refinement_sweep() {
    let probe = SGPASProbe::new(5.0, 0.5, refinement_grid());
    let rep = estimate_attractivity(example2_factory, &probe, &SolverConfig::default()).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.flags.is_empty());
    let tails: Vec<f64> = rep.rows.iter().map(|r| r.tail_radius.unwrap()).collect();
    for w in tails.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + MONOTONICITY_SLACK), "{tails:?}");
    }
    for r in &rep.rows {
        assert!(r.tail_radius.unwrap() <= r.sup_distance.unwrap());
        assert!(r.sup_distance.unwrap() >= 5.0 - 1e-9);
        assert_eq!(r.numeric_failures, 0);
    }
    // Same seed, same report, whatever the thread schedule.
    let again = estimate_attractivity(example2_factory, &probe, &SolverConfig::default()).unwrap();
    assert_eq!(rep, again);

    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    let row = &json.as_array().unwrap()[0];
    for key in ["gamma", "tau", "epsilon", "beta", "sup_distance", "T_hat", "tail_radius"] {
        assert!(row.get(key).is_some(), "{key}");
    }
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
}

#[test]
fn attractor_start_without_drift_stays() {
    let factory = |p: &ParamPoint| {
        let e = build_example2::<f64>(&Example2Params {
            gamma: p.gamma,
            tau: p.tau,
            epsilon: p.epsilon,
            ..Example2Params::default()
        })?;
        let sampler: IcSampler<f64> = Arc::new(|_, _| vec![0.0, 0.25, 0.0]);
        Ok(Scenario {
            system: e.system,
            attractor: e.attractor,
            sampler,
        })
    };
    let mut probe = SGPASProbe::new(1.0, 0.1, vec![ParamPoint::new(0.0, 1.0, 1e-2, 0.0)]);
    probe.n_initial = 3;
    probe.horizon = 10.0;
    let rep = estimate_attractivity(factory, &probe, &SolverConfig::default()).unwrap();
    assert!(rep.rows[0].tail_radius.unwrap() <= 1e-12);
    assert_eq!(rep.rows[0].t_hat, Some(0.0));
}

#[test]
fn example1_excursion_is_recorded() {
    let factory = |p: &ParamPoint| {
        let e = build_example1::<f64>(&Example1Params {
            gamma: p.gamma,
            tau: p.tau,
            epsilon: p.epsilon,
            ..Example1Params::default()
        })?;
        let sampler: IcSampler<f64> = Arc::new(|_, _| vec![0.0, 0.99, 10.0]);
        Ok(Scenario {
            system: e.system,
            attractor: e.attractor,
            sampler,
        })
    };
    let mut probe = SGPASProbe::new(10.0, 1.0, vec![ParamPoint::new(0.01, 1.0, 1e-3, 0.0)]);
    probe.n_initial = 1;
    probe.horizon = 5.0;
    let rep = estimate_attractivity(factory, &probe, &SolverConfig::default()).unwrap();
    assert!(rep.rows[0].sup_distance.unwrap() > 0.0);
}

#[test]
fn diverging_point_counts_failures() {
    let mut grid = refinement_grid();
    grid.push(ParamPoint::new(0.1, 0.05, 1e3, 0.0));
    let mut probe = SGPASProbe::new(5.0, 0.5, grid);
    probe.n_initial = 4;
    let rep = estimate_attractivity(example2_factory, &probe, &SolverConfig::default()).unwrap();
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.rows[3].numeric_failures, 4);
    assert_eq!(rep.rows[3].t_hat, None);
    assert!(rep.rows[..3].iter().all(|r| r.numeric_failures == 0));
}

#[test]
fn worsening_refinement_is_flagged() {
    let grid = refinement_grid();
    let row = |tail: f64| AttractivityRow {
        gamma: 0.0,
        tau: 0.0,
        epsilon: 0.0,
        beta: 0.0,
        sup_distance: Some(10.0),
        t_hat: Some(1.0),
        tail_radius: Some(tail),
        final_distance: Some(tail),
        numeric_failures: 0,
        flagged: false,
    };
    let flags = monotonicity_flags(&grid, &[row(1.0), row(1.05), row(2.0)]);
    assert_eq!(flags.len(), 2);
    assert!(flags.iter().all(|f| f.to == 2));
}

#[test]
fn probe_validation() {
    let grid = refinement_grid();
    assert!(SGPASProbe::new(1.0, 2.0, grid.clone()).validate().is_err());
    assert!(SGPASProbe::new(1.0, 0.5, vec![]).validate().is_err());
    let mut p = SGPASProbe::new(1.0, 0.5, grid);
    p.tail_fraction = 1.0;
    assert!(p.validate().is_err());
}
