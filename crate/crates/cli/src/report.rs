//! Post-run analysis: `report.json` contents and the two figures.

use serde_json::{json, Map, Value};

use hybrid_perturb::analysis::{check_flow_decrease, check_jump_decrease, LyapunovSpec, Violation};
use hybrid_perturb::hybrid::{HybridArc, SetDescriptor, SolverConfig};
use hybrid_perturb::perturbation::{classify_jumps, manifold_distance, ManifoldKind, ManifoldSet, RegularityVariant};
use hybrid_perturb::scenarios::{example1_v1, plant_offset, unicycle, BuiltScenario, ScenarioConfig, ScenarioKind};
use hybrid_perturb::Result;

use crate::svg::{Figure, Marker, RefLine, Series};

/// `{0} x [0, 1]` in `(u, v)` with `x` free.
fn slow_attractor_in_full_state() -> SetDescriptor<f64> {
    SetDescriptor::boxed(vec![0.0, 0.0, f64::NEG_INFINITY], vec![0.0, 1.0, f64::INFINITY])
}

fn lyapunov_spec(kind: ScenarioKind, cfg: &ScenarioConfig, built: &BuiltScenario<f64>, step: f64) -> (String, LyapunovSpec<f64>) {
    match kind {
        ScenarioKind::Example1 => {
            let p = cfg.example1_params();
            let (tau, gamma, r) = (p.tau, p.gamma, p.radius);
            let spec = LyapunovSpec::new(example1_v1, slow_attractor_in_full_state())
                .with_flow_threshold(move |d| d * d / tau - 4.0 * gamma * r)
                .with_jump_threshold(|d| 0.5 * d * d)
                .with_step(step);
            ("(2 - v) u^2".into(), spec)
        }
        ScenarioKind::Example2 => {
            let p = cfg.example2_params();
            let (tau, gamma) = (p.tau, p.gamma);
            // 2 (2 - v) u γ <= 4 γ |u| on the flow set.
            let spec = LyapunovSpec::new(example1_v1, slow_attractor_in_full_state())
                .with_flow_threshold(move |d| d * d / tau - 4.0 * gamma * d)
                .with_jump_threshold(|d| 0.5 * d * d)
                .with_step(step);
            ("(2 - v) u^2".into(), spec)
        }
        ScenarioKind::UnicycleNes => {
            let l = built.layout.expect("game scenario has a controller layout");
            let uni = built.unicycles.clone();
            let v = move |x: &[f64]| {
                (0..l.n)
                    .map(|i| {
                        let o = plant_offset(l.n, i);
                        let reference = [x[l.u(i)], x[l.u(i) + 1]];
                        unicycle::lyapunov(&uni[i], &x[o..o + unicycle::AGENT_DIM], reference)
                    })
                    .sum()
            };
            let spec = LyapunovSpec::new(v, built.perturbed.attractor.clone()).with_step(step);
            ("sum of unicycle tracking functions".into(), spec)
        }
    }
}

fn violations_json(v: &[Violation]) -> Value {
    json!({
        "count": v.len(),
        "first": v.first().map(|x| json!({"t": x.t, "j": x.j, "value": x.value, "bound": x.bound})),
    })
}

/// Dwell time for the regularity audit: the sampling period for the
/// examples, the mean interval between controller samples for the game.
fn regularity_tau(kind: ScenarioKind, cfg: &ScenarioConfig) -> f64 {
    match kind {
        ScenarioKind::Example1 => cfg.example1_params().tau,
        ScenarioKind::Example2 => cfg.example2_params().tau,
        ScenarioKind::UnicycleNes => {
            let p = cfg.nes_params();
            1.0 / p.periods.iter().map(|t| 1.0 / (p.tau0 * t)).sum::<f64>()
        }
    }
}

pub fn build_report(
    kind: ScenarioKind,
    cfg: &ScenarioConfig,
    built: &BuiltScenario<f64>,
    arc: &HybridArc<f64>,
    solver: &SolverConfig<f64>,
    failure: Option<&str>,
) -> Result<Value> {
    let ps = &built.perturbed;
    let last = arc.last().expect("arcs hold at least the initial sample");
    let mut r = Map::new();
    r.insert("scenario".into(), json!(kind.name()));
    r.insert("seed".into(), json!(cfg.seed));
    r.insert("termination".into(), serde_json::to_value(arc.termination())?);
    r.insert("failure".into(), json!(failure));
    r.insert("final_time".into(), serde_json::to_value(last.time)?);
    r.insert("samples".into(), json!(arc.len()));
    r.insert("jumps".into(), json!(arc.n_jumps()));
    let final_state: Map<String, Value> = arc
        .labels()
        .iter()
        .zip(last.state)
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    r.insert("final_state".into(), Value::Object(final_state));
    r.insert("final_distance_to_attractor".into(), json!(ps.attractor.distance(last.state)));
    let slow = ps.decomposition.slow(last.state);
    r.insert("final_slow_distance".into(), json!(ps.slow_attractor.distance(slow)));
    if let Ok(m) = ManifoldSet::new(ManifoldKind::MA, &ps.slow_attractor, &ps.decomposition, &ps.steady_state) {
        r.insert("final_manifold_distance".into(), json!(manifold_distance(last.state, &m)));
    }

    let (name, spec) = lyapunov_spec(kind, cfg, built, solver.step);
    r.insert(
        "lyapunov".into(),
        json!({
            "function": name,
            "v_initial": spec.value(arc.first().unwrap().state),
            "v_final": spec.value(last.state),
            "flow_violations": violations_json(&check_flow_decrease(arc, &spec)),
            "jump_violations": violations_json(&check_jump_decrease(arc, &spec)),
        }),
    );

    let variant = match kind {
        ScenarioKind::UnicycleNes => RegularityVariant::SlowJumpsOnly,
        _ => RegularityVariant::AllJumps,
    };
    let reg = classify_jumps(arc, regularity_tau(kind, cfg), variant)?;
    r.insert("regularity".into(), serde_json::to_value(&reg)?);

    if let (Some(nash), Some(l)) = (&built.nash, built.layout) {
        let per_agent: Vec<f64> = (0..l.n)
            .map(|i| {
                let o = plant_offset(l.n, i);
                let u = nash.position(i);
                (last.state[o + unicycle::X] - u[0]).hypot(last.state[o + unicycle::Y] - u[1])
            })
            .collect();
        r.insert(
            "final_distance_to_nash".into(),
            json!(per_agent.iter().copied().fold(0.0, f64::max)),
        );
        r.insert("final_distance_to_nash_per_agent".into(), json!(per_agent));
        r.insert("nash".into(), json!(nash.u_star));
    }
    Ok(Value::Object(r))
}

fn column(arc: &HybridArc<f64>, k: usize) -> Vec<(f64, f64)> {
    arc.samples().map(|s| (s.time.t, s.state[k])).collect()
}

/// Phase-plane and time-series figures.
pub fn figures(kind: ScenarioKind, cfg: &ScenarioConfig, built: &BuiltScenario<f64>, arc: &HybridArc<f64>) -> (Figure, Figure) {
    match (built.layout, &built.nash) {
        (Some(l), Some(nash)) if kind == ScenarioKind::UnicycleNes => {
            let g = cfg.game_params();
            let offsets: Vec<usize> = (0..l.n).map(|i| plant_offset(l.n, i)).collect();
            let phase = Figure {
                title: "unicycle positions".into(),
                x_label: "x [m]".into(),
                y_label: "y [m]".into(),
                series: offsets
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| Series {
                        name: format!("agent {}", i + 1),
                        points: arc.samples().map(|s| (s.state[o + unicycle::X], s.state[o + unicycle::Y])).collect(),
                    })
                    .collect(),
                markers: g
                    .sources
                    .iter()
                    .map(|s| Marker::Circle(s[0], s[1]))
                    .chain((0..l.n).map(|i| {
                        let u = nash.position(i);
                        Marker::Cross(u[0], u[1])
                    }))
                    .collect(),
                ref_lines: Vec::new(),
                equal_aspect: true,
            };
            let mut series = Vec::new();
            let mut ref_lines = Vec::new();
            for (i, &o) in offsets.iter().enumerate() {
                for (k, axis) in ["x", "y"].iter().enumerate() {
                    ref_lines.push(RefLine {
                        y: nash.position(i)[k],
                        series: series.len(),
                    });
                    series.push(Series {
                        name: format!("{axis}{}", i + 1),
                        points: column(arc, o + k),
                    });
                }
            }
            let ts = Figure {
                title: "positions (dashed: Nash equilibrium)".into(),
                x_label: "t [s]".into(),
                y_label: "position [m]".into(),
                series,
                markers: Vec::new(),
                ref_lines,
                equal_aspect: false,
            };
            (phase, ts)
        }
        _ => {
            let phase = Figure {
                title: "phase plane".into(),
                x_label: "u".into(),
                y_label: "x".into(),
                series: vec![Series {
                    name: "(u, x)".into(),
                    points: arc.samples().map(|s| (s.state[0], s.state[2])).collect(),
                }],
                ..Figure::default()
            };
            let ts = Figure {
                title: "states".into(),
                x_label: "t".into(),
                y_label: "value".into(),
                series: arc
                    .labels()
                    .iter()
                    .enumerate()
                    .map(|(k, name)| Series {
                        name: name.clone(),
                        points: column(arc, k),
                    })
                    .collect(),
                ..Figure::default()
            };
            (phase, ts)
        }
    }
}
