//! TOML scenario configuration with `key=value` overrides.
//!
//! Every section is optional; missing keys take the scenario defaults.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::examples::{
    build_example1, build_example2, example1_sampler, example2_sampler, Example1Params, Example2Params,
    PerturbedSystem,
};
use super::game::{GameParams, NashSolution};
use super::nes::{
    build_full_system, dither_frequencies, game_measurement, ControllerLayout, FullSystem, NESControllerParams,
};
use super::unicycle::UnicycleParams;
use crate::analysis::{IcSampler, ParamPoint, SGPASProbe, Scenario};
use crate::error::{Error, Result};
use crate::hybrid::{Priority, SolverConfig};
use crate::scalar::Scalar;

/// Plant sampling periods `σ_i` of the four-agent setup.
pub const DEFAULT_SIGMA: [f64; 4] = [2e-3, 3e-3, 4e-3, 2e-3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Example1,
    Example2,
    UnicycleNes,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Example1, Self::Example2, Self::UnicycleNes];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::UnicycleNes => "unicycle_nes",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Self::Example1 => "timer-driven halving with a fast filter on a bounded box",
            Self::Example2 => "drift with halving jumps and a fast filter on unbounded sets",
            Self::UnicycleNes => "four unicycles seeking the Nash equilibrium of a quadratic game",
        }
    }

    /// Config keys this scenario reads.
    pub fn config_keys(&self) -> Vec<&'static str> {
        let mut keys = vec!["seed"];
        match self {
            Self::Example1 => keys.extend(EXAMPLE_KEYS.iter().map(|k| k.1)),
            Self::Example2 => keys.extend(EXAMPLE_KEYS.iter().filter(|k| k.1 != "example.radius").map(|k| k.1)),
            Self::UnicycleNes => {
                keys.extend(GAME_KEYS.iter().map(|k| k.1));
                keys.extend(CONTROLLER_KEYS.iter().map(|k| k.1));
                keys.extend(PLANT_KEYS.iter().map(|k| k.1));
                keys.extend(["unicycle.<i>.sigma", "unicycle.<i>.c1", "unicycle.<i>.c2", "unicycle.<i>.c3", "unicycle.<i>.pose0"]);
            }
        }
        keys.extend(SOLVER_KEYS.iter().map(|k| k.1));
        keys.extend(SWEEP_KEYS.iter().map(|k| k.1));
        keys
    }

    fn primary_section(&self) -> &'static str {
        match self {
            Self::Example1 | Self::Example2 => "example",
            Self::UnicycleNes => "controller",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?} (expected example1, example2 or unicycle_nes)")))
    }
}

// (short key, dotted key)
const EXAMPLE_KEYS: [(&str, &str); 5] = [
    ("gamma", "example.gamma"),
    ("tau", "example.tau"),
    ("epsilon", "example.epsilon"),
    ("radius", "example.radius"),
    ("x0", "example.x0"),
];
const GAME_KEYS: [(&str, &str); 2] = [("sources", "game.sources"), ("coupling", "game.coupling")];
const CONTROLLER_KEYS: [(&str, &str); 10] = [
    ("alpha", "controller.alpha"),
    ("beta", "controller.beta"),
    ("amplitudes", "controller.amplitudes"),
    ("frequencies", "controller.frequencies"),
    ("periods", "controller.periods"),
    ("tau0", "controller.tau0"),
    ("timers0", "controller.timers0"),
    ("filter_bound", "controller.filter_bound"),
    ("dither_in_measurement", "controller.dither_in_measurement"),
    ("u0", "controller.u0"),
];
const PLANT_KEYS: [(&str, &str); 2] = [("epsilon", "plant.epsilon"), ("omega_r", "plant.omega_r")];
const SOLVER_KEYS: [(&str, &str); 5] = [
    ("step", "solver.step"),
    ("max_t", "solver.max_t"),
    ("max_j", "solver.max_j"),
    ("priority", "solver.priority"),
    ("record_stride", "solver.record_stride"),
];
const SWEEP_KEYS: [(&str, &str); 6] = [
    ("delta_outer", "sweep.delta_outer"),
    ("delta_inner", "sweep.delta_inner"),
    ("n_initial", "sweep.n_initial"),
    ("horizon", "sweep.horizon"),
    ("tail_fraction", "sweep.tail_fraction"),
    ("points", "sweep.points"),
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub sources: Vec<[f64; 2]>,
    pub coupling: f64,
}

impl Default for GameSection {
    fn default() -> Self {
        let g = GameParams::default();
        Self {
            sources: g.sources,
            coupling: g.coupling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub alpha: f64,
    pub beta: f64,
    pub amplitudes: Vec<f64>,
    /// Drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<[f64; 2]>>,
    pub periods: Vec<f64>,
    pub tau0: f64,
    pub timers0: Vec<f64>,
    pub filter_bound: f64,
    pub dither_in_measurement: bool,
    /// Initial references; the sources when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<[f64; 2]>>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let p = NESControllerParams::reference(0);
        Self {
            alpha: p.alpha,
            beta: p.beta,
            amplitudes: p.amplitudes,
            frequencies: None,
            periods: p.periods,
            tau0: p.tau0,
            timers0: p.timers0,
            filter_bound: p.filter_bound,
            dither_in_measurement: p.dither_in_measurement,
            u0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    /// Plant timescale: unicycle flows run at `1/epsilon`.
    pub epsilon: f64,
    pub omega_r: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            omega_r: 2.0 / 9.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnicycleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    /// Initial pose `(x, y, θ)`; at the reference when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose0: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priority: Option<Priority>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_outer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_inner: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_initial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<ParamPoint>>,
}

/// Full scenario configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub example: ExampleSection,
    pub game: GameSection,
    pub controller: ControllerSection,
    pub plant: PlantSection,
    /// Per-agent sections keyed `1..=N`.
    pub unicycle: BTreeMap<String, UnicycleSection>,
    pub solver: SolverSection,
    pub sweep: SweepSection,
}

fn config_err(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = s.parse().map_err(config_err)?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table).try_into().map_err(config_err)?;
        cfg.check_unicycle_keys()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    /// Parses `text` (empty when `None`), applies `overrides` and the seed.
    pub fn load(kind: ScenarioKind, text: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut table: toml::Table = text.unwrap_or("").parse().map_err(config_err)?;
        apply_overrides(&mut table, kind, overrides)?;
        if let Some(s) = seed {
            let s = i64::try_from(s).map_err(|_| Error::Config(format!("seed {s} out of range")))?;
            table.insert("seed".into(), toml::Value::Integer(s));
        }
        Self::from_table(table)
    }

    fn check_unicycle_keys(&self) -> Result<()> {
        for k in self.unicycle.keys() {
            match k.parse::<usize>() {
                Ok(i) if i >= 1 => {}
                _ => return Err(Error::Config(format!("unicycle section key {k:?} must be an agent number 1..N"))),
            }
        }
        Ok(())
    }

    pub fn example1_params(&self) -> Example1Params {
        let d = Example1Params::default();
        let e = &self.example;
        Example1Params {
            gamma: e.gamma.unwrap_or(d.gamma),
            tau: e.tau.unwrap_or(d.tau),
            epsilon: e.epsilon.unwrap_or(d.epsilon),
            radius: e.radius.unwrap_or(d.radius),
            x0: e.x0.unwrap_or(d.x0),
        }
    }

    pub fn example2_params(&self) -> Example2Params {
        let d = Example2Params::default();
        let e = &self.example;
        Example2Params {
            gamma: e.gamma.unwrap_or(d.gamma),
            tau: e.tau.unwrap_or(d.tau),
            epsilon: e.epsilon.unwrap_or(d.epsilon),
            x0: e.x0.unwrap_or(d.x0),
        }
    }

    pub fn game_params(&self) -> GameParams {
        GameParams {
            sources: self.game.sources.clone(),
            coupling: self.game.coupling,
        }
    }

    pub fn nes_params(&self) -> NESControllerParams {
        let c = &self.controller;
        let n = self.game.sources.len();
        NESControllerParams {
            alpha: c.alpha,
            beta: c.beta,
            amplitudes: c.amplitudes.clone(),
            frequencies: c.frequencies.clone().unwrap_or_else(|| dither_frequencies(n, self.seed)),
            periods: c.periods.clone(),
            tau0: c.tau0,
            timers0: c.timers0.clone(),
            filter_bound: c.filter_bound,
            dither_in_measurement: c.dither_in_measurement,
        }
    }

    /// Unicycle parameters with the tuned gain wiring unless gains are given.
    pub fn unicycle_params(&self) -> Result<Vec<UnicycleParams>> {
        let n = self.game.sources.len();
        if let Some(k) = self.unicycle.keys().find(|k| k.parse::<usize>().is_ok_and(|i| i > n)) {
            return Err(Error::Config(format!("unicycle.{k} exceeds the {n} agents")));
        }
        (1..=n)
            .map(|i| {
                let s = self.unicycle.get(&i.to_string()).cloned().unwrap_or_default();
                let sigma = match s.sigma {
                    Some(v) => v,
                    None => *DEFAULT_SIGMA
                        .get(i - 1)
                        .ok_or_else(|| Error::Config(format!("unicycle.{i}.sigma is required")))?,
                };
                let mut p = UnicycleParams::tuned(sigma, self.plant.omega_r);
                p.c1 = s.c1.unwrap_or(p.c1);
                p.c2 = s.c2.unwrap_or(p.c2);
                p.c3 = s.c3.unwrap_or(p.c3);
                Ok(p)
            })
            .collect()
    }

    pub fn poses0(&self) -> Option<Vec<[f64; 3]>> {
        let n = self.game.sources.len();
        if self.unicycle.values().all(|s| s.pose0.is_none()) {
            return None;
        }
        let u0 = self.controller.u0.clone().unwrap_or_else(|| self.game.sources.clone());
        Some(
            (1..=n)
                .map(|i| {
                    self.unicycle
                        .get(&i.to_string())
                        .and_then(|s| s.pose0)
                        .unwrap_or([u0[i - 1][0], u0[i - 1][1], 0.0])
                })
                .collect(),
        )
    }

    pub fn solver_config<T: Scalar>(&self, kind: ScenarioKind) -> Result<SolverConfig<T>> {
        let (max_t, stride) = match kind {
            ScenarioKind::Example1 | ScenarioKind::Example2 => (100.0, 1),
            ScenarioKind::UnicycleNes => (10.0, 10),
        };
        let s = &self.solver;
        let mut cfg = SolverConfig::default()
            .with_max_t(T::lit(s.max_t.unwrap_or(max_t)))
            .with_record_stride(s.record_stride.unwrap_or(stride));
        if let Some(h) = s.step {
            cfg = cfg.with_step(T::lit(h));
        }
        if let Some(j) = s.max_j {
            cfg = cfg.with_max_j(j);
        }
        if let Some(p) = s.priority {
            cfg = cfg.with_priority(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Tuning point of the configured scenario, used when the sweep has no
    /// explicit grid.
    pub fn base_point(&self, kind: ScenarioKind) -> ParamPoint {
        match kind {
            ScenarioKind::Example1 => {
                let p = self.example1_params();
                ParamPoint::new(p.gamma, p.tau, p.epsilon, 0.0)
            }
            ScenarioKind::Example2 => {
                let p = self.example2_params();
                ParamPoint::new(p.gamma, p.tau, p.epsilon, 0.0)
            }
            ScenarioKind::UnicycleNes => ParamPoint::new(
                self.controller.alpha,
                self.controller.tau0,
                self.plant.epsilon,
                self.controller.beta,
            ),
        }
    }

    pub fn probe(&self, kind: ScenarioKind) -> Result<SGPASProbe> {
        let (outer, inner, n_initial, horizon) = match kind {
            ScenarioKind::Example1 => (self.example1_params().radius, 1.0, 20, 100.0),
            ScenarioKind::Example2 => (5.0, 0.5, 20, 100.0),
            ScenarioKind::UnicycleNes => (5.0, 0.5, 4, 10.0),
        };
        let s = &self.sweep;
        let mut probe = SGPASProbe::new(
            s.delta_outer.unwrap_or(outer),
            s.delta_inner.unwrap_or(inner),
            s.points.clone().unwrap_or_else(|| vec![self.base_point(kind)]),
        );
        probe.n_initial = s.n_initial.unwrap_or(n_initial);
        probe.horizon = s.horizon.unwrap_or(horizon);
        probe.tail_fraction = s.tail_fraction.unwrap_or(probe.tail_fraction);
        probe.seed = self.seed;
        probe.validate()?;
        Ok(probe)
    }

    /// Copy with the sweep-coordinates of `p` substituted.
    pub fn at_point(&self, kind: ScenarioKind, p: &ParamPoint) -> Self {
        let mut c = self.clone();
        match kind {
            ScenarioKind::Example1 | ScenarioKind::Example2 => {
                c.example.gamma = Some(p.gamma);
                c.example.tau = Some(p.tau);
                c.example.epsilon = Some(p.epsilon);
            }
            ScenarioKind::UnicycleNes => {
                c.controller.alpha = p.gamma;
                c.controller.tau0 = p.tau;
                c.plant.epsilon = p.epsilon;
                c.controller.beta = p.beta;
            }
        }
        c
    }
}

/// A built scenario with its initial state.
#[derive(Clone, Debug)]
pub struct BuiltScenario<T: Scalar> {
    pub kind: ScenarioKind,
    pub perturbed: PerturbedSystem<T>,
    pub x0: Vec<T>,
    /// Present for the game scenario.
    pub nash: Option<NashSolution>,
    pub layout: Option<ControllerLayout>,
    pub unicycles: Vec<UnicycleParams>,
}

pub fn build_scenario<T: Scalar>(kind: ScenarioKind, cfg: &ScenarioConfig) -> Result<BuiltScenario<T>> {
    match kind {
        ScenarioKind::Example1 => {
            let p = cfg.example1_params();
            Ok(BuiltScenario {
                kind,
                perturbed: build_example1(&p)?,
                x0: p.x0.iter().map(|&v| T::lit(v)).collect(),
                nash: None,
                layout: None,
                unicycles: Vec::new(),
            })
        }
        ScenarioKind::Example2 => {
            let p = cfg.example2_params();
            Ok(BuiltScenario {
                kind,
                perturbed: build_example2(&p)?,
                x0: p.x0.iter().map(|&v| T::lit(v)).collect(),
                nash: None,
                layout: None,
                unicycles: Vec::new(),
            })
        }
        ScenarioKind::UnicycleNes => {
            let full = build_game_scenario::<T>(cfg)?;
            let (g, nes) = (cfg.game_params(), cfg.nes_params());
            let u0 = cfg.controller.u0.clone();
            if let Some(u) = &u0 {
                if u.len() != g.n() {
                    return Err(Error::Config(format!("controller.u0 has {} entries for {} agents", u.len(), g.n())));
                }
            }
            let poses = cfg.poses0();
            let x0 = full.initial_state(&nes, &g, u0.as_deref(), poses.as_deref());
            Ok(BuiltScenario {
                kind,
                perturbed: full.perturbed,
                x0,
                nash: Some(full.nash),
                layout: Some(full.layout),
                unicycles: full.unicycles,
            })
        }
    }
}

fn build_game_scenario<T: Scalar>(cfg: &ScenarioConfig) -> Result<FullSystem<T>> {
    let g = cfg.game_params();
    build_full_system(&g, &cfg.nes_params(), &cfg.unicycle_params()?, cfg.plant.epsilon, game_measurement(&g))
}

/// Sweep factory: builds the scenario at each grid point with an initial
/// condition sampler at distance `Δ` from the attractor.
pub fn sweep_scenario<T: Scalar>(kind: ScenarioKind, cfg: &ScenarioConfig, p: &ParamPoint) -> Result<Scenario<T>> {
    let c = cfg.at_point(kind, p);
    match kind {
        ScenarioKind::Example1 => {
            let params = c.example1_params();
            let s = build_example1::<T>(&params)?;
            Ok(Scenario {
                system: s.system,
                attractor: s.attractor,
                sampler: example1_sampler(params.radius),
            })
        }
        ScenarioKind::Example2 => {
            let s = build_example2::<T>(&c.example2_params())?;
            Ok(Scenario {
                system: s.system,
                attractor: s.attractor,
                sampler: example2_sampler(),
            })
        }
        ScenarioKind::UnicycleNes => {
            let full = build_game_scenario::<T>(&c)?;
            let (g, nes) = (c.game_params(), c.nes_params());
            let u_star: Vec<[f64; 2]> = (0..g.n()).map(|i| full.nash.position(i)).collect();
            let base = full.initial_state(&nes, &g, Some(&u_star), None);
            let layout = full.layout;
            let n = g.n();
            let sampler: IcSampler<T> = Arc::new(move |rng, delta| {
                // Offset the references and parked plants together; both
                // blocks move, so scale by 1/sqrt(2) to land at distance Δ.
                let dir: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let scale = delta.to_f64_lossy() / (nrm * 2f64.sqrt());
                let mut x = base.clone();
                for i in 0..n {
                    for k in 0..2 {
                        let d = T::lit(dir[2 * i + k] * scale);
                        x[layout.u(i) + k] += d;
                        x[layout.dim() + super::unicycle::AGENT_DIM * i + k] += d;
                    }
                }
                x
            });
            Ok(Scenario {
                system: full.perturbed.system,
                attractor: full.perturbed.attractor,
                sampler,
            })
        }
    }
}

/// Splits `a=1,b=[1,2],c=x` on commas outside brackets and quotes.
pub fn split_overrides(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let (mut depth, mut quoted) = (0i32, false);
    for ch in s.chars() {
        match ch {
            '"' => quoted = !quoted,
            '[' | '{' if !quoted => depth += 1,
            ']' | '}' if !quoted => depth -= 1,
            ',' if depth == 0 && !quoted => {
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Resolves a bare or dotted override key to its table path.
fn resolve_key(kind: ScenarioKind, key: &str) -> Result<Vec<String>> {
    let unknown = || Error::Config(format!("unknown config key {key:?} for scenario {kind}"));
    if key == "seed" {
        return Ok(vec!["seed".into()]);
    }
    let all = EXAMPLE_KEYS
        .iter()
        .chain(&GAME_KEYS)
        .chain(&CONTROLLER_KEYS)
        .chain(&PLANT_KEYS)
        .chain(&SOLVER_KEYS)
        .chain(&SWEEP_KEYS);
    if key.contains('.') {
        let parts: Vec<String> = key.split('.').map(str::to_string).collect();
        let known = match parts.as_slice() {
            [s, i, f] if s == "unicycle" => {
                i.parse::<usize>().is_ok_and(|i| i >= 1) && ["sigma", "c1", "c2", "c3", "pose0"].contains(&f.as_str())
            }
            _ => all.clone().any(|(_, d)| *d == key),
        };
        return if known { Ok(parts) } else { Err(unknown()) };
    }
    let primary = kind.primary_section();
    let candidates: Vec<&str> = all.filter(|(short, _)| *short == key).map(|(_, d)| *d).collect();
    let pick = candidates
        .iter()
        .find(|d| d.starts_with(primary) && d[primary.len()..].starts_with('.'))
        .or_else(|| if candidates.len() == 1 { candidates.first() } else { None })
        .or_else(|| candidates.iter().find(|d| kind == ScenarioKind::UnicycleNes && d.starts_with("plant.")))
        .ok_or_else(unknown)?;
    Ok(pick.split('.').map(str::to_string).collect())
}

/// Applies `key=value` overrides to a parsed config table. Values are read
/// as TOML (falling back to a bare string).
pub fn apply_overrides(table: &mut toml::Table, kind: ScenarioKind, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (k, v) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {ov:?} is not key=value")))?;
        let path = resolve_key(kind, k.trim())?;
        let mut node = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = node
                .entry(seg.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("config key {seg:?} is not a section")))?;
        }
        node.insert(path[path.len() - 1].clone(), parse_value(v.trim()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_respects_brackets() {
        let v = split_overrides("gamma=0.1,x0=[1,2,3], tau=1");
        assert_eq!(v, vec!["gamma=0.1", "x0=[1,2,3]", "tau=1"]);
    }

    #[test]
    fn bare_keys_go_to_primary_section() {
        let c = ScenarioConfig::load(
            ScenarioKind::Example1,
            None,
            &split_overrides("gamma=0.1,tau=1,epsilon=1e-3"),
            None,
        )
        .unwrap();
        assert_eq!(c.example.gamma, Some(0.1));
        assert_eq!(c.example.tau, Some(1.0));
        assert_eq!(c.example.epsilon, Some(1e-3));

        let c = ScenarioConfig::load(ScenarioKind::UnicycleNes, None, &split_overrides("alpha=0.1,epsilon=0.5"), Some(7))
            .unwrap();
        assert_eq!(c.controller.alpha, 0.1);
        assert_eq!(c.plant.epsilon, 0.5);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::load(ScenarioKind::Example1, None, &["bogus=1".into()], None).is_err());
        assert!(ScenarioConfig::from_toml_str("[example]\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[unicycle.x]\nsigma = 1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::default();
        c.seed = 3;
        c.example.gamma = Some(0.2);
        c.unicycle.insert("2".into(), UnicycleSection {
            sigma: Some(1e-3),
            pose0: Some([1.0, 2.0, 0.5]),
            ..Default::default()
        });
        c.sweep.points = Some(vec![ParamPoint::new(0.1, 1.0, 1e-2, 0.0), ParamPoint::new(0.05, 2.0, 5e-3, 0.0)]);
        c.solver.priority = Some(Priority::FlowFirst);
        let text = c.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }
}
