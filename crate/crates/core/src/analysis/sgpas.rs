//! Empirical probe of semi-global practical asymptotic stability: sweep
//! tuning parameters, sample initial conditions at distance `Δ` from the
//! attractor and measure boundedness, entry time and tail radius.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{solve_partial, HybridArc, HybridSystem, SetDescriptor, SolverConfig};
use crate::scalar::Scalar;

/// Relative slack for the monotonicity flags.
pub const MONOTONICITY_SLACK: f64 = 0.1;

/// One point of the tuning-parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub beta: f64,
}

impl ParamPoint {
    pub fn new(gamma: f64, tau: f64, epsilon: f64, beta: f64) -> Self {
        Self {
            gamma,
            tau,
            epsilon,
            beta,
        }
    }

    /// `self` is at least as refined as `other` in every coordinate
    /// (γ, ε, β no larger, τ no smaller) and differs from it.
    pub fn refines(&self, other: &ParamPoint) -> bool {
        self != other
            && self.gamma <= other.gamma
            && self.tau >= other.tau
            && self.epsilon <= other.epsilon
            && self.beta <= other.beta
    }
}

pub type IcSampler<T> = Arc<dyn Fn(&mut ChaCha8Rng, T) -> Vec<T> + Send + Sync>;

/// What the sweep needs at one grid point.
#[derive(Clone)]
pub struct Scenario<T> {
    pub system: HybridSystem<T>,
    pub attractor: SetDescriptor<T>,
    /// Draws an initial condition at distance (about) `Δ` from the attractor.
    pub sampler: IcSampler<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SGPASProbe {
    pub delta_outer: f64,
    pub delta_inner: f64,
    pub grid: Vec<ParamPoint>,
    pub n_initial: usize,
    pub horizon: f64,
    pub tail_fraction: f64,
    pub seed: u64,
}

impl SGPASProbe {
    pub fn new(delta_outer: f64, delta_inner: f64, grid: Vec<ParamPoint>) -> Self {
        Self {
            delta_outer,
            delta_inner,
            grid,
            n_initial: 20,
            horizon: 100.0,
            tail_fraction: 0.2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_outer > self.delta_inner && self.delta_inner > 0.0) {
            return Err(Error::Param(format!(
                "need Delta > delta > 0, got {} and {}",
                self.delta_outer, self.delta_inner
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Param("parameter grid is empty".into()));
        }
        if self.n_initial == 0 {
            return Err(Error::Param("n_initial must be positive".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Param("horizon must be positive".into()));
        }
        if !(self.tail_fraction >= 0.01 && self.tail_fraction <= 0.99) {
            return Err(Error::Param(format!(
                "tail_fraction must lie in [0.01, 0.99], got {}",
                self.tail_fraction
            )));
        }
        Ok(())
    }
}

/// Aggregates over all initial conditions of one grid point. Distances are
/// estimates over a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractivityRow {
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Largest attractor distance seen on any trajectory.
    pub sup_distance: Option<f64>,
    /// Latest (over initial conditions) time after which the distance stays
    /// within `delta_inner`; `None` if some trajectory never settles.
    #[serde(rename = "T_hat")]
    pub t_hat: Option<f64>,
    /// Largest distance over the final `tail_fraction` of the horizon.
    pub tail_radius: Option<f64>,
    /// Largest distance at the end of the horizon.
    pub final_distance: Option<f64>,
    pub numeric_failures: usize,
    /// Part of a monotonicity violation (as the refined point).
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityFlag {
    /// Index of the coarser grid point.
    pub from: usize,
    /// Index of the refined grid point whose tail radius grew.
    pub to: usize,
    pub tail_from: f64,
    pub tail_to: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractivityReport {
    pub rows: Vec<AttractivityRow>,
    pub flags: Vec<MonotonicityFlag>,
}

impl AttractivityReport {
    /// JSON array with one object per grid point.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "gamma",
            "tau",
            "epsilon",
            "beta",
            "sup_distance",
            "T_hat",
            "tail_radius",
            "final_distance",
            "numeric_failures",
            "flagged",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{:.16e}", r.gamma),
                format!("{:.16e}", r.tau),
                format!("{:.16e}", r.epsilon),
                format!("{:.16e}", r.beta),
                opt(r.sup_distance),
                opt(r.t_hat),
                opt(r.tail_radius),
                opt(r.final_distance),
                r.numeric_failures.to_string(),
                r.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Earliest time after which every sample lies within `r`; `None` when the
/// last sample is outside.
pub fn entry_time<T: Scalar>(series: &[(T, T)], r: T) -> Option<T> {
    match series.iter().rposition(|&(_, d)| !(d <= r)) {
        None => series.first().map(|&(t, _)| t),
        Some(k) => series.get(k + 1).map(|&(t, _)| t),
    }
}

/// Per-trajectory statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryStats {
    pub sup_distance: f64,
    pub entry_time: Option<f64>,
    pub tail_radius: f64,
    pub final_distance: f64,
}

pub fn trajectory_stats<T: Scalar>(
    arc: &HybridArc<T>,
    attractor: &SetDescriptor<T>,
    r: f64,
    tail_start: f64,
) -> TrajectoryStats {
    let series: Vec<(f64, f64)> = arc
        .samples()
        .map(|s| (s.time.t.to_f64_lossy(), attractor.distance(s.state).to_f64_lossy()))
        .collect();
    let sup_distance = series.iter().map(|p| p.1).fold(0.0, f64::max);
    let tail_radius = series
        .iter()
        .filter(|p| p.0 >= tail_start)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    TrajectoryStats {
        sup_distance,
        entry_time: entry_time(&series, r),
        tail_radius,
        final_distance: series.last().map_or(f64::NAN, |p| p.1),
    }
}

/// Runs the sweep; see [`estimate_attractivity_with`].
pub fn estimate_attractivity<T, F>(factory: F, probe: &SGPASProbe, cfg: &SolverConfig<T>) -> Result<AttractivityReport>
where
    T: Scalar,
    F: Fn(&ParamPoint) -> Result<Scenario<T>> + Sync,
{
    estimate_attractivity_with(factory, probe, cfg, |_, _| {})
}

/// Runs `n_initial` trajectories per grid point in parallel and aggregates
/// them. `inspect(point_index, arc)` sees every finished arc (including
/// those cut short by a numeric failure). Initial conditions come from a
/// ChaCha8 stream per (point, trajectory), so results do not depend on
/// scheduling.
pub fn estimate_attractivity_with<T, F, I>(
    factory: F,
    probe: &SGPASProbe,
    cfg: &SolverConfig<T>,
    inspect: I,
) -> Result<AttractivityReport>
where
    T: Scalar,
    F: Fn(&ParamPoint) -> Result<Scenario<T>> + Sync,
    I: Fn(usize, &HybridArc<T>) + Sync,
{
    probe.validate()?;
    cfg.validate()?;
    let scenarios = probe.grid.iter().map(&factory).collect::<Result<Vec<_>>>()?;
    let cfg = cfg.clone().with_max_t(T::lit(probe.horizon));
    let tail_start = probe.horizon * (1.0 - probe.tail_fraction);
    let delta = T::lit(probe.delta_outer);

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|p| (0..probe.n_initial).map(move |k| (p, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(p, k)| {
            let sc = &scenarios[p];
            let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
            rng.set_stream(((p as u64) << 32) | k as u64);
            let x0 = (sc.sampler)(&mut rng, delta);
            let (arc, failure) = solve_partial(&sc.system, &x0, &cfg)?;
            inspect(p, &arc);
            let stats = trajectory_stats(&arc, &sc.attractor, probe.delta_inner, tail_start);
            Ok((p, stats, failure.is_some()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<AttractivityRow> = probe
        .grid
        .iter()
        .map(|pt| AttractivityRow {
            gamma: pt.gamma,
            tau: pt.tau,
            epsilon: pt.epsilon,
            beta: pt.beta,
            sup_distance: None,
            t_hat: None,
            tail_radius: None,
            final_distance: None,
            numeric_failures: 0,
            flagged: false,
        })
        .collect();
    let mut unsettled = vec![false; rows.len()];
    for (p, stats, failed) in results {
        let row = &mut rows[p];
        let fmax = |a: Option<f64>, b: f64| Some(a.map_or(b, |a| a.max(b)));
        row.sup_distance = fmax(row.sup_distance, stats.sup_distance);
        if failed {
            row.numeric_failures += 1;
            unsettled[p] = true;
            continue;
        }
        row.tail_radius = fmax(row.tail_radius, stats.tail_radius);
        row.final_distance = fmax(row.final_distance, stats.final_distance);
        match stats.entry_time {
            Some(t) => row.t_hat = fmax(row.t_hat, t),
            None => unsettled[p] = true,
        }
    }
    for (row, u) in rows.iter_mut().zip(&unsettled) {
        if *u {
            row.t_hat = None;
        }
    }

    let flags = monotonicity_flags(&probe.grid, &rows);
    for f in &flags {
        rows[f.to].flagged = true;
    }
    Ok(AttractivityReport { rows, flags })
}

/// Pairs (coarse, refined) whose tail radius grew by more than the slack.
pub fn monotonicity_flags(grid: &[ParamPoint], rows: &[AttractivityRow]) -> Vec<MonotonicityFlag> {
    let mut flags = Vec::new();
    for (a, pa) in grid.iter().enumerate() {
        for (b, pb) in grid.iter().enumerate() {
            if !pb.refines(pa) {
                continue;
            }
            if let (Some(ta), Some(tb)) = (rows[a].tail_radius, rows[b].tail_radius) {
                if tb > ta * (1.0 + MONOTONICITY_SLACK) + 1e-12 {
                    flags.push(MonotonicityFlag {
                        from: a,
                        to: b,
                        tail_from: ta,
                        tail_to: tb,
                    });
                }
            }
        }
    }
    flags
}
