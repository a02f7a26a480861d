//! The two scalar two-timescale examples: a timer-driven halving of `u`
//! with a fast first-order filter `x` tracking `u`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{IcSampler, LyapunovSpec};
use crate::error::{Error, Result};
use crate::hybrid::{Guard, HybridSystem, SetDescriptor};
use crate::perturbation::{SteadyStateMap, TimescaleDecomposition};
use crate::scalar::Scalar;

pub const LABELS: [&str; 3] = ["u", "v", "x"];

/// A hybrid system together with its two-timescale structure.
#[derive(Clone)]
pub struct PerturbedSystem<T> {
    pub system: HybridSystem<T>,
    pub decomposition: TimescaleDecomposition<T>,
    pub steady_state: SteadyStateMap<T>,
    /// Attractor over the full state.
    pub attractor: SetDescriptor<T>,
    /// Attractor `A` over the slow coordinates.
    pub slow_attractor: SetDescriptor<T>,
}

impl<T: Scalar> std::fmt::Debug for PerturbedSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbedSystem")
            .field("system", &self.system)
            .field("decomposition", &self.decomposition)
            .field("attractor", &self.attractor)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example1Params {
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub x0: [f64; 3],
}

impl Default for Example1Params {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            tau: 1.0,
            epsilon: 1e-3,
            radius: 10.0,
            x0: [5.0, 0.0, 5.0],
        }
    }
}

impl Example1Params {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma, true)?;
        positive("tau", self.tau, false)?;
        positive("epsilon", self.epsilon, false)?;
        positive("radius", self.radius, false)?;
        let [u, v, x] = self.x0;
        if !(0.0..=self.radius).contains(&u) || !(0.0..=self.radius).contains(&x) || !(0.0..=1.0).contains(&v) {
            return Err(Error::Param(format!(
                "x0 = {:?} must lie in [0, R] x [0, 1] x [0, R]",
                self.x0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example2Params {
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub x0: [f64; 3],
}

impl Default for Example2Params {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            tau: 1.0,
            epsilon: 1e-2,
            x0: [2.0, 0.0, -2.0],
        }
    }
}

impl Example2Params {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma, true)?;
        positive("tau", self.tau, false)?;
        positive("epsilon", self.epsilon, false)?;
        if !(0.0..=1.0).contains(&self.x0[1]) || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::Param(format!("x0 = {:?} needs v in [0, 1]", self.x0)));
        }
        Ok(())
    }
}

/// `gamma = 0` is admitted where `allow_zero` (it freezes `u`).
fn positive(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::Param(format!("{name} must be positive, got {v}")))
    }
}

fn timer_guard<T: Scalar>() -> Guard<T> {
    Guard::threshold("v", 1, T::one())
}

fn decomposition<T: Scalar>(epsilon: f64) -> Result<(TimescaleDecomposition<T>, SteadyStateMap<T>)> {
    let dec = TimescaleDecomposition::all_bounded(2, 1, T::lit(epsilon))?;
    let h = SteadyStateMap::new(|x1: &[T]| vec![x1[0]]);
    Ok((dec, h))
}

/// Example 1: `u' = γ max{0, 1 - |u|/R}`, `v' = 1/τ`, `x' = -(x - u)/ε` on
/// `[0,R] x [0,1] x [0,R]`; at `v = 1`: `(u, v, x)+ = (x/2, 0, R)`.
pub fn build_example1<T: Scalar>(p: &Example1Params) -> Result<PerturbedSystem<T>> {
    p.validate()?;
    let (gamma, tau, eps, r) = (T::lit(p.gamma), T::lit(p.tau), T::lit(p.epsilon), T::lit(p.radius));
    let half = T::lit(0.5);
    let z = T::zero();
    let system = HybridSystem::builder(3)
        .labels(LABELS)
        .flow(move |x: &[T], dx: &mut [T]| {
            dx[0] = gamma * (T::one() - x[0].abs() / r).max(T::zero());
            dx[1] = T::one() / tau;
            dx[2] = -(x[2] - x[0]) / eps;
        })
        .jump(move |x: &[T]| vec![x[2] * half, T::zero(), r])
        .flow_set(SetDescriptor::boxed(vec![z, z, z], vec![r, T::one(), r]))
        .jump_set(SetDescriptor::boxed(vec![z, T::one(), z], vec![r, T::one(), r]))
        .guard(timer_guard())
        .build()?;
    let (decomposition, steady_state) = decomposition(p.epsilon)?;
    Ok(PerturbedSystem {
        system,
        decomposition,
        steady_state,
        attractor: SetDescriptor::boxed(vec![z, z, z], vec![z, T::one(), r]),
        slow_attractor: SetDescriptor::boxed(vec![z, z], vec![z, T::one()]),
    })
}

/// Example 2: `u' = γ`, `v' = 1/τ`, `x' = -(x - u)/ε` on `R x [0,1] x R`;
/// at `v = 1`: `(u, v, x)+ = (x/2, 0, 2x)`.
pub fn build_example2<T: Scalar>(p: &Example2Params) -> Result<PerturbedSystem<T>> {
    p.validate()?;
    let (gamma, tau, eps) = (T::lit(p.gamma), T::lit(p.tau), T::lit(p.epsilon));
    let (z, inf) = (T::zero(), T::infinity());
    let two = T::lit(2.0);
    let system = HybridSystem::builder(3)
        .labels(LABELS)
        .flow(move |x: &[T], dx: &mut [T]| {
            dx[0] = gamma;
            dx[1] = T::one() / tau;
            dx[2] = -(x[2] - x[0]) / eps;
        })
        .jump(move |x: &[T]| vec![x[2] / two, T::zero(), two * x[2]])
        .flow_set(SetDescriptor::boxed(vec![-inf, z, -inf], vec![inf, T::one(), inf]))
        .jump_set(SetDescriptor::boxed(vec![-inf, T::one(), -inf], vec![inf, T::one(), inf]))
        .guard(timer_guard())
        .build()?;
    let (decomposition, steady_state) = decomposition(p.epsilon)?;
    Ok(PerturbedSystem {
        system,
        decomposition,
        steady_state,
        attractor: SetDescriptor::boxed(vec![z, z, z], vec![z, T::one(), z]),
        slow_attractor: SetDescriptor::boxed(vec![z, z], vec![z, T::one()]),
    })
}

/// `V1(u, v) = (2 - v) u^2` on the slow coordinates (also accepts full states).
pub fn example1_v1<T: Scalar>(x: &[T]) -> T {
    (T::lit(2.0) - x[1]) * x[0] * x[0]
}

/// Reduced-system certificate of Example 1: flow decrease `d^2/τ - 4γR`,
/// jump decrease `d^2/2`, attractor `{0} x [0,1]`.
pub fn example1_reduced_lyapunov<T: Scalar>(p: &Example1Params) -> LyapunovSpec<T> {
    let (tau, gamma, r) = (T::lit(p.tau), T::lit(p.gamma), T::lit(p.radius));
    let four = T::lit(4.0);
    let half = T::lit(0.5);
    let z = T::zero();
    LyapunovSpec::new(example1_v1, SetDescriptor::boxed(vec![z, z], vec![z, T::one()]))
        .with_flow_threshold(move |d| d * d / tau - four * gamma * r)
        .with_jump_threshold(move |d| half * d * d)
}

/// Initial conditions at slow distance `Δ` (clipped to `R`): `u = min(Δ, R)`,
/// `v` and `x` uniform over their ranges.
pub fn example1_sampler<T: Scalar>(radius: f64) -> IcSampler<T> {
    Arc::new(move |rng, delta: T| {
        let u = delta.to_f64_lossy().min(radius);
        let v: f64 = rng.gen_range(0.0..=1.0);
        let x: f64 = rng.gen_range(0.0..=radius);
        vec![T::lit(u), T::lit(v), T::lit(x)]
    })
}

/// Initial conditions on the `Δ`-circle in `(u, x)` around the attractor,
/// `v` uniform on `[0, 1]`.
pub fn example2_sampler<T: Scalar>() -> IcSampler<T> {
    Arc::new(|rng, delta: T| {
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let v: f64 = rng.gen_range(0.0..=1.0);
        let d = delta.to_f64_lossy();
        vec![T::lit(d * phi.cos()), T::lit(v), T::lit(d * phi.sin())]
    })
}
