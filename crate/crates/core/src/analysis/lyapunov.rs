//! Lyapunov certificates evaluated along arcs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hybrid::{HybridArc, HybridTime, SetDescriptor};
use crate::scalar::Scalar;

pub type StateFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Function of the attractor distance, e.g. a class-K threshold.
pub type DistanceMap<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type RegionFn<T> = Arc<dyn Fn(&[T], T) -> bool + Send + Sync>;

/// Slack added to jump decrease checks.
pub const JUMP_SLACK: f64 = 1e-9;
/// Default flow slack: ten times the default solver step.
pub const DEFAULT_FLOW_SLACK: f64 = 1e-2;

/// A Lyapunov candidate with the decrease thresholds it should satisfy.
///
/// Thresholds map the attractor distance `d` to the required decrease;
/// the active region (a predicate of the state and `d`) selects where the
/// checks apply. Optional bounds `lower(d) <= V(x) <= upper(d)` are checked
/// by [`bound_violations`].
#[derive(Clone)]
pub struct LyapunovSpec<T> {
    pub v: StateFn<T>,
    pub attractor: SetDescriptor<T>,
    pub flow_threshold: DistanceMap<T>,
    pub jump_threshold: DistanceMap<T>,
    pub active_region: RegionFn<T>,
    pub lower: Option<DistanceMap<T>>,
    pub upper: Option<DistanceMap<T>>,
    pub flow_slack: T,
}

impl<T: Scalar> fmt::Debug for LyapunovSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("attractor", &self.attractor)
            .field("flow_slack", &self.flow_slack)
            .field("bounds", &(self.lower.is_some(), self.upper.is_some()))
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> LyapunovSpec<T> {
    /// Candidate with zero thresholds, active everywhere, no bounds.
    pub fn new(v: impl Fn(&[T]) -> T + Send + Sync + 'static, attractor: SetDescriptor<T>) -> Self {
        Self {
            v: Arc::new(v),
            attractor,
            flow_threshold: Arc::new(|_| T::zero()),
            jump_threshold: Arc::new(|_| T::zero()),
            active_region: Arc::new(|_, _| true),
            lower: None,
            upper: None,
            flow_slack: T::lit(DEFAULT_FLOW_SLACK),
        }
    }

    pub fn with_flow_threshold(mut self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.flow_threshold = Arc::new(f);
        self
    }

    pub fn with_jump_threshold(mut self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.jump_threshold = Arc::new(f);
        self
    }

    pub fn with_active_region(mut self, f: impl Fn(&[T], T) -> bool + Send + Sync + 'static) -> Self {
        self.active_region = Arc::new(f);
        self
    }

    pub fn with_bounds(
        mut self,
        lower: impl Fn(T) -> T + Send + Sync + 'static,
        upper: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        self.lower = Some(Arc::new(lower));
        self.upper = Some(Arc::new(upper));
        self
    }

    pub fn with_flow_slack(mut self, slack: T) -> Self {
        self.flow_slack = slack;
        self
    }

    /// Flow slack of ten solver steps.
    pub fn with_step(self, step: T) -> Self {
        self.with_flow_slack(step * T::lit(10.0))
    }

    pub fn value(&self, x: &[T]) -> T {
        (self.v)(x)
    }
}

/// `V` at one arc sample, with the forward difference quotient to the next
/// sample of the same segment and, at pre-jump samples, `V(post) - V(pre)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSample<T> {
    pub time: HybridTime<T>,
    pub v: T,
    pub dv_flow: Option<T>,
    pub dv_jump: Option<T>,
}

pub fn lyapunov_along_arc<T: Scalar>(arc: &HybridArc<T>, spec: &LyapunovSpec<T>) -> Vec<LyapunovSample<T>> {
    let mut out = Vec::with_capacity(arc.len());
    let mut jumps = arc.jumps();
    for j in 0..arc.n_segments() {
        let seg: Vec<_> = arc.segment(j).collect();
        for (k, s) in seg.iter().enumerate() {
            let v = spec.value(s.state);
            let dv_flow = seg.get(k + 1).map(|n| (spec.value(n.state) - v) / (n.time.t - s.time.t));
            out.push(LyapunovSample {
                time: s.time,
                v,
                dv_flow,
                dv_jump: None,
            });
        }
        if let Some(jv) = jumps.next() {
            if let Some(last) = out.last_mut() {
                last.dv_jump = Some(spec.value(jv.post) - spec.value(jv.pre));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub j: usize,
    /// Observed `dV` (rate for flows, increment for jumps).
    pub value: f64,
    /// Largest admissible value.
    pub bound: f64,
}

/// Samples in the active region whose flow difference quotient exceeds
/// `-flow_threshold(d) + flow_slack`.
pub fn check_flow_decrease<T: Scalar>(arc: &HybridArc<T>, spec: &LyapunovSpec<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    for j in 0..arc.n_segments() {
        let mut it = arc.segment(j).peekable();
        while let Some(s) = it.next() {
            let Some(n) = it.peek() else { break };
            let d = spec.attractor.distance(s.state);
            if !(spec.active_region)(s.state, d) {
                continue;
            }
            let rate = (spec.value(n.state) - spec.value(s.state)) / (n.time.t - s.time.t);
            let bound = -(spec.flow_threshold)(d) + spec.flow_slack;
            if rate > bound || rate.is_nan() {
                out.push(Violation {
                    t: s.time.t.to_f64_lossy(),
                    j,
                    value: rate.to_f64_lossy(),
                    bound: bound.to_f64_lossy(),
                });
            }
        }
    }
    out
}

/// Jumps from the active region with `V(post) - V(pre) > -jump_threshold(d) + 1e-9`.
pub fn check_jump_decrease<T: Scalar>(arc: &HybridArc<T>, spec: &LyapunovSpec<T>) -> Vec<Violation> {
    let slack = T::lit(JUMP_SLACK);
    arc.jumps()
        .filter_map(|jv| {
            let d = spec.attractor.distance(jv.pre);
            if !(spec.active_region)(jv.pre, d) {
                return None;
            }
            let dv = spec.value(jv.post) - spec.value(jv.pre);
            let bound = -(spec.jump_threshold)(d) + slack;
            (dv > bound || dv.is_nan()).then(|| Violation {
                t: jv.t.to_f64_lossy(),
                j: jv.j,
                value: dv.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub index: usize,
    pub distance: f64,
    pub v: f64,
}

/// States (by index) where `V < 0` or where a declared bound fails.
pub fn bound_violations<'a, T: Scalar>(
    spec: &LyapunovSpec<T>,
    states: impl IntoIterator<Item = &'a [T]>,
) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    for (index, x) in states.into_iter().enumerate() {
        let d = spec.attractor.distance(x);
        let v = spec.value(x);
        let below = spec.lower.as_ref().is_some_and(|lo| v < lo(d));
        let above = spec.upper.as_ref().is_some_and(|hi| v > hi(d));
        if v < T::zero() || below || above || v.is_nan() {
            out.push(BoundViolation {
                index,
                distance: d.to_f64_lossy(),
                v: v.to_f64_lossy(),
            });
        }
    }
    out
}
