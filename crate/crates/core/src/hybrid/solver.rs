//! Fixed-step RK4 integration of hybrid systems with guard-based event
//! localization.

use serde::{Deserialize, Serialize};

use super::arc::{ArcBuilder, HybridArc, Termination};
use super::system::{FlowFn, HybridSystem};
use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Which branch wins when the state is in both the flow and the jump set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Priority {
    #[default]
    JumpFirst,
    FlowFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverConfig<T> {
    /// RK4 step in seconds.
    pub step: T,
    pub max_t: T,
    pub max_j: usize,
    pub priority: Priority,
    pub guard_tol: T,
    pub bisection_iters: usize,
    /// Record every `record_stride`-th RK4 step (segment ends are always kept).
    pub record_stride: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-3),
            max_t: T::lit(10.0),
            max_j: 1_000_000,
            priority: Priority::JumpFirst,
            guard_tol: T::lit(1e-9),
            bisection_iters: 60,
            record_stride: 1,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_step(mut self, step: T) -> Self {
        self.step = step;
        self
    }

    pub fn with_max_t(mut self, max_t: T) -> Self {
        self.max_t = max_t;
        self
    }

    pub fn with_max_j(mut self, max_j: usize) -> Self {
        self.max_j = max_j;
        self
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(Error::Param(format!("step must be positive, got {}", self.step)));
        }
        if !(self.max_t > T::zero()) {
            return Err(Error::Param(format!("max_t must be positive, got {}", self.max_t)));
        }
        if self.step > self.max_t {
            return Err(Error::Param("step exceeds max_t".into()));
        }
        if self.max_j == 0 {
            return Err(Error::Param("max_j must be positive".into()));
        }
        if !(self.guard_tol > T::zero()) {
            return Err(Error::Param("guard_tol must be positive".into()));
        }
        if self.bisection_iters == 0 {
            return Err(Error::Param("bisection_iters must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Param("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Time slack below which a remaining budget counts as exhausted.
    fn time_eps(&self) -> T {
        self.step * T::lit(1e-9)
    }
}

/// Why a flow interval ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStop {
    Budget,
    /// Guard with this index crossed zero.
    Guard(usize),
    LeftFlowSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOutcome<T> {
    pub state: Vec<T>,
    pub elapsed: T,
    pub stop: FlowStop,
}

impl<T> FlowOutcome<T> {
    pub fn hit_guard(&self) -> bool {
        matches!(self.stop, FlowStop::Guard(_))
    }
}

struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![T::zero(); n],
            k2: vec![T::zero(); n],
            k3: vec![T::zero(); n],
            k4: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }

    fn step(&mut self, f: &FlowFn<T>, x: &[T], h: T, out: &mut [T]) {
        let half = h * T::lit(0.5);
        f(x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        let sixth = h / T::lit(6.0);
        for i in 0..x.len() {
            out[i] = x[i] + sixth * (self.k1[i] + T::lit(2.0) * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Flows from `x0` for at most `budget` seconds, calling `record(t, x)` for
/// recorded samples (every `record_stride` steps and at the end). `t0` only
/// offsets the reported times.
pub(crate) fn flow_recorded<T: Scalar>(
    sys: &HybridSystem<T>,
    x0: &[T],
    t0: T,
    budget: T,
    cfg: &SolverConfig<T>,
    mut record: impl FnMut(T, &[T]) -> Result<()>,
) -> Result<FlowOutcome<T>> {
    let n = sys.dim();
    let flow = sys.flow_fn();
    let guards = sys.guards();
    let mut rk = Rk4::new(n);
    let mut x = x0.to_vec();
    let mut xn = vec![T::zero(); n];
    let mut g_prev: Vec<T> = guards.iter().map(|g| g.eval(&x)).collect();
    let mut g_new = g_prev.clone();
    let mut elapsed = T::zero();
    let mut steps = 0usize;
    let mut recorded_last = true;
    let eps = cfg.time_eps();

    loop {
        let remaining = budget - elapsed;
        if remaining <= eps {
            break;
        }
        let h = cfg.step.min(remaining);
        rk.step(flow, &x, h, &mut xn);
        if !all_finite(&xn) {
            return Err(Error::NumericFailure {
                t: (t0 + elapsed + h).to_f64_lossy(),
            });
        }

        let mut earliest: Option<(T, usize, Vec<T>)> = None;
        for (i, g) in guards.iter().enumerate() {
            g_new[i] = g.eval(&xn);
            if g_prev[i] < T::zero() && g_new[i] >= T::zero() {
                let (s, xs) = localize_guard(&mut rk, flow, &x, h, |y| g.eval(y), cfg);
                if earliest.as_ref().is_none_or(|(best, _, _)| s < *best) {
                    earliest = Some((s, i, xs));
                }
            }
        }
        if let Some((s, i, xs)) = earliest {
            if !all_finite(&xs) {
                return Err(Error::NumericFailure {
                    t: (t0 + elapsed + s).to_f64_lossy(),
                });
            }
            elapsed += s;
            record(t0 + elapsed, &xs)?;
            return Ok(FlowOutcome {
                state: xs,
                elapsed,
                stop: FlowStop::Guard(i),
            });
        }

        if !sys.flow_set().contains(&xn) {
            let (s, xs) = localize_exit(&mut rk, sys, &x, h, cfg);
            if s > T::zero() {
                elapsed += s;
                record(t0 + elapsed, &xs)?;
                x = xs;
            } else if !recorded_last && elapsed > T::zero() {
                record(t0 + elapsed, &x)?;
            }
            return Ok(FlowOutcome {
                state: x,
                elapsed,
                stop: FlowStop::LeftFlowSet,
            });
        }

        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g_prev, &mut g_new);
        elapsed += h;
        steps += 1;
        recorded_last = steps % cfg.record_stride == 0;
        if recorded_last {
            record(t0 + elapsed, &x)?;
        }
    }
    if !recorded_last {
        record(t0 + elapsed, &x)?;
    }
    Ok(FlowOutcome {
        state: x,
        elapsed,
        stop: FlowStop::Budget,
    })
}

/// Bisects the sub-step length in `(0, h]` at which `g` crosses zero.
/// Returns the upper bracket, where `g >= 0`.
fn localize_guard<T: Scalar>(
    rk: &mut Rk4<T>,
    flow: &FlowFn<T>,
    x: &[T],
    h: T,
    g: impl Fn(&[T]) -> T,
    cfg: &SolverConfig<T>,
) -> (T, Vec<T>) {
    let mut lo = T::zero();
    let mut hi = h;
    let mut y = vec![T::zero(); x.len()];
    let mut best = vec![T::zero(); x.len()];
    rk.step(flow, x, hi, &mut best);
    if g(&best) <= cfg.guard_tol {
        return (hi, best);
    }
    for _ in 0..cfg.bisection_iters {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        rk.step(flow, x, mid, &mut y);
        let gm = g(&y);
        if gm >= T::zero() {
            hi = mid;
            std::mem::swap(&mut best, &mut y);
            if gm <= cfg.guard_tol {
                break;
            }
        } else {
            lo = mid;
        }
    }
    (hi, best)
}

/// Bisects the last sub-step length that stays inside the flow set.
fn localize_exit<T: Scalar>(
    rk: &mut Rk4<T>,
    sys: &HybridSystem<T>,
    x: &[T],
    h: T,
    cfg: &SolverConfig<T>,
) -> (T, Vec<T>) {
    let mut lo = T::zero();
    let mut hi = h;
    let mut best = x.to_vec();
    let mut y = vec![T::zero(); x.len()];
    for _ in 0..cfg.bisection_iters {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        rk.step(sys.flow_fn(), x, mid, &mut y);
        if sys.flow_set().contains(&y) {
            lo = mid;
            best.copy_from_slice(&y);
        } else {
            hi = mid;
        }
    }
    (lo, best)
}

/// Flows `x0` until a guard upcrossing, flow-set exit, or `budget` seconds.
pub fn integrate_flow<T: Scalar>(
    sys: &HybridSystem<T>,
    x0: &[T],
    budget: T,
    cfg: &SolverConfig<T>,
) -> Result<FlowOutcome<T>> {
    cfg.validate()?;
    check_dim(sys, x0)?;
    if !(budget > T::zero()) {
        return Err(Error::Param(format!("flow budget must be positive, got {budget}")));
    }
    if !sys.flow_set().contains(x0) {
        return Err(Error::Domain("initial state is not in the flow set".into()));
    }
    flow_recorded(sys, x0, T::zero(), budget, cfg, |_, _| Ok(()))
}

/// Applies the jump map at a state in the jump set.
pub fn apply_jump<T: Scalar>(sys: &HybridSystem<T>, x: &[T]) -> Result<Vec<T>> {
    check_dim(sys, x)?;
    if !sys.jump_set().contains(x) {
        return Err(Error::Domain(format!(
            "state is {} away from the jump set",
            sys.jump_set().distance(x)
        )));
    }
    let out = sys.jump(x)?;
    check_dim(sys, &out.state)?;
    Ok(out.state)
}

fn check_dim<T: Scalar>(sys: &HybridSystem<T>, x: &[T]) -> Result<()> {
    if x.len() != sys.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Computes a hybrid arc from `x0`. Numeric failures are returned as errors.
pub fn solve<T: Scalar>(sys: &HybridSystem<T>, x0: &[T], cfg: &SolverConfig<T>) -> Result<HybridArc<T>> {
    let (arc, err) = solve_partial(sys, x0, cfg)?;
    match err {
        Some(e) => Err(e),
        None => Ok(arc),
    }
}

/// Like [`solve`], but a numeric failure ends the arc with
/// [`Termination::NumericFailure`] and is handed back alongside it.
pub fn solve_partial<T: Scalar>(
    sys: &HybridSystem<T>,
    x0: &[T],
    cfg: &SolverConfig<T>,
) -> Result<(HybridArc<T>, Option<Error>)> {
    cfg.validate()?;
    check_dim(sys, x0)?;
    if !all_finite(x0) {
        return Err(Error::NumericFailure { t: 0.0 });
    }
    let in_c0 = sys.flow_set().contains(x0);
    if !in_c0 && !sys.jump_set().contains(x0) {
        return Err(Error::Domain("initial state is in neither the flow nor the jump set".into()));
    }

    let mut arc = ArcBuilder::new(sys.dim(), sys.labels().to_vec());
    arc.push_sample(T::zero(), x0)?;
    let mut x = x0.to_vec();
    let mut t = T::zero();
    let mut j = 0usize;
    let mut stalled = false;
    let eps = cfg.time_eps();

    let (termination, failure) = loop {
        let in_c = sys.flow_set().contains(&x);
        let in_d = sys.jump_set().contains(&x);
        let jump_now = in_d && (cfg.priority == Priority::JumpFirst || !in_c || stalled);
        if jump_now {
            if j >= cfg.max_j {
                break (Termination::MaxJ, None);
            }
            let jumped = match sys.jump(&x) {
                Ok(v) => v,
                Err(e @ Error::NumericFailure { .. }) => break (Termination::NumericFailure, Some(e)),
                Err(e) => return Err(e),
            };
            check_dim(sys, &jumped.state)?;
            if !all_finite(&jumped.state) {
                break (
                    Termination::NumericFailure,
                    Some(Error::NumericFailure { t: t.to_f64_lossy() }),
                );
            }
            arc.push_jump(&jumped.state, jumped.tag)?;
            x = jumped.state;
            j += 1;
            stalled = false;
            continue;
        }
        if !in_c {
            break (Termination::LeftDomain, None);
        }
        if t >= cfg.max_t - eps {
            break (Termination::MaxT, None);
        }
        let outcome = match flow_recorded(sys, &x, t, cfg.max_t - t, cfg, |tt, xx| arc.push_flow_sample(tt, xx)) {
            Ok(o) => o,
            Err(e @ Error::NumericFailure { .. }) => break (Termination::NumericFailure, Some(e)),
            Err(e) => return Err(e),
        };
        t += outcome.elapsed;
        x = outcome.state;
        match outcome.stop {
            FlowStop::Budget => break (Termination::MaxT, None),
            FlowStop::Guard(_) => stalled = false,
            FlowStop::LeftFlowSet => {
                if !sys.jump_set().contains(&x) {
                    break (Termination::LeftDomain, None);
                }
                // At the exit point no flow is possible any more.
                stalled = true;
            }
        }
    };
    Ok((arc.finish(termination), failure))
}
