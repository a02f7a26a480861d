//! Sampled-data unicycle tracking a fixed reference position with a
//! rotating reference heading.
//!
//! Agent state `(x, y, θe, τ, θ, v̂, ω̂)`: position, heading error
//! `θe = θr - θ`, sampling timer, heading and the held inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{Block, Guard, HybridSystem, JumpTag, Jumped, SetDescriptor};
use crate::scalar::Scalar;

pub const AGENT_DIM: usize = 7;
pub const X: usize = 0;
pub const Y: usize = 1;
pub const THETA_E: usize = 2;
pub const TIMER: usize = 3;
pub const THETA: usize = 4;
pub const V_HAT: usize = 5;
pub const W_HAT: usize = 6;

pub const AGENT_LABELS: [&str; AGENT_DIM] = ["x", "y", "theta_e", "timer", "theta", "v_hat", "w_hat"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnicycleParams {
    /// Sampling period, seconds.
    pub sigma: f64,
    /// Reference angular rate, rad/s.
    pub omega_r: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl UnicycleParams {
    /// Gains `c2 = σ`, `c3 = 1/(3 ω_r)`, `c1 = 1/(2 c3)`.
    pub fn tuned(sigma: f64, omega_r: f64) -> Self {
        let c3 = 1.0 / (3.0 * omega_r);
        Self {
            sigma,
            omega_r,
            c1: 1.0 / (2.0 * c3),
            c2: sigma,
            c3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("omega_r", self.omega_r),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Param(format!("unicycle {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Largest `ω_i = ω_r + c2 θe` over heading errors up to `2Δ`.
    pub fn omega_max(&self, delta: f64) -> f64 {
        self.omega_r + 2.0 * self.c2 * delta
    }

    /// `c3 <= √2 / (2 ω̄)`, needed for the quadratic bounds on [`lyapunov`].
    pub fn bounds_hold(&self, delta: f64) -> bool {
        self.c3 <= std::f64::consts::SQRT_2 / (2.0 * self.omega_max(delta))
    }
}

/// Tracking errors in the body frame: `(x^e, y^e)`.
pub fn tracking_errors<T: Scalar>(q: &[T], reference: [T; 2]) -> (T, T) {
    let (s, c) = q[THETA].sin_cos();
    let dx = reference[0] - q[X];
    let dy = reference[1] - q[Y];
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Agent flow `(v̂ cos θ, v̂ sin θ, ω_r - ω̂, 1/σ, ω̂, 0, 0)`.
#[inline]
pub fn agent_flow<T: Scalar>(p: &UnicycleParams, q: &[T], dq: &mut [T]) {
    let (s, c) = q[THETA].sin_cos();
    dq[X] = q[V_HAT] * c;
    dq[Y] = q[V_HAT] * s;
    dq[THETA_E] = T::lit(p.omega_r) - q[W_HAT];
    dq[TIMER] = T::one() / T::lit(p.sigma);
    dq[THETA] = q[W_HAT];
    dq[V_HAT] = T::zero();
    dq[W_HAT] = T::zero();
}

/// Sampled feedback `(v_i, ω_i)` at the current state.
pub fn feedback<T: Scalar>(p: &UnicycleParams, q: &[T], reference: [T; 2]) -> (T, T) {
    let (xe, ye) = tracking_errors(q, reference);
    let (c1, c2, c3) = (T::lit(p.c1), T::lit(p.c2), T::lit(p.c3));
    let wr = T::lit(p.omega_r);
    let w = wr + c2 * q[THETA_E];
    let v = c1 * (xe - c3 * w * ye) - c3 * c2 * (wr - w) * ye + c3 * w * w * xe;
    (v, w)
}

/// Agent jump: resample the inputs and restart the timer.
pub fn agent_jump<T: Scalar>(p: &UnicycleParams, q: &[T], reference: [T; 2], out: &mut [T]) {
    let (v, w) = feedback(p, q, reference);
    out.copy_from_slice(&q[..AGENT_DIM]);
    out[TIMER] = T::zero();
    out[V_HAT] = v;
    out[W_HAT] = w;
}

/// `V_i = ½(x^e - c3 ω_i y^e)² + ½(y^e)² + ½(θe)²`.
pub fn lyapunov<T: Scalar>(p: &UnicycleParams, q: &[T], reference: [T; 2]) -> T {
    let (xe, ye) = tracking_errors(q, reference);
    let w = T::lit(p.omega_r) + T::lit(p.c2) * q[THETA_E];
    let a = xe - T::lit(p.c3) * w * ye;
    let half = T::lit(0.5);
    half * (a * a + ye * ye + q[THETA_E] * q[THETA_E])
}

/// `|r_i|` with `r_i = (x - u^1, y - u^2, θ - θr)`.
pub fn error_norm<T: Scalar>(q: &[T], reference: [T; 2]) -> T {
    let dx = q[X] - reference[0];
    let dy = q[Y] - reference[1];
    (dx * dx + dy * dy + q[THETA_E] * q[THETA_E]).sqrt()
}

/// Standalone agent with a fixed reference position. Flow set
/// `R^3 x [0,1] x R^3`, jumps at `τ = 1`.
pub fn build_unicycle_agent<T: Scalar>(p: &UnicycleParams, reference: [f64; 2]) -> Result<HybridSystem<T>> {
    p.validate()?;
    let params = *p;
    let r = [T::lit(reference[0]), T::lit(reference[1])];
    let (lo, hi) = timer_box::<T>(T::zero(), T::one());
    let (dlo, dhi) = timer_box::<T>(T::one(), T::one());
    HybridSystem::builder(AGENT_DIM)
        .labels(AGENT_LABELS)
        .flow(move |q: &[T], dq: &mut [T]| agent_flow(&params, q, dq))
        .jump_tagged(move |q: &[T]| {
            let mut out = vec![T::zero(); AGENT_DIM];
            agent_jump(&params, q, r, &mut out);
            Ok(Jumped::tagged(out, JumpTag::fast("unicycle")))
        })
        .flow_set(SetDescriptor::boxed(lo, hi))
        .jump_set(SetDescriptor::boxed(dlo, dhi))
        .guard(Guard::threshold("timer", TIMER, T::one()).in_block(Block::Fast))
        .build()
}

fn timer_box<T: Scalar>(lo_t: T, hi_t: T) -> (Vec<T>, Vec<T>) {
    let mut lo = vec![T::neg_infinity(); AGENT_DIM];
    let mut hi = vec![T::infinity(); AGENT_DIM];
    lo[TIMER] = lo_t;
    hi[TIMER] = hi_t;
    (lo, hi)
}
