//! Asynchronous zeroth-order Nash-equilibrium-seeking controller and its
//! composition with the unicycle fleet.
//!
//! Controller state `(u, ξ, μ, t)` for `N` agents: references `u` and
//! filter states `ξ` (2 per agent), oscillator pairs `μ` (two unit pairs
//! per agent) and sampling timers `t`. Agent `i` updates only when its own
//! timer reaches 1.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::examples::PerturbedSystem;
use super::game::{cost_unchecked, solve_nash_quadratic, GameParams, NashSolution};
use super::unicycle::{self, UnicycleParams, AGENT_DIM, AGENT_LABELS};
use crate::error::{Error, Result};
use crate::hybrid::{Block, Guard, HybridSystem, JumpBlocks, JumpTag, Jumped, SetDescriptor};
use crate::perturbation::{SteadyStateMap, TimescaleDecomposition};
use crate::scalar::Scalar;

/// Timers within this distance of 1 count as triggered.
pub const TIMER_TOL: f64 = 1e-9;
/// Oscillator pairs are renormalized after every rotation.
pub const OSCILLATOR_TOL: f64 = 1e-9;

/// Default filter box half-width: wide enough that the dithered gradient
/// estimate is never clipped on the four-agent setup.
pub const DEFAULT_FILTER_BOUND: f64 = 1e4;

/// Cost measurement `J_i` for agent `i` at stacked planar positions.
pub type Measurement<T> = Arc<dyn Fn(usize, &[T]) -> T + Send + Sync>;

/// Measurement that evaluates the game cost exactly.
pub fn game_measurement<T: Scalar>(g: &GameParams) -> Measurement<T> {
    let g = g.clone();
    Arc::new(move |i, p| cost_unchecked(&g, i, p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NESControllerParams {
    pub alpha: f64,
    pub beta: f64,
    /// Dither amplitude `a_i` per agent.
    pub amplitudes: Vec<f64>,
    /// Rotation angles per sample `ω_i^1, ω_i^2`.
    pub frequencies: Vec<[f64; 2]>,
    /// Sampling periods `τ_i`.
    pub periods: Vec<f64>,
    /// Common scale: timers run at `1 / (τ0 τ_i)`.
    pub tau0: f64,
    pub timers0: Vec<f64>,
    /// `ξ` is kept in `[-filter_bound, filter_bound]` per coordinate.
    pub filter_bound: f64,
    /// Measure at the dithered positions `x + A D μ` (otherwise at `x`).
    pub dither_in_measurement: bool,
}

impl NESControllerParams {
    /// The four-agent tuning: α = 0.05, β = 0.003, a_i = 0.1,
    /// τ = (1, 1.5, 2, 1)·10⁻², t(0) = (0, 0.002, 0.004, 0.006).
    pub fn reference(seed: u64) -> Self {
        Self {
            alpha: 0.05,
            beta: 0.003,
            amplitudes: vec![0.1; 4],
            frequencies: dither_frequencies(4, seed),
            periods: vec![1e-2, 1.5e-2, 2e-2, 1e-2],
            tau0: 1.0,
            timers0: vec![0.0, 0.002, 0.004, 0.006],
            filter_bound: DEFAULT_FILTER_BOUND,
            dither_in_measurement: true,
        }
    }

    pub fn n(&self) -> usize {
        self.periods.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let lens = [
            ("amplitudes", self.amplitudes.len()),
            ("frequencies", self.frequencies.len()),
            ("periods", self.periods.len()),
            ("timers0", self.timers0.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(Error::Param(format!("controller {name} has {len} entries for {n} agents")));
            }
        }
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Param(format!("controller {name} must be positive, got {v}")))
            }
        };
        pos("alpha", self.alpha)?;
        pos("beta", self.beta)?;
        pos("tau0", self.tau0)?;
        pos("filter_bound", self.filter_bound)?;
        for &a in &self.amplitudes {
            pos("amplitude", a)?;
        }
        for &p in &self.periods {
            pos("period", p)?;
        }
        let mut all: Vec<f64> = self.frequencies.iter().flatten().copied().collect();
        for &w in &all {
            pos("frequency", w)?;
        }
        all.sort_by(f64::total_cmp);
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Param("dither frequencies must be distinct".into()));
        }
        if self.timers0.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Param("initial timers must lie in [0, 1]".into()));
        }
        let mut t0 = self.timers0.clone();
        t0.sort_by(f64::total_cmp);
        if t0.windows(2).any(|w| (w[1] - w[0]).abs() <= TIMER_TOL) {
            return Err(Error::Param("initial timers must be pairwise distinct".into()));
        }
        Ok(())
    }
}

/// Distinct naturals `1, 2, ..., 2N` perturbed by `U(-0.5, 0.5)`.
pub fn dither_frequencies(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = (2 * i + 1) as f64;
            [k + rng.gen_range(-0.5..0.5), k + 1.0 + rng.gen_range(-0.5..0.5)]
        })
        .collect()
}

/// Offsets of the controller blocks for `n` agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControllerLayout {
    pub n: usize,
}

impl ControllerLayout {
    pub fn dim(&self) -> usize {
        9 * self.n
    }
    pub fn u(&self, i: usize) -> usize {
        2 * i
    }
    pub fn xi(&self, i: usize) -> usize {
        2 * self.n + 2 * i
    }
    pub fn mu(&self, i: usize) -> usize {
        4 * self.n + 4 * i
    }
    pub fn timer(&self, i: usize) -> usize {
        8 * self.n + i
    }

    pub fn labels(&self) -> Vec<String> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim());
        out.extend((1..=n).flat_map(|i| [format!("u{i}_1"), format!("u{i}_2")]));
        out.extend((1..=n).flat_map(|i| [format!("xi{i}_1"), format!("xi{i}_2")]));
        out.extend((1..=n).flat_map(|i| (1..=4).map(move |k| format!("mu{i}_{k}"))));
        out.extend((1..=n).map(|i| format!("t{i}")));
        out
    }

    /// Indices of the agents whose timers have reached 1.
    pub fn triggered<T: Scalar>(&self, xc: &[T]) -> Vec<usize> {
        let lim = T::one() - T::lit(TIMER_TOL);
        (0..self.n).filter(|&i| xc[self.timer(i)] >= lim).collect()
    }
}

/// Shared controller maps; plant positions are passed in explicitly.
#[derive(Clone)]
struct ControllerCore<T> {
    layout: ControllerLayout,
    p: NESControllerParams,
    rot: Vec<[(T, T); 2]>,
    measurement: Measurement<T>,
}

impl<T: Scalar> ControllerCore<T> {
    fn new(p: &NESControllerParams, n: usize, measurement: Measurement<T>) -> Result<Self> {
        p.validate(n)?;
        let rot = p
            .frequencies
            .iter()
            .map(|w| {
                let r = |a: f64| (T::lit(a.cos()), T::lit(a.sin()));
                [r(w[0]), r(w[1])]
            })
            .collect();
        Ok(Self {
            layout: ControllerLayout { n },
            p: p.clone(),
            rot,
            measurement,
        })
    }

    fn flow(&self, dx: &mut [T]) {
        let l = self.layout;
        for v in dx[..l.dim()].iter_mut() {
            *v = T::zero();
        }
        for i in 0..l.n {
            dx[l.timer(i)] = T::one() / (T::lit(self.p.tau0) * T::lit(self.p.periods[i]));
        }
    }

    /// Dither direction `D μ_i`: first entry of each pair.
    fn dither(&self, xc: &[T], i: usize) -> [T; 2] {
        let m = self.layout.mu(i);
        [xc[m], xc[m + 2]]
    }

    fn jump(&self, xc: &[T], positions: &[T]) -> Result<Vec<T>> {
        let l = self.layout;
        let triggered = l.triggered(xc);
        let i = match triggered.as_slice() {
            [i] => *i,
            [] => return Err(Error::Domain("controller jump with no expired timer".into())),
            _ => return Err(Error::ConcurrentSampling { agents: triggered }),
        };
        let mut probe = positions.to_vec();
        if self.p.dither_in_measurement {
            for k in 0..l.n {
                let d = self.dither(xc, k);
                let a = T::lit(self.p.amplitudes[k]);
                probe[2 * k] += a * d[0];
                probe[2 * k + 1] += a * d[1];
            }
        }
        let cost = (self.measurement)(i, &probe);
        let (alpha, beta) = (T::lit(self.p.alpha), T::lit(self.p.beta));
        let gain = T::lit(2.0 / self.p.amplitudes[i]);
        let bound = T::lit(self.p.filter_bound);
        let d = self.dither(xc, i);

        let mut out = xc[..l.dim()].to_vec();
        for k in 0..2 {
            let xi = xc[l.xi(i) + k];
            out[l.u(i) + k] = xc[l.u(i) + k] - alpha * beta * xi;
            let next = xi + alpha * (gain * cost * d[k] - xi);
            out[l.xi(i) + k] = next.max(-bound).min(bound);
        }
        let m = l.mu(i);
        for (k, &(c, s)) in self.rot[i].iter().enumerate() {
            let (a, b) = (xc[m + 2 * k], xc[m + 2 * k + 1]);
            let (ra, rb) = (c * a - s * b, s * a + c * b);
            let nrm = (ra * ra + rb * rb).sqrt();
            out[m + 2 * k] = ra / nrm;
            out[m + 2 * k + 1] = rb / nrm;
        }
        out[l.timer(i)] = T::zero();
        Ok(out)
    }

    fn flow_box(&self) -> (Vec<T>, Vec<T>) {
        let l = self.layout;
        let b = T::lit(self.p.filter_bound);
        let mut lo = vec![T::neg_infinity(); l.dim()];
        let mut hi = vec![T::infinity(); l.dim()];
        for i in 0..l.n {
            for k in 0..2 {
                lo[l.xi(i) + k] = -b;
                hi[l.xi(i) + k] = b;
            }
            for k in 0..4 {
                lo[l.mu(i) + k] = -T::one();
                hi[l.mu(i) + k] = T::one();
            }
            lo[l.timer(i)] = T::zero();
            hi[l.timer(i)] = T::one();
        }
        (lo, hi)
    }

    /// Timers at 1 (over controller coordinates).
    fn jump_set(&self) -> SetDescriptor<T> {
        let (l, l2) = (self.layout, self.layout);
        SetDescriptor::custom(
            move |xc: &[T]| !l.triggered(xc).is_empty(),
            move |xc: &[T]| {
                (0..l2.n)
                    .map(|i| (T::one() - xc[l2.timer(i)]).max(T::zero()))
                    .fold(T::infinity(), T::min)
            },
        )
        .with_tolerance(T::lit(TIMER_TOL))
    }

    fn guards(&self) -> Vec<Guard<T>> {
        (0..self.layout.n)
            .map(|i| Guard::threshold(format!("t{}", i + 1), self.layout.timer(i), T::one()).in_block(Block::Slow))
            .collect()
    }
}

/// Controller state `(u0, 0, μ0, t0)` with every oscillator pair at `(1, 0)`.
/// `u0` defaults to the sources.
pub fn initial_controller_state<T: Scalar>(
    p: &NESControllerParams,
    g: &GameParams,
    u0: Option<&[[f64; 2]]>,
) -> Vec<T> {
    let l = ControllerLayout { n: g.n() };
    let mut x = vec![T::zero(); l.dim()];
    let u0 = u0.unwrap_or(&g.sources);
    for i in 0..l.n {
        x[l.u(i)] = T::lit(u0[i][0]);
        x[l.u(i) + 1] = T::lit(u0[i][1]);
        x[l.mu(i)] = T::one();
        x[l.mu(i) + 2] = T::one();
        x[l.timer(i)] = T::lit(p.timers0[i]);
    }
    x
}

/// Controller alone, with the plants assumed at their references
/// (measurements are taken at `u`).
pub fn build_nes_controller<T: Scalar>(
    p: &NESControllerParams,
    g: &GameParams,
    measurement: Measurement<T>,
) -> Result<HybridSystem<T>> {
    g.validate()?;
    let n = g.n();
    let core = ControllerCore::new(p, n, measurement)?;
    let l = core.layout;
    let (lo, hi) = core.flow_box();
    let (cf, cj) = (core.clone(), core.clone());
    let tag = JumpTag::slow("controller");
    HybridSystem::builder(l.dim())
        .labels(l.labels())
        .flow(move |_: &[T], dx: &mut [T]| cf.flow(dx))
        .jump_tagged(move |xc: &[T]| {
            let positions = xc[..2 * n].to_vec();
            Ok(Jumped::tagged(cj.jump(xc, &positions)?, tag.clone()))
        })
        .flow_set(SetDescriptor::boxed(lo, hi))
        .jump_set(core.jump_set())
        .guards(core.guards())
        .build()
}

/// Offset of agent `i`'s plant block in the composed state.
pub fn plant_offset(n: usize, i: usize) -> usize {
    9 * n + AGENT_DIM * i
}

/// Composed controller and unicycle fleet with the plants sped up by `1/ε`.
#[derive(Clone, Debug)]
pub struct FullSystem<T: Scalar> {
    pub perturbed: PerturbedSystem<T>,
    pub layout: ControllerLayout,
    pub nash: NashSolution,
    pub unicycles: Vec<UnicycleParams>,
}

impl<T: Scalar> FullSystem<T> {
    pub fn system(&self) -> &HybridSystem<T> {
        &self.perturbed.system
    }

    /// Planar plant positions, stacked.
    pub fn plant_positions(&self, x: &[T]) -> Vec<T> {
        plant_positions(self.layout.n, x)
    }

    /// Composed initial state: controller from [`initial_controller_state`],
    /// each plant at its reference with zero tracking error unless a pose
    /// `(x, y, θ)` is given (`θe = -θ`, i.e. `θr(0) = 0`).
    pub fn initial_state(
        &self,
        nes: &NESControllerParams,
        g: &GameParams,
        u0: Option<&[[f64; 2]]>,
        poses: Option<&[[f64; 3]]>,
    ) -> Vec<T> {
        let n = self.layout.n;
        let mut x = initial_controller_state::<T>(nes, g, u0);
        for i in 0..n {
            let mut q = vec![T::zero(); AGENT_DIM];
            let (px, py, th) = match poses {
                Some(p) => (p[i][0], p[i][1], p[i][2]),
                None => (x[2 * i].to_f64_lossy(), x[2 * i + 1].to_f64_lossy(), 0.0),
            };
            q[unicycle::X] = T::lit(px);
            q[unicycle::Y] = T::lit(py);
            q[unicycle::THETA] = T::lit(th);
            q[unicycle::THETA_E] = T::lit(-th);
            q[unicycle::W_HAT] = T::lit(self.unicycles[i].omega_r);
            x.extend(q);
        }
        x
    }
}

fn plant_positions<T: Scalar>(n: usize, x: &[T]) -> Vec<T> {
    let mut p = Vec::with_capacity(2 * n);
    for i in 0..n {
        let o = plant_offset(n, i);
        p.push(x[o + unicycle::X]);
        p.push(x[o + unicycle::Y]);
    }
    p
}

/// Builds the composed system. Slow jumps are tagged `controller`, fast
/// jumps `unicycle-<i>` (1-based); when several plants sample at once they
/// jump one after another in index order.
pub fn build_full_system<T: Scalar>(
    g: &GameParams,
    nes: &NESControllerParams,
    uni: &[UnicycleParams],
    epsilon: f64,
    measurement: Measurement<T>,
) -> Result<FullSystem<T>> {
    g.validate()?;
    let n = g.n();
    if uni.len() != n {
        return Err(Error::Param(format!("{} unicycles for {n} agents", uni.len())));
    }
    for u in uni {
        u.validate()?;
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Param(format!("epsilon must be positive, got {epsilon}")));
    }
    let nash = solve_nash_quadratic(g)?;
    let core = ControllerCore::new(nes, n, measurement)?;
    let l = core.layout;
    let n1 = l.dim();
    let dim = n1 + AGENT_DIM * n;
    let eps = T::lit(epsilon);
    let uni: Vec<UnicycleParams> = uni.to_vec();

    let (cf, uf) = (core.clone(), uni.clone());
    let flow = move |x: &[T], dx: &mut [T]| {
        cf.flow(dx);
        for (i, p) in uf.iter().enumerate() {
            let o = n1 + AGENT_DIM * i;
            unicycle::agent_flow(p, &x[o..o + AGENT_DIM], &mut dx[o..o + AGENT_DIM]);
            for v in &mut dx[o..o + AGENT_DIM] {
                *v /= eps;
            }
        }
    };

    let (clo, chi) = core.flow_box();
    let (mut lo, mut hi) = (clo, chi);
    for _ in 0..n {
        let mut plo = vec![T::neg_infinity(); AGENT_DIM];
        let mut phi = vec![T::infinity(); AGENT_DIM];
        plo[unicycle::TIMER] = T::zero();
        phi[unicycle::TIMER] = T::one();
        lo.extend(plo);
        hi.extend(phi);
    }

    let plant_lim = T::one() - T::lit(TIMER_TOL);
    let plant_triggered = move |x2: &[T]| (0..n).find(|&i| x2[AGENT_DIM * i + unicycle::TIMER] >= plant_lim);
    let fast_set = SetDescriptor::custom(
        move |x2: &[T]| plant_triggered(x2).is_some(),
        move |x2: &[T]| {
            (0..n)
                .map(|i| (T::one() - x2[AGENT_DIM * i + unicycle::TIMER]).max(T::zero()))
                .fold(T::infinity(), T::min)
        },
    )
    .with_tolerance(T::lit(TIMER_TOL));

    let cj = core.clone();
    let slow_tag = JumpTag::slow("controller");
    let slow_jump = Arc::new(move |x: &[T]| {
        let pos = plant_positions(n, x);
        Ok(Jumped::tagged(cj.jump(&x[..n1], &pos)?, slow_tag.clone()))
    });
    let fast_tags: Vec<JumpTag> = (1..=n).map(|i| JumpTag::fast(&format!("unicycle-{i}"))).collect();
    let uj = uni.clone();
    let fast_jump = Arc::new(move |x: &[T]| {
        let x2 = &x[n1..];
        let i = plant_triggered(x2).ok_or_else(|| Error::Domain("no plant timer expired".into()))?;
        let mut out = x2.to_vec();
        let o = AGENT_DIM * i;
        let reference = [x[l.u(i)], x[l.u(i) + 1]];
        let mut q = vec![T::zero(); AGENT_DIM];
        unicycle::agent_jump(&uj[i], &x2[o..o + AGENT_DIM], reference, &mut q);
        out[o..o + AGENT_DIM].copy_from_slice(&q);
        Ok(Jumped::tagged(out, fast_tags[i].clone()))
    });

    let mut labels = l.labels();
    for i in 1..=n {
        labels.extend(AGENT_LABELS.iter().map(|s| format!("{s}{i}")));
    }
    let mut guards = core.guards();
    for i in 0..n {
        guards.push(
            Guard::threshold(format!("timer{}", i + 1), n1 + AGENT_DIM * i + unicycle::TIMER, T::one())
                .in_block(Block::Fast),
        );
    }

    let system = HybridSystem::builder(dim)
        .labels(labels)
        .flow(flow)
        .flow_set(SetDescriptor::boxed(lo.clone(), hi.clone()))
        .block_jumps(JumpBlocks {
            n1,
            slow_set: core.jump_set(),
            fast_set,
            slow_jump,
            fast_jump,
        })
        .guards(guards)
        .build()?;

    // Steady state: plant parked at its reference, heading error zero,
    // inputs (v̂, ω̂) = (0, ω_r). Timer and heading stay free.
    let mut bounded = Vec::new();
    let mut unbounded = Vec::new();
    for i in 0..n {
        let o = AGENT_DIM * i;
        bounded.extend([o + unicycle::X, o + unicycle::Y, o + unicycle::THETA_E, o + unicycle::V_HAT, o + unicycle::W_HAT]);
        unbounded.extend([o + unicycle::TIMER, o + unicycle::THETA]);
    }
    let decomposition = TimescaleDecomposition::new(n1, AGENT_DIM * n, eps, bounded, unbounded)?;
    let omega_r: Vec<T> = uni.iter().map(|u| T::lit(u.omega_r)).collect();
    let steady_state = SteadyStateMap::new(move |x1: &[T]| {
        let mut h = Vec::with_capacity(5 * n);
        for i in 0..n {
            h.extend([x1[l.u(i)], x1[l.u(i) + 1], T::zero(), T::zero(), omega_r[i]]);
        }
        h
    });

    // Attractor: u = u*, filters/oscillators/timers in their boxes, plants at
    // u* with zero heading error; timers, heading and inputs free.
    let (mut alo, mut ahi) = (lo, hi);
    for i in 0..n {
        for k in 0..2 {
            let v = T::lit(nash.u_star[2 * i + k]);
            alo[l.u(i) + k] = v;
            ahi[l.u(i) + k] = v;
            alo[n1 + AGENT_DIM * i + k] = v;
            ahi[n1 + AGENT_DIM * i + k] = v;
        }
        alo[n1 + AGENT_DIM * i + unicycle::THETA_E] = T::zero();
        ahi[n1 + AGENT_DIM * i + unicycle::THETA_E] = T::zero();
    }
    let slow_attractor = SetDescriptor::boxed(alo[..n1].to_vec(), ahi[..n1].to_vec());
    let attractor = SetDescriptor::boxed(alo, ahi);

    Ok(FullSystem {
        perturbed: PerturbedSystem {
            system,
            decomposition,
            steady_state,
            attractor,
            slow_attractor,
        },
        layout: l,
        nash,
        unicycles: uni,
    })
}
