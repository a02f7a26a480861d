//! Slow/fast split of the state and the steady-state map of the fast block.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hybrid::HybridSystem;
use crate::scalar::{norm, Scalar};

/// Partition of the state into a slow block `x[..n1]` and a fast block
/// `x[n1..]`. Fast indices are relative to the fast block; the bounded ones
/// carry the steady-state values, the unbounded ones are left free.
#[derive(Clone, Debug, PartialEq)]
pub struct TimescaleDecomposition<T> {
    pub n1: usize,
    pub n2: usize,
    pub epsilon: T,
    pub fast_bounded: Vec<usize>,
    pub fast_unbounded: Vec<usize>,
}

impl<T: Scalar> TimescaleDecomposition<T> {
    pub fn new(
        n1: usize,
        n2: usize,
        epsilon: T,
        fast_bounded: Vec<usize>,
        fast_unbounded: Vec<usize>,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::Param(format!("epsilon must be positive, got {epsilon}")));
        }
        let mut seen = vec![false; n2];
        for &i in fast_bounded.iter().chain(&fast_unbounded) {
            if i >= n2 {
                return Err(Error::Structure(format!("fast index {i} outside block of size {n2}")));
            }
            if seen[i] {
                return Err(Error::Structure(format!("fast index {i} listed twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Structure(
                "bounded and unbounded fast indices must cover the fast block".into(),
            ));
        }
        Ok(Self {
            n1,
            n2,
            epsilon,
            fast_bounded,
            fast_unbounded,
        })
    }

    /// Decomposition whose fast block is entirely bounded.
    pub fn all_bounded(n1: usize, n2: usize, epsilon: T) -> Result<Self> {
        Self::new(n1, n2, epsilon, (0..n2).collect(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn check_system(&self, sys: &HybridSystem<T>) -> Result<()> {
        if sys.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: sys.dim(),
            });
        }
        Ok(())
    }

    pub fn slow<'a>(&self, x: &'a [T]) -> &'a [T] {
        &x[..self.n1]
    }

    pub fn fast<'a>(&self, x: &'a [T]) -> &'a [T] {
        &x[self.n1..]
    }

    /// Bounded fast coordinates `x2'` of a full state.
    pub fn fast_bounded_of(&self, x: &[T]) -> Vec<T> {
        self.fast_bounded.iter().map(|&i| x[self.n1 + i]).collect()
    }
}

pub type SteadyStateFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Steady-state map `H(x1) = {h1(x1)} x X2''`.
///
/// `h1` returns the bounded fast coordinates in the order of
/// `fast_bounded`. `fill` supplies representative values for the unbounded
/// coordinates when a full state has to be assembled.
#[derive(Clone)]
pub struct SteadyStateMap<T> {
    h1: SteadyStateFn<T>,
    fill: Vec<T>,
    tolerance: T,
}

impl<T: Scalar> fmt::Debug for SteadyStateMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SteadyStateMap")
            .field("fill", &self.fill)
            .field("tolerance", &self.tolerance)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SteadyStateMap<T> {
    pub fn new(h1: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            h1: Arc::new(h1),
            fill: Vec::new(),
            tolerance: T::lit(1e-9),
        }
    }

    /// Values used for the unbounded fast coordinates, in the order of
    /// `fast_unbounded`. Missing entries default to zero.
    pub fn with_fill(mut self, fill: Vec<T>) -> Self {
        self.fill = fill;
        self
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn h1(&self, x1: &[T]) -> Vec<T> {
        (self.h1)(x1)
    }

    /// Full state `(x1, h1(x1), fill)`.
    pub fn embed(&self, dec: &TimescaleDecomposition<T>, x1: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); dec.dim()];
        x[..dec.n1].copy_from_slice(x1);
        let h = self.h1(x1);
        for (&i, &v) in dec.fast_bounded.iter().zip(&h) {
            x[dec.n1 + i] = v;
        }
        for (k, &i) in dec.fast_unbounded.iter().enumerate() {
            x[dec.n1 + i] = self.fill.get(k).copied().unwrap_or_else(T::zero);
        }
        x
    }

    /// `x2 ∈ H(x1)` for a full state `x`, within the map's tolerance.
    pub fn contains(&self, dec: &TimescaleDecomposition<T>, x: &[T]) -> bool {
        self.fiber_distance(dec, x) <= self.tolerance
    }

    /// `|x2' - h1(x1)|`: distance of the fast block to the steady state
    /// over the same slow state.
    pub fn fiber_distance(&self, dec: &TimescaleDecomposition<T>, x: &[T]) -> T {
        let h = self.h1(dec.slow(x));
        let diff: Vec<T> = dec
            .fast_bounded
            .iter()
            .zip(&h)
            .map(|(&i, &v)| x[dec.n1 + i] - v)
            .collect();
        norm(&diff)
    }

    pub fn check(&self, dec: &TimescaleDecomposition<T>, probe: &[T]) -> Result<()> {
        let h = self.h1(&probe[..dec.n1]);
        if h.len() != dec.fast_bounded.len() {
            return Err(Error::Dimension {
                expected: dec.fast_bounded.len(),
                got: h.len(),
            });
        }
        if self.fill.len() > dec.fast_unbounded.len() {
            return Err(Error::Dimension {
                expected: dec.fast_unbounded.len(),
                got: self.fill.len(),
            });
        }
        Ok(())
    }
}

/// Norm of the bounded fast components of `eps * F(x1, h1(x1), fill)`:
/// zero when `h1(x1)` is an equilibrium of the boundary layer.
pub fn steady_state_residual<T: Scalar>(
    sys: &HybridSystem<T>,
    dec: &TimescaleDecomposition<T>,
    h: &SteadyStateMap<T>,
    x1: &[T],
) -> T {
    let x = h.embed(dec, x1);
    let f = sys.flow(&x);
    let comps: Vec<T> = dec
        .fast_bounded
        .iter()
        .map(|&i| f[dec.n1 + i] * dec.epsilon)
        .collect();
    norm(&comps)
}
