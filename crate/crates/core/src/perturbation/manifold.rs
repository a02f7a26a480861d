//! Distances to the boundary-layer manifold `M_rho` and to the restricted
//! attractor `M_A`.

use serde::{Deserialize, Serialize};

use super::decomposition::{SteadyStateMap, TimescaleDecomposition};
use crate::error::{Error, Result};
use crate::hybrid::{HybridArc, SetDescriptor};
use crate::scalar::{dist, Scalar};

/// Stop when a projected-gradient step moves less than this (relative).
pub const REFINEMENT_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 5_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ManifoldKind<T> {
    /// `{(x1, x2) : x1 ∈ (A + rho B), x2 ∈ H(x1)}`.
    MRho(T),
    /// `{(x1, x2) : x1 ∈ A, x2 ∈ H(x1)}`.
    MA,
}

/// Graph of the steady-state map over a slow set, with the unbounded fast
/// coordinates left free (they never contribute to the distance).
#[derive(Clone)]
pub struct ManifoldSet<T> {
    kind: ManifoldKind<T>,
    base: SetDescriptor<T>,
    dec: TimescaleDecomposition<T>,
    h: SteadyStateMap<T>,
}

impl<T: Scalar> std::fmt::Debug for ManifoldSet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManifoldSet")
            .field("kind", &self.kind)
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ManifoldSet<T> {
    /// `attractor` lives on the slow coordinates and must support projection.
    pub fn new(
        kind: ManifoldKind<T>,
        attractor: &SetDescriptor<T>,
        dec: &TimescaleDecomposition<T>,
        h: &SteadyStateMap<T>,
    ) -> Result<Self> {
        if !attractor.has_projection() {
            return Err(Error::Structure(
                "manifold distance needs an attractor with a projection".into(),
            ));
        }
        let base = match kind {
            ManifoldKind::MRho(rho) => {
                if !(rho > T::zero()) {
                    return Err(Error::Param(format!("rho must be positive, got {rho}")));
                }
                attractor.inflate(rho)
            }
            ManifoldKind::MA => attractor.clone(),
        };
        Ok(Self {
            kind,
            base,
            dec: dec.clone(),
            h: h.clone(),
        })
    }

    pub fn kind(&self) -> ManifoldKind<T> {
        self.kind
    }

    /// Euclidean distance, by projected gradient descent on
    /// `|x1 - y|^2 + |x2' - h1(y)|^2` over `y` in the slow set, started at
    /// the projection of `x1`. Exact up to the refinement tolerance when
    /// `h1` is affine; a local minimum otherwise.
    pub fn distance(&self, x: &[T]) -> T {
        let n1 = self.dec.n1;
        let x1 = &x[..n1];
        let x2 = self.dec.fast_bounded_of(x);
        let objective = |y: &[T]| -> T {
            let hy = self.h.h1(y);
            let a = dist(x1, y);
            let b = dist(&x2, &hy);
            a * a + b * b
        };

        let mut y = self.base.project(x1).expect("projection checked at construction");
        let mut phi = objective(&y);
        let tol = T::lit(REFINEMENT_TOL);
        let two = T::lit(2.0);
        for _ in 0..MAX_ITERS {
            let hy = self.h.h1(&y);
            let jac = jacobian(&self.h, &y, &hy);
            // gradient / 2 = (y - x1) + J^T (h(y) - x2')
            let mut grad: Vec<T> = y.iter().zip(x1).map(|(&a, &b)| a - b).collect();
            let mut lip = T::one();
            for (row, (&hv, &xv)) in jac.iter().zip(hy.iter().zip(&x2)) {
                let r = hv - xv;
                for (g, &jv) in grad.iter_mut().zip(row) {
                    *g += jv * r;
                    lip += jv * jv;
                }
            }
            let mut step = T::one() / lip;
            let mut moved = false;
            for _ in 0..40 {
                let trial: Vec<T> = y.iter().zip(&grad).map(|(&a, &g)| a - step * g).collect();
                let trial = self.base.project(&trial).expect("projection available");
                let phi_t = objective(&trial);
                if phi_t <= phi {
                    let change = dist(&trial, &y);
                    y = trial;
                    phi = phi_t;
                    moved = change > tol * (T::one() + crate::scalar::norm(&y));
                    break;
                }
                step /= two;
            }
            if !moved {
                break;
            }
        }
        phi.max(T::zero()).sqrt()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.distance(x) <= self.base.tolerance().max(T::lit(REFINEMENT_TOL))
    }

    pub fn as_set(&self) -> SetDescriptor<T> {
        let m = self.clone();
        let tol = self.base.tolerance().max(T::lit(REFINEMENT_TOL));
        SetDescriptor::from_distance(move |x| m.distance(x)).with_tolerance(tol)
    }
}

/// Distance from a full state to a manifold set.
pub fn manifold_distance<T: Scalar>(x: &[T], m: &ManifoldSet<T>) -> T {
    m.distance(x)
}

/// Default `rho`: the largest slow distance to `attractor` along `arc`,
/// plus 10%. Falls back to 1 on arcs that never leave the attractor.
pub fn default_rho<T: Scalar>(arc: &HybridArc<T>, dec: &TimescaleDecomposition<T>, attractor: &SetDescriptor<T>) -> T {
    let sup = arc
        .samples()
        .map(|s| attractor.distance(dec.slow(s.state)))
        .fold(T::zero(), T::max);
    if sup > T::zero() {
        sup * T::lit(1.1)
    } else {
        T::one()
    }
}

/// Central-difference Jacobian of `h1`, one row per output.
fn jacobian<T: Scalar>(h: &SteadyStateMap<T>, y: &[T], hy: &[T]) -> Vec<Vec<T>> {
    let mut jac = vec![vec![T::zero(); y.len()]; hy.len()];
    let mut probe = y.to_vec();
    let base = T::lit(1e-6);
    for k in 0..y.len() {
        let d = base * (T::one() + y[k].abs());
        probe[k] = y[k] + d;
        let hp = h.h1(&probe);
        probe[k] = y[k] - d;
        let hm = h.h1(&probe);
        probe[k] = y[k];
        for (row, (&p, &m)) in jac.iter_mut().zip(hp.iter().zip(&hm)) {
            row[k] = (p - m) / (d + d);
        }
    }
    jac
}
