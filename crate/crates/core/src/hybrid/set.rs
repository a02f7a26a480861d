//! Set descriptors: membership, Euclidean distance and (where available)
//! projection for the flow sets, jump sets and attractors used throughout.

use std::fmt;
use std::sync::Arc;

use crate::scalar::{dist, norm, Scalar};

pub type MembershipFn<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;
pub type DistanceFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type ProjectionFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Default membership tolerance for sets built by this crate.
pub const DEFAULT_SET_TOL: f64 = 1e-9;

/// Number of alternating-projection sweeps used for intersections.
const DYKSTRA_SWEEPS: usize = 200;

#[derive(Clone)]
enum Shape<T> {
    /// Axis-aligned box, bounds may be infinite.
    Box { lo: Vec<T>, hi: Vec<T> },
    Empty,
    Union(Vec<SetDescriptor<T>>),
    Custom {
        membership: MembershipFn<T>,
        distance: DistanceFn<T>,
        projection: Option<ProjectionFn<T>>,
    },
}

/// A subset of the state space described by membership, distance and an
/// optional nearest-point projection.
///
/// Boxes and unions of boxes have exact distances. Custom sets carry
/// whatever distance the caller supplies.
#[derive(Clone)]
pub struct SetDescriptor<T> {
    shape: Shape<T>,
    tolerance: T,
}

impl<T: Scalar> fmt::Debug for SetDescriptor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.shape {
            Shape::Box { lo, hi } => format!("Box({lo:?}, {hi:?})"),
            Shape::Empty => "Empty".into(),
            Shape::Union(parts) => format!("Union({} parts)", parts.len()),
            Shape::Custom { .. } => "Custom".into(),
        };
        write!(f, "SetDescriptor {{ {kind}, tol: {} }}", self.tolerance)
    }
}

impl<T: Scalar> SetDescriptor<T> {
    /// Box `[lo, hi]`; infinite bounds are allowed.
    pub fn boxed(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must have equal length");
        Self {
            shape: Shape::Box { lo, hi },
            tolerance: T::lit(DEFAULT_SET_TOL),
        }
    }

    pub fn everything(dim: usize) -> Self {
        Self::boxed(vec![T::neg_infinity(); dim], vec![T::infinity(); dim])
    }

    pub fn point(p: Vec<T>) -> Self {
        Self::boxed(p.clone(), p)
    }

    pub fn empty() -> Self {
        Self {
            shape: Shape::Empty,
            tolerance: T::lit(DEFAULT_SET_TOL),
        }
    }

    pub fn union(parts: Vec<SetDescriptor<T>>) -> Self {
        let tolerance = parts
            .iter()
            .map(|p| p.tolerance)
            .fold(T::lit(DEFAULT_SET_TOL), T::max);
        Self {
            shape: Shape::Union(parts),
            tolerance,
        }
    }

    pub fn custom(
        membership: impl Fn(&[T]) -> bool + Send + Sync + 'static,
        distance: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            shape: Shape::Custom {
                membership: Arc::new(membership),
                distance: Arc::new(distance),
                projection: None,
            },
            tolerance: T::lit(DEFAULT_SET_TOL),
        }
    }

    /// Custom set whose membership is `distance(x) <= tolerance`.
    pub fn from_distance(distance: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        let distance: DistanceFn<T> = Arc::new(distance);
        let d = distance.clone();
        let tol = T::lit(DEFAULT_SET_TOL);
        Self {
            shape: Shape::Custom {
                membership: Arc::new(move |x| d(x) <= tol),
                distance,
                projection: None,
            },
            tolerance: tol,
        }
    }

    /// Attaches a nearest-point projection to a custom set.
    pub fn with_projection(mut self, p: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        if let Shape::Custom { projection, .. } = &mut self.shape {
            *projection = Some(Arc::new(p));
        }
        self
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        if let Shape::Union(parts) = &mut self.shape {
            for p in parts {
                p.tolerance = tolerance;
            }
        }
        self
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    pub fn box_bounds(&self) -> Option<(&[T], &[T])> {
        match &self.shape {
            Shape::Box { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }

    pub fn is_empty_set(&self) -> bool {
        matches!(self.shape, Shape::Empty)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match &self.shape {
            Shape::Box { .. } => self.distance(x) <= self.tolerance,
            Shape::Empty => false,
            Shape::Union(parts) => parts.iter().any(|p| p.contains(x)),
            Shape::Custom { membership, .. } => membership(x),
        }
    }

    /// Euclidean distance from `x` to the set (`+inf` for the empty set).
    pub fn distance(&self, x: &[T]) -> T {
        match &self.shape {
            Shape::Box { lo, hi } => {
                debug_assert_eq!(x.len(), lo.len());
                let mut acc = T::zero();
                for ((&xi, &l), &h) in x.iter().zip(lo).zip(hi) {
                    let e = if xi < l {
                        l - xi
                    } else if xi > h {
                        xi - h
                    } else {
                        T::zero()
                    };
                    acc += e * e;
                }
                acc.sqrt()
            }
            Shape::Empty => T::infinity(),
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.distance(x))
                .fold(T::infinity(), T::min),
            Shape::Custom { distance, .. } => distance(x),
        }
    }

    /// Nearest point of the set, when the shape supports projection.
    pub fn project(&self, x: &[T]) -> Option<Vec<T>> {
        match &self.shape {
            Shape::Box { lo, hi } => Some(
                x.iter()
                    .zip(lo)
                    .zip(hi)
                    .map(|((&xi, &l), &h)| xi.max(l).min(h))
                    .collect(),
            ),
            Shape::Empty => None,
            Shape::Union(parts) => {
                let mut best: Option<(T, Vec<T>)> = None;
                for p in parts {
                    let q = p.project(x)?;
                    let d = dist(x, &q);
                    if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, q));
                    }
                }
                best.map(|(_, q)| q)
            }
            Shape::Custom { projection, .. } => projection.as_ref().map(|p| p(x)),
        }
    }

    pub fn has_projection(&self) -> bool {
        match &self.shape {
            Shape::Box { .. } => true,
            Shape::Empty => false,
            Shape::Union(parts) => parts.iter().all(|p| p.has_projection()),
            Shape::Custom { projection, .. } => projection.is_some(),
        }
    }

    /// `self + rho * B`. Distance and projection are exact for convex sets
    /// with an exact projection.
    pub fn inflate(&self, rho: T) -> Self {
        let base = self.clone();
        let base_d = self.clone();
        let tol = self.tolerance;
        let mut out = Self::custom(
            move |x| base.distance(x) <= rho + tol,
            move |x| (base_d.distance(x) - rho).max(T::zero()),
        )
        .with_tolerance(tol);
        if self.has_projection() {
            let base = self.clone();
            out = out.with_projection(move |x| {
                let p = base.project(x).expect("projection available");
                let d = dist(x, &p);
                if d <= rho {
                    x.to_vec()
                } else {
                    let s = rho / d;
                    p.iter().zip(x).map(|(&pi, &xi)| pi + (xi - pi) * s).collect()
                }
            });
        }
        out
    }

    /// Intersection. The reported distance is `max(d_a, d_b)`, a lower bound
    /// on the true distance; projection (when both sides project) runs
    /// Dykstra's alternating projections.
    pub fn intersect(&self, other: &SetDescriptor<T>) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let tol = self.tolerance.max(other.tolerance);
        let mut out = Self::custom(
            move |x| a.contains(x) && b.contains(x),
            move |x| a2.distance(x).max(b2.distance(x)),
        )
        .with_tolerance(tol);
        if self.has_projection() && other.has_projection() {
            let (a, b) = (self.clone(), other.clone());
            out = out.with_projection(move |x| dykstra(&a, &b, x));
        }
        out
    }
}

fn dykstra<T: Scalar>(a: &SetDescriptor<T>, b: &SetDescriptor<T>, x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut y = x.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    for _ in 0..DYKSTRA_SWEEPS {
        let shifted: Vec<T> = y.iter().zip(&p).map(|(&yi, &pi)| yi + pi).collect();
        let ya = a.project(&shifted).expect("projection available");
        for i in 0..n {
            p[i] = shifted[i] - ya[i];
        }
        let shifted: Vec<T> = ya.iter().zip(&q).map(|(&yi, &qi)| yi + qi).collect();
        let yb = b.project(&shifted).expect("projection available");
        for i in 0..n {
            q[i] = shifted[i] - yb[i];
        }
        let change = dist(&yb, &y);
        y = yb;
        if change <= T::epsilon() * (T::one() + norm(&y)) {
            break;
        }
    }
    y
}
