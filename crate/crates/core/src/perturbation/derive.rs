//! Boundary-layer and reduced systems of a two-timescale hybrid system.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::decomposition::{SteadyStateMap, TimescaleDecomposition};
use crate::error::{Error, Result};
use crate::hybrid::{Block, Guard, HybridSystem, Jumped, SetDescriptor};
use crate::scalar::Scalar;

/// Which boundary layer to derive: the jump-free one of the basic form,
/// or the one that keeps the fast-block jumps of the block form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerVariant {
    H1,
    H2,
}

/// Boundary-layer system: slow states frozen, fast flow without the `1/ε`
/// factor, flow set restricted to slow states within `rho` of `attractor`
/// (a set over the slow coordinates).
///
/// With [`LayerVariant::H2`] the fast-block jumps `x+ = (x1, G2(x))` on
/// `X1 x D2` and the fast guards are kept; this needs a system built with
/// block jumps.
pub fn make_boundary_layer<T: Scalar>(
    sys: &HybridSystem<T>,
    dec: &TimescaleDecomposition<T>,
    attractor: &SetDescriptor<T>,
    rho: T,
    variant: LayerVariant,
) -> Result<HybridSystem<T>> {
    dec.check_system(sys)?;
    if !(rho > T::zero()) {
        return Err(Error::Param(format!("rho must be positive, got {rho}")));
    }
    let n1 = dec.n1;
    let eps = dec.epsilon;
    let full = sys.clone();
    let flow = move |x: &[T], dx: &mut [T]| {
        full.flow_into(x, dx);
        for v in &mut dx[..n1] {
            *v = T::zero();
        }
        for v in &mut dx[n1..] {
            *v *= eps;
        }
    };

    let near = attractor.inflate(rho);
    let near_d = near.clone();
    let slow_ball = SetDescriptor::custom(
        move |x: &[T]| near.contains(&x[..n1]),
        move |x: &[T]| near_d.distance(&x[..n1]),
    );
    let flow_set = sys.flow_set().intersect(&slow_ball);

    let builder = HybridSystem::builder(sys.dim())
        .labels(sys.labels().to_vec())
        .flow(flow)
        .flow_set(flow_set);

    match variant {
        LayerVariant::H1 => builder.build(),
        LayerVariant::H2 => {
            let blocks = sys.blocks().ok_or_else(|| {
                Error::Structure("the H2 boundary layer needs a system with block jumps".into())
            })?;
            if blocks.n1 != n1 {
                return Err(Error::Dimension {
                    expected: n1,
                    got: blocks.n1,
                });
            }
            let (d2, d2_dist) = (blocks.fast_set.clone(), blocks.fast_set.clone());
            let g2 = blocks.fast_jump.clone();
            let tol = d2.tolerance();
            let jump_set = SetDescriptor::custom(
                move |x: &[T]| d2.contains(&x[n1..]),
                move |x: &[T]| d2_dist.distance(&x[n1..]),
            )
            .with_tolerance(tol);
            let guards = sys
                .guards()
                .iter()
                .filter(|g| g.block == Some(Block::Fast))
                .cloned();
            builder
                .jump_tagged(move |x: &[T]| {
                    let j = g2(x)?;
                    let mut state = x[..n1].to_vec();
                    state.extend_from_slice(&j.state);
                    Ok(Jumped { state, tag: j.tag })
                })
                .jump_set(jump_set)
                .guards(guards)
                .build()
        }
    }
}

/// Reduced system on the slow coordinates: flow and jumps are the slow
/// components of the full maps evaluated at `(x1, h1(x1), fill)`.
///
/// For systems with block jumps the reduced jump is `G1` on `D1`;
/// otherwise the full jump set is pulled back through the embedding. Flow
/// sets are always pulled back. Guards not tagged as fast are composed
/// with the embedding.
pub fn make_reduced<T: Scalar>(
    sys: &HybridSystem<T>,
    dec: &TimescaleDecomposition<T>,
    h: &SteadyStateMap<T>,
) -> Result<HybridSystem<T>> {
    dec.check_system(sys)?;
    let n1 = dec.n1;
    if n1 == 0 {
        return Err(Error::Structure("reduced system needs a nonempty slow block".into()));
    }
    let probe = h.embed(dec, &vec![T::zero(); n1]);
    h.check(dec, &probe)?;

    let embed = {
        let (h, dec) = (h.clone(), dec.clone());
        Arc::new(move |x1: &[T]| h.embed(&dec, x1))
    };

    let (full, e) = (sys.clone(), embed.clone());
    let flow = move |x1: &[T], dx: &mut [T]| {
        let f = full.flow(&e(x1));
        dx.copy_from_slice(&f[..n1]);
    };

    let flow_set = pull_back(sys.flow_set(), embed.clone());
    let mut builder = HybridSystem::builder(n1)
        .labels(sys.labels()[..n1].to_vec())
        .flow(flow)
        .flow_set(flow_set);

    if let Some(blocks) = sys.blocks() {
        let g1 = blocks.slow_jump.clone();
        let e = embed.clone();
        builder = builder
            .jump_tagged(move |x1: &[T]| g1(&e(x1)))
            .jump_set(blocks.slow_set.clone());
    } else if !sys.jump_set().is_empty_set() {
        let (full, e) = (sys.clone(), embed.clone());
        builder = builder
            .jump_tagged(move |x1: &[T]| {
                let j = full.jump(&e(x1))?;
                Ok(Jumped {
                    state: j.state[..n1].to_vec(),
                    tag: j.tag,
                })
            })
            .jump_set(pull_back(sys.jump_set(), embed.clone()));
    }

    let guards = sys
        .guards()
        .iter()
        .filter(|g| g.block != Some(Block::Fast))
        .map(|g| {
            let (g2, e) = (g.clone(), embed.clone());
            let mut out = Guard::new(g.name.clone(), move |x1: &[T]| g2.eval(&e(x1)));
            out.block = g.block;
            out
        })
        .collect::<Vec<_>>();
    builder.guards(guards).build()
}

fn pull_back<T: Scalar>(
    set: &SetDescriptor<T>,
    embed: Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>,
) -> SetDescriptor<T> {
    let (s, s2) = (set.clone(), set.clone());
    let e2 = embed.clone();
    SetDescriptor::custom(move |x1: &[T]| s.contains(&embed(x1)), move |x1: &[T]| s2.distance(&e2(x1)))
        .with_tolerance(set.tolerance())
}
