use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::set::SetDescriptor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flow map selection; writes `f(x)` into the output slice.
pub type FlowFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;
/// Jump map selection; returns the post-jump state (or block) and a tag.
pub type JumpFn<T> = Arc<dyn Fn(&[T]) -> Result<Jumped<T>> + Send + Sync>;
pub type GuardFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Which timescale block a jump or guard belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Slow,
    Fast,
}

/// Identifies which state block jumped.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JumpTag {
    pub name: Arc<str>,
    pub block: Option<Block>,
}

impl JumpTag {
    pub fn new(name: &str, block: Option<Block>) -> Self {
        Self {
            name: Arc::from(name),
            block,
        }
    }

    pub fn slow(name: &str) -> Self {
        Self::new(name, Some(Block::Slow))
    }

    pub fn fast(name: &str) -> Self {
        Self::new(name, Some(Block::Fast))
    }
}

impl fmt::Display for JumpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jumped<T> {
    pub state: Vec<T>,
    pub tag: Option<JumpTag>,
}

impl<T> Jumped<T> {
    pub fn untagged(state: Vec<T>) -> Self {
        Self { state, tag: None }
    }

    pub fn tagged(state: Vec<T>, tag: JumpTag) -> Self {
        Self {
            state,
            tag: Some(tag),
        }
    }
}

/// Scalar function whose zero upcrossing marks entry into the jump set.
#[derive(Clone)]
pub struct Guard<T> {
    pub name: String,
    pub block: Option<Block>,
    func: GuardFn<T>,
}

impl<T: Scalar> Guard<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            block: None,
            func: Arc::new(f),
        }
    }

    pub fn in_block(mut self, block: Block) -> Self {
        self.block = Some(block);
        self
    }

    /// `x[index] - level`, the usual timer guard.
    pub fn threshold(name: impl Into<String>, index: usize, level: T) -> Self {
        Self::new(name, move |x: &[T]| x[index] - level)
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.func)(x)
    }
}

/// Block-structured jumps: the slow block jumps with the fast block held,
/// or the fast block jumps with the slow block held.
#[derive(Clone)]
pub struct JumpBlocks<T> {
    /// Slow dimension; slow coordinates are `x[..n1]`.
    pub n1: usize,
    /// Slow jump set, over slow coordinates.
    pub slow_set: SetDescriptor<T>,
    /// Fast jump set, over fast coordinates.
    pub fast_set: SetDescriptor<T>,
    /// Maps the full state to the new slow block.
    pub slow_jump: JumpFn<T>,
    /// Maps the full state to the new fast block.
    pub fast_jump: JumpFn<T>,
}

/// Hybrid system with single-valued flow and jump selections.
#[derive(Clone)]
pub struct HybridSystem<T> {
    dim: usize,
    labels: Vec<String>,
    flow: FlowFn<T>,
    jump: JumpFn<T>,
    flow_set: SetDescriptor<T>,
    jump_set: SetDescriptor<T>,
    guards: Vec<Guard<T>>,
    blocks: Option<JumpBlocks<T>>,
}

impl<T: Scalar> fmt::Debug for HybridSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridSystem")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .field("flow_set", &self.flow_set)
            .field("jump_set", &self.jump_set)
            .field("guards", &self.guards.iter().map(|g| &g.name).collect::<Vec<_>>())
            .field("block_jumps", &self.blocks.is_some())
            .finish()
    }
}

impl<T: Scalar> HybridSystem<T> {
    pub fn builder(dim: usize) -> HybridSystemBuilder<T> {
        HybridSystemBuilder {
            dim,
            labels: None,
            flow: None,
            jump: None,
            flow_set: None,
            jump_set: None,
            guards: Vec::new(),
            blocks: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn flow_set(&self) -> &SetDescriptor<T> {
        &self.flow_set
    }

    pub fn jump_set(&self) -> &SetDescriptor<T> {
        &self.jump_set
    }

    pub fn guards(&self) -> &[Guard<T>] {
        &self.guards
    }

    pub fn blocks(&self) -> Option<&JumpBlocks<T>> {
        self.blocks.as_ref()
    }

    pub(crate) fn flow_fn(&self) -> &FlowFn<T> {
        &self.flow
    }

    /// Evaluates the flow map.
    pub fn flow(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        (self.flow)(x, &mut out);
        out
    }

    pub fn flow_into(&self, x: &[T], out: &mut [T]) {
        (self.flow)(x, out)
    }

    /// Evaluates the jump map without any set check.
    pub fn jump(&self, x: &[T]) -> Result<Jumped<T>> {
        (self.jump)(x)
    }
}

pub struct HybridSystemBuilder<T> {
    dim: usize,
    labels: Option<Vec<String>>,
    flow: Option<FlowFn<T>>,
    jump: Option<JumpFn<T>>,
    flow_set: Option<SetDescriptor<T>>,
    jump_set: Option<SetDescriptor<T>>,
    guards: Vec<Guard<T>>,
    blocks: Option<JumpBlocks<T>>,
}

impl<T: Scalar> HybridSystemBuilder<T> {
    pub fn labels<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.labels = Some(labels.into_iter().map(Into::into).collect());
        self
    }

    pub fn flow(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.flow = Some(Arc::new(f));
        self
    }

    pub fn flow_arc(mut self, f: FlowFn<T>) -> Self {
        self.flow = Some(f);
        self
    }

    /// Untagged single-valued jump map.
    pub fn jump(mut self, g: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.jump = Some(Arc::new(move |x| Ok(Jumped::untagged(g(x)))));
        self
    }

    /// Jump map that reports its own tag and may fail.
    pub fn jump_tagged(mut self, g: impl Fn(&[T]) -> Result<Jumped<T>> + Send + Sync + 'static) -> Self {
        self.jump = Some(Arc::new(g));
        self
    }

    pub fn jump_arc(mut self, g: JumpFn<T>) -> Self {
        self.jump = Some(g);
        self
    }

    pub fn flow_set(mut self, s: SetDescriptor<T>) -> Self {
        self.flow_set = Some(s);
        self
    }

    pub fn jump_set(mut self, s: SetDescriptor<T>) -> Self {
        self.jump_set = Some(s);
        self
    }

    pub fn guard(mut self, g: Guard<T>) -> Self {
        self.guards.push(g);
        self
    }

    pub fn guards(mut self, gs: impl IntoIterator<Item = Guard<T>>) -> Self {
        self.guards.extend(gs);
        self
    }

    /// Installs block-structured jumps. The jump map and jump set are
    /// derived: slow jumps take precedence when both blocks are in their
    /// jump sets, the remaining jump follows on the next iteration.
    pub fn block_jumps(mut self, blocks: JumpBlocks<T>) -> Self {
        let n1 = blocks.n1;
        let (s1, s2) = (blocks.slow_set.clone(), blocks.fast_set.clone());
        let (g1, g2) = (blocks.slow_jump.clone(), blocks.fast_jump.clone());
        self.jump = Some(Arc::new(move |x: &[T]| {
            if s1.contains(&x[..n1]) {
                let j = g1(x)?;
                let mut state = j.state;
                state.extend_from_slice(&x[n1..]);
                Ok(Jumped { state, tag: j.tag })
            } else if s2.contains(&x[n1..]) {
                let j = g2(x)?;
                let mut state = x[..n1].to_vec();
                state.extend_from_slice(&j.state);
                Ok(Jumped { state, tag: j.tag })
            } else {
                Err(Error::Domain("state outside both jump blocks".into()))
            }
        }));
        let (s1, s2) = (blocks.slow_set.clone(), blocks.fast_set.clone());
        let (d1, d2) = (blocks.slow_set.clone(), blocks.fast_set.clone());
        let tol = s1.tolerance().max(s2.tolerance());
        self.jump_set = Some(
            SetDescriptor::custom(
                move |x| s1.contains(&x[..n1]) || s2.contains(&x[n1..]),
                move |x| d1.distance(&x[..n1]).min(d2.distance(&x[n1..])),
            )
            .with_tolerance(tol),
        );
        self.blocks = Some(blocks);
        self
    }

    pub fn build(self) -> Result<HybridSystem<T>> {
        let dim = self.dim;
        if dim == 0 {
            return Err(Error::Structure("system dimension must be positive".into()));
        }
        let labels = self
            .labels
            .unwrap_or_else(|| (0..dim).map(|i| format!("x{i}")).collect());
        if labels.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: labels.len(),
            });
        }
        if let Some((lo, _)) = self.flow_set.as_ref().and_then(|s| s.box_bounds()) {
            if lo.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: lo.len(),
                });
            }
        }
        if let Some(b) = &self.blocks {
            if b.n1 > dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: b.n1,
                });
            }
        }
        let flow = self
            .flow
            .ok_or_else(|| Error::Structure("flow map missing".into()))?;
        let jump_set = self.jump_set.unwrap_or_else(SetDescriptor::empty);
        let jump = match self.jump {
            Some(j) => j,
            None if jump_set.is_empty_set() => Arc::new(|x: &[T]| Ok(Jumped::untagged(x.to_vec()))),
            None => return Err(Error::Structure("jump set given without a jump map".into())),
        };
        Ok(HybridSystem {
            dim,
            labels,
            flow,
            jump,
            flow_set: self.flow_set.unwrap_or_else(|| SetDescriptor::everything(dim)),
            jump_set,
            guards: self.guards,
            blocks: self.blocks,
        })
    }
}
