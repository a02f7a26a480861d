use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::set::SetDescriptor;
use super::system::JumpTag;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hybrid time `(t, j)`: continuous time and jump count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridTime<T> {
    pub t: T,
    pub j: usize,
}

impl<T: Scalar> HybridTime<T> {
    pub fn new(t: T, j: usize) -> Self {
        Self { t, j }
    }

    /// `t + j`, the total order used within one arc.
    pub fn total(&self) -> T {
        self.t + T::from_usize(self.j).unwrap_or_else(T::infinity)
    }
}

/// Product order: comparable only when both components agree in direction.
impl<T: Scalar> PartialOrd for HybridTime<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let tc = self.t.partial_cmp(&other.t)?;
        let jc = self.j.cmp(&other.j);
        match (tc, jc) {
            (a, b) if a == b => Some(a),
            (Ordering::Equal, b) => Some(b),
            (a, Ordering::Equal) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    MaxT,
    MaxJ,
    LeftDomain,
    NumericFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Segment {
    j: usize,
    start: usize,
    end: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct JumpRecord<T> {
    t: T,
    j: usize,
    pre: usize,
    post: usize,
    tag: Option<JumpTag>,
}

/// One recorded sample of an arc.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a, T> {
    pub time: HybridTime<T>,
    pub state: &'a [T],
}

/// View of a jump: happens at `t`, takes the arc from `j - 1` to `j`.
#[derive(Clone, Copy, Debug)]
pub struct JumpView<'a, T> {
    pub t: T,
    pub j: usize,
    pub pre: &'a [T],
    pub post: &'a [T],
    pub tag: Option<&'a JumpTag>,
}

/// A solution of a hybrid system: flow segments indexed by jump count and
/// the jumps between them. States are stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridArc<T> {
    dim: usize,
    labels: Vec<String>,
    times: Vec<T>,
    states: Vec<T>,
    segments: Vec<Segment>,
    jumps: Vec<JumpRecord<T>>,
    termination: Termination,
}

impl<T: Scalar> HybridArc<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    fn state_at(&self, idx: usize) -> &[T] {
        &self.states[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'_, T>> + '_ {
        self.segments.iter().flat_map(move |seg| {
            (seg.start..seg.end).map(move |i| Sample {
                time: HybridTime::new(self.times[i], seg.j),
                state: self.state_at(i),
            })
        })
    }

    /// Samples of the segment with jump count `j`.
    pub fn segment(&self, j: usize) -> impl Iterator<Item = Sample<'_, T>> + '_ {
        self.segments.get(j).into_iter().flat_map(move |seg| {
            (seg.start..seg.end).map(move |i| Sample {
                time: HybridTime::new(self.times[i], seg.j),
                state: self.state_at(i),
            })
        })
    }

    pub fn jumps(&self) -> impl Iterator<Item = JumpView<'_, T>> + '_ {
        self.jumps.iter().map(move |r| JumpView {
            t: r.t,
            j: r.j,
            pre: self.state_at(r.pre),
            post: self.state_at(r.post),
            tag: r.tag.as_ref(),
        })
    }

    pub fn first(&self) -> Option<Sample<'_, T>> {
        self.samples().next()
    }

    pub fn last(&self) -> Option<Sample<'_, T>> {
        let seg = self.segments.last()?;
        let i = seg.end.checked_sub(1)?;
        Some(Sample {
            time: HybridTime::new(self.times[i], seg.j),
            state: self.state_at(i),
        })
    }

    pub fn final_time(&self) -> Option<HybridTime<T>> {
        self.last().map(|s| s.time)
    }

    /// Checks the hybrid-domain invariants: strictly increasing time within
    /// each segment, each segment starting where the previous one ended,
    /// and jump counts increasing by one per segment.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.j != k {
                return Err(format!("segment {k} carries jump count {}", seg.j));
            }
            if seg.end <= seg.start {
                return Err(format!("segment {k} is empty"));
            }
            for i in seg.start + 1..seg.end {
                if self.times[i] <= self.times[i - 1] {
                    return Err(format!(
                        "segment {k}: time not increasing at sample {i} ({} <= {})",
                        self.times[i],
                        self.times[i - 1]
                    ));
                }
            }
            if k > 0 {
                let prev = self.segments[k - 1];
                if self.times[seg.start] != self.times[prev.end - 1] {
                    return Err(format!("segment {k} does not start where segment {} ends", k - 1));
                }
            }
        }
        if self.jumps.len() + 1 != self.segments.len() && !self.segments.is_empty() {
            return Err(format!(
                "{} jumps for {} segments",
                self.jumps.len(),
                self.segments.len()
            ));
        }
        for (k, r) in self.jumps.iter().enumerate() {
            if r.j != k + 1 {
                return Err(format!("jump {k} records count {}", r.j));
            }
            if r.pre != self.segments[k].end - 1 || r.post != self.segments[k + 1].start {
                return Err(format!("jump {k} is not attached to segment boundaries"));
            }
        }
        Ok(())
    }
}

/// Incremental arc construction, used by the solver and for synthetic arcs.
#[derive(Debug)]
pub struct ArcBuilder<T> {
    arc: HybridArc<T>,
}

impl<T: Scalar> ArcBuilder<T> {
    pub fn new(dim: usize, labels: Vec<String>) -> Self {
        Self {
            arc: HybridArc {
                dim,
                labels,
                times: Vec::new(),
                states: Vec::new(),
                segments: Vec::new(),
                jumps: Vec::new(),
                termination: Termination::MaxT,
            },
        }
    }

    /// Builder with default labels `x0, x1, ...`.
    pub fn unlabeled(dim: usize) -> Self {
        Self::new(dim, (0..dim).map(|i| format!("x{i}")).collect())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.arc.dim {
            return Err(Error::Dimension {
                expected: self.arc.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Appends a flow sample to the current segment.
    pub fn push_sample(&mut self, t: T, x: &[T]) -> Result<()> {
        self.check_dim(x)?;
        if t < T::zero() {
            return Err(Error::Structure("negative time".into()));
        }
        match self.arc.segments.last_mut() {
            None => self.arc.segments.push(Segment {
                j: 0,
                start: 0,
                end: 1,
            }),
            Some(seg) => {
                let last_t = self.arc.times[seg.end - 1];
                if t <= last_t {
                    return Err(Error::Structure(format!(
                        "sample time {t} does not advance past {last_t}"
                    )));
                }
                seg.end += 1;
            }
        }
        self.arc.times.push(t);
        self.arc.states.extend_from_slice(x);
        Ok(())
    }

    /// Records a flow sample that may not advance time (sub-ulp event
    /// localization): such a sample overwrites the last one unless that one
    /// starts a segment, in which case it is dropped.
    pub(crate) fn push_flow_sample(&mut self, t: T, x: &[T]) -> Result<()> {
        if let (Some(seg), Some(&last_t)) = (self.arc.segments.last(), self.arc.times.last()) {
            if t <= last_t {
                let last = seg.end - 1;
                if last != seg.start {
                    let d = self.arc.dim;
                    self.arc.states[last * d..(last + 1) * d].copy_from_slice(x);
                }
                return Ok(());
            }
        }
        self.push_sample(t, x)
    }

    /// Jumps from the last recorded sample to `post`.
    pub fn push_jump(&mut self, post: &[T], tag: Option<JumpTag>) -> Result<()> {
        self.check_dim(post)?;
        let seg = *self
            .arc
            .segments
            .last()
            .ok_or_else(|| Error::Structure("jump before any sample".into()))?;
        let pre = seg.end - 1;
        let t = self.arc.times[pre];
        let post_idx = self.arc.times.len();
        self.arc.times.push(t);
        self.arc.states.extend_from_slice(post);
        self.arc.segments.push(Segment {
            j: seg.j + 1,
            start: post_idx,
            end: post_idx + 1,
        });
        self.arc.jumps.push(JumpRecord {
            t,
            j: seg.j + 1,
            pre,
            post: post_idx,
            tag,
        });
        Ok(())
    }

    pub fn current_j(&self) -> usize {
        self.arc.segments.last().map_or(0, |s| s.j)
    }

    pub fn last_time(&self) -> Option<T> {
        self.arc.times.last().copied()
    }

    pub fn finish(mut self, termination: Termination) -> HybridArc<T> {
        self.arc.termination = termination;
        self.arc
    }
}

/// Distance of every recorded sample to `set`, in arc order.
pub fn distance_series<T: Scalar>(arc: &HybridArc<T>, set: &SetDescriptor<T>) -> Vec<(HybridTime<T>, T)> {
    arc.samples().map(|s| (s.time, set.distance(s.state))).collect()
}
