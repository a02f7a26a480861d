//! Classification of jumps by the length of the flow interval before them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{Block, HybridArc};
use crate::scalar::Scalar;

/// Slack on the `interval >= tau` comparison for accumulated rounding in
/// jump times.
pub const REGULARITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityVariant {
    /// Every jump, measured against the flow interval since the previous one.
    AllJumps,
    /// Slow-block jumps only, measured since the previous slow jump.
    SlowJumpsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpLabel {
    Regular,
    Irregular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledJump {
    pub t: f64,
    pub j: usize,
    pub interval: f64,
    pub label: JumpLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRegularityReport {
    pub tau: f64,
    pub variant: RegularityVariant,
    /// Number of classified jumps.
    pub n_jumps: usize,
    pub n_irregular: usize,
    pub last_irregular_t: Option<f64>,
    pub labels: Vec<LabeledJump>,
}

impl JumpRegularityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Labels jumps as regular when the preceding flow interval is at least
/// `tau`. The first interval is measured from the start of the arc.
pub fn classify_jumps<T: Scalar>(
    arc: &HybridArc<T>,
    tau: T,
    variant: RegularityVariant,
) -> Result<JumpRegularityReport> {
    if !(tau > T::zero()) {
        return Err(Error::Param(format!("tau must be positive, got {tau}")));
    }
    let tau = tau.to_f64_lossy();
    let start = arc.first().map_or(0.0, |s| s.time.t.to_f64_lossy());
    let times: Vec<(f64, usize)> = match variant {
        RegularityVariant::AllJumps => arc.jumps().map(|jv| (jv.t.to_f64_lossy(), jv.j)).collect(),
        RegularityVariant::SlowJumpsOnly => {
            let mut out = Vec::new();
            for jv in arc.jumps() {
                match jv.tag.and_then(|t| t.block) {
                    None => return Err(Error::MissingTags),
                    Some(Block::Slow) => out.push((jv.t.to_f64_lossy(), jv.j)),
                    Some(Block::Fast) => {}
                }
            }
            out
        }
    };
    let mut labels = Vec::with_capacity(times.len());
    let mut prev = start;
    for (t, j) in times {
        let interval = t - prev;
        let label = if interval >= tau - REGULARITY_SLACK {
            JumpLabel::Regular
        } else {
            JumpLabel::Irregular
        };
        labels.push(LabeledJump { t, j, interval, label });
        prev = t;
    }
    let irregular: Vec<&LabeledJump> = labels.iter().filter(|l| l.label == JumpLabel::Irregular).collect();
    Ok(JumpRegularityReport {
        tau,
        variant,
        n_jumps: labels.len(),
        n_irregular: irregular.len(),
        last_irregular_t: irregular.last().map(|l| l.t),
        labels,
    })
}
