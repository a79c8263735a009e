//! Typed reward signals: the tool-outcome rubric, a bounded engagement
//! signal, literacy-conditioned composition and the early-turn
//! information-gain (curiosity) bonus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Level, ToolChoice, ToolOutcome, TurnFeatures};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("tool outcome {outcome:?} is inconsistent with tool {tool:?}")]
    InconsistentOutcome { tool: ToolChoice, outcome: ToolOutcome },

    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),
}

/// Rubric value of a tool outcome: +1 success, -1 failure, 0 when no tool
/// was invoked.
pub fn tool_reward(tool: ToolChoice, outcome: ToolOutcome) -> Result<f64, RewardError> {
    if !outcome.consistent_with(tool) {
        return Err(RewardError::InconsistentOutcome { tool, outcome });
    }
    Ok(match outcome {
        ToolOutcome::NotInvoked => 0.0,
        ToolOutcome::Success => 1.0,
        ToolOutcome::Failure => -1.0,
    })
}

pub const ENGAGEMENT_BOUND: f64 = 0.5;

/// Bounded engagement signal: a mild latency penalty (saturating at 45 s),
/// a structure bonus, and a citation bonus gated on a search turn.
pub fn engagement_reward(features: &TurnFeatures, tool: ToolChoice) -> f64 {
    engagement_from_parts(
        features.latency_seconds,
        features.has_structure,
        features.has_citation,
        tool,
    )
}

pub fn engagement_from_parts(latency: f64, structure: bool, citation: bool, tool: ToolChoice) -> f64 {
    let latency_term = -0.2 * (latency.max(0.0) / 30.0).min(1.5);
    let structure_term = if structure { 0.2 } else { 0.0 };
    let evidence_term = if citation && tool == ToolChoice::Search {
        0.2
    } else {
        0.0
    };
    (latency_term + structure_term + evidence_term).clamp(-ENGAGEMENT_BOUND, ENGAGEMENT_BOUND)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_user: f64,
    pub r_tool: f64,
    pub r_eng: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl WeightTriple {
    pub const LOW_LITERACY: WeightTriple = WeightTriple {
        alpha: 0.6,
        beta: 0.2,
        gamma: 0.2,
    };
    pub const HIGH_LITERACY: WeightTriple = WeightTriple {
        alpha: 0.3,
        beta: 0.5,
        gamma: 0.2,
    };
    pub const ZERO: WeightTriple = WeightTriple {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn is_valid(&self) -> bool {
        [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// Literacy-conditioned weight presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiteracyWeights {
    pub low_literacy: WeightTriple,
    pub high_literacy: WeightTriple,
}

impl Default for LiteracyWeights {
    fn default() -> Self {
        Self {
            low_literacy: WeightTriple::LOW_LITERACY,
            high_literacy: WeightTriple::HIGH_LITERACY,
        }
    }
}

impl LiteracyWeights {
    pub fn for_literacy(&self, literacy: Level) -> WeightTriple {
        match literacy {
            Level::Low => self.low_literacy,
            Level::High => self.high_literacy,
        }
    }
}

pub fn compose_reward(weights: WeightTriple, components: RewardComponents) -> f64 {
    weights.alpha * components.r_user
        + weights.beta * components.r_tool
        + weights.gamma * components.r_eng
}

/// Belief over the four archetypes, in [`crate::model::Archetype::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypePosterior {
    probs: [f64; 4],
}

impl ArchetypePosterior {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(probs: [f64; 4]) -> Result<Self, RewardError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RewardError::InvalidPosterior(format!(
                "negative or non-finite entry in {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(RewardError::InvalidPosterior(format!("sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform() -> Self {
        Self { probs: [0.25; 4] }
    }

    pub fn point_mass(index: usize) -> Self {
        let mut probs = [0.0; 4];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64; 4] {
        &self.probs
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the most probable archetype; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..4 {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

pub fn entropy_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// `max{0, H(prev) - H(curr)}` in bits.
pub fn curiosity_bonus(prev: &ArchetypePosterior, curr: &ArchetypePosterior) -> f64 {
    (prev.entropy_bits() - curr.entropy_bits()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuriositySchedule {
    pub lambda: f64,
    pub horizon_k: u32,
}

impl Default for CuriositySchedule {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            horizon_k: 2,
        }
    }
}

impl CuriositySchedule {
    pub fn new(lambda: f64, horizon_k: u32) -> Self {
        Self { lambda, horizon_k }
    }

    pub fn off() -> Self {
        Self {
            lambda: 0.0,
            horizon_k: 0,
        }
    }

    /// Effective weight for turn `t` (1-based): hard cutoff after K.
    pub fn weight(&self, t: u32) -> f64 {
        if t >= 1 && t <= self.horizon_k {
            self.lambda
        } else {
            0.0
        }
    }

    pub fn is_active(&self) -> bool {
        self.lambda > 0.0 && self.horizon_k > 0
    }
}

pub fn total_signal(r: f64, t: u32, schedule: &CuriositySchedule, bonus: f64) -> f64 {
    r + schedule.weight(t) * bonus
}
