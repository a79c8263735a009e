//! Flattened, featurized view of a session log.
//!
//! Response-side observables (latency, length, citation, structure) are
//! only known after the agent acts, so the decision context of turn `t`
//! uses their values from turn `t - 1`. The user's own request
//! (`user_asked_explain`) and the user strata are known before acting.

use serde::{Deserialize, Serialize};

use crate::model::{ActionPair, Archetype, Level, Session, ToolOutcome};
use crate::rewards::{engagement_reward, tool_reward, LiteracyWeights, WeightTriple};

/// Pre-decision context of one turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnContext {
    pub turn_index: u32,
    pub prev_latency_seconds: f64,
    pub prev_response_chars: f64,
    pub prev_has_citation: bool,
    pub prev_has_structure: bool,
    pub user_asked_explain: bool,
    pub literacy: Level,
    pub efficacy: Level,
    pub prev_outcome: ToolOutcome,
}

impl TurnContext {
    pub fn archetype(&self) -> Archetype {
        Archetype::new(self.literacy, self.efficacy)
    }
}

pub const FEATURE_NAMES: [&str; 10] = [
    "intercept",
    "turn_index",
    "prev_latency",
    "prev_response_chars",
    "prev_has_citation",
    "prev_has_structure",
    "user_asked_explain",
    "literacy_high",
    "efficacy_high",
    "prev_tool_outcome",
];

pub const FEATURE_DIM: usize = FEATURE_NAMES.len();

/// Fixed-order numeric encoding of a [`TurnContext`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Standardize {
    mean: f64,
    std: f64,
}

impl Standardize {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Standardization constants for the continuous context fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    turn_index: Standardize,
    latency: Standardize,
    chars: Standardize,
}

impl Featurizer {
    pub fn fit(contexts: &[TurnContext]) -> Self {
        Self {
            turn_index: Standardize::fit(contexts.iter().map(|c| f64::from(c.turn_index))),
            latency: Standardize::fit(contexts.iter().map(|c| c.prev_latency_seconds)),
            chars: Standardize::fit(contexts.iter().map(|c| c.prev_response_chars)),
        }
    }

    pub fn encode(&self, c: &TurnContext) -> FeatureVector {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        FeatureVector([
            1.0,
            self.turn_index.apply(f64::from(c.turn_index)),
            self.latency.apply(c.prev_latency_seconds),
            self.chars.apply(c.prev_response_chars),
            b(c.prev_has_citation),
            b(c.prev_has_structure),
            b(c.user_asked_explain),
            c.literacy.indicator(),
            c.efficacy.indicator(),
            c.prev_outcome.signed(),
        ])
    }
}

/// How the satisfaction reward is derived from 1-5 ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionScale {
    /// Per-user z-score over that user's rated turns.
    #[default]
    Zscore,
    /// The raw 1-5 rating.
    Raw,
}

/// One turn with everything the estimators need.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTurn {
    pub session: usize,
    pub context: TurnContext,
    pub features: FeatureVector,
    pub action: ActionPair,
    pub outcome: ToolOutcome,
    pub rated: bool,
    /// Satisfaction reward; 0 when unrated.
    pub r_user: f64,
    pub r_tool: f64,
    pub r_eng: f64,
    pub weights: WeightTriple,
}

impl FlatTurn {
    pub fn r_obj(&self) -> f64 {
        self.r_tool + self.r_eng
    }

    /// Weighted objective part of the total reward.
    pub fn r_obj_weighted(&self) -> f64 {
        self.weights.beta * self.r_tool + self.weights.gamma * self.r_eng
    }

    pub fn archetype(&self) -> Archetype {
        self.context.archetype()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatLog {
    pub turns: Vec<FlatTurn>,
    /// Turn range of each session, in session order.
    pub session_ranges: Vec<std::ops::Range<usize>>,
    pub session_archetypes: Vec<Archetype>,
    pub featurizer: Featurizer,
    /// Users with fewer than two rated turns (z-score set to 0).
    pub users_without_scale: Vec<String>,
}

impl FlatLog {
    pub fn build(sessions: &[Session], scale: SatisfactionScale, weights: &LiteracyWeights) -> Self {
        let mut contexts = Vec::new();
        for session in sessions {
            let mut prev: Option<&crate::model::LoggedTurn> = None;
            for turn in &session.turns {
                contexts.push(TurnContext {
                    turn_index: turn.features.turn_index,
                    prev_latency_seconds: prev.map_or(0.0, |p| p.features.latency_seconds),
                    prev_response_chars: prev.map_or(0.0, |p| f64::from(p.features.response_chars)),
                    prev_has_citation: prev.is_some_and(|p| p.features.has_citation),
                    prev_has_structure: prev.is_some_and(|p| p.features.has_structure),
                    user_asked_explain: turn.features.user_asked_explain,
                    literacy: session.user.literacy,
                    efficacy: session.user.efficacy,
                    prev_outcome: prev.map_or(ToolOutcome::NotInvoked, |p| p.outcome),
                });
                prev = Some(turn);
            }
        }
        let featurizer = Featurizer::fit(&contexts);

        let (user_scales, users_without_scale) = user_rating_scales(sessions);

        let mut turns = Vec::with_capacity(contexts.len());
        let mut session_ranges = Vec::with_capacity(sessions.len());
        let mut ctx_iter = contexts.into_iter();
        for (s, session) in sessions.iter().enumerate() {
            let start = turns.len();
            let scale_for_user = user_scales.get(&session.user.user_id).copied();
            for turn in &session.turns {
                let context = ctx_iter.next().expect("one context per turn");
                let r_user = match (turn.rating, scale) {
                    (None, _) => 0.0,
                    (Some(r), SatisfactionScale::Raw) => f64::from(r),
                    (Some(r), SatisfactionScale::Zscore) => match scale_for_user {
                        Some((mean, std)) => (f64::from(r) - mean) / std,
                        None => 0.0,
                    },
                };
                turns.push(FlatTurn {
                    session: s,
                    features: featurizer.encode(&context),
                    context,
                    action: turn.action,
                    outcome: turn.outcome,
                    rated: turn.rated(),
                    r_user,
                    r_tool: tool_reward(turn.action.tool, turn.outcome)
                        .expect("validated sessions have consistent outcomes"),
                    r_eng: engagement_reward(&turn.features, turn.action.tool),
                    weights: weights.for_literacy(session.user.literacy),
                });
            }
            session_ranges.push(start..turns.len());
        }
        Self {
            turns,
            session_ranges,
            session_archetypes: sessions.iter().map(Session::archetype).collect(),
            featurizer,
            users_without_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn n_sessions(&self) -> usize {
        self.session_ranges.len()
    }

    pub fn feature_rows(&self) -> Vec<&[f64]> {
        self.turns.iter().map(|t| t.features.as_slice()).collect()
    }
}

/// Mean and standard deviation of each user's ratings; users with fewer
/// than two rated turns, or with zero spread, are listed separately.
fn user_rating_scales(
    sessions: &[Session],
) -> (std::collections::BTreeMap<String, (f64, f64)>, Vec<String>) {
    let mut ratings: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for session in sessions {
        let entry = ratings.entry(session.user.user_id.clone()).or_default();
        entry.extend(session.turns.iter().filter_map(|t| t.rating.map(f64::from)));
    }
    let mut scales = std::collections::BTreeMap::new();
    let mut missing = Vec::new();
    for (user, rs) in ratings {
        if rs.len() < 2 {
            missing.push(user);
            continue;
        }
        let n = rs.len() as f64;
        let mean = rs.iter().sum::<f64>() / n;
        let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            missing.push(user);
            continue;
        }
        scales.insert(user, (mean, var.sqrt()));
    }
    (scales, missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_log_str;
    use crate::model::tests::record_json;

    #[test]
    fn context_lags_response_observables() {
        let text = [
            record_json("s1", 1, "search", "failure", Some(2)),
            record_json("s1", 2, "none", "not_invoked", Some(4)),
        ]
        .join("\n");
        let sessions = parse_log_str(&text).unwrap();
        let log = FlatLog::build(&sessions, SatisfactionScale::Raw, &LiteracyWeights::default());
        let first = &log.turns[0].context;
        let second = &log.turns[1].context;
        assert_eq!(first.prev_outcome, ToolOutcome::NotInvoked);
        assert_eq!(first.prev_latency_seconds, 0.0);
        assert_eq!(second.prev_outcome, ToolOutcome::Failure);
        assert_eq!(second.prev_latency_seconds, 12.5);
        assert!(second.prev_has_structure);
        assert_eq!(log.turns[1].features.0[9], -1.0);
        assert_eq!(log.turns[0].r_tool, -1.0);
    }

    #[test]
    fn zscore_per_user() {
        let text = [
            record_json("s1", 1, "none", "not_invoked", Some(2)),
            record_json("s1", 2, "none", "not_invoked", Some(4)),
            record_json("s1", 3, "none", "not_invoked", None),
            record_json("s2", 1, "none", "not_invoked", Some(5)),
        ]
        .join("\n");
        let sessions = parse_log_str(&text).unwrap();
        let log = FlatLog::build(&sessions, SatisfactionScale::Zscore, &LiteracyWeights::default());
        let std = 2f64.sqrt();
        assert!((log.turns[0].r_user + 1.0 / std).abs() < 1e-12);
        assert!((log.turns[1].r_user - 1.0 / std).abs() < 1e-12);
        assert_eq!(log.turns[2].r_user, 0.0);
        // single rating: no scale, flagged
        assert_eq!(log.turns[3].r_user, 0.0);
        assert_eq!(log.users_without_scale, vec!["u-s2".to_string()]);
    }
}
