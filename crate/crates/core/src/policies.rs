//! Target policies over the (Tool, Style) heads and joint importance ratios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::floor_distribution;
use crate::features::{FlatLog, TurnContext};
use crate::model::{ActionPair, Level, ToolChoice, ToolOutcome};

pub const DEFAULT_CLIP: f64 = 50.0;
pub const DEFAULT_POLICY_SMOOTHING: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("clip must be > 0, got {0}")]
    InvalidClip(f64),

    #[error("behavior propensity {prob} for {head} is below the floor {floor}")]
    PropensityBelowFloor {
        head: &'static str,
        prob: f64,
        floor: f64,
    },

    #[error("log has no tool-invoking turns; AlwaysTool needs a tool-type distribution")]
    NoToolTurns,

    #[error("invalid policy: {0}")]
    Invalid(String),

    #[error("unknown policy name {0:?}")]
    UnknownName(String),
}

/// One distribution per head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadProbs {
    pub tool: [f64; 4],
    pub style: [f64; 2],
}

impl HeadProbs {
    pub fn deterministic(action: ActionPair) -> Self {
        let mut tool = [0.0; 4];
        let mut style = [0.0; 2];
        tool[action.tool.index()] = 1.0;
        style[action.style.index()] = 1.0;
        Self { tool, style }
    }

    pub fn prob(&self, action: ActionPair) -> f64 {
        self.tool[action.tool.index()] * self.style[action.style.index()]
    }

    fn validate(&self) -> Result<(), PolicyError> {
        for (name, dist) in [("tool", &self.tool[..]), ("style", &self.style[..])] {
            if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(PolicyError::Invalid(format!("{name} head has a negative entry")));
            }
            let s: f64 = dist.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(PolicyError::Invalid(format!("{name} head sums to {s}")));
            }
        }
        Ok(())
    }
}

/// Rule-based tool gate shared by the heuristic policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateRule {
    /// The gate is open only on turns `1..=max_turn`.
    pub max_turn: u32,
    /// Close the gate right after a failed tool call.
    pub block_after_failure: bool,
    /// Use Search when the previous response carried citations, else Code.
    pub search_if_prev_citation: bool,
}

impl Default for GateRule {
    fn default() -> Self {
        Self {
            max_turn: 10,
            block_after_failure: true,
            search_if_prev_citation: true,
        }
    }
}

impl GateRule {
    pub fn is_open(&self, ctx: &TurnContext) -> bool {
        ctx.turn_index <= self.max_turn
            && !(self.block_after_failure && ctx.prev_outcome == ToolOutcome::Failure)
    }

    pub fn tool_type(&self, ctx: &TurnContext) -> ToolChoice {
        if self.search_if_prev_citation && ctx.prev_has_citation {
            ToolChoice::Search
        } else {
            ToolChoice::Code
        }
    }
}

/// Concise by default, detailed when the user asks to explain.
pub fn heuristic_style(ctx: &TurnContext) -> [f64; 2] {
    if ctx.user_asked_explain {
        [0.0, 1.0]
    } else {
        [1.0, 0.0]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Condition {
    pub literacy: Option<Level>,
    pub efficacy: Option<Level>,
    pub user_asked_explain: Option<bool>,
    pub prev_outcome: Option<ToolOutcome>,
    pub prev_has_citation: Option<bool>,
    pub min_turn: Option<u32>,
    pub max_turn: Option<u32>,
}

impl Condition {
    pub fn matches(&self, ctx: &TurnContext) -> bool {
        self.literacy.is_none_or(|v| v == ctx.literacy)
            && self.efficacy.is_none_or(|v| v == ctx.efficacy)
            && self.user_asked_explain.is_none_or(|v| v == ctx.user_asked_explain)
            && self.prev_outcome.is_none_or(|v| v == ctx.prev_outcome)
            && self.prev_has_citation.is_none_or(|v| v == ctx.prev_has_citation)
            && self.min_turn.is_none_or(|v| ctx.turn_index >= v)
            && self.max_turn.is_none_or(|v| ctx.turn_index <= v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRule {
    #[serde(default)]
    pub when: Condition,
    pub probs: HeadProbs,
}

/// Declarative per-head probability tables; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPolicy {
    pub label: String,
    #[serde(default)]
    pub rules: Vec<CustomRule>,
    pub default: HeadProbs,
}

impl CustomPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.default.validate()?;
        self.rules.iter().try_for_each(|r| r.probs.validate())
    }

    fn probs(&self, ctx: &TurnContext) -> HeadProbs {
        self.rules
            .iter()
            .find(|r| r.when.matches(ctx))
            .map_or(self.default, |r| r.probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Never invoke a tool.
    NoTool,
    /// Always invoke a tool; the type follows the logged distribution over
    /// (Search, Code, Email) among tool-invoking turns.
    AlwaysTool { conditional: [f64; 3] },
    HeuristicGated {
        #[serde(default)]
        gate: GateRule,
    },
    /// The heuristic gate shifted by literacy: high literacy adds
    /// `literacy_shift` to the gate probability, low literacy subtracts it.
    PersonalizedWeights {
        #[serde(default)]
        gate: GateRule,
        #[serde(default = "default_literacy_shift")]
        literacy_shift: f64,
    },
    Custom(CustomPolicy),
}

fn default_literacy_shift() -> f64 {
    0.2
}

pub const NAMED_POLICIES: [&str; 4] = ["no_tool", "always_tool", "heuristic_gated", "personalized_weights"];

impl PolicySpec {
    pub fn heuristic_gated() -> Self {
        PolicySpec::HeuristicGated {
            gate: GateRule::default(),
        }
    }

    pub fn personalized_weights() -> Self {
        PolicySpec::PersonalizedWeights {
            gate: GateRule::default(),
            literacy_shift: default_literacy_shift(),
        }
    }

    /// AlwaysTool with the tool-type distribution estimated from the log.
    pub fn always_tool_from_log(log: &FlatLog) -> Result<Self, PolicyError> {
        let mut counts = [0.0; 3];
        for t in &log.turns {
            if t.action.tool.is_invoked() {
                counts[t.action.tool.index() - 1] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return Err(PolicyError::NoToolTurns);
        }
        Ok(PolicySpec::AlwaysTool {
            conditional: counts.map(|c| c / total),
        })
    }

    /// Resolves one of [`NAMED_POLICIES`] (dashes or underscores, any case).
    pub fn by_name(name: &str, log: &FlatLog) -> Result<Self, PolicyError> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "no_tool" | "notool" => Ok(PolicySpec::NoTool),
            "always_tool" | "alwaystool" => Self::always_tool_from_log(log),
            "heuristic_gated" | "heuristicgated" | "heuristic" => Ok(Self::heuristic_gated()),
            "personalized_weights" | "personalizedweights" | "personalized" => {
                Ok(Self::personalized_weights())
            }
            other => Err(PolicyError::UnknownName(other.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::NoTool => "NoTool".into(),
            PolicySpec::AlwaysTool { .. } => "AlwaysTool".into(),
            PolicySpec::HeuristicGated { .. } => "HeuristicGated".into(),
            PolicySpec::PersonalizedWeights { .. } => "PersonalizedWeights".into(),
            PolicySpec::Custom(c) => c.label.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PolicySpec::AlwaysTool { conditional } => {
                let s: f64 = conditional.iter().sum();
                if conditional.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(PolicyError::Invalid(format!(
                        "AlwaysTool conditional must be a distribution, sums to {s}"
                    )));
                }
                Ok(())
            }
            PolicySpec::PersonalizedWeights { literacy_shift, .. } => {
                if !(0.0..=1.0).contains(literacy_shift) {
                    return Err(PolicyError::Invalid(format!(
                        "literacy_shift must be in [0, 1], got {literacy_shift}"
                    )));
                }
                Ok(())
            }
            PolicySpec::Custom(c) => c.validate(),
            _ => Ok(()),
        }
    }

    /// The policy's own per-head distributions.
    pub fn policy_probs(&self, ctx: &TurnContext) -> HeadProbs {
        let gated_tool = |gate: &GateRule, open_prob: f64| {
            let mut tool = [0.0; 4];
            tool[gate.tool_type(ctx).index()] = open_prob;
            tool[ToolChoice::None.index()] += 1.0 - open_prob;
            tool
        };
        match self {
            PolicySpec::NoTool => HeadProbs {
                tool: [1.0, 0.0, 0.0, 0.0],
                style: heuristic_style(ctx),
            },
            PolicySpec::AlwaysTool { conditional } => HeadProbs {
                tool: [0.0, conditional[0], conditional[1], conditional[2]],
                style: heuristic_style(ctx),
            },
            PolicySpec::HeuristicGated { gate } => HeadProbs {
                tool: gated_tool(gate, if gate.is_open(ctx) { 1.0 } else { 0.0 }),
                style: heuristic_style(ctx),
            },
            PolicySpec::PersonalizedWeights {
                gate,
                literacy_shift,
            } => {
                let base = if gate.is_open(ctx) { 1.0 } else { 0.0 };
                let shift = match ctx.literacy {
                    Level::High => *literacy_shift,
                    Level::Low => -*literacy_shift,
                };
                HeadProbs {
                    tool: gated_tool(gate, (base + shift).clamp(0.0, 1.0)),
                    style: heuristic_style(ctx),
                }
            }
            PolicySpec::Custom(c) => c.probs(ctx),
        }
    }

    /// Distributions used for importance weighting. Rule-based heads are
    /// mixed toward uniform so every entry is at least `eps`; the Tool head
    /// of NoTool and AlwaysTool and all Custom tables are used as given.
    pub fn evaluation_probs(&self, ctx: &TurnContext, eps: f64) -> HeadProbs {
        let mut p = self.policy_probs(ctx);
        match self {
            PolicySpec::Custom(_) => {}
            PolicySpec::NoTool | PolicySpec::AlwaysTool { .. } => floor_distribution(&mut p.style, eps),
            PolicySpec::HeuristicGated { .. } | PolicySpec::PersonalizedWeights { .. } => {
                floor_distribution(&mut p.tool, eps);
                floor_distribution(&mut p.style, eps);
            }
        }
        p
    }

    pub fn evaluation_table(&self, log: &FlatLog, eps: f64) -> Vec<HeadProbs> {
        log.turns
            .iter()
            .map(|t| self.evaluation_probs(&t.context, eps))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRatio {
    pub raw: f64,
    pub clipped: f64,
    pub clip_hit: bool,
}

impl ImportanceRatio {
    pub fn from_raw(raw: f64, clip: f64) -> Self {
        Self {
            raw,
            clipped: raw.min(clip),
            clip_hit: raw > clip,
        }
    }
}

/// Joint ratio `prod_h target^h(a^h) / behavior^h(a^h)`, clipped at `clip`.
pub fn importance_ratio(
    target: &HeadProbs,
    behavior_tool: &[f64; 4],
    behavior_style: &[f64; 2],
    action: ActionPair,
    clip: f64,
    floor: f64,
) -> Result<ImportanceRatio, PolicyError> {
    if clip.is_nan() || clip <= 0.0 {
        return Err(PolicyError::InvalidClip(clip));
    }
    let bt = behavior_tool[action.tool.index()];
    let bs = behavior_style[action.style.index()];
    let slack = 1e-12;
    if bt < floor - slack {
        return Err(PolicyError::PropensityBelowFloor {
            head: "tool",
            prob: bt,
            floor,
        });
    }
    if bs < floor - slack {
        return Err(PolicyError::PropensityBelowFloor {
            head: "style",
            prob: bs,
            floor,
        });
    }
    let raw = (target.tool[action.tool.index()] / bt) * (target.style[action.style.index()] / bs);
    Ok(ImportanceRatio::from_raw(raw, clip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StyleChoice;
    use proptest::prelude::*;

    fn ctx(turn: u32, explain: bool, literacy: Level, prev: ToolOutcome, cite: bool) -> TurnContext {
        TurnContext {
            turn_index: turn,
            prev_latency_seconds: 10.0,
            prev_response_chars: 400.0,
            prev_has_citation: cite,
            prev_has_structure: false,
            user_asked_explain: explain,
            literacy,
            efficacy: Level::High,
            prev_outcome: prev,
        }
    }

    #[test]
    fn no_tool_never_invokes() {
        let p = PolicySpec::NoTool.policy_probs(&ctx(3, true, Level::Low, ToolOutcome::Success, false));
        assert_eq!(p.tool, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.style, [0.0, 1.0]);
    }

    #[test]
    fn always_tool_uses_conditional() {
        let spec = PolicySpec::AlwaysTool {
            conditional: [0.55, 0.40, 0.05],
        };
        let p = spec.policy_probs(&ctx(1, false, Level::High, ToolOutcome::NotInvoked, false));
        assert_eq!(p.tool, [0.0, 0.55, 0.40, 0.05]);
    }

    #[test]
    fn heuristic_explain_means_detailed() {
        let p = PolicySpec::heuristic_gated().policy_probs(&ctx(2, true, Level::Low, ToolOutcome::NotInvoked, false));
        assert_eq!(p.style, [0.0, 1.0]);
        assert_eq!(p.tool, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn heuristic_gate_rules() {
        let g = PolicySpec::heuristic_gated();
        assert_eq!(g.policy_probs(&ctx(11, false, Level::Low, ToolOutcome::Success, false)).tool[0], 1.0);
        assert_eq!(g.policy_probs(&ctx(4, false, Level::Low, ToolOutcome::Failure, false)).tool[0], 1.0);
        assert_eq!(g.policy_probs(&ctx(4, false, Level::Low, ToolOutcome::Success, true)).tool[1], 1.0);
    }

    #[test]
    fn personalized_shifts_gate_by_literacy() {
        let p = PolicySpec::personalized_weights();
        let low_open = p.policy_probs(&ctx(2, false, Level::Low, ToolOutcome::NotInvoked, false));
        assert!((low_open.tool[0] - 0.2).abs() < 1e-12);
        let high_closed = p.policy_probs(&ctx(12, false, Level::High, ToolOutcome::NotInvoked, false));
        assert!((high_closed.tool[2] - 0.2).abs() < 1e-12);
        let high_open = p.policy_probs(&ctx(2, false, Level::High, ToolOutcome::NotInvoked, false));
        assert_eq!(high_open.tool[2], 1.0);
    }

    #[test]
    fn evaluation_smoothing() {
        let c = ctx(2, false, Level::Low, ToolOutcome::NotInvoked, false);
        let nt = PolicySpec::NoTool.evaluation_probs(&c, 0.01);
        assert_eq!(nt.tool, [1.0, 0.0, 0.0, 0.0]);
        assert!((nt.style[1] - 0.01).abs() < 1e-12);
        let hg = PolicySpec::heuristic_gated().evaluation_probs(&c, 0.01);
        assert!((hg.tool[2] - 0.97).abs() < 1e-12);
        assert!((hg.tool.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_examples() {
        let equal = HeadProbs {
            tool: [0.4, 0.3, 0.2, 0.1],
            style: [0.6, 0.4],
        };
        let a = ActionPair::new(ToolChoice::Code, StyleChoice::Detailed);
        let r = importance_ratio(&equal, &equal.tool, &equal.style, a, 50.0, 0.01).unwrap();
        assert_eq!(r.raw, 1.0);

        let target = HeadProbs {
            tool: [0.1, 0.8, 0.05, 0.05],
            style: [0.6, 0.4],
        };
        let behavior_tool = [0.5, 0.2, 0.2, 0.1];
        let a = ActionPair::new(ToolChoice::Search, StyleChoice::Concise);
        let r = importance_ratio(&target, &behavior_tool, &[0.6, 0.4], a, 50.0, 0.01).unwrap();
        assert!((r.raw - 4.0).abs() < 1e-12);
        assert!(!r.clip_hit);

        let r = ImportanceRatio::from_raw(120.0, 50.0);
        assert_eq!(r.clipped, 50.0);
        assert!(r.clip_hit);

        assert_eq!(
            importance_ratio(&target, &behavior_tool, &[0.6, 0.4], a, 0.0, 0.01),
            Err(PolicyError::InvalidClip(0.0))
        );
        assert!(matches!(
            importance_ratio(&target, &[0.999, 0.0005, 0.0, 0.0005], &[0.6, 0.4], a, 50.0, 0.01),
            Err(PolicyError::PropensityBelowFloor { .. })
        ));
    }

    #[test]
    fn no_tool_ratio_zero_on_tool_turns() {
        let c = ctx(2, false, Level::Low, ToolOutcome::NotInvoked, false);
        let t = PolicySpec::NoTool.evaluation_probs(&c, 0.01);
        for tool in [ToolChoice::Search, ToolChoice::Code, ToolChoice::Email] {
            for style in StyleChoice::ALL {
                let r = importance_ratio(&t, &[0.25; 4], &[0.5; 2], ActionPair::new(tool, style), 50.0, 0.01).unwrap();
                assert_eq!(r.raw, 0.0);
            }
        }
    }

    #[test]
    fn custom_policy_from_json() {
        let json = r#"{
            "name": "custom",
            "label": "explain-search",
            "rules": [{"when": {"user_asked_explain": true},
                       "probs": {"tool": [0.0, 1.0, 0.0, 0.0], "style": [0.0, 1.0]}}],
            "default": {"tool": [0.7, 0.1, 0.1, 0.1], "style": [0.5, 0.5]}
        }"#;
        let spec: PolicySpec = serde_json::from_str(json).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.label(), "explain-search");
        let p = spec.evaluation_probs(&ctx(1, true, Level::Low, ToolOutcome::NotInvoked, false), 0.01);
        assert_eq!(p.tool[1], 1.0);
        let p = spec.evaluation_probs(&ctx(1, false, Level::Low, ToolOutcome::NotInvoked, false), 0.01);
        assert_eq!(p.tool[0], 0.7);

        let bad = r#"{"name": "custom", "label": "x", "default": {"tool": [0.5, 0.1, 0.1, 0.1], "style": [0.5, 0.5]}}"#;
        let spec: PolicySpec = serde_json::from_str(bad).unwrap();
        assert!(spec.validate().is_err());
    }

    fn arb_ctx() -> impl Strategy<Value = TurnContext> {
        (1u32..30, any::<bool>(), any::<bool>(), 0usize..3, any::<bool>()).prop_map(|(t, e, l, o, c)| {
            let lit = if l { Level::High } else { Level::Low };
            let out = [ToolOutcome::NotInvoked, ToolOutcome::Success, ToolOutcome::Failure][o];
            ctx(t, e, lit, out, c)
        })
    }

    proptest! {
        #[test]
        fn heads_are_distributions(c in arb_ctx(), shift in 0.0f64..1.0) {
            let specs = [
                PolicySpec::NoTool,
                PolicySpec::AlwaysTool { conditional: [0.5, 0.3, 0.2] },
                PolicySpec::heuristic_gated(),
                PolicySpec::PersonalizedWeights { gate: GateRule::default(), literacy_shift: shift },
            ];
            for s in &specs {
                for p in [s.policy_probs(&c), s.evaluation_probs(&c, 0.01)] {
                    prop_assert!((p.tool.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!((p.style.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!(p.tool.iter().chain(&p.style).all(|v| *v >= 0.0));
                }
            }
            prop_assert_eq!(specs[1].policy_probs(&c).tool[0], 0.0);
            prop_assert_eq!(specs[0].policy_probs(&c).tool[0], 1.0);
        }

        #[test]
        fn clipping_idempotent(raw in 0.0f64..500.0, clip in 0.1f64..100.0) {
            let once = ImportanceRatio::from_raw(raw, clip);
            let twice = ImportanceRatio::from_raw(once.clipped, clip);
            prop_assert_eq!(once.clipped, twice.clipped);
            prop_assert_eq!(once.clip_hit, raw > clip);
        }
    }
}
