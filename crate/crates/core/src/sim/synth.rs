//! Synthetic logged-bandit sessions with known logging, rating and
//! missingness mechanisms, and the exact value of any target policy.
//!
//! Each turn's decision context is a small Markov chain: the state is the
//! previous tool outcome and whether the previous response carried a
//! citation, and the user's explain request is drawn fresh each turn.
//! Ground truth is the expectation over that chain under the logging
//! policy, which is the quantity SNIPS and AIPW estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::BehaviorPropensities;
use crate::features::{FlatLog, TurnContext};
use crate::linear::sigmoid;
use crate::model::{
    ActionPair, Archetype, LoggedTurn, Session, StyleChoice, ToolChoice, ToolOutcome,
    TurnFeatures, UserProfile,
};
use crate::ope::{Nuisance, OutcomeModel, PropensitySource};
use crate::policies::{HeadProbs, PolicySpec, DEFAULT_POLICY_SMOOTHING};
use crate::rewards::LiteracyWeights;
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Covariates of the logging policy:
/// `[1, turn/10, prev_citation, asked_explain, literacy_high, efficacy_high, prev_outcome]`.
pub const LOGGING_COVARIATES: usize = 7;
/// Covariates of the rating-missingness model:
/// `[1, turn/10, asked_explain, literacy_high, efficacy_high, prev_outcome]`.
pub const MISSINGNESS_COVARIATES: usize = 6;

pub fn logging_covariates(ctx: &TurnContext) -> [f64; LOGGING_COVARIATES] {
    [
        1.0,
        f64::from(ctx.turn_index) / 10.0,
        f64::from(u8::from(ctx.prev_has_citation)),
        f64::from(u8::from(ctx.user_asked_explain)),
        ctx.literacy.indicator(),
        ctx.efficacy.indicator(),
        ctx.prev_outcome.signed(),
    ]
}

pub fn missingness_covariates(ctx: &TurnContext) -> [f64; MISSINGNESS_COVARIATES] {
    [
        1.0,
        f64::from(ctx.turn_index) / 10.0,
        f64::from(u8::from(ctx.user_asked_explain)),
        ctx.literacy.indicator(),
        ctx.efficacy.indicator(),
        ctx.prev_outcome.signed(),
    ]
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax-linear logging policy, head by head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingSpec {
    /// Logit coefficients of Search, Code and Email relative to no tool.
    pub tool: [[f64; LOGGING_COVARIATES]; 3],
    /// Logit coefficients of Detailed relative to Concise.
    pub style: [f64; LOGGING_COVARIATES],
}

impl LoggingSpec {
    pub fn uniform() -> Self {
        Self {
            tool: [[0.0; LOGGING_COVARIATES]; 3],
            style: [0.0; LOGGING_COVARIATES],
        }
    }

    pub fn probs(&self, ctx: &TurnContext) -> HeadProbs {
        let x = logging_covariates(ctx);
        let logits = [0.0, dot(&self.tool[0], &x), dot(&self.tool[1], &x), dot(&self.tool[2], &x)];
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp = logits.map(|l| (l - max).exp());
        let total: f64 = exp.iter().sum();
        let detailed = sigmoid(dot(&self.style, &x));
        HeadProbs {
            tool: exp.map(|e| e / total),
            style: [1.0 - detailed, detailed],
        }
    }
}

impl Default for LoggingSpec {
    fn default() -> Self {
        Self {
            tool: [
                [-0.9, -0.3, 1.5, 0.0, 0.3, 0.0, 0.0],
                [-0.2, -0.2, 0.0, 0.2, 0.0, 0.3, 0.3],
                [-1.1, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0],
            ],
            style: [-1.2, 0.0, 0.0, 2.4, 0.3, -0.3, 0.0],
        }
    }
}

/// Response observables produced by an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseSpec {
    /// Mean latency per tool (None, Search, Code, Email), seconds.
    pub latency_seconds: [f64; 4],
    pub detailed_extra_latency: f64,
    /// Half-width of the uniform latency jitter.
    pub latency_jitter: f64,
    pub citation_after_search_success: f64,
    pub citation_otherwise: f64,
    pub structure_concise: f64,
    pub structure_detailed: f64,
    pub chars_concise: [u32; 2],
    pub chars_detailed: [u32; 2],
}

impl Default for ResponseSpec {
    fn default() -> Self {
        Self {
            latency_seconds: [4.0, 14.0, 20.0, 9.0],
            detailed_extra_latency: 4.0,
            latency_jitter: 1.5,
            citation_after_search_success: 0.9,
            citation_otherwise: 0.05,
            structure_concise: 0.3,
            structure_detailed: 0.8,
            chars_concise: [200, 500],
            chars_detailed: [800, 1600],
        }
    }
}

impl ResponseSpec {
    fn mean_latency(&self, action: ActionPair) -> f64 {
        self.latency_seconds[action.tool.index()]
            + if action.style == StyleChoice::Detailed {
                self.detailed_extra_latency
            } else {
                0.0
            }
    }

    fn citation_prob(&self, tool: ToolChoice, outcome: ToolOutcome) -> f64 {
        if tool == ToolChoice::Search && outcome == ToolOutcome::Success {
            self.citation_after_search_success
        } else {
            self.citation_otherwise
        }
    }

    fn structure_prob(&self, style: StyleChoice) -> f64 {
        match style {
            StyleChoice::Concise => self.structure_concise,
            StyleChoice::Detailed => self.structure_detailed,
        }
    }
}

/// Mean rating `base + archetype_offset + tool_effect [tool used]
/// + style_match_bonus [style is the archetype's preference]
/// + explain_detailed_bonus [asked to explain and Detailed]
/// - failure_penalty [tool failed]`, clamped to `[1, 5]`. A rating is drawn
/// from the two-point distribution on the neighbouring integers with that
/// mean, mixed with a uniform draw over 1..=5 at rate `noise_mix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingSpec {
    pub base: f64,
    /// Per archetype, in canonical archetype order.
    pub archetype_offset: [f64; 4],
    pub tool_effect: [f64; 4],
    pub preferred_style: [StyleChoice; 4],
    pub style_match_bonus: f64,
    pub explain_detailed_bonus: f64,
    pub failure_penalty: f64,
    pub noise_mix: f64,
}

impl Default for RatingSpec {
    fn default() -> Self {
        Self {
            base: 3.4,
            archetype_offset: [0.6, 0.5, -0.5, -0.6],
            tool_effect: [0.3, 0.5, -0.1, -0.6],
            preferred_style: [
                StyleChoice::Concise,
                StyleChoice::Detailed,
                StyleChoice::Detailed,
                StyleChoice::Concise,
            ],
            style_match_bonus: 0.3,
            explain_detailed_bonus: 0.4,
            failure_penalty: 1.0,
            noise_mix: 0.05,
        }
    }
}

impl RatingSpec {
    fn mean_given_outcome(&self, arch: Archetype, action: ActionPair, explain: bool, outcome: ToolOutcome) -> f64 {
        let a = arch.index();
        let mut m = self.base + self.archetype_offset[a];
        if action.tool.is_invoked() {
            m += self.tool_effect[a];
        }
        if action.style == self.preferred_style[a] {
            m += self.style_match_bonus;
        }
        if explain && action.style == StyleChoice::Detailed {
            m += self.explain_detailed_bonus;
        }
        if outcome == ToolOutcome::Failure {
            m -= self.failure_penalty;
        }
        m.clamp(1.0, 5.0)
    }

    fn observed_mean(&self, m: f64) -> f64 {
        (1.0 - self.noise_mix) * m + 3.0 * self.noise_mix
    }

    fn draw(&self, m: f64, r: &mut impl Rng) -> u8 {
        if r.random::<f64>() < self.noise_mix {
            return r.random_range(1..=5);
        }
        let lo = m.floor();
        let rating = if r.random::<f64>() < m - lo { lo + 1.0 } else { lo };
        rating.clamp(1.0, 5.0) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub sessions: usize,
    pub turns_per_session: u32,
    pub sessions_per_user: usize,
    /// Probability of each archetype, in canonical archetype order.
    pub archetype_mix: [f64; 4],
    /// Per-archetype probability that the user asks for an explanation.
    pub explain_prob: [f64; 4],
    pub logging: LoggingSpec,
    /// Success probability of (Search, Code, Email) per archetype.
    pub tool_success: [[f64; 3]; 4],
    pub response: ResponseSpec,
    pub rating: RatingSpec,
    /// Logistic coefficients of `P(rated)` over the missingness covariates.
    pub missingness: [f64; MISSINGNESS_COVARIATES],
    /// Smoothing applied to rule-based target policies, matching evaluation.
    pub policy_smoothing: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sessions: 500,
            turns_per_session: 10,
            sessions_per_user: 1,
            archetype_mix: [0.25; 4],
            explain_prob: [0.25, 0.45, 0.5, 0.3],
            logging: LoggingSpec::default(),
            tool_success: [[0.816, 0.807, 0.857]; 4],
            response: ResponseSpec::default(),
            rating: RatingSpec::default(),
            missingness: [0.6, -0.8, 0.8, 1.5, 0.3, 0.4],
            policy_smoothing: DEFAULT_POLICY_SMOOTHING,
        }
    }
}

pub const PRESETS: [&str; 2] = ["default", "subgroup_harm"];

impl SynthSpec {
    /// Tools help high-literacy users (expected tool reward +0.6) and hurt
    /// low-literacy, high-efficacy users (-0.4), in both objective and
    /// satisfaction.
    pub fn subgroup_harm() -> Self {
        let base = Self::default();
        Self {
            tool_success: [[0.8; 3], [0.8; 3], [0.55; 3], [0.3; 3]],
            rating: RatingSpec {
                tool_effect: [0.3, 0.5, 0.0, -0.6],
                ..base.rating.clone()
            },
            ..base
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.replace('-', "_").as_str() {
            "default" => Some(Self::default()),
            "subgroup_harm" => Some(Self::subgroup_harm()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.sessions == 0 || self.turns_per_session == 0 || self.sessions_per_user == 0 {
            return bad("sessions, turns_per_session and sessions_per_user must be >= 1".into());
        }
        let is_prob = |p: f64| (0.0..=1.0).contains(&p);
        let mix: f64 = self.archetype_mix.iter().sum();
        if !self.archetype_mix.iter().all(|p| is_prob(*p)) || (mix - 1.0).abs() > 1e-9 {
            return bad(format!("archetype_mix must be a distribution, sums to {mix}"));
        }
        let probs = self
            .explain_prob
            .iter()
            .chain(self.tool_success.iter().flatten())
            .chain([
                &self.response.citation_after_search_success,
                &self.response.citation_otherwise,
                &self.response.structure_concise,
                &self.response.structure_detailed,
                &self.rating.noise_mix,
            ]);
        for p in probs {
            if !is_prob(*p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.response.latency_jitter < 0.0
            || self
                .response
                .latency_seconds
                .iter()
                .any(|l| *l - self.response.latency_jitter < 0.0 || *l + self.response.detailed_extra_latency + self.response.latency_jitter > 45.0)
        {
            return bad("latencies must stay within [0, 45] seconds".into());
        }
        for range in [self.response.chars_concise, self.response.chars_detailed] {
            if range[0] > range[1] {
                return bad(format!("empty character range {range:?}"));
            }
        }
        if !(0.0..0.25).contains(&self.policy_smoothing) {
            return bad("policy_smoothing must be in [0, 0.25)".into());
        }
        Ok(())
    }

    pub fn logging_probs(&self, ctx: &TurnContext) -> HeadProbs {
        self.logging.probs(ctx)
    }

    pub fn rating_prob(&self, ctx: &TurnContext) -> f64 {
        sigmoid(dot(&self.missingness, &missingness_covariates(ctx)))
    }

    fn success_prob(&self, arch: Archetype, tool: ToolChoice) -> f64 {
        if tool.is_invoked() {
            self.tool_success[arch.index()][tool.index() - 1]
        } else {
            0.0
        }
    }

    fn outcome_probs(&self, arch: Archetype, tool: ToolChoice) -> Vec<(ToolOutcome, f64)> {
        if tool.is_invoked() {
            let p = self.success_prob(arch, tool);
            vec![(ToolOutcome::Success, p), (ToolOutcome::Failure, 1.0 - p)]
        } else {
            vec![(ToolOutcome::NotInvoked, 1.0)]
        }
    }

    /// Expected tool reward of an action.
    pub fn expected_tool_reward(&self, arch: Archetype, action: ActionPair) -> f64 {
        if action.tool.is_invoked() {
            2.0 * self.success_prob(arch, action.tool) - 1.0
        } else {
            0.0
        }
    }

    /// Expected engagement reward of an action.
    pub fn expected_engagement(&self, arch: Archetype, action: ActionPair) -> f64 {
        let r = &self.response;
        let p_succ = self.success_prob(arch, action.tool);
        let citation = if action.tool == ToolChoice::Search {
            p_succ * r.citation_after_search_success + (1.0 - p_succ) * r.citation_otherwise
        } else {
            0.0
        };
        -0.2 * r.mean_latency(action) / 30.0 + 0.2 * r.structure_prob(action.style) + 0.2 * citation
    }

    /// Expected 1-5 rating of an action in a context.
    pub fn expected_rating(&self, ctx: &TurnContext, action: ActionPair) -> f64 {
        let arch = ctx.archetype();
        self.outcome_probs(arch, action.tool)
            .into_iter()
            .map(|(o, p)| {
                p * self.rating.observed_mean(self.rating.mean_given_outcome(
                    arch,
                    action,
                    ctx.user_asked_explain,
                    o,
                ))
            })
            .sum()
    }

    /// Systematic sampling from the archetype mix: user `u` takes the
    /// archetype at quantile `(u + offset) / n_users`, so each archetype's
    /// share of users matches the mix up to one user.
    fn user_archetype(&self, user: usize, seed: u64) -> Archetype {
        let n_users = self.sessions.div_ceil(self.sessions_per_user);
        let offset: f64 = rng::substream(seed, rng::SYNTH, &[0]).random();
        let q = (user as f64 + offset) / n_users as f64;
        let mut acc = 0.0;
        for (i, p) in self.archetype_mix.iter().enumerate() {
            acc += p;
            if q < acc {
                return Archetype::from_index(i);
            }
        }
        let last = self.archetype_mix.iter().rposition(|p| *p > 0.0).unwrap_or(3);
        Archetype::from_index(last)
    }

    fn generate_session(&self, s: usize, seed: u64) -> Session {
        let user_index = s / self.sessions_per_user;
        let arch = self.user_archetype(user_index, seed);
        let user = UserProfile {
            user_id: format!("u{user_index:05}"),
            literacy: arch.literacy,
            efficacy: arch.efficacy,
        };
        let session_id = format!("s{s:05}");
        let mut r = rng::substream(seed, rng::SYNTH, &[1, s as u64]);
        let resp = &self.response;
        let mut turns = Vec::with_capacity(self.turns_per_session as usize);
        let mut prev_outcome = ToolOutcome::NotInvoked;
        let mut prev_citation = false;
        for t in 1..=self.turns_per_session {
            let explain = r.random::<f64>() < self.explain_prob[arch.index()];
            let ctx = context(t, prev_outcome, prev_citation, explain, arch);
            let b = self.logging_probs(&ctx);
            let tool = ToolChoice::from_index(sample_index(&b.tool, &mut r));
            let style = StyleChoice::from_index(sample_index(&b.style, &mut r));
            let action = ActionPair::new(tool, style);
            let outcome = if !tool.is_invoked() {
                ToolOutcome::NotInvoked
            } else if r.random::<f64>() < self.success_prob(arch, tool) {
                ToolOutcome::Success
            } else {
                ToolOutcome::Failure
            };
            let has_citation = r.random::<f64>() < resp.citation_prob(tool, outcome);
            let has_structure = r.random::<f64>() < resp.structure_prob(style);
            let jitter = if resp.latency_jitter > 0.0 {
                r.random_range(-resp.latency_jitter..=resp.latency_jitter)
            } else {
                0.0
            };
            let latency = ((resp.mean_latency(action) + jitter) * 1000.0).round() / 1000.0;
            let [lo, hi] = match style {
                StyleChoice::Concise => resp.chars_concise,
                StyleChoice::Detailed => resp.chars_detailed,
            };
            let response_chars = r.random_range(lo..=hi);
            let rated = r.random::<f64>() < self.rating_prob(&ctx);
            let mean = self.rating.mean_given_outcome(arch, action, explain, outcome);
            let rating = self.rating.draw(mean, &mut r);
            turns.push(LoggedTurn {
                session_id: session_id.clone(),
                features: TurnFeatures {
                    turn_index: t,
                    latency_seconds: latency,
                    response_chars,
                    has_citation,
                    has_structure,
                    user_asked_explain: explain,
                },
                action,
                outcome,
                rating: rated.then_some(rating),
            });
            prev_outcome = outcome;
            prev_citation = has_citation;
        }
        Session {
            session_id,
            user,
            turns,
        }
    }

    /// AlwaysTool with the logging policy's exact tool-type distribution
    /// among tool-invoking turns.
    pub fn always_tool_policy(&self) -> PolicySpec {
        let mut mass = [0.0; 3];
        self.walk(|ctx, w| {
            let b = self.logging_probs(ctx);
            for k in 0..3 {
                mass[k] += w * b.tool[k + 1];
            }
        });
        let total: f64 = mass.iter().sum();
        PolicySpec::AlwaysTool {
            conditional: mass.map(|m| m / total),
        }
    }

    /// The four named target policies, AlwaysTool resolved analytically.
    pub fn named_policies(&self) -> Vec<PolicySpec> {
        vec![
            PolicySpec::NoTool,
            self.always_tool_policy(),
            PolicySpec::heuristic_gated(),
            PolicySpec::personalized_weights(),
        ]
    }

    /// Visits every reachable decision context with its probability mass
    /// per logged turn (masses sum to 1 over all calls).
    fn walk(&self, mut visit: impl FnMut(&TurnContext, f64)) {
        let n_turns = f64::from(self.turns_per_session);
        for arch in Archetype::ALL {
            let p_arch = self.archetype_mix[arch.index()];
            if p_arch == 0.0 {
                continue;
            }
            let p_explain = self.explain_prob[arch.index()];
            // State: (previous outcome, previous citation).
            let mut dist = [[0.0f64; 2]; 3];
            dist[outcome_slot(ToolOutcome::NotInvoked)][0] = 1.0;
            for t in 1..=self.turns_per_session {
                let mut next = [[0.0f64; 2]; 3];
                for (o_slot, row) in dist.iter().enumerate() {
                    for (cite, &mass) in row.iter().enumerate() {
                        if mass == 0.0 {
                            continue;
                        }
                        for (explain, pe) in [(false, 1.0 - p_explain), (true, p_explain)] {
                            if pe == 0.0 {
                                continue;
                            }
                            let ctx = context(t, OUTCOMES[o_slot], cite == 1, explain, arch);
                            let w = mass * pe;
                            visit(&ctx, p_arch * w / n_turns);
                            let b = self.logging_probs(&ctx);
                            for action in ActionPair::all() {
                                let pa = b.prob(action);
                                for (o, po) in self.outcome_probs(arch, action.tool) {
                                    let pc = self.response.citation_prob(action.tool, o);
                                    let slot = outcome_slot(o);
                                    next[slot][1] += w * pa * po * pc;
                                    next[slot][0] += w * pa * po * (1.0 - pc);
                                }
                            }
                        }
                    }
                }
                dist = next;
            }
        }
    }

    /// Exact per-turn value of a target policy under the logged context
    /// distribution, overall and per archetype.
    pub fn ground_truth(&self, policy: &PolicySpec, weights: &LiteracyWeights) -> PolicyTruth {
        let mut overall = ValueSums::default();
        let mut per_arch = [ValueSums::default(); 4];
        self.walk(|ctx, w| {
            let arch = ctx.archetype();
            let target = policy.evaluation_probs(ctx, self.policy_smoothing);
            let weight = weights.for_literacy(ctx.literacy);
            let mut v = ValueSums {
                mass: w,
                ..ValueSums::default()
            };
            for action in ActionPair::all() {
                let p = target.prob(action);
                if p == 0.0 {
                    continue;
                }
                let tool = self.expected_tool_reward(arch, action);
                let eng = self.expected_engagement(arch, action);
                let rating = self.expected_rating(ctx, action);
                v.obj += w * p * (tool + eng);
                v.user += w * p * rating;
                v.total += w * p * (weight.beta * tool + weight.gamma * eng + weight.alpha * rating);
            }
            overall += v;
            per_arch[arch.index()] += v;
        });
        PolicyTruth {
            policy: policy.label(),
            spec: policy.clone(),
            r_obj: overall.obj,
            r_user: overall.user,
            r_total: overall.total,
            archetypes: Archetype::ALL
                .iter()
                .map(|a| {
                    let s = per_arch[a.index()];
                    ArchetypeTruth {
                        archetype: a.label().into(),
                        r_obj: (s.mass > 0.0).then(|| s.obj / s.mass),
                        r_user: (s.mass > 0.0).then(|| s.user / s.mass),
                    }
                })
                .collect(),
        }
    }

    /// Known logging, rating and outcome functions evaluated on a log
    /// generated from this spec.
    pub fn oracle_nuisance(&self, log: &FlatLog, floor: f64) -> Nuisance {
        let behavior = log.turns.iter().map(|t| self.logging_probs(&t.context));
        let (tool, style) = behavior.map(|p| (p.tool, p.style)).unzip();
        Nuisance {
            behavior: BehaviorPropensities {
                tool,
                style,
                eps: floor,
            },
            rating_probs: log.turns.iter().map(|t| self.rating_prob(&t.context)).collect(),
            outcome: OutcomeModel::from_fn(log, |i, a| self.expected_rating(&log.turns[i].context, a)),
            source: PropensitySource::Oracle,
            fit: None,
        }
    }
}

const OUTCOMES: [ToolOutcome; 3] = [ToolOutcome::NotInvoked, ToolOutcome::Success, ToolOutcome::Failure];

fn outcome_slot(o: ToolOutcome) -> usize {
    match o {
        ToolOutcome::NotInvoked => 0,
        ToolOutcome::Success => 1,
        ToolOutcome::Failure => 2,
    }
}

fn context(t: u32, prev_outcome: ToolOutcome, prev_citation: bool, explain: bool, arch: Archetype) -> TurnContext {
    TurnContext {
        turn_index: t,
        prev_latency_seconds: 0.0,
        prev_response_chars: 0.0,
        prev_has_citation: prev_citation,
        prev_has_structure: false,
        user_asked_explain: explain,
        literacy: arch.literacy,
        efficacy: arch.efficacy,
        prev_outcome,
    }
}

fn sample_index(probs: &[f64], r: &mut impl Rng) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, Copy, Default)]
struct ValueSums {
    mass: f64,
    obj: f64,
    user: f64,
    total: f64,
}

impl std::ops::AddAssign for ValueSums {
    fn add_assign(&mut self, o: Self) {
        self.mass += o.mass;
        self.obj += o.obj;
        self.user += o.user;
        self.total += o.total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeTruth {
    pub archetype: String,
    pub r_obj: Option<f64>,
    pub r_user: Option<f64>,
}

/// Exact per-turn values of one target policy. `r_user` is on the raw 1-5
/// rating scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTruth {
    pub policy: String,
    pub spec: PolicySpec,
    pub r_obj: f64,
    pub r_user: f64,
    pub r_total: f64,
    pub archetypes: Vec<ArchetypeTruth>,
}

impl PolicyTruth {
    pub fn archetype(&self, a: Archetype) -> &ArchetypeTruth {
        &self.archetypes[a.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub satisfaction_scale: String,
    pub policy_smoothing: f64,
    pub policies: Vec<PolicyTruth>,
}

impl GroundTruth {
    pub fn get(&self, label: &str) -> Option<&PolicyTruth> {
        self.policies.iter().find(|p| p.policy == label)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub sessions: Vec<Session>,
    pub truth: GroundTruth,
}

/// Generates `spec.sessions` sessions and the exact value of each named
/// target policy. The same `(spec, seed)` always yields the same log.
pub fn generate_synthetic_bandit_log(spec: &SynthSpec, seed: u64) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let sessions = crate::par::map_range(spec.sessions, |s| spec.generate_session(s, seed));
    let weights = LiteracyWeights::default();
    let policies = spec
        .named_policies()
        .iter()
        .map(|p| spec.ground_truth(p, &weights))
        .collect();
    Ok(SynthOutput {
        sessions,
        truth: GroundTruth {
            seed,
            satisfaction_scale: "raw".into(),
            policy_smoothing: spec.policy_smoothing,
            policies,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SatisfactionScale;
    use crate::policies::{CustomPolicy, HeadProbs};

    fn small(spec: SynthSpec) -> SynthSpec {
        SynthSpec { sessions: 60, ..spec }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = small(SynthSpec::default());
        let a = generate_synthetic_bandit_log(&spec, 7).unwrap();
        let b = generate_synthetic_bandit_log(&spec, 7).unwrap();
        let c = generate_synthetic_bandit_log(&spec, 8).unwrap();
        let text = crate::model::log_to_string(&a.sessions);
        assert_eq!(text, crate::model::log_to_string(&b.sessions));
        assert_ne!(text, crate::model::log_to_string(&c.sessions));
        assert_eq!(crate::model::parse_log_str(&text).unwrap(), a.sessions);
    }

    #[test]
    fn walk_masses_sum_to_one() {
        let spec = SynthSpec::subgroup_harm();
        let mut total = 0.0;
        spec.walk(|_, w| total += w);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_logging_constant_rewards_is_dot_product() {
        let mut spec = SynthSpec {
            logging: LoggingSpec::uniform(),
            tool_success: [[1.0; 3]; 4],
            archetype_mix: [1.0, 0.0, 0.0, 0.0],
            explain_prob: [0.0; 4],
            ..SynthSpec::default()
        };
        spec.rating.noise_mix = 0.0;
        spec.rating.archetype_offset = [0.0; 4];
        spec.rating.style_match_bonus = 0.0;
        let table = HeadProbs {
            tool: [0.1, 0.2, 0.3, 0.4],
            style: [0.75, 0.25],
        };
        let policy = PolicySpec::Custom(CustomPolicy {
            label: "fixed".into(),
            rules: vec![],
            default: table,
        });
        let truth = spec.ground_truth(&policy, &LiteracyWeights::default());
        let arch = Archetype::ALL[0];
        let dot_obj: f64 = ActionPair::all()
            .map(|a| table.prob(a) * (spec.expected_tool_reward(arch, a) + spec.expected_engagement(arch, a)))
            .sum();
        // Rating mean is 3.4 without a tool and 3.7 with one.
        let dot_user = 0.1 * 3.4 + 0.9 * 3.7;
        assert!((truth.r_obj - dot_obj).abs() < 1e-12);
        assert!((truth.r_user - dot_user).abs() < 1e-12);
    }

    #[test]
    fn expected_rating_matches_draws() {
        let spec = SynthSpec::default();
        let ctx = context(3, ToolOutcome::Success, false, true, Archetype::ALL[1]);
        let action = ActionPair::new(ToolChoice::Code, StyleChoice::Detailed);
        let mut r = rng::substream(1, "test", &[]);
        let arch = ctx.archetype();
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let o = if r.random::<f64>() < spec.success_prob(arch, action.tool) {
                ToolOutcome::Success
            } else {
                ToolOutcome::Failure
            };
            let m = spec.rating.mean_given_outcome(arch, action, true, o);
            total += f64::from(spec.rating.draw(m, &mut r));
        }
        assert!((total / n as f64 - spec.expected_rating(&ctx, action)).abs() < 0.01);
    }

    #[test]
    fn empirical_turn_mean_matches_truth_under_logging() {
        let spec = SynthSpec {
            sessions: 4000,
            ..SynthSpec::default()
        };
        let out = generate_synthetic_bandit_log(&spec, 3).unwrap();
        let log = FlatLog::build(&out.sessions, SatisfactionScale::Raw, &LiteracyWeights::default());
        let mean_obj = log.turns.iter().map(|t| t.r_obj()).sum::<f64>() / log.len() as f64;
        let mut logged_value = 0.0;
        spec.walk(|ctx, w| {
            let b = spec.logging_probs(ctx);
            for a in ActionPair::all() {
                let arch = ctx.archetype();
                logged_value += w * b.prob(a) * (spec.expected_tool_reward(arch, a) + spec.expected_engagement(arch, a));
            }
        });
        assert!((mean_obj - logged_value).abs() < 0.02, "{mean_obj} vs {logged_value}");
    }

    #[test]
    fn oracle_propensities_respect_floor() {
        let spec = small(SynthSpec::default());
        let out = generate_synthetic_bandit_log(&spec, 1).unwrap();
        let log = FlatLog::build(&out.sessions, SatisfactionScale::Raw, &LiteracyWeights::default());
        let n = spec.oracle_nuisance(&log, 0.01);
        assert!(n.behavior.tool.iter().flatten().all(|p| *p >= 0.05));
        assert!(n.behavior.style.iter().flatten().all(|p| *p >= 0.05));
    }

    #[test]
    fn subgroup_harm_truth_has_sign_flip() {
        let spec = SynthSpec::subgroup_harm();
        let w = LiteracyWeights::default();
        let always = spec.ground_truth(&spec.always_tool_policy(), &w);
        let none = spec.ground_truth(&PolicySpec::NoTool, &w);
        let delta = |a: Archetype| {
            (
                always.archetype(a).r_obj.unwrap() - none.archetype(a).r_obj.unwrap(),
                always.archetype(a).r_user.unwrap() - none.archetype(a).r_user.unwrap(),
            )
        };
        let [lh_eh, lh_el, _, ll_eh] = Archetype::ALL;
        assert!(delta(lh_eh).0 > 0.3 && delta(lh_el).0 > 0.3);
        assert!(delta(ll_eh).0 < -0.3 && delta(ll_eh).1 < -0.5);
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = SynthSpec {
            archetype_mix: [0.5, 0.5, 0.5, 0.0],
            ..SynthSpec::default()
        };
        assert!(generate_synthetic_bandit_log(&spec, 0).is_err());
    }
}
