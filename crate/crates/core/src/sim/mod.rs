//! Hidden-archetype user simulator with verifiable tool tasks.
//!
//! A policy sees only the turn index, task progress and the cues in the
//! user's replies, never the archetype. It acts through the (Tool, Style)
//! heads and nothing else. The user rates each turn from an
//! archetype-conditioned rubric, may lose patience and leave, and emits two
//! cues whose informativeness depends on the action: a request to explain
//! (reveals literacy, mostly after a tool call) and a self-directed
//! follow-up (reveals efficacy, mostly after a concise reply).

pub mod runner;
pub mod synth;

pub use runner::{
    expected_information_gain, run_policy, simulate_episode, EpisodeMetrics, EpisodeTrace, SimMetrics, SimPolicy,
    SimRun, TurnRecord,
};
pub use synth::{generate_synthetic_bandit_log, GroundTruth, PolicyTruth, SynthOutput, SynthSpec};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionPair, Archetype, Level, StyleChoice, ToolChoice, ToolOutcome};
use crate::rewards::{ArchetypePosterior, LiteracyWeights};
use crate::rng::{self, StreamRng};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("episode has terminated")]
    Terminated,

    #[error("observation has zero likelihood under every archetype")]
    DegenerateLikelihood,

    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Rolling-window statistics over a health timeseries table.
    TimeseriesAnalysis,
    /// A wellness reminder set through an API, with a timestamp.
    WellnessApi,
}

impl TaskKind {
    pub fn required_tool(self) -> ToolChoice {
        match self {
            TaskKind::TimeseriesAnalysis => ToolChoice::Code,
            TaskKind::WellnessApi => ToolChoice::Email,
        }
    }

    pub fn end_state(self) -> &'static str {
        match self {
            TaskKind::TimeseriesAnalysis => "rolling-window table computed",
            TaskKind::WellnessApi => "reminder scheduled with timestamp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTask {
    pub kind: TaskKind,
    pub steps_required: u32,
    pub steps_done: u32,
}

impl SimTask {
    pub fn completed(&self) -> bool {
        self.steps_done >= self.steps_required
    }
}

/// Cue probabilities by the relevant trait level `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueModel {
    /// `P(asks to explain | literacy)` after a tool call.
    pub explain_after_tool: [f64; 2],
    pub explain_without_tool: [f64; 2],
    /// `P(self-directed follow-up | efficacy)` after a concise reply.
    pub self_directed_after_concise: [f64; 2],
    pub self_directed_after_detailed: [f64; 2],
}

impl Default for CueModel {
    fn default() -> Self {
        Self {
            explain_after_tool: [0.7, 0.15],
            explain_without_tool: [0.35, 0.25],
            self_directed_after_concise: [0.2, 0.75],
            self_directed_after_detailed: [0.3, 0.45],
        }
    }
}

fn level_slot(l: Level) -> usize {
    match l {
        Level::Low => 0,
        Level::High => 1,
    }
}

impl CueModel {
    pub fn explain_prob(&self, literacy: Level, tool: ToolChoice) -> f64 {
        let table = if tool.is_invoked() {
            self.explain_after_tool
        } else {
            self.explain_without_tool
        };
        table[level_slot(literacy)]
    }

    pub fn self_directed_prob(&self, efficacy: Level, style: StyleChoice) -> f64 {
        let table = match style {
            StyleChoice::Concise => self.self_directed_after_concise,
            StyleChoice::Detailed => self.self_directed_after_detailed,
        };
        table[level_slot(efficacy)]
    }

    /// Likelihood of an observation under each archetype.
    pub fn likelihoods(&self, action: ActionPair, obs: &Observation) -> [f64; 4] {
        Archetype::ALL.map(|a| {
            let pe = self.explain_prob(a.literacy, action.tool);
            let ps = self.self_directed_prob(a.efficacy, action.style);
            (if obs.asked_explain { pe } else { 1.0 - pe }) * (if obs.self_directed { ps } else { 1.0 - ps })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: u32,
    pub tasks_per_episode: usize,
    /// Steps needed to finish a timeseries task and a wellness task.
    pub steps_required: [u32; 2],
    pub archetype_prior: [f64; 4],
    /// Success probability of Search, Code and Email.
    pub tool_success: [f64; 3],
    pub base_rating: f64,
    /// Rating shift from any tool call, per archetype.
    pub tool_preference: [f64; 4],
    pub preferred_style: [StyleChoice; 4],
    pub style_match_bonus: f64,
    pub style_mismatch_penalty: f64,
    pub failure_penalty: f64,
    pub rating_noise_sd: f64,
    /// Chance the user accepts a successful tool result delivered in the
    /// wrong style.
    pub mismatch_accept: f64,
    /// Patience budget; each turn rated below 3 costs `3 - rating`. `None`
    /// disables quitting.
    pub patience: Option<f64>,
    pub cues: CueModel,
    pub trait_id_threshold: f64,
    pub rollouts: usize,
    pub weights: LiteracyWeights,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            tasks_per_episode: 2,
            steps_required: [2, 1],
            archetype_prior: [0.25; 4],
            tool_success: [0.816, 0.807, 0.857],
            base_rating: 4.0,
            tool_preference: [0.2, 0.6, -0.3, -1.0],
            preferred_style: [
                StyleChoice::Concise,
                StyleChoice::Detailed,
                StyleChoice::Detailed,
                StyleChoice::Concise,
            ],
            style_match_bonus: 0.3,
            style_mismatch_penalty: 0.5,
            failure_penalty: 1.0,
            rating_noise_sd: 0.5,
            mismatch_accept: 0.2,
            patience: Some(3.0),
            cues: CueModel::default(),
            trait_id_threshold: 0.8,
            rollouts: 3,
            weights: LiteracyWeights::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.horizon == 0 || self.tasks_per_episode == 0 || self.rollouts == 0 {
            return bad("horizon, tasks_per_episode and rollouts must be >= 1".into());
        }
        let is_prob = |p: &f64| (0.0..=1.0).contains(p);
        let prior: f64 = self.archetype_prior.iter().sum();
        if !self.archetype_prior.iter().all(is_prob) || (prior - 1.0).abs() > 1e-9 {
            return bad(format!("archetype_prior must be a distribution, sums to {prior}"));
        }
        let c = &self.cues;
        let probs = self
            .tool_success
            .iter()
            .chain([&self.mismatch_accept])
            .chain(c.explain_after_tool.iter())
            .chain(c.explain_without_tool.iter())
            .chain(c.self_directed_after_concise.iter())
            .chain(c.self_directed_after_detailed.iter());
        for p in probs {
            if !is_prob(p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if !(self.trait_id_threshold > 0.25 && self.trait_id_threshold <= 1.0) {
            return bad("trait_id_threshold must be in (0.25, 1]".into());
        }
        if self.rating_noise_sd < 0.0 || self.steps_required.contains(&0) {
            return bad("rating_noise_sd must be >= 0 and steps_required >= 1".into());
        }
        Ok(())
    }

    pub fn success_prob(&self, tool: ToolChoice) -> f64 {
        if tool.is_invoked() {
            self.tool_success[tool.index() - 1]
        } else {
            0.0
        }
    }

    /// Whether the archetype's preferred profile uses tools.
    pub fn prefers_tools(&self, a: Archetype) -> bool {
        self.tool_preference[a.index()] > 0.0
    }

    pub fn is_aligned(&self, a: Archetype, action: ActionPair) -> bool {
        action.tool.is_invoked() == self.prefers_tools(a) && action.style == self.preferred_style[a.index()]
    }

    /// Rubric mean before noise and rounding.
    pub fn rating_mean(&self, a: Archetype, action: ActionPair, outcome: ToolOutcome) -> f64 {
        let mut m = self.base_rating;
        if action.tool.is_invoked() {
            m += self.tool_preference[a.index()];
        }
        m += if action.style == self.preferred_style[a.index()] {
            self.style_match_bonus
        } else {
            -self.style_mismatch_penalty
        };
        if outcome == ToolOutcome::Failure {
            m -= self.failure_penalty;
        }
        m
    }
}

/// What the policy observes after a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub asked_explain: bool,
    pub self_directed: bool,
}

/// Hidden user state. The archetype never reaches a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUserState {
    pub archetype: Archetype,
    pub patience: Option<f64>,
    pub satisfaction: f64,
    pub turn: u32,
    pub terminated: bool,
}

/// Uniform draws consumed by one user turn; sharing them across policies
/// gives paired comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnDraws {
    pub tool_success: f64,
    pub accept: f64,
    pub explain: f64,
    pub self_directed: f64,
    pub rating_noise: f64,
}

impl TurnDraws {
    pub fn sample(r: &mut impl Rng) -> Self {
        Self {
            tool_success: r.random(),
            accept: r.random(),
            explain: r.random(),
            self_directed: r.random(),
            rating_noise: StandardNormal.sample(r),
        }
    }

    pub fn for_turn(seed: u64, episode: u64, rollout: u64, turn: u32) -> Self {
        let mut r = rng::substream(seed, rng::SIMULATION, &[1, episode, rollout, u64::from(turn)]);
        Self::sample(&mut r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub rating: u8,
    pub outcome: ToolOutcome,
    /// A pending task advanced by one accepted step.
    pub task_progress: bool,
    pub quit: bool,
}

fn episode_rng(seed: u64, episode: u64) -> StreamRng {
    rng::substream(seed, rng::SIMULATION, &[0, episode])
}

/// Draws the hidden archetype and the task list of episode `episode`.
pub fn sample_episode(config: &SimConfig, seed: u64, episode: u64) -> (SimUserState, Vec<SimTask>) {
    let mut r = episode_rng(seed, episode);
    let u: f64 = r.random();
    let mut acc = 0.0;
    let mut archetype = None;
    for (i, p) in config.archetype_prior.iter().enumerate() {
        acc += p;
        if u < acc && *p > 0.0 {
            archetype = Some(Archetype::from_index(i));
            break;
        }
    }
    let archetype = archetype.unwrap_or_else(|| {
        Archetype::from_index(config.archetype_prior.iter().rposition(|p| *p > 0.0).unwrap_or(0))
    });
    let tasks = (0..config.tasks_per_episode)
        .map(|_| {
            let kind = if r.random::<bool>() {
                TaskKind::TimeseriesAnalysis
            } else {
                TaskKind::WellnessApi
            };
            SimTask {
                kind,
                steps_required: config.steps_required[match kind {
                    TaskKind::TimeseriesAnalysis => 0,
                    TaskKind::WellnessApi => 1,
                }],
                steps_done: 0,
            }
        })
        .collect();
    let state = SimUserState {
        archetype,
        patience: config.patience,
        satisfaction: 0.0,
        turn: 0,
        terminated: false,
    };
    (state, tasks)
}

pub fn pending_task(tasks: &[SimTask]) -> Option<usize> {
    tasks.iter().position(|t| !t.completed())
}

/// Advances the user by one turn.
pub fn user_step(
    config: &SimConfig,
    state: &mut SimUserState,
    tasks: &mut [SimTask],
    action: ActionPair,
    draws: &TurnDraws,
) -> Result<StepResult, SimError> {
    if state.terminated || state.turn >= config.horizon {
        return Err(SimError::Terminated);
    }
    state.turn += 1;
    let a = state.archetype;
    let outcome = if !action.tool.is_invoked() {
        ToolOutcome::NotInvoked
    } else if draws.tool_success < config.success_prob(action.tool) {
        ToolOutcome::Success
    } else {
        ToolOutcome::Failure
    };
    let mut task_progress = false;
    if let Some(i) = pending_task(tasks) {
        let style_ok = action.style == config.preferred_style[a.index()];
        if outcome == ToolOutcome::Success
            && action.tool == tasks[i].kind.required_tool()
            && (style_ok || draws.accept < config.mismatch_accept)
        {
            tasks[i].steps_done += 1;
            task_progress = true;
        }
    }
    let raw = config.rating_mean(a, action, outcome) + config.rating_noise_sd * draws.rating_noise;
    let rating = raw.round().clamp(1.0, 5.0) as u8;
    let observation = Observation {
        asked_explain: draws.explain < config.cues.explain_prob(a.literacy, action.tool),
        self_directed: draws.self_directed < config.cues.self_directed_prob(a.efficacy, action.style),
    };
    state.satisfaction += f64::from(rating);
    let mut quit = false;
    if let Some(p) = state.patience.as_mut() {
        *p -= (3.0 - f64::from(rating)).max(0.0);
        quit = *p <= 0.0;
    }
    state.terminated = quit || state.turn >= config.horizon;
    Ok(StepResult {
        observation,
        rating,
        outcome,
        task_progress,
        quit,
    })
}

/// Bayes rule over the four archetypes.
pub fn posterior_update(prior: &ArchetypePosterior, likelihoods: &[f64; 4]) -> Result<ArchetypePosterior, SimError> {
    let joint: Vec<f64> = prior.probs().iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    let z: f64 = joint.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(SimError::DegenerateLikelihood);
    }
    let probs = [joint[0] / z, joint[1] / z, joint[2] / z, joint[3] / z];
    ArchetypePosterior::new(probs).map_err(|_| SimError::DegenerateLikelihood)
}
