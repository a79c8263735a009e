//! Simulator policies, episode rollouts and aggregate metrics.

use serde::{Deserialize, Serialize};

use super::{pending_task, posterior_update, sample_episode, user_step, Observation, SimConfig, SimError, SimTask, TurnDraws};
use crate::model::{ActionPair, Archetype, StyleChoice, ToolChoice, ToolOutcome};
use crate::rewards::{
    compose_reward, curiosity_bonus, engagement_from_parts, entropy_bits, tool_reward, total_signal,
    ArchetypePosterior, CuriositySchedule, RewardComponents,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPolicy {
    /// Task tool while a task is pending, otherwise no tool; detailed
    /// only right after the user asked to explain.
    Heuristic,
    /// Acts on the archetype posterior: style by the posterior probability
    /// of each preferred style, extra tools by the expected tool preference.
    Personalized,
    /// Personalized, except that on turns `t <= K` it picks the action with
    /// the largest expected posterior entropy reduction.
    PersCuriosity,
}

impl std::str::FromStr for SimPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "heuristic" => Ok(Self::Heuristic),
            "personalized" => Ok(Self::Personalized),
            "curiosity" | "pers_curiosity" | "perscuriosity" => Ok(Self::PersCuriosity),
            other => Err(format!(
                "unknown simulator policy {other:?}; expected heuristic, personalized or curiosity"
            )),
        }
    }
}

impl SimPolicy {
    pub fn label(self) -> &'static str {
        match self {
            SimPolicy::Heuristic => "heuristic",
            SimPolicy::Personalized => "personalized",
            SimPolicy::PersCuriosity => "curiosity",
        }
    }
}

/// Latency (seconds) of each tool and the extra cost of a detailed reply.
const LATENCY: [f64; 4] = [4.0, 14.0, 20.0, 9.0];
const DETAILED_LATENCY: f64 = 4.0;

fn personalized_action(cfg: &SimConfig, tasks: &[SimTask], post: &ArchetypePosterior) -> ActionPair {
    let p = post.probs();
    let tool = match pending_task(tasks) {
        Some(i) => tasks[i].kind.required_tool(),
        None => {
            let expected: f64 = p.iter().zip(&cfg.tool_preference).map(|(p, v)| p * v).sum();
            if expected > 0.0 {
                ToolChoice::Search
            } else {
                ToolChoice::None
            }
        }
    };
    let concise: f64 = Archetype::ALL
        .iter()
        .filter(|a| cfg.preferred_style[a.index()] == StyleChoice::Concise)
        .map(|a| p[a.index()])
        .sum();
    let style = if concise >= 0.5 {
        StyleChoice::Concise
    } else {
        StyleChoice::Detailed
    };
    ActionPair::new(tool, style)
}

/// Mutual information between the archetype and the next observation if
/// `action` is taken, in bits.
pub fn expected_information_gain(cfg: &SimConfig, post: &ArchetypePosterior, action: ActionPair) -> f64 {
    let h = post.entropy_bits();
    let mut gain = 0.0;
    for asked_explain in [false, true] {
        for self_directed in [false, true] {
            let obs = Observation {
                asked_explain,
                self_directed,
            };
            let lik = cfg.cues.likelihoods(action, &obs);
            let joint: Vec<f64> = post.probs().iter().zip(&lik).map(|(p, l)| p * l).collect();
            let p_obs: f64 = joint.iter().sum();
            if p_obs > 0.0 {
                let cond: Vec<f64> = joint.iter().map(|j| j / p_obs).collect();
                gain += p_obs * (h - entropy_bits(&cond));
            }
        }
    }
    gain.max(0.0)
}

fn curious_action(cfg: &SimConfig, tasks: &[SimTask], post: &ArchetypePosterior) -> ActionPair {
    let fallback = personalized_action(cfg, tasks, post);
    let gains: Vec<(ActionPair, f64)> = ActionPair::all()
        .map(|a| (a, expected_information_gain(cfg, post, a)))
        .collect();
    let best = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    // Among maximizers, keep as much of the personalized action as possible.
    let score = |a: ActionPair| u8::from(a.tool == fallback.tool) * 2 + u8::from(a.style == fallback.style);
    gains
        .iter()
        .filter(|(_, g)| *g >= best - 1e-12)
        .max_by_key(|(a, _)| (score(*a), std::cmp::Reverse(a.joint_index())))
        .map(|(a, _)| *a)
        .unwrap_or(fallback)
}

fn choose_action(
    cfg: &SimConfig,
    policy: SimPolicy,
    schedule: &CuriositySchedule,
    turn: u32,
    tasks: &[SimTask],
    post: &ArchetypePosterior,
    last: Option<Observation>,
) -> ActionPair {
    match policy {
        SimPolicy::Heuristic => {
            let tool = pending_task(tasks).map_or(ToolChoice::None, |i| tasks[i].kind.required_tool());
            let style = if last.is_some_and(|o| o.asked_explain) {
                StyleChoice::Detailed
            } else {
                StyleChoice::Concise
            };
            ActionPair::new(tool, style)
        }
        SimPolicy::Personalized => personalized_action(cfg, tasks, post),
        SimPolicy::PersCuriosity => {
            if schedule.is_active() && turn <= schedule.horizon_k {
                curious_action(cfg, tasks, post)
            } else {
                personalized_action(cfg, tasks, post)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u32,
    pub action: ActionPair,
    pub outcome: ToolOutcome,
    pub rating: u8,
    pub observation: Observation,
    pub task_progress: bool,
    pub posterior: ArchetypePosterior,
    /// `max{0, H(prev) - H(curr)}` in bits.
    pub info_gain: f64,
    /// `lambda_t * info_gain`.
    pub curiosity: f64,
    /// Literacy-weighted reward of the turn.
    pub reward: f64,
    /// `reward + curiosity`.
    pub signal: f64,
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    #[serde(rename = "return")]
    pub return_: f64,
    pub goal_success: bool,
    pub trait_id_turn: Option<u32>,
    pub trait_correct: bool,
    pub alignment_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: u64,
    pub rollout: u64,
    pub archetype: Archetype,
    pub tasks: Vec<SimTask>,
    pub turns: Vec<TurnRecord>,
    pub quit_turn: Option<u32>,
    pub metrics: EpisodeMetrics,
}

impl EpisodeTrace {
    /// Metrics derived from the per-turn records and the task list alone.
    pub fn recompute(&self, trait_id_threshold: f64) -> EpisodeMetrics {
        let mut remaining: Vec<u32> = self.tasks.iter().map(|t| t.steps_required).collect();
        for _ in self.turns.iter().filter(|r| r.task_progress) {
            if let Some(left) = remaining.iter_mut().find(|s| **s > 0) {
                *left -= 1;
            }
        }
        let n = self.turns.len();
        EpisodeMetrics {
            return_: self.turns.iter().map(|r| r.signal).sum(),
            goal_success: remaining.iter().all(|s| *s == 0),
            trait_id_turn: self
                .turns
                .iter()
                .find(|r| r.posterior.max_prob() >= trait_id_threshold)
                .map(|r| r.turn),
            trait_correct: self
                .turns
                .last()
                .is_some_and(|r| r.posterior.argmax() == self.archetype.index()),
            alignment_rate: if n == 0 {
                0.0
            } else {
                self.turns.iter().filter(|r| r.aligned).count() as f64 / n as f64
            },
        }
    }
}

/// Runs one rollout of one episode. Episodes share the hidden archetype
/// and tasks across rollouts; turn draws depend on `(episode, rollout,
/// turn)` only, so different policies see the same randomness.
pub fn simulate_episode(
    cfg: &SimConfig,
    policy: SimPolicy,
    schedule: &CuriositySchedule,
    seed: u64,
    episode: u64,
    rollout: u64,
) -> Result<EpisodeTrace, SimError> {
    let (mut state, mut tasks) = sample_episode(cfg, seed, episode);
    let arch = state.archetype;
    let weights = cfg.weights.for_literacy(arch.literacy);
    let mut post = ArchetypePosterior::uniform();
    let mut last = None;
    let mut turns = Vec::with_capacity(cfg.horizon as usize);
    let mut quit_turn = None;
    while !state.terminated {
        let t = state.turn + 1;
        let action = choose_action(cfg, policy, schedule, t, &tasks, &post, last);
        let draws = TurnDraws::for_turn(seed, episode, rollout, t);
        let step = user_step(cfg, &mut state, &mut tasks, action, &draws)?;
        let next = posterior_update(&post, &cfg.cues.likelihoods(action, &step.observation))?;
        let info_gain = curiosity_bonus(&post, &next);
        let latency = LATENCY[action.tool.index()]
            + if action.style == StyleChoice::Detailed {
                DETAILED_LATENCY
            } else {
                0.0
            };
        let components = RewardComponents {
            r_user: (f64::from(step.rating) - 3.0) / 2.0,
            r_tool: tool_reward(action.tool, step.outcome).expect("simulated outcomes are consistent"),
            r_eng: engagement_from_parts(
                latency,
                action.style == StyleChoice::Detailed,
                action.tool == ToolChoice::Search && step.outcome == ToolOutcome::Success,
                action.tool,
            ),
        };
        let reward = compose_reward(weights, components);
        turns.push(TurnRecord {
            turn: t,
            action,
            outcome: step.outcome,
            rating: step.rating,
            observation: step.observation,
            task_progress: step.task_progress,
            posterior: next,
            info_gain,
            curiosity: schedule.weight(t) * info_gain,
            reward,
            signal: total_signal(reward, t, schedule, info_gain),
            aligned: cfg.is_aligned(arch, action),
        });
        if step.quit {
            quit_turn = Some(t);
        }
        post = next;
        last = Some(step.observation);
    }
    let mut trace = EpisodeTrace {
        episode,
        rollout,
        archetype: arch,
        tasks,
        turns,
        quit_turn,
        metrics: EpisodeMetrics {
            return_: 0.0,
            goal_success: false,
            trait_id_turn: None,
            trait_correct: false,
            alignment_rate: 0.0,
        },
    };
    trace.metrics = trace.recompute(cfg.trait_id_threshold);
    Ok(trace)
}

/// Aggregates over episodes (rollout 0), with pass@k over all rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub episodes: usize,
    pub final_return: f64,
    pub goal_success: f64,
    /// Episodes where at least one of the `rollouts` independent rollouts
    /// reached the goal.
    pub pass_at_3: f64,
    pub rollouts: usize,
    /// Mean trait-identification turn, with never-identified episodes
    /// counted at `horizon + 1`.
    pub trait_id_turn: f64,
    /// Mean over identified episodes only; absent if none were.
    pub trait_id_turn_identified: Option<f64>,
    pub trait_identified_rate: f64,
    pub trait_accuracy: f64,
    pub archetype_alignment: f64,
    pub quit_rate: f64,
    pub mean_turns: f64,
}

impl SimMetrics {
    pub fn from_episodes(groups: &[Vec<EpisodeTrace>], horizon: u32) -> Self {
        let n = groups.len().max(1) as f64;
        let main = groups.iter().filter_map(|g| g.first());
        let mut m = SimMetrics {
            episodes: groups.len(),
            final_return: 0.0,
            goal_success: 0.0,
            pass_at_3: 0.0,
            rollouts: groups.first().map_or(0, Vec::len),
            trait_id_turn: 0.0,
            trait_id_turn_identified: None,
            trait_identified_rate: 0.0,
            trait_accuracy: 0.0,
            archetype_alignment: 0.0,
            quit_rate: 0.0,
            mean_turns: 0.0,
        };
        let mut identified = 0usize;
        let mut identified_sum = 0.0;
        let mut aligned = 0usize;
        let mut turns = 0usize;
        for tr in main {
            let e = &tr.metrics;
            m.final_return += e.return_;
            m.goal_success += f64::from(u8::from(e.goal_success));
            m.trait_accuracy += f64::from(u8::from(e.trait_correct));
            m.quit_rate += f64::from(u8::from(tr.quit_turn.is_some()));
            match e.trait_id_turn {
                Some(t) => {
                    identified += 1;
                    identified_sum += f64::from(t);
                    m.trait_id_turn += f64::from(t);
                }
                None => m.trait_id_turn += f64::from(horizon + 1),
            }
            aligned += tr.turns.iter().filter(|r| r.aligned).count();
            turns += tr.turns.len();
        }
        m.pass_at_3 = groups
            .iter()
            .filter(|g| g.iter().any(|t| t.metrics.goal_success))
            .count() as f64
            / n;
        m.final_return /= n;
        m.goal_success /= n;
        m.trait_accuracy /= n;
        m.quit_rate /= n;
        m.trait_id_turn /= n;
        m.trait_identified_rate = identified as f64 / n;
        m.trait_id_turn_identified = (identified > 0).then(|| identified_sum / identified as f64);
        m.archetype_alignment = if turns == 0 { 0.0 } else { aligned as f64 / turns as f64 };
        m.mean_turns = turns as f64 / n;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub policy: SimPolicy,
    pub schedule: CuriositySchedule,
    pub seed: u64,
    pub metrics: SimMetrics,
    /// Rollout 0 of every episode.
    pub traces: Vec<EpisodeTrace>,
}

/// Runs `n_episodes` paired episodes. The schedule drives both the
/// curiosity term of the return and the probing turns of
/// [`SimPolicy::PersCuriosity`]; the other policies run with the bonus off.
pub fn run_policy(
    cfg: &SimConfig,
    policy: SimPolicy,
    n_episodes: usize,
    schedule: CuriositySchedule,
    seed: u64,
) -> Result<SimRun, SimError> {
    cfg.validate()?;
    if n_episodes == 0 {
        return Err(SimError::InvalidConfig("n_episodes must be >= 1".into()));
    }
    let schedule = match policy {
        SimPolicy::PersCuriosity => schedule,
        _ => CuriositySchedule::off(),
    };
    let groups = crate::par::map_range(n_episodes, |e| {
        (0..cfg.rollouts as u64)
            .map(|r| simulate_episode(cfg, policy, &schedule, seed, e as u64, r))
            .collect::<Result<Vec<_>, _>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let metrics = SimMetrics::from_episodes(&groups, cfg.horizon);
    Ok(SimRun {
        policy,
        schedule,
        seed,
        metrics,
        traces: groups.into_iter().filter_map(|g| g.into_iter().next()).collect(),
    })
}
