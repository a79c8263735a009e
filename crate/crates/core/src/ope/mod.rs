//! Off-policy estimates for target policies: SNIPS on the objective reward,
//! AIPW with rating-propensity correction on satisfaction, their
//! literacy-weighted total, session-bootstrap intervals, per-archetype
//! slices and overlap/calibration diagnostics.

mod bootstrap;
mod estimators;

pub use bootstrap::{bootstrap_ci, BootstrapInterval, MIN_REPLICATES};
pub use estimators::{
    aipw_terms, aipw_user, outcome_design, plain_ips_rated, snips, AipwInputs, AipwTerms,
    OutcomeModel, OUTCOME_DIM,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{
    self, fit_head_model, fit_rating_propensity, BehaviorError, BehaviorPropensities, FoldPlan, Head,
};
use crate::features::FlatLog;
use crate::model::{ActionPair, Archetype};
use crate::policies::{importance_ratio, HeadProbs, ImportanceRatio, PolicyError, PolicySpec};

#[derive(Debug, Error, PartialEq)]
pub enum OpeError {
    #[error("empty input")]
    Empty,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("all importance ratios are zero; the estimate is undefined")]
    AllZeroWeights,

    #[error("importance ratio must be finite and nonnegative, got {0}")]
    InvalidRatio(f64),

    #[error("bootstrap needs n_boot >= 100, got {0}")]
    TooFewReplicates(usize),

    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("estimator undefined on all {0} bootstrap replicates")]
    BootstrapFailed(usize),

    #[error(transparent)]
    Policy(#[from] PolicyError),

    #[error(transparent)]
    Behavior(#[from] BehaviorError),
}

/// Which reward the bootstrap interval is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTarget {
    Obj,
    User,
    #[default]
    Total,
}

impl std::str::FromStr for RewardTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "obj" => Ok(Self::Obj),
            "user" => Ok(Self::User),
            "total" => Ok(Self::Total),
            other => Err(format!("unknown reward {other:?}; expected obj, user or total")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpeConfig {
    pub clip: f64,
    pub n_boot: usize,
    pub level: f64,
    /// Session folds for cross-fitting; chosen from the session count when absent.
    pub folds: Option<usize>,
    pub propensity_floor: f64,
    pub policy_smoothing: f64,
    pub outcome_l2: f64,
    pub ece_bins: usize,
    pub reward: RewardTarget,
    pub seed: u64,
}

impl Default for OpeConfig {
    fn default() -> Self {
        Self {
            clip: crate::policies::DEFAULT_CLIP,
            n_boot: 1000,
            level: 0.95,
            folds: None,
            propensity_floor: behavior::DEFAULT_PROPENSITY_FLOOR,
            policy_smoothing: crate::policies::DEFAULT_POLICY_SMOOTHING,
            outcome_l2: 1.0,
            ece_bins: 10,
            reward: RewardTarget::Total,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensitySource {
    /// Cross-fitted reconstruction from the log.
    Fitted,
    /// Known logging and rating propensities (synthetic data only).
    Oracle,
}

/// Behavior-side fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_folds: usize,
    pub fold_sizes: Vec<usize>,
    pub ece_tool: Option<f64>,
    pub ece_style: Option<f64>,
    pub rating_auc: Option<f64>,
    pub no_selection: bool,
    pub tool_floor_hits: usize,
    pub style_floor_hits: usize,
    pub degenerate_heads: Vec<Head>,
    pub calibrated: bool,
}

/// Nuisance quantities shared by every target policy.
#[derive(Debug, Clone)]
pub struct Nuisance {
    pub behavior: BehaviorPropensities,
    pub rating_probs: Vec<f64>,
    pub outcome: OutcomeModel,
    pub source: PropensitySource,
    pub fit: Option<FitDiagnostics>,
}

pub fn resolve_folds(log: &FlatLog, cfg: &OpeConfig) -> usize {
    cfg.folds
        .unwrap_or_else(|| behavior::default_folds(log.n_sessions()))
}

/// Reconstructs behavior and rating propensities and fits the outcome
/// model, all cross-fitted on the same session folds.
pub fn fit_nuisance(log: &FlatLog, cfg: &OpeConfig) -> Result<Nuisance, OpeError> {
    let n_folds = resolve_folds(log, cfg);
    let folds = FoldPlan::new(log.n_sessions(), n_folds)?;
    let tool = fit_head_model(log, Head::Tool, n_folds, cfg.propensity_floor)?;
    let style = fit_head_model(log, Head::Style, n_folds, cfg.propensity_floor)?;
    let rating = fit_rating_propensity(log, n_folds, cfg.propensity_floor)?;
    let outcome = OutcomeModel::fit(log, &folds, cfg.outcome_l2);

    let mut fold_sizes = vec![0; n_folds];
    for f in folds.fold_of_turns(log) {
        fold_sizes[f] += 1;
    }
    let degenerate_heads = [&tool, &style]
        .iter()
        .filter(|m| m.degenerate)
        .map(|m| m.head)
        .collect();
    let fit = FitDiagnostics {
        n_folds,
        fold_sizes,
        ece_tool: tool.ece(log, cfg.ece_bins).ok(),
        ece_style: style.ece(log, cfg.ece_bins).ok(),
        rating_auc: rating.auc,
        no_selection: rating.no_selection,
        tool_floor_hits: tool.floor_hits,
        style_floor_hits: style.floor_hits,
        degenerate_heads,
        calibrated: tool.calibrated && style.calibrated,
    };
    Ok(Nuisance {
        behavior: BehaviorPropensities::from_models(&tool, &style),
        rating_probs: rating.probs,
        outcome,
        source: PropensitySource::Fitted,
        fit: Some(fit),
    })
}

/// Sums over one session that every estimator is a function of.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct SessionSums {
    n: f64,
    w: f64,
    w_obj: f64,
    w_obj_weighted: f64,
    dr_user: f64,
    dr_user_weighted: f64,
}

impl std::ops::AddAssign for SessionSums {
    fn add_assign(&mut self, o: Self) {
        self.n += o.n;
        self.w += o.w;
        self.w_obj += o.w_obj;
        self.w_obj_weighted += o.w_obj_weighted;
        self.dr_user += o.dr_user;
        self.dr_user_weighted += o.dr_user_weighted;
    }
}

impl SessionSums {
    fn estimate(&self, reward: RewardTarget) -> Result<f64, OpeError> {
        if self.n == 0.0 {
            return Err(OpeError::Empty);
        }
        let snips = |num: f64| {
            if self.w > 0.0 {
                Ok(num / self.w)
            } else {
                Err(OpeError::AllZeroWeights)
            }
        };
        match reward {
            RewardTarget::Obj => snips(self.w_obj),
            RewardTarget::User => Ok(self.dr_user / self.n),
            RewardTarget::Total => Ok(snips(self.w_obj_weighted)? + self.dr_user_weighted / self.n),
        }
    }
}

/// Per-turn ingredients of every estimate for one target policy.
#[derive(Debug, Clone)]
pub struct PolicyTerms {
    pub label: String,
    pub ratios: Vec<ImportanceRatio>,
    pub target: Vec<HeadProbs>,
    pub dr_user: Vec<f64>,
    pub dr_user_weighted: Vec<f64>,
    pub rating_floor_hits: usize,
    sessions: Vec<SessionSums>,
}

/// Clipped joint importance ratio for every logged turn.
pub fn turn_ratios(
    log: &FlatLog,
    behavior: &BehaviorPropensities,
    target: &[HeadProbs],
    clip: f64,
) -> Result<Vec<ImportanceRatio>, OpeError> {
    if target.len() != log.len() || behavior.len() != log.len() {
        return Err(OpeError::LengthMismatch(log.len(), target.len().min(behavior.len())));
    }
    log.turns
        .iter()
        .enumerate()
        .map(|(i, t)| {
            importance_ratio(
                &target[i],
                &behavior.tool[i],
                &behavior.style[i],
                t.action,
                clip,
                behavior.eps,
            )
            .map_err(OpeError::from)
        })
        .collect()
}

pub fn policy_terms(
    log: &FlatLog,
    nuisance: &Nuisance,
    label: impl Into<String>,
    target: Vec<HeadProbs>,
    clip: f64,
) -> Result<PolicyTerms, OpeError> {
    let ratios = turn_ratios(log, &nuisance.behavior, &target, clip)?;
    let w: Vec<f64> = ratios.iter().map(|r| r.clipped).collect();
    let actions: Vec<ActionPair> = log.turns.iter().map(|t| t.action).collect();
    let rewards: Vec<f64> = log.turns.iter().map(|t| t.r_user).collect();
    let rated: Vec<bool> = log.turns.iter().map(|t| t.rated).collect();
    let alpha: Vec<f64> = log.turns.iter().map(|t| t.weights.alpha).collect();
    let inputs = |scale| AipwInputs {
        target: &target,
        actions: &actions,
        outcome: &nuisance.outcome,
        rating_probs: &nuisance.rating_probs,
        ratios: &w,
        rewards: &rewards,
        rated: &rated,
        scale,
        floor: nuisance.behavior.eps,
    };
    let plain = aipw_terms(&inputs(None))?;
    let weighted = aipw_terms(&inputs(Some(&alpha)))?;

    let sessions = log
        .session_ranges
        .iter()
        .map(|range| {
            let mut s = SessionSums::default();
            for i in range.clone() {
                let t = &log.turns[i];
                s += SessionSums {
                    n: 1.0,
                    w: w[i],
                    w_obj: w[i] * t.r_obj(),
                    w_obj_weighted: w[i] * t.r_obj_weighted(),
                    dr_user: plain.per_turn[i],
                    dr_user_weighted: weighted.per_turn[i],
                };
            }
            s
        })
        .collect();
    Ok(PolicyTerms {
        label: label.into(),
        ratios,
        target,
        dr_user: plain.per_turn,
        dr_user_weighted: weighted.per_turn,
        rating_floor_hits: plain.floor_hits,
        sessions,
    })
}

impl PolicyTerms {
    pub fn weights(&self) -> Vec<f64> {
        self.ratios.iter().map(|r| r.clipped).collect()
    }

    fn sums<'a>(&self, sessions: impl IntoIterator<Item = &'a usize>) -> SessionSums {
        let mut total = SessionSums::default();
        for s in sessions {
            total += self.sessions[*s];
        }
        total
    }

    /// Estimate over a multiset of sessions (bootstrap resamples included).
    pub fn estimate_on(&self, sessions: &[usize], reward: RewardTarget) -> Result<f64, OpeError> {
        self.sums(sessions).estimate(reward)
    }

    pub fn estimate(&self, reward: RewardTarget) -> Result<f64, OpeError> {
        let all: Vec<usize> = (0..self.sessions.len()).collect();
        self.estimate_on(&all, reward)
    }

    /// SNIPS estimate of the unweighted objective `R_tool + R_eng`.
    pub fn r_obj(&self) -> Result<f64, OpeError> {
        self.estimate(RewardTarget::Obj)
    }

    /// AIPW estimate of satisfaction.
    pub fn r_user(&self) -> Result<f64, OpeError> {
        self.estimate(RewardTarget::User)
    }

    /// SNIPS of `beta R_tool + gamma R_eng` plus AIPW of `alpha R_user`,
    /// weights per turn by the user's literacy.
    pub fn r_total(&self) -> Result<f64, OpeError> {
        self.estimate(RewardTarget::Total)
    }

    pub fn bootstrap(
        &self,
        reward: RewardTarget,
        n_boot: usize,
        level: f64,
        seed: u64,
    ) -> Result<BootstrapInterval, OpeError> {
        bootstrap_ci(
            self.sessions.len(),
            |idx| self.estimate_on(idx, reward),
            n_boot,
            level,
            seed,
        )
    }
}

/// Clipping rate and effective sample size `(sum w)^2 / sum w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostics {
    pub n: usize,
    pub clip_hits: usize,
    pub clipping_rate: f64,
    pub effective_sample_size: f64,
    pub max_raw_ratio: f64,
    pub max_clipped_ratio: f64,
}

pub fn ratio_diagnostics(ratios: &[ImportanceRatio]) -> RatioDiagnostics {
    let n = ratios.len();
    let clip_hits = ratios.iter().filter(|r| r.clip_hit).count();
    let sum: f64 = ratios.iter().map(|r| r.clipped).sum();
    let sum_sq: f64 = ratios.iter().map(|r| r.clipped * r.clipped).sum();
    RatioDiagnostics {
        n,
        clip_hits,
        clipping_rate: if n == 0 { 0.0 } else { clip_hits as f64 / n as f64 },
        effective_sample_size: if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 },
        max_raw_ratio: ratios.iter().map(|r| r.raw).fold(0.0, f64::max),
        max_clipped_ratio: ratios.iter().map(|r| r.clipped).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBlock {
    pub sessions: usize,
    pub turns: usize,
    pub rating_rate: f64,
    pub propensity_source: PropensitySource,
    pub fit: Option<FitDiagnostics>,
    /// Users whose satisfaction could not be z-scored (fewer than two
    /// distinct ratings); their satisfaction reward is 0.
    pub users_without_rating_scale: Vec<String>,
}

pub fn diagnostics(log: &FlatLog, nuisance: &Nuisance) -> DiagnosticsBlock {
    let rated = log.turns.iter().filter(|t| t.rated).count();
    DiagnosticsBlock {
        sessions: log.n_sessions(),
        turns: log.len(),
        rating_rate: if log.is_empty() {
            0.0
        } else {
            rated as f64 / log.len() as f64
        },
        propensity_source: nuisance.source,
        fit: nuisance.fit.clone(),
        users_without_rating_scale: log.users_without_scale.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeDelta {
    pub archetype: String,
    pub present: bool,
    pub sessions: usize,
    pub turns: usize,
    /// SNIPS objective of policy A minus policy B on this archetype.
    pub delta_objective: Option<f64>,
    /// AIPW satisfaction of policy A minus policy B on this archetype.
    pub delta_satisfaction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-archetype differences `A - B`, each estimated on that archetype's
/// sessions only. Archetypes with no sessions are reported as absent.
pub fn slice_by_archetype(log: &FlatLog, a: &PolicyTerms, b: &PolicyTerms) -> Vec<ArchetypeDelta> {
    Archetype::ALL
        .iter()
        .map(|arch| {
            let sessions: Vec<usize> = (0..log.n_sessions())
                .filter(|s| log.session_archetypes[*s] == *arch)
                .collect();
            let turns = sessions.iter().map(|s| log.session_ranges[*s].len()).sum();
            if sessions.is_empty() {
                return ArchetypeDelta {
                    archetype: arch.label().into(),
                    present: false,
                    sessions: 0,
                    turns: 0,
                    delta_objective: None,
                    delta_satisfaction: None,
                    error: None,
                };
            }
            let delta = |reward| -> Result<f64, OpeError> {
                Ok(a.estimate_on(&sessions, reward)? - b.estimate_on(&sessions, reward)?)
            };
            let obj = delta(RewardTarget::Obj);
            let sat = delta(RewardTarget::User);
            let error = obj
                .as_ref()
                .err()
                .or(sat.as_ref().err())
                .map(ToString::to_string);
            ArchetypeDelta {
                archetype: arch.label().into(),
                present: true,
                sessions: sessions.len(),
                turns,
                delta_objective: obj.ok(),
                delta_satisfaction: sat.ok(),
                error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub policy: String,
    pub spec: Option<PolicySpec>,
    pub r_obj_snips: Option<f64>,
    pub r_user_aipw: Option<f64>,
    pub r_total: Option<f64>,
    /// Reward the interval below refers to.
    pub ci_reward: RewardTarget,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bootstrap: Option<BootstrapInterval>,
    pub ratios: RatioDiagnostics,
    pub rating_floor_hits: usize,
    pub errors: Vec<String>,
}

impl PolicyEstimate {
    pub fn point(&self, reward: RewardTarget) -> Option<f64> {
        match reward {
            RewardTarget::Obj => self.r_obj_snips,
            RewardTarget::User => self.r_user_aipw,
            RewardTarget::Total => self.r_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeTable {
    pub policy: String,
    pub baseline: String,
    pub rows: Vec<ArchetypeDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeReport {
    pub policies: Vec<PolicyEstimate>,
    pub archetypes: Vec<ArchetypeTable>,
    pub diagnostics: DiagnosticsBlock,
    pub caveats: Vec<String>,
}

impl OpeReport {
    pub fn has_failures(&self) -> bool {
        self.policies.iter().any(|p| !p.errors.is_empty())
    }
}

pub fn estimate_policy(
    terms: &PolicyTerms,
    spec: Option<&PolicySpec>,
    cfg: &OpeConfig,
    seed_index: u64,
) -> PolicyEstimate {
    let mut errors = Vec::new();
    let mut record = |r: Result<f64, OpeError>, what: &str| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    };
    let r_obj = record(terms.r_obj(), "r_obj");
    let r_user = record(terms.r_user(), "r_user");
    let r_total = record(terms.r_total(), "r_total");
    let point = match cfg.reward {
        RewardTarget::Obj => r_obj,
        RewardTarget::User => r_user,
        RewardTarget::Total => r_total,
    };
    let boot_seed = crate::rng::derive_seed(cfg.seed, crate::rng::BOOTSTRAP, &[seed_index]);
    let bootstrap = match point {
        Some(_) => match terms.bootstrap(cfg.reward, cfg.n_boot, cfg.level, boot_seed) {
            Ok(ci) => Some(ci),
            Err(e) => {
                errors.push(format!("bootstrap: {e}"));
                None
            }
        },
        None => None,
    };
    // A percentile interval can miss a skewed point estimate; the reported
    // bounds always bracket the point.
    let (ci_low, ci_high) = match (&bootstrap, point) {
        (Some(ci), Some(p)) => (Some(ci.low.min(p)), Some(ci.high.max(p))),
        _ => (None, None),
    };
    PolicyEstimate {
        policy: terms.label.clone(),
        spec: spec.cloned(),
        r_obj_snips: r_obj,
        r_user_aipw: r_user,
        r_total,
        ci_reward: cfg.reward,
        ci_low,
        ci_high,
        bootstrap,
        ratios: ratio_diagnostics(&terms.ratios),
        rating_floor_hits: terms.rating_floor_hits,
        errors,
    }
}

pub const BOOTSTRAP_CAVEAT: &str = "session bootstrap reuses the fitted propensity and outcome models in every replicate; intervals understate nuisance-model variance";
pub const SCALE_CAVEAT: &str = "r_obj (unweighted, SNIPS) and r_total (literacy-weighted, SNIPS + AIPW) use different compositions and are reported on their native scales; they do not sum";

/// Evaluates each policy against the shared nuisance fit and slices every
/// policy against `baseline` by archetype.
pub fn evaluate_with(
    log: &FlatLog,
    nuisance: &Nuisance,
    policies: &[PolicySpec],
    baseline: &PolicySpec,
    cfg: &OpeConfig,
) -> Result<OpeReport, OpeError> {
    if cfg.clip.is_nan() || cfg.clip <= 0.0 {
        return Err(PolicyError::InvalidClip(cfg.clip).into());
    }
    let terms_for = |spec: &PolicySpec| {
        spec.validate()?;
        policy_terms(
            log,
            nuisance,
            spec.label(),
            spec.evaluation_table(log, cfg.policy_smoothing),
            cfg.clip,
        )
    };
    let baseline_terms = terms_for(baseline)?;
    let mut estimates = Vec::new();
    let mut tables = Vec::new();
    for (i, spec) in policies.iter().enumerate() {
        let terms = terms_for(spec)?;
        estimates.push(estimate_policy(&terms, Some(spec), cfg, i as u64));
        tables.push(ArchetypeTable {
            policy: terms.label.clone(),
            baseline: baseline_terms.label.clone(),
            rows: slice_by_archetype(log, &terms, &baseline_terms),
        });
    }
    Ok(OpeReport {
        policies: estimates,
        archetypes: tables,
        diagnostics: diagnostics(log, nuisance),
        caveats: vec![BOOTSTRAP_CAVEAT.into(), SCALE_CAVEAT.into()],
    })
}

/// Fits the nuisance models from the log, then evaluates.
pub fn evaluate(
    log: &FlatLog,
    policies: &[PolicySpec],
    baseline: &PolicySpec,
    cfg: &OpeConfig,
) -> Result<OpeReport, OpeError> {
    let nuisance = fit_nuisance(log, cfg)?;
    evaluate_with(log, &nuisance, policies, baseline, cfg)
}

/// Target table equal to the behavior propensities, for on-policy checks.
pub fn behavior_as_target(behavior: &BehaviorPropensities) -> Vec<HeadProbs> {
    behavior
        .tool
        .iter()
        .zip(&behavior.style)
        .map(|(t, s)| HeadProbs { tool: *t, style: *s })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ratios(n: usize) -> Vec<ImportanceRatio> {
        (0..n).map(|_| ImportanceRatio::from_raw(1.0, 50.0)).collect()
    }

    #[test]
    fn unit_weights_full_ess_no_clipping() {
        let d = ratio_diagnostics(&unit_ratios(120));
        assert_eq!(d.clip_hits, 0);
        assert_eq!(d.clipping_rate, 0.0);
        assert!((d.effective_sample_size - 120.0).abs() < 1e-9);
    }

    #[test]
    fn one_clipped_ratio_among_349() {
        let mut r = unit_ratios(349);
        r.push(ImportanceRatio::from_raw(120.0, 50.0));
        let d = ratio_diagnostics(&r);
        assert_eq!(d.clip_hits, 1);
        assert!((d.clipping_rate - 1.0 / 350.0).abs() < 1e-15);
        assert!(d.clipping_rate <= 0.0029);
        assert_eq!(d.max_clipped_ratio, 50.0);
        assert_eq!(d.max_raw_ratio, 120.0);
    }

    #[test]
    fn concentrated_weight_has_unit_ess() {
        let mut r: Vec<ImportanceRatio> = (0..10).map(|_| ImportanceRatio::from_raw(0.0, 50.0)).collect();
        r[4] = ImportanceRatio::from_raw(3.0, 50.0);
        assert!((ratio_diagnostics(&r).effective_sample_size - 1.0).abs() < 1e-12);
    }

    #[test]
    fn session_sums_total_composition() {
        // Low-literacy oracle composition: 0.6 * (-1) + SNIPS(0.2 * 1 + 0.2 * 0).
        let s = SessionSums {
            n: 4.0,
            w: 4.0,
            w_obj: 4.0,
            w_obj_weighted: 4.0 * 0.2,
            dr_user: -4.0,
            dr_user_weighted: -4.0 * 0.6,
        };
        assert!((s.estimate(RewardTarget::Total).unwrap() + 0.4).abs() < 1e-12);
        let zero = SessionSums {
            n: 4.0,
            w: 4.0,
            ..SessionSums::default()
        };
        assert_eq!(zero.estimate(RewardTarget::Total).unwrap(), 0.0);
        let unweighted = SessionSums { w: 0.0, ..s };
        assert_eq!(unweighted.estimate(RewardTarget::Obj), Err(OpeError::AllZeroWeights));
    }
}
