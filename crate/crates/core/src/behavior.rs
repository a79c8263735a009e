//! Logging-policy reconstruction per decision head, rating propensities,
//! and the calibration/selection diagnostics (ECE, AUC).
//!
//! Every per-turn prediction comes from models that never saw the turn's
//! session: folds are assigned at session level, the base classifier for
//! fold `k` is trained on the other folds, and its sigmoid calibration map
//! is fitted on inner out-of-fold predictions that also exclude fold `k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FlatLog;
use crate::linear::{LogisticModel, LogisticOptions, PlattMap};
use crate::par;

pub const DEFAULT_PROPENSITY_FLOOR: f64 = 0.01;
pub const DEFAULT_L2: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("cross-fitting requires >=2 folds, got {0}")]
    TooFewFolds(usize),

    #[error("{sessions} sessions cannot fill {folds} folds")]
    TooFewSessions { sessions: usize, folds: usize },

    #[error("empty input")]
    Empty,

    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("labels contain a single class; AUC is undefined")]
    SingleClass,

    #[error("no turn is rated")]
    NoRatedTurns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Tool,
    Style,
}

impl Head {
    pub fn n_actions(self) -> usize {
        match self {
            Head::Tool => 4,
            Head::Style => 2,
        }
    }
}

/// Fold count used when the caller does not choose one.
pub fn default_folds(n_sessions: usize) -> usize {
    if n_sessions < 10 {
        3
    } else {
        5
    }
}

/// Session-level fold assignment (round robin over session order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub fold_of_session: Vec<usize>,
}

impl FoldPlan {
    pub fn new(n_sessions: usize, n_folds: usize) -> Result<Self, BehaviorError> {
        if n_folds < 2 {
            return Err(BehaviorError::TooFewFolds(n_folds));
        }
        if n_sessions < n_folds {
            return Err(BehaviorError::TooFewSessions {
                sessions: n_sessions,
                folds: n_folds,
            });
        }
        Ok(Self {
            n_folds,
            fold_of_session: (0..n_sessions).map(|s| s % n_folds).collect(),
        })
    }

    pub fn fold_of_turns(&self, log: &FlatLog) -> Vec<usize> {
        log.turns
            .iter()
            .map(|t| self.fold_of_session[t.session])
            .collect()
    }
}

/// Mixes a distribution toward uniform so every entry is at least `eps`:
/// `p' = eps + (1 - K eps) p`.
pub fn floor_distribution(probs: &mut [f64], eps: f64) {
    let k = probs.len() as f64;
    for p in probs.iter_mut() {
        *p = eps + (1.0 - k * eps) * *p;
    }
}

/// Classifier restricted to the classes present in its training labels.
#[derive(Debug, Clone)]
struct CompactClassifier {
    classes: Vec<usize>,
    model: Option<LogisticModel>,
    n_classes: usize,
}

impl CompactClassifier {
    fn fit(rows: &[&[f64]], labels: &[usize], n_classes: usize, l2: f64) -> Self {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Self {
                classes,
                model: None,
                n_classes,
            };
        }
        let compact: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label is present"))
            .collect();
        let model = LogisticModel::fit(
            rows,
            &compact,
            classes.len(),
            LogisticOptions {
                l2,
                ..LogisticOptions::default()
            },
        );
        Self {
            classes,
            model: Some(model),
            n_classes,
        }
    }

    fn predict(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        match &self.model {
            None => {
                if let Some(&c) = self.classes.first() {
                    out[c] = 1.0;
                } else {
                    out.iter_mut().for_each(|p| *p = 1.0 / self.n_classes as f64);
                }
            }
            Some(m) => {
                for (p, &c) in m.predict_proba(row).into_iter().zip(&self.classes) {
                    out[c] = p;
                }
            }
        }
        out
    }
}

/// Output of honest cross-fitting for one categorical target.
#[derive(Debug, Clone)]
pub struct CrossFit {
    /// Floored, calibrated distribution per turn.
    pub probs: Vec<Vec<f64>>,
    pub fold_of_turn: Vec<usize>,
    /// Folds whose labels fed the base model or calibrator of each fold.
    pub training_folds: Vec<Vec<usize>>,
    /// Calibration map per fold and class.
    pub calibration: Vec<Vec<PlattMap>>,
    pub calibrated: bool,
    /// Entries whose calibrated value fell below the floor before mixing.
    pub floor_hits: usize,
}

/// Cross-fits a calibrated classifier with session-level folds.
pub fn cross_fit(
    rows: &[&[f64]],
    labels: &[usize],
    n_classes: usize,
    fold_of_turn: &[usize],
    n_folds: usize,
    eps: f64,
    l2: f64,
) -> CrossFit {
    let fit_excluding = |excluded: (usize, Option<usize>)| {
        let (xs, ys): (Vec<&[f64]>, Vec<usize>) = rows
            .iter()
            .zip(labels)
            .zip(fold_of_turn)
            .filter(|(_, f)| **f != excluded.0 && Some(**f) != excluded.1)
            .map(|((r, l), _)| (*r, *l))
            .unzip();
        CompactClassifier::fit(&xs, &ys, n_classes, l2)
    };

    let calibrate = n_folds >= 3;
    let mut keys: Vec<(usize, Option<usize>)> = (0..n_folds).map(|k| (k, None)).collect();
    if calibrate {
        for a in 0..n_folds {
            for b in (a + 1)..n_folds {
                keys.push((a, Some(b)));
            }
        }
    }
    let fitted = par::map(&keys, |k| fit_excluding(*k));
    let models: BTreeMap<(usize, Option<usize>), CompactClassifier> =
        keys.into_iter().zip(fitted).collect();
    let pair = |a: usize, b: usize| &models[&(a.min(b), Some(a.max(b)))];

    let mut calibration = vec![vec![PlattMap::IDENTITY; n_classes]; n_folds];
    if calibrate {
        for (k, maps) in calibration.iter_mut().enumerate() {
            let mut inner: Vec<(Vec<f64>, usize)> = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let f = fold_of_turn[i];
                if f != k {
                    inner.push((pair(k, f).predict(row), labels[i]));
                }
            }
            for (c, map) in maps.iter_mut().enumerate() {
                let (p, y): (Vec<f64>, Vec<bool>) = inner
                    .iter()
                    .filter(|(probs, _)| probs[c] > 0.0)
                    .map(|(probs, l)| (probs[c], *l == c))
                    .unzip();
                *map = PlattMap::fit(&p, &y);
            }
        }
    }

    let mut floor_hits = 0;
    let mut probs = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let k = fold_of_turn[i];
        let raw = models[&(k, None)].predict(row);
        let mut p: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(c, &v)| if v > 0.0 { calibration[k][c].apply(v) } else { 0.0 })
            .collect();
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            p = raw;
        }
        floor_hits += p.iter().filter(|v| **v < eps).count();
        floor_distribution(&mut p, eps);
        probs.push(p);
    }

    let training_folds = (0..n_folds)
        .map(|k| (0..n_folds).filter(|f| *f != k).collect())
        .collect();
    CrossFit {
        probs,
        fold_of_turn: fold_of_turn.to_vec(),
        training_folds,
        calibration,
        calibrated: calibrate,
        floor_hits,
    }
}

/// Reconstructed logging propensities for one head.
#[derive(Debug, Clone)]
pub struct HeadPropensityModel {
    pub head: Head,
    pub eps: f64,
    pub probs: Vec<Vec<f64>>,
    pub folds: FoldPlan,
    pub fold_of_turn: Vec<usize>,
    pub training_folds: Vec<Vec<usize>>,
    pub calibrated: bool,
    /// Set when the log shows a single action for this head.
    pub degenerate: bool,
    pub floor_hits: usize,
}

impl HeadPropensityModel {
    pub fn observed_actions(&self, log: &FlatLog) -> Vec<usize> {
        head_labels(log, self.head)
    }

    /// ECE on the max-probability confidence.
    pub fn ece(&self, log: &FlatLog, n_bins: usize) -> Result<f64, BehaviorError> {
        let labels = head_labels(log, self.head);
        head_ece(&self.probs, &labels, n_bins)
    }
}

fn head_labels(log: &FlatLog, head: Head) -> Vec<usize> {
    log.turns
        .iter()
        .map(|t| match head {
            Head::Tool => t.action.tool.index(),
            Head::Style => t.action.style.index(),
        })
        .collect()
}

pub fn fit_head_model(
    log: &FlatLog,
    head: Head,
    n_folds: usize,
    eps: f64,
) -> Result<HeadPropensityModel, BehaviorError> {
    let folds = FoldPlan::new(log.n_sessions(), n_folds)?;
    let labels = head_labels(log, head);
    let fold_of_turn = folds.fold_of_turns(log);
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let degenerate = distinct.len() < 2;

    if degenerate {
        let mut p = vec![0.0; head.n_actions()];
        if let Some(&c) = distinct.first() {
            p[c] = 1.0;
        }
        floor_distribution(&mut p, eps);
        return Ok(HeadPropensityModel {
            head,
            eps,
            probs: vec![p; log.len()],
            training_folds: (0..n_folds)
                .map(|k| (0..n_folds).filter(|f| *f != k).collect())
                .collect(),
            folds,
            fold_of_turn,
            calibrated: false,
            degenerate,
            floor_hits: log.len() * (head.n_actions() - 1),
        });
    }

    let rows = log.feature_rows();
    let fit = cross_fit(
        &rows,
        &labels,
        head.n_actions(),
        &fold_of_turn,
        n_folds,
        eps,
        DEFAULT_L2,
    );
    Ok(HeadPropensityModel {
        head,
        eps,
        probs: fit.probs,
        folds,
        fold_of_turn: fit.fold_of_turn,
        training_folds: fit.training_folds,
        calibrated: fit.calibrated,
        degenerate,
        floor_hits: fit.floor_hits,
    })
}

/// Per-turn behavior propensities for both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPropensities {
    pub tool: Vec<[f64; 4]>,
    pub style: Vec<[f64; 2]>,
    pub eps: f64,
}

impl BehaviorPropensities {
    pub fn from_models(tool: &HeadPropensityModel, style: &HeadPropensityModel) -> Self {
        Self {
            tool: tool
                .probs
                .iter()
                .map(|p| [p[0], p[1], p[2], p[3]])
                .collect(),
            style: style.probs.iter().map(|p| [p[0], p[1]]).collect(),
            eps: tool.eps.min(style.eps),
        }
    }

    pub fn len(&self) -> usize {
        self.tool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tool.is_empty()
    }
}

/// Expected calibration error over equal-width confidence bins:
/// `sum_b (|b| / N) |acc(b) - conf(b)|`.
pub fn ece(probs: &[f64], labels: &[bool], n_bins: usize) -> Result<f64, BehaviorError> {
    if probs.is_empty() || n_bins == 0 {
        return Err(BehaviorError::Empty);
    }
    if probs.len() != labels.len() {
        return Err(BehaviorError::LengthMismatch(probs.len(), labels.len()));
    }
    let mut count = vec![0usize; n_bins];
    let mut conf = vec![CompensatedSum::default(); n_bins];
    let mut acc = vec![0.0; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(BehaviorError::InvalidProbability(p));
        }
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        conf[b].add(p);
        if y {
            acc[b] += 1.0;
        }
    }
    let n = probs.len() as f64;
    Ok((0..n_bins)
        .filter(|b| count[*b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (acc[b] / c - conf[b].value() / c).abs()
        })
        .sum())
}

/// Neumaier summation; keeps bin means of repeated values exact.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Multiclass ECE using the max-probability "confidence" convention.
pub fn head_ece(probs: &[Vec<f64>], labels: &[usize], n_bins: usize) -> Result<f64, BehaviorError> {
    if probs.len() != labels.len() {
        return Err(BehaviorError::LengthMismatch(probs.len(), labels.len()));
    }
    let (conf, correct): (Vec<f64>, Vec<bool>) = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let (arg, max) = p
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            (max.clamp(0.0, 1.0), arg == y)
        })
        .unzip();
    ece(&conf, &correct, n_bins)
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half (Mann-Whitney U over average ranks).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, BehaviorError> {
    if scores.len() != labels.len() {
        return Err(BehaviorError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(BehaviorError::Empty);
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(BehaviorError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Cross-fitted `P(rated | x_t)` per turn.
#[derive(Debug, Clone)]
pub struct RatingPropensityModel {
    pub probs: Vec<f64>,
    pub eps: f64,
    /// AUC of the cross-fitted predictions against the missingness labels;
    /// absent when every turn is rated.
    pub auc: Option<f64>,
    /// Every turn rated: the model is the constant `1 - eps`.
    pub no_selection: bool,
    pub fold_of_turn: Vec<usize>,
}

pub fn fit_rating_propensity(
    log: &FlatLog,
    n_folds: usize,
    eps: f64,
) -> Result<RatingPropensityModel, BehaviorError> {
    let folds = FoldPlan::new(log.n_sessions(), n_folds)?;
    let fold_of_turn = folds.fold_of_turns(log);
    let rated: Vec<bool> = log.turns.iter().map(|t| t.rated).collect();
    let n_rated = rated.iter().filter(|r| **r).count();
    if n_rated == 0 {
        return Err(BehaviorError::NoRatedTurns);
    }
    if n_rated == rated.len() {
        return Ok(RatingPropensityModel {
            probs: vec![1.0 - eps; log.len()],
            eps,
            auc: None,
            no_selection: true,
            fold_of_turn,
        });
    }
    let rows = log.feature_rows();
    let labels: Vec<usize> = rated.iter().map(|r| usize::from(*r)).collect();
    let fit = cross_fit(&rows, &labels, 2, &fold_of_turn, n_folds, eps, DEFAULT_L2);
    let probs: Vec<f64> = fit.probs.iter().map(|p| p[1]).collect();
    let auc = auc(&probs, &rated).ok();
    Ok(RatingPropensityModel {
        probs,
        eps,
        auc,
        no_selection: false,
        fold_of_turn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SatisfactionScale;
    use crate::model::{ActionPair, Level, LoggedTurn, Session, StyleChoice, ToolChoice, ToolOutcome, TurnFeatures, UserProfile};
    use crate::rewards::LiteracyWeights;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_log(n_sessions: usize, style: impl Fn(usize) -> StyleChoice) -> FlatLog {
        let sessions: Vec<Session> = (0..n_sessions)
            .map(|s| {
                let id = format!("s{s:03}");
                Session {
                    session_id: id.clone(),
                    user: UserProfile {
                        user_id: format!("u{}", s % 3),
                        literacy: if s % 2 == 0 { Level::High } else { Level::Low },
                        efficacy: Level::Low,
                    },
                    turns: (0..4)
                        .map(|t| LoggedTurn {
                            session_id: id.clone(),
                            features: TurnFeatures {
                                turn_index: t as u32 + 1,
                                latency_seconds: 5.0 + t as f64,
                                response_chars: 300,
                                has_citation: false,
                                has_structure: t % 2 == 0,
                                user_asked_explain: t == 1,
                            },
                            action: ActionPair::new(ToolChoice::None, style(s * 4 + t)),
                            outcome: ToolOutcome::NotInvoked,
                            rating: Some(4),
                        })
                        .collect(),
                }
            })
            .collect();
        FlatLog::build(&sessions, SatisfactionScale::Raw, &LiteracyWeights::default())
    }

    #[test]
    fn one_fold_is_rejected() {
        let log = tiny_log(6, |_| StyleChoice::Concise);
        assert_eq!(
            fit_head_model(&log, Head::Style, 1, 0.01).unwrap_err(),
            BehaviorError::TooFewFolds(1)
        );
        assert!(matches!(
            fit_head_model(&log, Head::Style, 7, 0.01),
            Err(BehaviorError::TooFewSessions { .. })
        ));
    }

    #[test]
    fn degenerate_style_head_is_floored() {
        let log = tiny_log(6, |_| StyleChoice::Concise);
        let model = fit_head_model(&log, Head::Style, 3, 0.01).unwrap();
        assert!(model.degenerate);
        for p in &model.probs {
            assert!((p[0] - 0.99).abs() < 1e-12);
            assert!((p[1] - 0.01).abs() < 1e-12);
        }
        let tool = fit_head_model(&log, Head::Tool, 3, 0.01).unwrap();
        assert!((tool.probs[0][0] - 0.97).abs() < 1e-12);
    }

    #[test]
    fn cross_fit_is_honest_and_proper() {
        let log = tiny_log(12, |i| if i % 3 == 0 { StyleChoice::Detailed } else { StyleChoice::Concise });
        let model = fit_head_model(&log, Head::Style, 4, 0.01).unwrap();
        assert!(model.calibrated);
        for (i, p) in model.probs.iter().enumerate() {
            let fold = model.fold_of_turn[i];
            assert_eq!(fold, model.folds.fold_of_session[log.turns[i].session]);
            assert!(!model.training_folds[fold].contains(&fold));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| *v >= 0.01 - 1e-15));
        }
    }

    #[test]
    fn default_fold_count() {
        assert_eq!(default_folds(9), 3);
        assert_eq!(default_folds(10), 5);
        assert_eq!(default_folds(23), 5);
    }

    #[test]
    fn ece_examples() {
        for n in [1, 40, 100, 10_000] {
            assert_eq!(ece(&vec![0.9; n], &vec![false; n], 10).unwrap(), 0.9);
        }
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        assert_eq!(ece(&[0.5; 40], &labels, 10).unwrap(), 0.0);
        assert_eq!(ece(&[], &[], 10), Err(BehaviorError::Empty));
    }

    #[test]
    fn ece_of_oracle_predictor_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (p, y): (Vec<f64>, Vec<bool>) = (0..10_000)
            .map(|_| {
                let p: f64 = rng.random();
                (p, rng.random::<f64>() < p)
            })
            .unzip();
        assert!(ece(&p, &y, 10).unwrap() <= 0.02);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), Err(BehaviorError::SingleClass));
    }

    /// Direct enumeration over positive/negative pairs.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..60).prop_filter_map("both classes", |v| {
            let has_pos = v.iter().any(|x| x.1);
            let has_neg = v.iter().any(|x| !x.1);
            (has_pos && has_neg).then(|| v.into_iter().map(|(s, l)| (f64::from(s) / 19.0, l)).unzip())
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pair_enumeration((s, l) in scored_labels()) {
            prop_assert!((auc(&s, &l).unwrap() - auc_pairs(&s, &l)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_to_monotone_transform((s, l) in scored_labels()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((auc(&s, &l).unwrap() - auc(&t, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ece_permutation_invariant((s, l) in scored_labels(), rot in 0usize..60) {
            let r = rot % s.len();
            let mut s2 = s.clone();
            let mut l2 = l.clone();
            s2.rotate_left(r);
            l2.rotate_left(r);
            prop_assert!((ece(&s, &l, 10).unwrap() - ece(&s2, &l2, 10).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ece_of_constant_predictor(c in 0.0f64..1.0, l in prop::collection::vec(any::<bool>(), 1..80)) {
            let p = vec![c; l.len()];
            let mean = l.iter().filter(|v| **v).count() as f64 / l.len() as f64;
            prop_assert!((ece(&p, &l, 10).unwrap() - (mean - c).abs()).abs() < 1e-12);
        }
    }
}
