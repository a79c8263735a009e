//! SNIPS and AIPW estimators and the cross-fitted outcome model.

use serde::{Deserialize, Serialize};

use super::OpeError;
use crate::behavior::FoldPlan;
use crate::features::{FlatLog, FEATURE_DIM};
use crate::linear::RidgeModel;
use crate::model::ActionPair;
use crate::policies::HeadProbs;

/// Self-normalized importance-weighted mean `sum w r / sum w`.
pub fn snips(ratios: &[f64], rewards: &[f64]) -> Result<f64, OpeError> {
    if ratios.len() != rewards.len() {
        return Err(OpeError::LengthMismatch(ratios.len(), rewards.len()));
    }
    if ratios.is_empty() {
        return Err(OpeError::Empty);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, r) in ratios.iter().zip(rewards) {
        if *w < 0.0 || !w.is_finite() {
            return Err(OpeError::InvalidRatio(*w));
        }
        if *w > 0.0 {
            num += w * r;
            den += w;
        }
    }
    if den <= 0.0 {
        return Err(OpeError::AllZeroWeights);
    }
    Ok(num / den)
}

/// Importance-weighted mean of observed satisfaction over rated turns,
/// with no correction for which turns were rated.
pub fn plain_ips_rated(ratios: &[f64], rewards: &[f64], rated: &[bool]) -> Result<f64, OpeError> {
    let n_rated = rated.iter().filter(|r| **r).count();
    if n_rated == 0 {
        return Err(OpeError::Empty);
    }
    let total: f64 = ratios
        .iter()
        .zip(rewards)
        .zip(rated)
        .filter(|(_, m)| **m)
        .map(|((w, r), _)| w * r)
        .sum();
    Ok(total / n_rated as f64)
}

/// Predicted satisfaction for every turn and every joint action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub per_turn: Vec<[f64; ActionPair::N_JOINT]>,
}

pub const OUTCOME_DIM: usize = FEATURE_DIM + ActionPair::N_JOINT * 5;

/// Features plus joint-action one-hots interacted with
/// (1, literacy, efficacy, literacy x efficacy, asked-to-explain).
pub fn outcome_design(features: &[f64; FEATURE_DIM], action: ActionPair) -> [f64; OUTCOME_DIM] {
    let mut row = [0.0; OUTCOME_DIM];
    row[..FEATURE_DIM].copy_from_slice(features);
    let lit = features[7];
    let eff = features[8];
    let explain = features[6];
    let base = FEATURE_DIM + action.joint_index() * 5;
    row[base] = 1.0;
    row[base + 1] = lit;
    row[base + 2] = eff;
    row[base + 3] = lit * eff;
    row[base + 4] = explain;
    row
}

impl OutcomeModel {
    pub fn zeros(n: usize) -> Self {
        Self {
            per_turn: vec![[0.0; ActionPair::N_JOINT]; n],
        }
    }

    pub fn from_fn(log: &FlatLog, f: impl Fn(usize, ActionPair) -> f64) -> Self {
        Self {
            per_turn: (0..log.len())
                .map(|i| {
                    let mut row = [0.0; ActionPair::N_JOINT];
                    for a in ActionPair::all() {
                        row[a.joint_index()] = f(i, a);
                    }
                    row
                })
                .collect(),
        }
    }

    /// Ridge regression of `r_user` on rated turns, cross-fitted on the
    /// session folds. Folds with no rated training turns predict 0.
    pub fn fit(log: &FlatLog, folds: &FoldPlan, l2: f64) -> Self {
        let designs: Vec<[f64; OUTCOME_DIM]> = log
            .turns
            .iter()
            .map(|t| outcome_design(&t.features.0, t.action))
            .collect();
        let fold_of_turn = folds.fold_of_turns(log);
        let models = crate::par::map_range(folds.n_folds, |k| {
            let (x, y): (Vec<&[f64]>, Vec<f64>) = log
                .turns
                .iter()
                .enumerate()
                .filter(|(i, t)| t.rated && fold_of_turn[*i] != k)
                .map(|(i, t)| (designs[i].as_slice(), t.r_user))
                .unzip();
            (!x.is_empty()).then(|| RidgeModel::fit(&x, &y, l2, Some(0)))
        });
        let per_turn = log
            .turns
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = [0.0; ActionPair::N_JOINT];
                if let Some(m) = &models[fold_of_turn[i]] {
                    for a in ActionPair::all() {
                        row[a.joint_index()] = m.predict(&outcome_design(&t.features.0, a));
                    }
                }
                row
            })
            .collect();
        Self { per_turn }
    }

    pub fn predict(&self, turn: usize, action: ActionPair) -> f64 {
        self.per_turn[turn][action.joint_index()]
    }

    /// `q(x, pi) = sum_a pi(a | x) q(x, a)`.
    pub fn policy_value(&self, turn: usize, target: &HeadProbs) -> f64 {
        ActionPair::all()
            .map(|a| target.prob(a) * self.predict(turn, a))
            .sum()
    }
}

/// Inputs of the satisfaction AIPW estimator, all indexed by turn.
pub struct AipwInputs<'a> {
    pub target: &'a [HeadProbs],
    pub actions: &'a [ActionPair],
    pub outcome: &'a OutcomeModel,
    pub rating_probs: &'a [f64],
    pub ratios: &'a [f64],
    pub rewards: &'a [f64],
    pub rated: &'a [bool],
    /// Per-turn multiplier applied to both the baseline and the residual
    /// (the literacy weight alpha for the total reward, else 1).
    pub scale: Option<&'a [f64]>,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AipwTerms {
    pub per_turn: Vec<f64>,
    /// Rated turns whose rating propensity was raised to the floor.
    pub floor_hits: usize,
}

impl AipwTerms {
    pub fn mean(&self) -> Result<f64, OpeError> {
        if self.per_turn.is_empty() {
            return Err(OpeError::Empty);
        }
        Ok(self.per_turn.iter().sum::<f64>() / self.per_turn.len() as f64)
    }
}

/// Per-turn AIPW terms
/// `q(x, pi) + (m / p_rate) w (r - q(x, a))`.
pub fn aipw_terms(inp: &AipwInputs<'_>) -> Result<AipwTerms, OpeError> {
    let n = inp.target.len();
    for len in [
        inp.actions.len(),
        inp.outcome.per_turn.len(),
        inp.rating_probs.len(),
        inp.ratios.len(),
        inp.rewards.len(),
        inp.rated.len(),
    ] {
        if len != n {
            return Err(OpeError::LengthMismatch(n, len));
        }
    }
    let mut floor_hits = 0;
    let per_turn = (0..n)
        .map(|t| {
            let s = inp.scale.map_or(1.0, |s| s[t]);
            let baseline = inp.outcome.policy_value(t, &inp.target[t]);
            let correction = if inp.rated[t] {
                let mut p = inp.rating_probs[t];
                if p < inp.floor {
                    p = inp.floor;
                    floor_hits += 1;
                }
                inp.ratios[t] * (inp.rewards[t] - inp.outcome.predict(t, inp.actions[t])) / p
            } else {
                0.0
            };
            s * (baseline + correction)
        })
        .collect();
    Ok(AipwTerms {
        per_turn,
        floor_hits,
    })
}

pub fn aipw_user(inp: &AipwInputs<'_>) -> Result<f64, OpeError> {
    aipw_terms(inp)?.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StyleChoice, ToolChoice};
    use proptest::prelude::*;

    #[test]
    fn snips_examples() {
        assert!((snips(&[1.0; 4], &[1.0, 0.0, -1.0, 1.0]).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(snips(&[2.0, 0.0], &[0.5, 9.9]).unwrap(), 0.5);
        assert_eq!(snips(&[0.0, 0.0], &[1.0, 2.0]), Err(OpeError::AllZeroWeights));
    }

    fn uniform_target(n: usize) -> Vec<HeadProbs> {
        vec![
            HeadProbs {
                tool: [0.25; 4],
                style: [0.5; 2]
            };
            n
        ]
    }

    #[test]
    fn aipw_unrated_is_model_average() {
        let n = 3;
        let target = uniform_target(n);
        let actions = vec![ActionPair::new(ToolChoice::None, StyleChoice::Concise); n];
        let outcome = OutcomeModel {
            per_turn: vec![[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], [0.0; 8], [-8.0; 8]],
        };
        let est = aipw_user(&AipwInputs {
            target: &target,
            actions: &actions,
            outcome: &outcome,
            rating_probs: &[0.5; 3],
            ratios: &[3.0; 3],
            rewards: &[10.0; 3],
            rated: &[false; 3],
            scale: None,
            floor: 0.01,
        })
        .unwrap();
        assert!((est - (4.5 + 0.0 - 8.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aipw_reduces_to_ips() {
        let n = 4;
        let target = uniform_target(n);
        let actions = vec![ActionPair::new(ToolChoice::Code, StyleChoice::Detailed); n];
        let ratios = [0.5, 2.0, 1.0, 4.0];
        let rewards = [1.0, -1.0, 0.3, 0.2];
        let est = aipw_user(&AipwInputs {
            target: &target,
            actions: &actions,
            outcome: &OutcomeModel::zeros(n),
            rating_probs: &[1.0; 4],
            ratios: &ratios,
            rewards: &rewards,
            rated: &[true; 4],
            scale: None,
            floor: 0.01,
        })
        .unwrap();
        let ips: f64 = ratios.iter().zip(&rewards).map(|(w, r)| w * r).sum::<f64>() / 4.0;
        assert!((est - ips).abs() < 1e-12);
    }

    #[test]
    fn rating_floor_counts_hits() {
        let target = uniform_target(2);
        let actions = vec![ActionPair::new(ToolChoice::None, StyleChoice::Concise); 2];
        let terms = aipw_terms(&AipwInputs {
            target: &target,
            actions: &actions,
            outcome: &OutcomeModel::zeros(2),
            rating_probs: &[0.001, 0.5],
            ratios: &[1.0, 1.0],
            rewards: &[1.0, 1.0],
            rated: &[true, true],
            scale: None,
            floor: 0.01,
        })
        .unwrap();
        assert_eq!(terms.floor_hits, 1);
        assert!((terms.per_turn[0] - 100.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn snips_scale_invariant_and_bounded(
            pairs in prop::collection::vec((0.0f64..10.0, -5.0f64..5.0), 1..50),
            c in 0.01f64..100.0,
        ) {
            let (w, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(w.iter().any(|v| *v > 0.0));
            let base = snips(&w, &r).unwrap();
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            prop_assert!((snips(&scaled, &r).unwrap() - base).abs() < 1e-9 * (1.0 + base.abs()));
            let support: Vec<f64> = w.iter().zip(&r).filter(|(w, _)| **w > 0.0).map(|(_, r)| *r).collect();
            let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(base >= lo - 1e-9 && base <= hi + 1e-9);
        }
    }
}
