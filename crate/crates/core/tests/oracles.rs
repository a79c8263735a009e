//! Hand-computed values and invariants through the public API.

use coach_ope::behavior::{auc, ece, floor_distribution};
use coach_ope::model::{log_to_string, parse_log_str, ActionPair, StyleChoice, ToolChoice, ToolOutcome};
use coach_ope::ope::{plain_ips_rated, snips};
use coach_ope::policies::{importance_ratio, HeadProbs};
use coach_ope::rewards::{
    compose_reward, curiosity_bonus, engagement_from_parts, tool_reward, ArchetypePosterior, RewardComponents,
    WeightTriple,
};
use coach_ope::sim::{generate_synthetic_bandit_log, posterior_update, SynthSpec};
use proptest::prelude::*;

const EPS: f64 = 1e-12;

#[test]
fn snips_of_three_turns() {
    // (2*1 + 1*0 + 1*(-1)) / (2 + 1 + 1)
    let v = snips(&[2.0, 1.0, 1.0], &[1.0, 0.0, -1.0]).unwrap();
    assert!((v - 0.25).abs() < EPS);
}

#[test]
fn snips_rejects_bad_input() {
    assert!(snips(&[], &[]).is_err());
    assert!(snips(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    assert!(snips(&[1.0], &[1.0, 2.0]).is_err());
    assert!(snips(&[-1.0], &[1.0]).is_err());
}

#[test]
fn plain_ips_divides_by_rated_count() {
    let v = plain_ips_rated(&[2.0, 1.0, 4.0], &[3.0, 5.0, 9.0], &[true, true, false]).unwrap();
    assert!((v - (6.0 + 5.0) / 2.0).abs() < EPS);
}

#[test]
fn tool_rubric_and_composition() {
    assert_eq!(tool_reward(ToolChoice::Search, ToolOutcome::Success).unwrap(), 1.0);
    assert_eq!(tool_reward(ToolChoice::Code, ToolOutcome::Failure).unwrap(), -1.0);
    assert_eq!(tool_reward(ToolChoice::None, ToolOutcome::NotInvoked).unwrap(), 0.0);
    assert!(tool_reward(ToolChoice::None, ToolOutcome::Success).is_err());

    let c = RewardComponents {
        r_user: 0.5,
        r_tool: 1.0,
        r_eng: -0.1,
    };
    let low = compose_reward(WeightTriple::LOW_LITERACY, c);
    assert!((low - (0.6 * 0.5 + 0.2 * 1.0 - 0.2 * 0.1)).abs() < EPS);
}

#[test]
fn engagement_by_hand() {
    // -0.2 * 5/30 + 0.2 + 0.2
    let fast = engagement_from_parts(5.0, true, true, ToolChoice::Search);
    assert!((fast - (0.4 - 0.2 / 6.0)).abs() < EPS);
    // latency term saturates at 1.5
    assert!((engagement_from_parts(60.0, false, false, ToolChoice::None) + 0.3).abs() < EPS);
    // a citation without Search earns nothing
    let code = engagement_from_parts(20.0, true, true, ToolChoice::Code);
    assert!((code - (0.2 - 0.2 * 20.0 / 30.0)).abs() < EPS);
}

#[test]
fn ratio_multiplies_heads() {
    let target = HeadProbs {
        tool: [0.0, 0.5, 0.5, 0.0],
        style: [1.0, 0.0],
    };
    let a = ActionPair::new(ToolChoice::Code, StyleChoice::Concise);
    let r = importance_ratio(&target, &[0.25; 4], &[0.5, 0.5], a, 50.0, 0.01).unwrap();
    assert!((r.raw - 4.0).abs() < EPS);
    assert!(!r.clip_hit);
    let r = importance_ratio(&target, &[0.25; 4], &[0.5, 0.5], a, 3.0, 0.01).unwrap();
    assert_eq!((r.clipped, r.clip_hit), (3.0, true));
    assert!(importance_ratio(&target, &[0.25; 4], &[0.5, 0.5], a, 0.0, 0.01).is_err());
}

#[test]
fn auc_and_ece_examples() {
    assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
    assert_eq!(auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
    assert_eq!(ece(&[0.9; 50], &[false; 50], 10).unwrap(), 0.9);
    // two bins: |0.2 - 0| and |0.8 - 1| each on half the mass
    let e = ece(&[0.2, 0.2, 0.8, 0.8], &[false, false, true, true], 2).unwrap();
    assert!((e - 0.2).abs() < EPS);
}

#[test]
fn posterior_update_and_bonus() {
    let prior = ArchetypePosterior::uniform();
    let post = posterior_update(&prior, &[0.8, 0.8, 0.2, 0.2]).unwrap();
    assert!((post.probs()[0] - 0.4).abs() < EPS);
    assert!((post.probs()[3] - 0.1).abs() < EPS);
    let h = -(2.0 * 0.4 * 0.4f64.log2() + 2.0 * 0.1 * 0.1f64.log2());
    assert!((curiosity_bonus(&prior, &post) - (2.0 - h)).abs() < EPS);
    assert_eq!(curiosity_bonus(&post, &prior), 0.0);
    assert!(posterior_update(&prior, &[0.0; 4]).is_err());
}

#[test]
fn synthetic_log_round_trips_through_text() {
    let spec = SynthSpec {
        sessions: 12,
        ..SynthSpec::default()
    };
    let out = generate_synthetic_bandit_log(&spec, 8).unwrap();
    let text = log_to_string(&out.sessions);
    assert_eq!(parse_log_str(&text).unwrap(), out.sessions);
    assert_eq!(text, log_to_string(&generate_synthetic_bandit_log(&spec, 8).unwrap().sessions));
}

proptest! {
    #[test]
    fn floored_distribution_stays_proper(raw in prop::array::uniform4(0.0f64..1.0), eps in 0.001f64..0.2) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let mut p = raw.map(|v| v / total);
        floor_distribution(&mut p, eps);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| *v >= eps - 1e-12));
    }

    #[test]
    fn snips_lies_within_reward_range(
        pairs in prop::collection::vec((0.01f64..50.0, -1.0f64..1.0), 1..64)
    ) {
        let (w, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let v = snips(&w, &r).unwrap();
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn posterior_stays_normalized(lik in prop::array::uniform4(0.01f64..1.0)) {
        let post = posterior_update(&ArchetypePosterior::uniform(), &lik).unwrap();
        prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
