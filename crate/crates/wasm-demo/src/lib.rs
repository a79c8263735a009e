//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string; the page
//! parses it with `JSON.parse`. Errors surface as JS exceptions.

use coach_ope::features::{FlatLog, SatisfactionScale};
use coach_ope::ope::{evaluate_with, fit_nuisance, OpeConfig};
use coach_ope::rewards::{CuriositySchedule, LiteracyWeights};
use coach_ope::sim::{generate_synthetic_bandit_log, run_policy, simulate_episode, SimPolicy, SynthSpec};
use coach_ope::sim::SimConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_EPISODES: usize = 2000;
const MAX_SESSIONS: usize = 3000;

#[derive(Serialize)]
struct PolicyRow {
    policy: &'static str,
    final_return: f64,
    goal_success: f64,
    pass_at_3: f64,
    trait_id_turn: f64,
    archetype_alignment: f64,
}

fn parse_policy(name: &str) -> Result<SimPolicy, String> {
    name.parse()
}

fn schedule(lambda: f64, k: u32) -> Result<CuriositySchedule, String> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err("lambda must be a finite number >= 0".into());
    }
    Ok(CuriositySchedule::new(lambda, k))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo payloads serialize")
}

/// Runs all three simulator policies on the same paired episodes.
pub fn compare_policies(episodes: usize, lambda: f64, k: u32, seed: u64) -> Result<String, String> {
    if episodes == 0 || episodes > MAX_EPISODES {
        return Err(format!("episodes must be in 1..={MAX_EPISODES}"));
    }
    let sched = schedule(lambda, k)?;
    let cfg = SimConfig::default();
    let rows = [SimPolicy::Heuristic, SimPolicy::Personalized, SimPolicy::PersCuriosity]
        .into_iter()
        .map(|p| {
            let m = run_policy(&cfg, p, episodes, sched, seed).map_err(|e| e.to_string())?.metrics;
            Ok(PolicyRow {
                policy: p.label(),
                final_return: m.final_return,
                goal_success: m.goal_success,
                pass_at_3: m.pass_at_3,
                trait_id_turn: m.trait_id_turn,
                archetype_alignment: m.archetype_alignment,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json(&rows))
}

#[derive(Serialize)]
struct SliceRow {
    archetype: String,
    sessions: usize,
    estimated_delta_objective: Option<f64>,
    estimated_delta_satisfaction: Option<f64>,
    true_delta_objective: Option<f64>,
    true_delta_satisfaction: Option<f64>,
}

/// Generates a synthetic log and estimates AlwaysTool minus NoTool on each
/// archetype, next to the exact differences.
pub fn archetype_slices(preset: &str, sessions: usize, seed: u64) -> Result<String, String> {
    if !(20..=MAX_SESSIONS).contains(&sessions) {
        return Err(format!("sessions must be in 20..={MAX_SESSIONS}"));
    }
    let mut spec = SynthSpec::preset(preset).ok_or_else(|| format!("unknown preset {preset:?}"))?;
    spec.sessions = sessions;
    let out = generate_synthetic_bandit_log(&spec, seed).map_err(|e| e.to_string())?;
    let log = FlatLog::build(&out.sessions, SatisfactionScale::Raw, &LiteracyWeights::default());
    let cfg = OpeConfig {
        n_boot: 100,
        seed,
        ..OpeConfig::default()
    };
    let nuisance = fit_nuisance(&log, &cfg).map_err(|e| e.to_string())?;
    let (tool, none) = match (out.truth.get("AlwaysTool"), out.truth.get("NoTool")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err("preset lacks the AlwaysTool and NoTool policies".into()),
    };
    let report = evaluate_with(&log, &nuisance, std::slice::from_ref(&tool.spec), &none.spec, &cfg)
        .map_err(|e| e.to_string())?;
    let table = report.archetypes.first().ok_or("no archetype table")?;
    let rows: Vec<SliceRow> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (a, b) = (&tool.archetypes[i], &none.archetypes[i]);
            SliceRow {
                archetype: r.archetype.clone(),
                sessions: r.sessions,
                estimated_delta_objective: r.delta_objective,
                estimated_delta_satisfaction: r.delta_satisfaction,
                true_delta_objective: a.r_obj.zip(b.r_obj).map(|(x, y)| x - y),
                true_delta_satisfaction: a.r_user.zip(b.r_user).map(|(x, y)| x - y),
            }
        })
        .collect();
    Ok(json(&rows))
}

/// One episode with the per-turn archetype posterior.
pub fn episode_trace(policy: &str, lambda: f64, k: u32, seed: u64, episode: u64) -> Result<String, String> {
    let p = parse_policy(policy)?;
    let sched = match p {
        SimPolicy::PersCuriosity => schedule(lambda, k)?,
        _ => CuriositySchedule::off(),
    };
    let trace =
        simulate_episode(&SimConfig::default(), p, &sched, seed, episode, 0).map_err(|e| e.to_string())?;
    Ok(json(&trace))
}

#[wasm_bindgen(js_name = compareSimPolicies)]
pub fn compare_sim_policies_js(episodes: u32, lambda: f64, k: u32, seed: u32) -> Result<String, JsError> {
    compare_policies(episodes as usize, lambda, k, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = archetypeSlices)]
pub fn archetype_slices_js(preset: &str, sessions: u32, seed: u32) -> Result<String, JsError> {
    archetype_slices(preset, sessions as usize, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = episodeTrace)]
pub fn episode_trace_js(policy: &str, lambda: f64, k: u32, seed: u32, episode: u32) -> Result<String, JsError> {
    episode_trace(policy, lambda, k, u64::from(seed), u64::from(episode)).map_err(|e| JsError::new(&e))
}
