use std::path::{Path, PathBuf};

use coach_ope::features::FlatLog;
use coach_ope::model::{log_to_string, parse_log, validate_sessions, Session, ValidationReport};
use coach_ope::ope::{
    diagnostics, evaluate_with, fit_nuisance, policy_terms, ratio_diagnostics, DiagnosticsBlock,
    OpeReport, RatioDiagnostics,
};
use coach_ope::policies::{PolicyError, PolicySpec};
use coach_ope::rewards::{CuriositySchedule, LiteracyWeights};
use coach_ope::sim::runner::{run_policy, EpisodeTrace, SimMetrics, SimPolicy};
use coach_ope::sim::synth::{generate_synthetic_bandit_log, GroundTruth};
use serde::Serialize;

use crate::config::{DiagnoseConfig, EvaluateConfig, SimulateConfig, SynthConfig};
use crate::report::{
    emit, ensure_dir, to_json, write_csv, Envelope, GENERATOR, SCHEMA_DIAGNOSE, SCHEMA_EVALUATE,
    SCHEMA_SIMULATE, SCHEMA_SYNTH, SCHEMA_TRUTH,
};
use crate::CliError;

fn read_log(path: &Path) -> Result<Vec<Session>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let sessions = parse_log(std::io::BufReader::new(file))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if sessions.is_empty() {
        return Err(CliError::data(format!("{}: log has no turns", path.display())));
    }
    Ok(sessions)
}

fn policy_error(e: PolicyError) -> CliError {
    match e {
        PolicyError::UnknownName(_) => CliError::usage(e.to_string()),
        other => CliError::data(other.to_string()),
    }
}

fn read_policy_file(path: &Path) -> Result<Vec<PolicySpec>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let specs = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    }
    .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    for s in &specs {
        PolicySpec::validate(s).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(specs)
}

/// Named policies come from the truth sidecar when it has them, so the
/// estimate and the exact value refer to the same policy.
fn resolve_policies(
    names: &[String],
    files: &[PathBuf],
    log: &FlatLog,
    truth: Option<&GroundTruth>,
) -> Result<Vec<PolicySpec>, CliError> {
    let mut out = Vec::new();
    for n in names {
        out.push(resolve_named(n, log, truth)?);
    }
    for f in files {
        out.extend(read_policy_file(f)?);
    }
    Ok(out)
}

fn resolve_named(name: &str, log: &FlatLog, truth: Option<&GroundTruth>) -> Result<PolicySpec, CliError> {
    let spec = PolicySpec::by_name(name, log);
    let label = match &spec {
        Ok(s) => s.label(),
        // AlwaysTool cannot be built from a log without tool turns, but the
        // sidecar may still define it.
        Err(PolicyError::NoToolTurns) => "AlwaysTool".to_string(),
        Err(_) => return spec.map_err(policy_error),
    };
    match truth.and_then(|t| t.get(&label)) {
        Some(p) => Ok(p.spec.clone()),
        None => spec.map_err(policy_error),
    }
}

fn read_truth(path: &Path) -> Result<GroundTruth, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::data(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(&e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    if value.get("schema").and_then(|s| s.as_str()) == Some(SCHEMA_TRUTH) {
        value = value["result"].take();
    }
    serde_json::from_value(value).map_err(|e| bad(&e))
}

#[derive(Debug, Serialize)]
struct TruthRow {
    policy: String,
    r_obj: Option<f64>,
    r_obj_truth: f64,
    r_obj_error: Option<f64>,
    r_user: Option<f64>,
    r_user_truth: f64,
    r_user_error: Option<f64>,
    r_total: Option<f64>,
    r_total_truth: f64,
    r_total_error: Option<f64>,
    ci_covers_truth: Option<bool>,
}

fn compare_truth(report: &OpeReport, truth: &GroundTruth) -> Vec<TruthRow> {
    report
        .policies
        .iter()
        .filter_map(|p| {
            let t = truth.get(&p.policy)?;
            let err = |est: Option<f64>, tv: f64| est.map(|e| e - tv);
            let ci_truth = match p.ci_reward {
                coach_ope::ope::RewardTarget::Obj => t.r_obj,
                coach_ope::ope::RewardTarget::User => t.r_user,
                coach_ope::ope::RewardTarget::Total => t.r_total,
            };
            Some(TruthRow {
                policy: p.policy.clone(),
                r_obj: p.r_obj_snips,
                r_obj_truth: t.r_obj,
                r_obj_error: err(p.r_obj_snips, t.r_obj),
                r_user: p.r_user_aipw,
                r_user_truth: t.r_user,
                r_user_error: err(p.r_user_aipw, t.r_user),
                r_total: p.r_total,
                r_total_truth: t.r_total,
                r_total_error: err(p.r_total, t.r_total),
                ci_covers_truth: p
                    .ci_low
                    .zip(p.ci_high)
                    .map(|(lo, hi)| lo <= ci_truth && ci_truth <= hi),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct EvaluateResult {
    validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    policies: Option<Vec<coach_ope::ope::PolicyEstimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    archetypes: Option<Vec<coach_ope::ope::ArchetypeTable>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<DiagnosticsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<Vec<TruthRow>>,
    caveats: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PolicyRow<'a> {
    policy: &'a str,
    r_obj_snips: Option<f64>,
    r_user_aipw: Option<f64>,
    r_total: Option<f64>,
    ci_reward: &'a str,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    effective_sample_size: f64,
    clipping_rate: f64,
}

#[derive(Debug, Serialize)]
struct ArchetypeRow<'a> {
    policy: &'a str,
    baseline: &'a str,
    archetype: &'a str,
    sessions: usize,
    turns: usize,
    delta_objective: Option<f64>,
    delta_satisfaction: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MetricRow {
    metric: String,
    value: String,
}

fn metric_rows(d: &DiagnosticsBlock, ratios: &[(String, RatioDiagnostics)]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let mut push = |m: &str, v: String| rows.push(MetricRow {
        metric: m.into(),
        value: v,
    });
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    push("sessions", d.sessions.to_string());
    push("turns", d.turns.to_string());
    push("rating_rate", d.rating_rate.to_string());
    if let Some(f) = &d.fit {
        push("folds", f.n_folds.to_string());
        push("ece_tool", opt(f.ece_tool));
        push("ece_style", opt(f.ece_style));
        push("rating_auc", opt(f.rating_auc));
        push("tool_floor_hits", f.tool_floor_hits.to_string());
        push("style_floor_hits", f.style_floor_hits.to_string());
    }
    for (label, r) in ratios {
        push(&format!("{label}.clipping_rate"), r.clipping_rate.to_string());
        push(&format!("{label}.effective_sample_size"), r.effective_sample_size.to_string());
        push(&format!("{label}.max_raw_ratio"), r.max_raw_ratio.to_string());
    }
    rows
}

fn reward_name(r: coach_ope::ope::RewardTarget) -> &'static str {
    match r {
        coach_ope::ope::RewardTarget::Obj => "obj",
        coach_ope::ope::RewardTarget::User => "user",
        coach_ope::ope::RewardTarget::Total => "total",
    }
}

fn evaluate_csv(dir: &Path, report: &OpeReport) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let policies: Vec<PolicyRow> = report
        .policies
        .iter()
        .map(|p| PolicyRow {
            policy: &p.policy,
            r_obj_snips: p.r_obj_snips,
            r_user_aipw: p.r_user_aipw,
            r_total: p.r_total,
            ci_reward: reward_name(p.ci_reward),
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            effective_sample_size: p.ratios.effective_sample_size,
            clipping_rate: p.ratios.clipping_rate,
        })
        .collect();
    write_csv(&dir.join("policies.csv"), &policies)?;
    let archetypes: Vec<ArchetypeRow> = report
        .archetypes
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |r| ArchetypeRow {
                policy: &t.policy,
                baseline: &t.baseline,
                archetype: &r.archetype,
                sessions: r.sessions,
                turns: r.turns,
                delta_objective: r.delta_objective,
                delta_satisfaction: r.delta_satisfaction,
            })
        })
        .collect();
    write_csv(&dir.join("archetypes.csv"), &archetypes)?;
    let ratios: Vec<(String, RatioDiagnostics)> =
        report.policies.iter().map(|p| (p.policy.clone(), p.ratios)).collect();
    write_csv(&dir.join("diagnostics.csv"), &metric_rows(&report.diagnostics, &ratios))
}

pub fn evaluate(cfg: &EvaluateConfig, out: Option<&Path>, csv_dir: Option<&Path>) -> Result<(), CliError> {
    let sessions = read_log(&cfg.log)?;
    let validation = validate_sessions(&sessions);
    let log = FlatLog::build(&sessions, cfg.estimator.scale, &LiteracyWeights::default());
    let truth = cfg.truth.as_deref().map(read_truth).transpose()?;
    let policies = resolve_policies(&cfg.policies, &cfg.policy_files, &log, truth.as_ref())?;
    let baseline = resolve_named(&cfg.baseline, &log, truth.as_ref())?;
    let ope = &cfg.estimator.ope;

    let write = |status, error: Option<String>, result: EvaluateResult| {
        let env = Envelope {
            schema: SCHEMA_EVALUATE,
            generator: GENERATOR,
            status,
            seed: ope.seed,
            config: cfg,
            error,
            result,
        };
        emit(&to_json(&env), out)
    };

    let nuisance = match fit_nuisance(&log, ope) {
        Ok(n) => n,
        Err(e) => {
            let msg = format!("propensity fit failed: {e}");
            let result = EvaluateResult {
                validation,
                policies: None,
                archetypes: None,
                diagnostics: None,
                truth: None,
                caveats: Vec::new(),
            };
            write("failed", Some(msg.clone()), result)?;
            return Err(CliError::estimation(msg));
        }
    };
    let report = evaluate_with(&log, &nuisance, &policies, &baseline, ope).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(dir) = csv_dir {
        evaluate_csv(dir, &report)?;
    }
    let failure = report.has_failures().then(|| {
        let failed: Vec<String> = report
            .policies
            .iter()
            .filter(|p| !p.errors.is_empty())
            .map(|p| format!("{}: {}", p.policy, p.errors.join("; ")))
            .collect();
        format!("estimation failed for {}", failed.join(" | "))
    });
    let result = EvaluateResult {
        validation,
        truth: truth.as_ref().map(|t| compare_truth(&report, t)),
        policies: Some(report.policies),
        archetypes: Some(report.archetypes),
        diagnostics: Some(report.diagnostics),
        caveats: report.caveats,
    };
    match failure {
        None => write("ok", None, result),
        Some(msg) => {
            write("failed", Some(msg.clone()), result)?;
            Err(CliError::estimation(msg))
        }
    }
}

#[derive(Debug, Serialize)]
struct PolicyOverlap {
    policy: String,
    ratios: RatioDiagnostics,
}

#[derive(Debug, Serialize)]
struct DiagnoseResult {
    validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<DiagnosticsBlock>,
    policies: Vec<PolicyOverlap>,
}

pub fn diagnose(cfg: &DiagnoseConfig, out: Option<&Path>, csv_dir: Option<&Path>) -> Result<(), CliError> {
    let sessions = read_log(&cfg.log)?;
    let validation = validate_sessions(&sessions);
    let log = FlatLog::build(&sessions, cfg.estimator.scale, &LiteracyWeights::default());
    let policies = resolve_policies(&cfg.policies, &cfg.policy_files, &log, None)?;
    let ope = &cfg.estimator.ope;
    let write = |status, error: Option<String>, result: &DiagnoseResult| {
        let env = Envelope {
            schema: SCHEMA_DIAGNOSE,
            generator: GENERATOR,
            status,
            seed: ope.seed,
            config: cfg,
            error,
            result,
        };
        emit(&to_json(&env), out)
    };
    let nuisance = match fit_nuisance(&log, ope) {
        Ok(n) => n,
        Err(e) => {
            let msg = format!("propensity fit failed: {e}");
            let result = DiagnoseResult {
                validation,
                diagnostics: None,
                policies: Vec::new(),
            };
            write("failed", Some(msg.clone()), &result)?;
            return Err(CliError::estimation(msg));
        }
    };
    let mut overlap = Vec::new();
    for spec in &policies {
        let target = spec.evaluation_table(&log, ope.policy_smoothing);
        let terms = policy_terms(&log, &nuisance, spec.label(), target, ope.clip)
            .map_err(|e| CliError::estimation(e.to_string()))?;
        overlap.push(PolicyOverlap {
            policy: terms.label.clone(),
            ratios: ratio_diagnostics(&terms.ratios),
        });
    }
    let result = DiagnoseResult {
        validation,
        diagnostics: Some(diagnostics(&log, &nuisance)),
        policies: overlap,
    };
    if let (Some(dir), Some(d)) = (csv_dir, &result.diagnostics) {
        ensure_dir(dir)?;
        let ratios: Vec<(String, RatioDiagnostics)> =
            result.policies.iter().map(|p| (p.policy.clone(), p.ratios)).collect();
        write_csv(&dir.join("diagnostics.csv"), &metric_rows(d, &ratios))?;
    }
    write("ok", None, &result)
}

#[derive(Debug, Serialize)]
struct SimRunReport {
    policy: SimPolicy,
    schedule: CuriositySchedule,
    metrics: SimMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<Vec<EpisodeTrace>>,
}

/// Curiosity minus personalized, on the same episode seeds.
#[derive(Debug, Serialize)]
struct PairedDelta {
    goal_success: f64,
    pass_at_3: f64,
    trait_id_turn: f64,
    trait_accuracy: f64,
    archetype_alignment: f64,
    final_return: f64,
}

#[derive(Debug, Serialize)]
struct SimulateResult {
    runs: Vec<SimRunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curiosity_vs_personalized: Option<PairedDelta>,
}

#[derive(Debug, Serialize)]
struct SimRow {
    policy: &'static str,
    lambda: f64,
    k: u32,
    episodes: usize,
    final_return: f64,
    goal_success: f64,
    pass_at_3: f64,
    trait_id_turn: f64,
    trait_accuracy: f64,
    archetype_alignment: f64,
}

pub fn simulate(cfg: &SimulateConfig, out: Option<&Path>, csv: Option<&Path>) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for &policy in &cfg.policies {
        let run = run_policy(&cfg.sim, policy, cfg.episodes, cfg.schedule, cfg.seed)
            .map_err(|e| CliError::estimation(e.to_string()))?;
        runs.push(SimRunReport {
            policy,
            schedule: run.schedule,
            metrics: run.metrics,
            traces: cfg.traces.then_some(run.traces),
        });
    }
    let find = |p: SimPolicy| runs.iter().find(|r| r.policy == p).map(|r| &r.metrics);
    let paired = match (find(SimPolicy::PersCuriosity), find(SimPolicy::Personalized)) {
        (Some(c), Some(p)) => Some(PairedDelta {
            goal_success: c.goal_success - p.goal_success,
            pass_at_3: c.pass_at_3 - p.pass_at_3,
            trait_id_turn: c.trait_id_turn - p.trait_id_turn,
            trait_accuracy: c.trait_accuracy - p.trait_accuracy,
            archetype_alignment: c.archetype_alignment - p.archetype_alignment,
            final_return: c.final_return - p.final_return,
        }),
        _ => None,
    };
    if let Some(path) = csv {
        let rows: Vec<SimRow> = runs
            .iter()
            .map(|r| SimRow {
                policy: r.policy.label(),
                lambda: r.schedule.lambda,
                k: r.schedule.horizon_k,
                episodes: r.metrics.episodes,
                final_return: r.metrics.final_return,
                goal_success: r.metrics.goal_success,
                pass_at_3: r.metrics.pass_at_3,
                trait_id_turn: r.metrics.trait_id_turn,
                trait_accuracy: r.metrics.trait_accuracy,
                archetype_alignment: r.metrics.archetype_alignment,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    let env = Envelope {
        schema: SCHEMA_SIMULATE,
        generator: GENERATOR,
        status: "ok",
        seed: cfg.seed,
        config: cfg,
        error: None,
        result: SimulateResult {
            runs,
            curiosity_vs_personalized: paired,
        },
    };
    emit(&to_json(&env), out)
}

/// `log.jsonl` -> `log.truth.json`.
pub fn default_truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "log".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.truth.json"))
}

#[derive(Debug, Serialize)]
struct SynthSummary<'a> {
    log: &'a Path,
    truth: &'a Path,
    sessions: usize,
    turns: usize,
}

pub fn synth(cfg: &SynthConfig, out: &Path, truth_path: Option<&Path>) -> Result<(), CliError> {
    let output = generate_synthetic_bandit_log(&cfg.spec, cfg.seed)
        .map_err(|e| CliError::data(e.to_string()))?;
    let truth_path = truth_path.map_or_else(|| default_truth_path(out), Path::to_path_buf);
    if truth_path == out {
        return Err(CliError::usage("--truth must differ from --out"));
    }
    emit(&log_to_string(&output.sessions), Some(out))?;
    let env = Envelope {
        schema: SCHEMA_TRUTH,
        generator: GENERATOR,
        status: "ok",
        seed: cfg.seed,
        config: cfg,
        error: None,
        result: &output.truth,
    };
    emit(&to_json(&env), Some(&truth_path))?;
    let summary = serde_json::json!({
        "schema": SCHEMA_SYNTH,
        "status": "ok",
        "seed": cfg.seed,
        "result": SynthSummary {
            log: out,
            truth: &truth_path,
            sessions: output.sessions.len(),
            turns: output.sessions.iter().map(|s| s.turns.len()).sum(),
        },
    });
    println!("{summary}");
    Ok(())
}
