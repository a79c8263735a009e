use std::path::{Path, PathBuf};

use coach_ope::features::SatisfactionScale;
use coach_ope::ope::{OpeConfig, RewardTarget};
use coach_ope::policies::NAMED_POLICIES;
use coach_ope::rewards::CuriositySchedule;
use coach_ope::sim::runner::SimPolicy;
use coach_ope::sim::synth::{SynthSpec, PRESETS};
use coach_ope::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::args::{DiagnoseArgs, EstimatorArgs, EvaluateArgs, SimulateArgs, SynthArgs};
use crate::CliError;

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub estimator: EstimatorFile,
    pub evaluate: LogFile,
    pub diagnose: LogFile,
    pub simulate: SimulateFile,
    pub synth: SynthFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorFile {
    pub clip: Option<f64>,
    pub n_boot: Option<usize>,
    pub level: Option<f64>,
    pub folds: Option<usize>,
    pub eps: Option<f64>,
    pub smoothing: Option<f64>,
    pub reward: Option<String>,
    pub scale: Option<String>,
    pub ece_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogFile {
    pub log: Option<PathBuf>,
    pub policies: Option<Vec<String>>,
    pub policy_files: Option<Vec<PathBuf>>,
    pub baseline: Option<String>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateFile {
    pub policies: Option<Vec<String>>,
    pub lambda: Option<f64>,
    pub k: Option<u32>,
    pub episodes: Option<usize>,
    pub traces: Option<bool>,
    /// Simulator parameters; missing fields take their defaults.
    pub sim: Option<SimConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthFile {
    pub preset: Option<String>,
    pub spec: Option<PathBuf>,
    pub sessions: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

/// Resolved estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSettings {
    pub ope: OpeConfig,
    pub scale: SatisfactionScale,
}

impl EstimatorSettings {
    /// `raw_default` selects the satisfaction scale used when none is given.
    fn resolve(
        a: &EstimatorArgs,
        f: &EstimatorFile,
        seed: Option<u64>,
        raw_default: bool,
    ) -> Result<Self, CliError> {
        let d = OpeConfig::default();
        let reward = match a.reward.as_ref().or(f.reward.as_ref()) {
            Some(s) => s.parse::<RewardTarget>().map_err(CliError::usage)?,
            None => d.reward,
        };
        let scale = match a.scale.as_deref().or(f.scale.as_deref()) {
            None if raw_default => SatisfactionScale::Raw,
            None | Some("zscore") => SatisfactionScale::Zscore,
            Some("raw") => SatisfactionScale::Raw,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "unknown scale {other:?}; expected zscore or raw"
                )))
            }
        };
        let ope = OpeConfig {
            clip: a.clip.or(f.clip).unwrap_or(d.clip),
            n_boot: a.n_boot.or(f.n_boot).unwrap_or(d.n_boot),
            level: a.level.or(f.level).unwrap_or(d.level),
            folds: a.folds.or(f.folds),
            propensity_floor: a.eps.or(f.eps).unwrap_or(d.propensity_floor),
            policy_smoothing: a.smoothing.or(f.smoothing).unwrap_or(d.policy_smoothing),
            outcome_l2: d.outcome_l2,
            ece_bins: a.ece_bins.or(f.ece_bins).unwrap_or(d.ece_bins),
            reward,
            seed: a.seed.or(seed).unwrap_or(d.seed),
        };
        let s = Self { ope, scale };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), CliError> {
        let o = &self.ope;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::usage(msg)) };
        check(o.clip.is_finite() && o.clip > 0.0, "clip must be > 0")?;
        check(o.n_boot >= 100, "n_boot must be >= 100")?;
        check(o.level > 0.0 && o.level < 1.0, "level must be in (0, 1)")?;
        check(o.folds.is_none_or(|k| k >= 2), "folds must be >= 2")?;
        check(
            o.propensity_floor > 0.0 && o.propensity_floor < 0.25,
            "eps must be in (0, 0.25)",
        )?;
        check(
            (0.0..0.25).contains(&o.policy_smoothing),
            "smoothing must be in [0, 0.25)",
        )?;
        check(o.ece_bins >= 1, "ece_bins must be >= 1")
    }
}

fn check_policy_names(names: &[String]) -> Result<(), CliError> {
    for n in names {
        let key = n.to_ascii_lowercase().replace('-', "_");
        let known = NAMED_POLICIES.contains(&key.as_str())
            || ["notool", "alwaystool", "heuristicgated", "heuristic", "personalizedweights", "personalized"]
                .contains(&key.as_str());
        if !known {
            return Err(CliError::usage(format!(
                "unknown policy {n:?}; expected one of {}",
                NAMED_POLICIES.join(", ")
            )));
        }
    }
    Ok(())
}

fn named_or_default(flags: &[String], file: Option<&Vec<String>>, files: &[PathBuf]) -> Vec<String> {
    if !flags.is_empty() {
        return flags.to_vec();
    }
    if let Some(f) = file {
        return f.clone();
    }
    if files.is_empty() {
        NAMED_POLICIES.iter().map(|s| s.to_string()).collect()
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateConfig {
    pub log: PathBuf,
    pub policies: Vec<String>,
    pub policy_files: Vec<PathBuf>,
    pub baseline: String,
    pub truth: Option<PathBuf>,
    pub estimator: EstimatorSettings,
}

impl EvaluateConfig {
    pub fn resolve(a: &EvaluateArgs, f: &FileConfig) -> Result<Self, CliError> {
        let log = a
            .log
            .clone()
            .or(f.evaluate.log.clone())
            .ok_or_else(|| CliError::usage("evaluate needs --log"))?;
        let policy_files = if a.policy_files.is_empty() {
            f.evaluate.policy_files.clone().unwrap_or_default()
        } else {
            a.policy_files.clone()
        };
        let policies = named_or_default(&a.policies, f.evaluate.policies.as_ref(), &policy_files);
        check_policy_names(&policies)?;
        let baseline = a
            .baseline
            .clone()
            .or(f.evaluate.baseline.clone())
            .unwrap_or_else(|| "no_tool".into());
        check_policy_names(std::slice::from_ref(&baseline))?;
        let truth = a.truth.clone().or(f.evaluate.truth.clone());
        let estimator = EstimatorSettings::resolve(&a.estimator, &f.estimator, f.seed, truth.is_some())?;
        if truth.is_some() && estimator.scale != SatisfactionScale::Raw {
            return Err(CliError::usage(
                "--truth values are on the raw rating scale; use --scale raw",
            ));
        }
        Ok(Self {
            log,
            policies,
            policy_files,
            baseline,
            truth,
            estimator,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseConfig {
    pub log: PathBuf,
    pub policies: Vec<String>,
    pub policy_files: Vec<PathBuf>,
    pub estimator: EstimatorSettings,
}

impl DiagnoseConfig {
    pub fn resolve(a: &DiagnoseArgs, f: &FileConfig) -> Result<Self, CliError> {
        let log = a
            .log
            .clone()
            .or(f.diagnose.log.clone())
            .ok_or_else(|| CliError::usage("diagnose needs --log"))?;
        let policy_files = if a.policy_files.is_empty() {
            f.diagnose.policy_files.clone().unwrap_or_default()
        } else {
            a.policy_files.clone()
        };
        let policies = named_or_default(&a.policies, f.diagnose.policies.as_ref(), &policy_files);
        check_policy_names(&policies)?;
        Ok(Self {
            log,
            policies,
            policy_files,
            estimator: EstimatorSettings::resolve(&a.estimator, &f.estimator, f.seed, false)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub policies: Vec<SimPolicy>,
    pub schedule: CuriositySchedule,
    pub episodes: usize,
    pub seed: u64,
    pub traces: bool,
    pub sim: SimConfig,
}

impl SimulateConfig {
    pub fn resolve(a: &SimulateArgs, f: &FileConfig) -> Result<Self, CliError> {
        let s = &f.simulate;
        let seed = a
            .seed
            .or(f.seed)
            .ok_or_else(|| CliError::usage("simulate needs --seed"))?;
        let names = if a.policies.is_empty() {
            s.policies.clone().unwrap_or_else(|| {
                ["heuristic", "personalized", "curiosity"].map(String::from).to_vec()
            })
        } else {
            a.policies.clone()
        };
        let mut policies = Vec::new();
        for n in &names {
            let p: SimPolicy = n.parse().map_err(CliError::usage)?;
            if !policies.contains(&p) {
                policies.push(p);
            }
        }
        let d = CuriositySchedule::default();
        let schedule = CuriositySchedule::new(
            a.lambda.or(s.lambda).unwrap_or(d.lambda),
            a.k.or(s.k).unwrap_or(d.horizon_k),
        );
        if !(schedule.lambda.is_finite() && schedule.lambda >= 0.0) {
            return Err(CliError::usage("lambda must be >= 0"));
        }
        let episodes = a.episodes.or(s.episodes).unwrap_or(200);
        if episodes == 0 {
            return Err(CliError::usage("episodes must be >= 1"));
        }
        let mut sim = s.sim.clone().unwrap_or_default();
        if let Some(h) = a.horizon {
            sim.horizon = h;
        }
        if let Some(r) = a.rollouts {
            sim.rollouts = r;
        }
        sim.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(Self {
            policies,
            schedule,
            episodes,
            seed,
            traces: a.traces || s.traces.unwrap_or(false),
            sim,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub preset: Option<String>,
    pub spec_file: Option<PathBuf>,
    pub seed: u64,
    pub spec: SynthSpec,
}

impl SynthConfig {
    pub fn resolve(a: &SynthArgs, f: &FileConfig) -> Result<Self, CliError> {
        let s = &f.synth;
        let seed = a
            .seed
            .or(f.seed)
            .ok_or_else(|| CliError::usage("synth needs --seed"))?;
        let (preset, spec_file) = match (&a.preset, &a.spec) {
            (Some(p), _) => (Some(p.clone()), None),
            (None, Some(path)) => (None, Some(path.clone())),
            (None, None) => (s.preset.clone(), s.spec.clone()),
        };
        let mut spec = match (&preset, &spec_file) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage("give either a preset or a spec file, not both"))
            }
            (Some(name), None) => SynthSpec::preset(name).ok_or_else(|| {
                CliError::usage(format!(
                    "unknown preset {name:?}; expected one of {}",
                    PRESETS.join(", ")
                ))
            })?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::data(format!("spec {}: {e}", path.display())))?
            }
            (None, None) => SynthSpec::default(),
        };
        if let Some(n) = a.sessions.or(s.sessions) {
            spec.sessions = n;
        }
        if spec.sessions == 0 {
            return Err(CliError::usage("sessions must be >= 1"));
        }
        spec.validate().map_err(|e| CliError::data(e.to_string()))?;
        Ok(Self {
            preset,
            spec_file,
            seed,
            spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(clip: Option<f64>) -> EstimatorArgs {
        EstimatorArgs {
            clip,
            ..EstimatorArgs::default()
        }
    }

    #[test]
    fn flags_override_file_over_defaults() {
        let f = FileConfig::parse("seed = 9\n[estimator]\nclip = 20.0\nn_boot = 500\n").unwrap();
        let s = EstimatorSettings::resolve(&est(Some(30.0)), &f.estimator, f.seed, false).unwrap();
        assert_eq!(s.ope.clip, 30.0);
        assert_eq!(s.ope.n_boot, 500);
        assert_eq!(s.ope.seed, 9);
        assert_eq!(s.ope.level, 0.95);
    }

    #[test]
    fn zero_clip_is_a_usage_error() {
        let e = EstimatorSettings::resolve(&est(Some(0.0)), &EstimatorFile::default(), None, false).unwrap_err();
        assert_eq!(e, CliError::usage("clip must be > 0"));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(FileConfig::parse("[estimator]\nclipp = 3.0\n").is_err());
    }

    #[test]
    fn policy_names_are_checked() {
        assert!(check_policy_names(&["no-tool".into(), "Personalized".into()]).is_ok());
        assert!(check_policy_names(&["sometimes_tool".into()]).is_err());
    }
}
