//! Percentile bootstrap over whole sessions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OpeError;
use crate::rng;

pub const MIN_REPLICATES: usize = 100;
/// Share of failed replicates above which the interval is flagged.
pub const FAILURE_WARNING_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub n_boot: usize,
    /// Replicates on which the estimator was undefined.
    pub failures: usize,
    pub warning: Option<String>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Resamples `n_units` sessions with replacement `n_boot` times and returns
/// the percentile interval of `estimator` at `level`.
///
/// Replicate `b` draws from the substream `(seed, "bootstrap", b)`, so the
/// result does not depend on evaluation order or thread count.
pub fn bootstrap_ci<F>(
    n_units: usize,
    estimator: F,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval, OpeError>
where
    F: Fn(&[usize]) -> Result<f64, OpeError> + Sync + Send,
{
    if n_boot < MIN_REPLICATES {
        return Err(OpeError::TooFewReplicates(n_boot));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(OpeError::InvalidLevel(level));
    }
    if n_units == 0 {
        return Err(OpeError::Empty);
    }
    let estimates = crate::par::map_range(n_boot, |b| {
        let mut r = rng::substream(seed, rng::BOOTSTRAP, &[b as u64]);
        let sample: Vec<usize> = (0..n_units).map(|_| r.random_range(0..n_units)).collect();
        estimator(&sample).ok().filter(|v| v.is_finite())
    });
    let mut ok: Vec<f64> = estimates.into_iter().flatten().collect();
    let failures = n_boot - ok.len();
    if ok.is_empty() {
        return Err(OpeError::BootstrapFailed(failures));
    }
    ok.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let warning = (failures as f64 > FAILURE_WARNING_SHARE * n_boot as f64).then(|| {
        format!("estimator undefined on {failures} of {n_boot} replicates; interval may be too wide")
    });
    Ok(BootstrapInterval {
        low: quantile(&ok, alpha),
        high: quantile(&ok, 1.0 - alpha),
        level,
        n_boot,
        failures,
        warning,
    })
}
