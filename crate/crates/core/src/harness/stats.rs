//! Aggregation of per-trial outcomes: per-user means, worst-case metrics,
//! achievable rates and percentile-bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrialOutcome;
use crate::scenario::linear_to_db;

pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Aggregated metrics of one method at one sweep point. SINR/SNR vectors are
/// per-user means (linear); worst-case values are the minimum over users of
/// those means, in dB; AIR is `E[log2(1 + Γ)]` per user.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPerformance {
    pub method: String,
    pub trials: usize,
    pub skipped: usize,
    pub ul_sinr: Vec<f64>,
    pub dl_snr: Vec<f64>,
    pub ul_air: Vec<f64>,
    pub dl_air: Vec<f64>,
    pub ul_worst_db: f64,
    pub dl_worst_db: f64,
    pub ul_worst_ci_db: (f64, f64),
    pub dl_worst_ci_db: (f64, f64),
}

impl MeasuredPerformance {
    pub fn used(&self) -> usize {
        self.trials - self.skipped
    }

    pub fn ul_air_mean(&self) -> f64 {
        mean(&self.ul_air)
    }

    pub fn dl_air_mean(&self) -> f64 {
        mean(&self.dl_air)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Median with NaN-last ordering; NaN for empty input.
pub fn median(v: &[f64]) -> f64 {
    percentile(v, 0.5)
}

/// Linear-interpolated quantile `p ∈ [0, 1]`.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// 95% percentile-bootstrap interval of `stat` over resamples of `0..n`.
pub fn bootstrap_ci<F>(n: usize, resamples: usize, seed: u64, mut stat: F) -> (f64, f64)
where
    F: FnMut(&[usize]) -> f64,
{
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..n);
        }
        values.push(stat(&idx));
    }
    (percentile(&values, 0.025), percentile(&values, 0.975))
}

fn worst_db(per_trial: &[&[f64]], idx: &[usize]) -> f64 {
    let k = per_trial.first().map_or(0, |t| t.len());
    let mut sums = vec![0.0; k];
    for &i in idx {
        for (s, v) in sums.iter_mut().zip(per_trial[i]) {
            *s += v;
        }
    }
    let worst = sums.iter().map(|s| s / idx.len() as f64).fold(f64::INFINITY, f64::min);
    linear_to_db(worst)
}

pub fn aggregate(
    method: &str,
    outcomes: &[&TrialOutcome],
    attempted: usize,
    bootstrap: usize,
    seed: u64,
) -> MeasuredPerformance {
    let n = outcomes.len();
    let ul: Vec<&[f64]> = outcomes.iter().map(|o| o.ul.as_slice()).collect();
    let dl: Vec<&[f64]> = outcomes.iter().map(|o| o.dl.as_slice()).collect();
    let per_user = |rows: &[&[f64]], f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let k = rows.first().map_or(0, |r| r.len());
        (0..k)
            .map(|j| rows.iter().map(|r| f(r[j])).sum::<f64>() / n as f64)
            .collect()
    };
    let all: Vec<usize> = (0..n).collect();
    let (ul_worst_db, dl_worst_db) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (worst_db(&ul, &all), worst_db(&dl, &all))
    };
    MeasuredPerformance {
        method: method.to_string(),
        trials: attempted,
        skipped: attempted - n,
        ul_sinr: per_user(&ul, &|g| g),
        dl_snr: per_user(&dl, &|g| g),
        ul_air: per_user(&ul, &|g| (1.0 + g).log2()),
        dl_air: per_user(&dl, &|g| (1.0 + g).log2()),
        ul_worst_db,
        dl_worst_db,
        ul_worst_ci_db: bootstrap_ci(n, bootstrap, seed, |idx| worst_db(&ul, idx)),
        dl_worst_ci_db: bootstrap_ci(n, bootstrap, seed ^ 1, |idx| worst_db(&dl, idx)),
    }
}
