use serde::{Deserialize, Serialize};

use crate::forensics::{ForensicsError, KillerAttribution};
use crate::math::epsilon_star_series;

/// Shortest series [`check_qr_bound`] accepts.
pub const MIN_QR_PERIODS: usize = 100_000;

/// Batches used for batch-means standard errors. `K_t` is strongly
/// autocorrelated (one block can be charged with a whole orphaned branch),
/// so the i.i.d. formula would understate the error.
pub const BATCHES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QrBound {
    pub mean_s: f64,
    pub se_s: f64,
    pub mean_k: f64,
    pub se_k: f64,
    /// `alpha (1 - alpha)`.
    pub bound: f64,
    pub pass_s: bool,
    pub pass_k: bool,
}

fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = n / BATCHES;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (mean, (var / BATCHES as f64).sqrt())
}

/// Checks `mean(S) <= alpha (1 - alpha) + 3 SE` and the same for `K`.
pub fn check_qr_bound(attr: &KillerAttribution, alpha: f64) -> Result<QrBound, ForensicsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ForensicsError::DegenerateAlpha(alpha));
    }
    if attr.periods() < MIN_QR_PERIODS {
        return Err(ForensicsError::TooFewPeriods {
            periods: attr.periods(),
            required: MIN_QR_PERIODS,
        });
    }
    let s: Vec<f64> = attr
        .k
        .iter()
        .zip(&attr.l)
        .map(|(&k, &l)| alpha * k as f64 + (1.0 - alpha) * l as f64)
        .collect();
    let k: Vec<f64> = attr.k.iter().map(|&k| k as f64).collect();
    let (mean_s, se_s) = batch_means(&s);
    let (mean_k, se_k) = batch_means(&k);
    let bound = alpha * (1.0 - alpha);
    Ok(QrBound {
        mean_s,
        se_s,
        mean_k,
        se_k,
        bound,
        pass_s: mean_s <= bound + 3.0 * se_s,
        pass_k: mean_k <= bound + 3.0 * se_k,
    })
}

/// Kills whose killer was mined `lag` periods after its victim.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub lag: u64,
    pub count: u64,
    /// `count / periods`: empirical probability that a given block is
    /// killed by the block mined `lag` periods later.
    pub rate: f64,
    pub se: f64,
    pub epsilon_star: f64,
    pub pass: bool,
}

/// Histogram of kill lags `s - t > 0`, each bin compared with
/// `eps*_lag + 3 SE`. Kills by earlier or same-period blocks are left out.
pub fn late_kill_tail(attr: &KillerAttribution) -> Result<Vec<LagBin>, ForensicsError> {
    let mut counts = std::collections::BTreeMap::<u64, u64>::new();
    for (victim, killer) in &attr.killer_of {
        if killer.0 > victim.0 {
            *counts.entry(killer.0 - victim.0).or_default() += 1;
        }
    }
    let Some(&max_lag) = counts.keys().next_back() else {
        return Ok(Vec::new());
    };
    let star = epsilon_star_series(max_lag, attr.alpha)?;
    let n = attr.periods().max(1) as f64;
    Ok(counts
        .into_iter()
        .map(|(lag, count)| {
            let rate = count as f64 / n;
            let se = (rate * (1.0 - rate) / n).sqrt();
            let epsilon_star = star[lag as usize];
            LagBin {
                lag,
                count,
                rate,
                se,
                epsilon_star,
                pass: rate <= epsilon_star + 3.0 * se,
            }
        })
        .collect())
}

/// Bound checks for one run, or their average over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForensicReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub alpha: f64,
    #[serde(rename = "J")]
    pub j: u32,
    pub periods: u64,
    #[serde(rename = "mean_S")]
    pub mean_s: f64,
    #[serde(rename = "se_S")]
    pub se_s: f64,
    pub bound: f64,
    #[serde(rename = "pass_S")]
    pub pass_s: bool,
    #[serde(rename = "mean_K")]
    pub mean_k: f64,
    #[serde(rename = "se_K")]
    pub se_k: f64,
    #[serde(rename = "pass_K")]
    pub pass_k: bool,
    pub killed_total: u64,
    pub excluded: u64,
    pub lag_histogram: Vec<LagBin>,
    pub pass_lag: bool,
}

impl ForensicReport {
    pub fn new(seed: Option<u64>, attr: &KillerAttribution) -> Result<Self, ForensicsError> {
        let qr = check_qr_bound(attr, attr.alpha)?;
        let lags = late_kill_tail(attr)?;
        Ok(ForensicReport {
            seed,
            alpha: attr.alpha,
            j: attr.j,
            periods: attr.periods() as u64,
            mean_s: qr.mean_s,
            se_s: qr.se_s,
            bound: qr.bound,
            pass_s: qr.pass_s,
            mean_k: qr.mean_k,
            se_k: qr.se_k,
            pass_k: qr.pass_k,
            killed_total: attr.killed_total(),
            excluded: attr.excluded(),
            pass_lag: lags.iter().all(|b| b.pass),
            lag_histogram: lags,
        })
    }

    pub fn pass(&self) -> bool {
        self.pass_s && self.pass_k && self.pass_lag
    }

    /// Pools per-run reports. Means and lag rates are averaged over runs;
    /// standard errors come from the spread of the per-run values (with a
    /// single run its own errors are kept).
    pub fn aggregate(reports: &[ForensicReport]) -> Option<ForensicReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let mean_se = |f: &dyn Fn(&ForensicReport) -> f64, g: &dyn Fn(&ForensicReport) -> f64| {
            let m = reports.iter().map(f).sum::<f64>() / n;
            if reports.len() < 2 {
                return (m, g(first));
            }
            let var = reports.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, (var / n).sqrt())
        };
        let (mean_s, se_s) = mean_se(&|r| r.mean_s, &|r| r.se_s);
        let (mean_k, se_k) = mean_se(&|r| r.mean_k, &|r| r.se_k);
        let bound = first.bound;

        let periods: u64 = reports.iter().map(|r| r.periods).sum();
        let mut counts = std::collections::BTreeMap::<u64, (u64, f64)>::new();
        for r in reports {
            for b in &r.lag_histogram {
                let e = counts.entry(b.lag).or_insert((0, b.epsilon_star));
                e.0 += b.count;
            }
        }
        let total = periods.max(1) as f64;
        let lag_histogram: Vec<LagBin> = counts
            .into_iter()
            .map(|(lag, (count, epsilon_star))| {
                let rate = count as f64 / total;
                let se = (rate * (1.0 - rate) / total).sqrt();
                LagBin {
                    lag,
                    count,
                    rate,
                    se,
                    epsilon_star,
                    pass: rate <= epsilon_star + 3.0 * se,
                }
            })
            .collect();
        Some(ForensicReport {
            seed: None,
            alpha: first.alpha,
            j: first.j,
            periods,
            mean_s,
            se_s,
            bound,
            pass_s: mean_s <= bound + 3.0 * se_s,
            mean_k,
            se_k,
            pass_k: mean_k <= bound + 3.0 * se_k,
            killed_total: reports.iter().map(|r| r.killed_total).sum(),
            excluded: reports.iter().map(|r| r.excluded).sum(),
            pass_lag: lag_histogram.iter().all(|b| b.pass),
            lag_histogram,
        })
    }
}
