//! Local-dimension estimation by ball-mass regression.
//!
//! For every sample the empirical mass of the ball of radius `r` around it
//! (leave-one-out, so the sample cannot inflate its own ball) is regressed
//! against `log r`; exact dimensionality predicts the per-point slopes
//! concentrate at `h/l`. The median of the slopes is the headline estimate,
//! robust to the measure-zero exceptional set.

use crate::oracle::BoundaryMarkovMeasure;
use crate::{Error, Result};

use super::cloud::BoundaryCloud;

/// Smallest usable radii count, per point and globally.
const MIN_SCALES: usize = 10;
/// Required leave-one-out count at the largest radius.
const MIN_TOP_COUNT: u32 = 30;

#[derive(Clone, Debug)]
pub struct LocalDimReport {
    /// Strictly decreasing radii the regression ran over.
    pub radii: Vec<f64>,
    pub per_point_slopes: Vec<f64>,
    /// Mean of `log ν̂(B(·, r))` over points with a nonzero count at each
    /// radius (NaN where no point had one); the pooled regression input.
    pub mean_log_mass: Vec<f64>,
    /// OLS slope of the per-radius mean log-mass (with its R²).
    pub pooled_slope: f64,
    pub r_squared: f64,
    /// Median of the per-point slopes; the headline dimension estimate.
    pub median_slope: f64,
    /// Interquartile range of the per-point slopes.
    pub spread: f64,
    /// Mean of the per-point OLS slope standard errors.
    pub mean_point_stderr: f64,
    /// Points dropped for having fewer than `MIN_SCALES` nonzero counts.
    pub dropped_points: usize,
    /// Median exact local-dimension ratio at the smallest radius, when an
    /// exact oracle measure was supplied.
    pub exact_ratio_median: Option<f64>,
    /// Filled by pipelines that know an independent h/l estimate.
    pub h_over_l: Option<f64>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

struct Ols {
    slope: f64,
    stderr: f64,
    r_squared: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Ols {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 =
        xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    Ols {
        slope,
        stderr: (ss_res / dof / sxx).sqrt(),
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    }
}

/// Per-point regression of `log ν̂(B(ξ_i, r))` against `log r`, pooled
/// statistics, and the optional exact-oracle comparison column.
pub fn local_dimension_report(
    cloud: &BoundaryCloud,
    radii: &[f64],
    exact: Option<&BoundaryMarkovMeasure>,
) -> Result<LocalDimReport> {
    if radii.len() < MIN_SCALES {
        return Err(Error::InsufficientScales(format!(
            "{} radii supplied, need at least {MIN_SCALES}",
            radii.len()
        )));
    }
    if !radii.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("radii must be strictly decreasing".into()));
    }
    let m = cloud.len();
    if m < 1_000 {
        return Err(Error::InvalidInput(format!("cloud of {m} samples; need >= 1000")));
    }

    let counts = cloud.ball_counts(radii)?;
    let min_top = counts.iter().map(|row| row[0]).min().unwrap_or(0);
    if min_top < MIN_TOP_COUNT {
        return Err(Error::InsufficientScales(format!(
            "count at the largest radius dropped to {min_top}; need >= {MIN_TOP_COUNT}"
        )));
    }

    let log_radii: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let denom = (m - 1) as f64;
    let mut slopes = Vec::with_capacity(m);
    let mut point_stderrs = Vec::with_capacity(m);
    let mut dropped = 0usize;
    // per-radius accumulators for the pooled regression
    let mut sum_log_mass = vec![0.0f64; radii.len()];
    let mut n_log_mass = vec![0usize; radii.len()];

    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for row in &counts {
        xs.clear();
        ys.clear();
        for (r_idx, &c) in row.iter().enumerate() {
            if c > 0 {
                let y = (c as f64 / denom).ln();
                xs.push(log_radii[r_idx]);
                ys.push(y);
                sum_log_mass[r_idx] += y;
                n_log_mass[r_idx] += 1;
            }
        }
        if xs.len() < MIN_SCALES {
            dropped += 1;
            continue;
        }
        let fit = ols(&xs, &ys);
        slopes.push(fit.slope);
        point_stderrs.push(fit.stderr);
    }
    if slopes.len() < m / 2 {
        return Err(Error::InsufficientScales(format!(
            "{dropped} of {m} points lacked {MIN_SCALES} usable scales"
        )));
    }

    let mean_log_mass: Vec<f64> = sum_log_mass
        .iter()
        .zip(&n_log_mass)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
        .collect();
    let pooled_xs: Vec<f64> = log_radii
        .iter()
        .zip(&n_log_mass)
        .filter(|(_, &n)| n > 0)
        .map(|(&x, _)| x)
        .collect();
    let pooled_ys: Vec<f64> = mean_log_mass
        .iter()
        .filter(|y| y.is_finite())
        .copied()
        .collect();
    let pooled = ols(&pooled_xs, &pooled_ys);

    let mut sorted = slopes.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = percentile(&sorted, 0.5);
    let spread = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    let mean_point_stderr = point_stderrs.iter().sum::<f64>() / point_stderrs.len() as f64;

    let exact_ratio_median = match (exact, cloud) {
        (Some(nu), BoundaryCloud::Free(free)) => {
            let t_max = -radii.last().unwrap().ln();
            let mut ratios: Vec<f64> = Vec::with_capacity(free.samples.len());
            for s in &free.samples {
                ratios.push(nu.exact_local_dimension(s, t_max)?);
            }
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(percentile(&ratios, 0.5))
        }
        _ => None,
    };

    Ok(LocalDimReport {
        radii: radii.to_vec(),
        per_point_slopes: slopes,
        mean_log_mass,
        pooled_slope: pooled.slope,
        r_squared: pooled.r_squared,
        median_slope: median,
        spread,
        mean_point_stderr,
        dropped_points: dropped,
        exact_ratio_median,
        h_over_l: None,
    })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct UpperBoundCheck {
    pub pass: bool,
    /// threshold minus the 95th slope percentile; negative means violation.
    pub margin: f64,
    pub slope_p95: f64,
    pub threshold: f64,
}

/// Checks the pointwise upper bound `dim <= h/l`: the 95th percentile of the
/// per-point slopes may not exceed `h/l` by more than three times the
/// single-point noise scale plus the propagated error of `h/l`.
///
/// The noise scale is the larger of the mean per-point regression stderr and
/// the cross-point slope dispersion; both reflect counting noise of a single
/// slope, which is what the 95th percentile rides on.
pub fn upper_bound_check(
    report: &LocalDimReport,
    h: f64,
    l: f64,
    h_stderr: f64,
    l_stderr: f64,
) -> Result<UpperBoundCheck> {
    if !(h > 0.0 && l > 0.0) {
        return Err(Error::InvalidInput(format!("need positive h and l, got {h}, {l}")));
    }
    let ratio = h / l;
    let ratio_err = ratio * ((h_stderr / h).powi(2) + (l_stderr / l).powi(2)).sqrt();
    let mut sorted = report.per_point_slopes.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p95 = percentile(&sorted, 0.95);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let cross_sd = (sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let noise = report.mean_point_stderr.max(cross_sd);
    let threshold = ratio + 3.0 * (noise + ratio_err);
    Ok(UpperBoundCheck { pass: p95 <= threshold, margin: threshold - p95, slope_p95: p95, threshold })
}
