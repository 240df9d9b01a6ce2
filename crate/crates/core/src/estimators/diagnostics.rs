//! Diagnostics probing the probabilistic structure behind the dimension
//! formula on the free-group model, where the geodesic toward the limit
//! point is the limit word's prefix path and everything is exactly
//! computable: geodesic tracking, the entropy-and-tracking event, the
//! shadow-hitting property, dimension continuity under perturbation of μ,
//! and a stationarity test for empirical boundary clouds.

use rayon::prelude::*;

use crate::free::{common_prefix_len, FreeGroup, Letter, ReducedWord};
use crate::oracle::NearestNeighborMeasure;
use crate::rng::{substream, CounterRng};
use crate::walk::{ConvolutionTable, StepDistribution};
use crate::{Error, Result};

use super::cloud::{sample_free_cloud, BoundaryCloud, FreeCloud};
use super::dimension::local_dimension_report;
use super::{EVENT_A_TAG, SHADOW_TAG, TRACKING_TAG};

/// Letters past a prefix before it is trusted as the limit word's prefix.
const STABILITY_MARGIN: usize = 25;
const MAX_ATTEMPTS: u64 = 32;

/// Walks to `horizon` recording the positions asked for, then keeps walking
/// until the word out-runs `stable_len` so its prefix at that length is the
/// limit word's. `None` when the step budget runs out.
fn walk_with_stable_prefix(
    mu: &StepDistribution<ReducedWord>,
    horizon: usize,
    record: &mut dyn FnMut(usize, &ReducedWord),
    stable_len: usize,
    budget: usize,
    stream: u64,
) -> Option<ReducedWord> {
    let mut rng = CounterRng::new(stream);
    let mut w = ReducedWord::identity();
    for step in 1..=horizon {
        w = w.multiply(mu.sample(rng.next_f64()));
        record(step, &w);
    }
    let target = stable_len + STABILITY_MARGIN;
    let mut steps = horizon;
    while w.len() < target {
        if steps >= budget {
            return None;
        }
        w = w.multiply(mu.sample(rng.next_f64()));
        steps += 1;
    }
    Some(w)
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TrackingReport {
    /// Fraction of trajectories with `d(w_n, ξ(l n)) <= ε n`.
    pub fraction: f64,
    pub trajectories: usize,
    pub resampled: usize,
}

/// Geodesic tracking diagnostic: the geodesic `ξ(l n)` toward the limit
/// point is the limit word's prefix of length `⌊l n⌋`, exactly computable on
/// the tree.
pub fn tracking_diagnostic(
    _group: &FreeGroup,
    mu: &StepDistribution<ReducedWord>,
    drift: f64,
    horizon: usize,
    trajectories: usize,
    epsilon: f64,
    seed: u64,
) -> Result<TrackingReport> {
    if !(drift > 0.0 && drift <= 1.0) {
        return Err(Error::InvalidInput(format!("drift {drift} outside (0, 1]")));
    }
    let geodesic_len = (drift * horizon as f64).floor() as usize;
    let stream = substream(seed, TRACKING_TAG);
    let budget = 10 * horizon + 400;

    let outcomes: Vec<Result<(bool, u32)>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let traj = substream(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let mut at_horizon = ReducedWord::identity();
                let mut record = |step: usize, w: &ReducedWord| {
                    if step == horizon {
                        at_horizon = w.clone();
                    }
                };
                if let Some(stable) = walk_with_stable_prefix(
                    mu,
                    horizon,
                    &mut record,
                    geodesic_len,
                    budget,
                    substream(traj, attempt),
                ) {
                    let prefix = stable.prefix(geodesic_len);
                    let dist = at_horizon.len() + prefix.len()
                        - 2 * common_prefix_len(&at_horizon, &prefix);
                    return Ok((dist as f64 <= epsilon * horizon as f64, attempt as u32));
                }
            }
            Err(Error::Numeric(format!("trajectory {i} exhausted its step budget")))
        })
        .collect();

    let mut hits = 0usize;
    let mut resampled = 0usize;
    for o in outcomes {
        let (ok, attempts) = o?;
        hits += ok as usize;
        resampled += attempts as usize;
    }
    Ok(TrackingReport {
        fraction: hits as f64 / trajectories as f64,
        trajectories,
        resampled,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EventAProfile {
    /// `(N, empirical probability of A_{ε,N})` for N = 1..=horizon; the
    /// events are nested so the fractions are nondecreasing by construction.
    pub fractions: Vec<(usize, f64)>,
    pub horizon: usize,
    pub trajectories: usize,
}

impl EventAProfile {
    pub fn at(&self, n: usize) -> f64 {
        self.fractions
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, f)| *f)
            .unwrap_or(f64::NAN)
    }
}

/// Empirical probability of the event `A_{ε,N}`: for all `n` in
/// `[N, horizon]`, the trajectory both tracks its geodesic
/// (`d(w_n, ξ(l n)) <= ε n`) and satisfies the entropy bound
/// (`μ*ⁿ(w_n) <= e^{-n(h-ε)}`). Needs exact convolution tables
/// `μ*¹..μ*ʰ`.
pub fn event_a_profile(
    _group: &FreeGroup,
    mu: &StepDistribution<ReducedWord>,
    tables: &[ConvolutionTable<ReducedWord>],
    entropy: f64,
    drift: f64,
    epsilon: f64,
    horizon: usize,
    trajectories: usize,
    seed: u64,
) -> Result<EventAProfile> {
    if tables.len() < horizon || tables.iter().take(horizon).any(|t| t.pruned_mass() > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need exact tables μ*¹..μ*{horizon} (got {} tables)",
            tables.len()
        )));
    }
    for (idx, t) in tables.iter().take(horizon).enumerate() {
        if t.n() != idx + 1 {
            return Err(Error::InvalidInput("tables must be ordered μ*¹, μ*², ...".into()));
        }
    }
    let max_geodesic = (drift * horizon as f64).floor() as usize;
    let stream = substream(seed, EVENT_A_TAG);
    let budget = 40 * horizon + 800;

    // per trajectory: the smallest N such that every n in [N, horizon]
    // satisfies both conditions
    let min_n: Vec<Result<usize>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let traj = substream(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let mut positions: Vec<ReducedWord> = Vec::with_capacity(horizon);
                let mut record = |_: usize, w: &ReducedWord| positions.push(w.clone());
                if let Some(stable) = walk_with_stable_prefix(
                    mu,
                    horizon,
                    &mut record,
                    max_geodesic,
                    budget,
                    substream(traj, attempt),
                ) {
                    let mut worst_fail = 0usize;
                    for n in 1..=horizon {
                        let w_n = &positions[n - 1];
                        let geo = stable.prefix((drift * n as f64).floor() as usize);
                        let dist =
                            w_n.len() + geo.len() - 2 * common_prefix_len(w_n, &geo);
                        let tracked = dist as f64 <= epsilon * n as f64;
                        let mass = tables[n - 1].mass_of(w_n).ok_or_else(|| {
                            Error::Numeric("endpoint missing from exact table".into())
                        })?;
                        let equipartitioned =
                            mass <= (-(n as f64) * (entropy - epsilon)).exp();
                        if !(tracked && equipartitioned) {
                            worst_fail = n;
                        }
                    }
                    return Ok(worst_fail + 1);
                }
            }
            Err(Error::Numeric(format!("trajectory {i} exhausted its step budget")))
        })
        .collect();

    let mut counts = vec![0usize; horizon + 2];
    for r in min_n {
        let n = r?;
        if n <= horizon {
            counts[n] += 1;
        }
    }
    let mut fractions = Vec::with_capacity(horizon);
    let mut acc = 0usize;
    for n in 1..=horizon {
        acc += counts[n];
        fractions.push((n, acc as f64 / trajectories as f64));
    }
    Ok(EventAProfile { fractions, horizon, trajectories })
}

/// Which center the shadow-hitting check aims at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShadowHitMode {
    /// `x` on the trajectory's own limit geodesic.
    OnGeodesic,
    /// Negative control: `x` from an independent trajectory.
    OffGeodesic,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ShadowHitReport {
    /// Among conditioned trajectories, the fraction with
    /// `d(w_n, x) <= 2 ε n + C_R`.
    pub fraction: f64,
    pub conditioned: usize,
    /// ε n < 1 makes the geodesic prefix vacuously close; flagged.
    pub vacuous: bool,
    pub resampled: usize,
}

/// Shadow-hitting diagnostic: on the tracking part of `A_ε`, a limit point
/// in the shadow `S(x, R)` pins `w_n` inside `B(x, 2 ε n + C_R)` with
/// `C_R = 2R + 2` on the tree (δ = 0; the +2 absorbs the integer rounding
/// of prefix lengths).
pub fn shadow_hit_diagnostic(
    _group: &FreeGroup,
    mu: &StepDistribution<ReducedWord>,
    drift: f64,
    thickness: f64,
    epsilon: f64,
    horizon: usize,
    trajectories: usize,
    mode: ShadowHitMode,
    seed: u64,
) -> Result<ShadowHitReport> {
    let geodesic_len = (drift * horizon as f64).floor() as usize;
    let stream = substream(seed, SHADOW_TAG);
    let budget = 10 * horizon + 400;

    let walks: Vec<Result<(ReducedWord, ReducedWord, u32)>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let traj = substream(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let mut at_horizon = ReducedWord::identity();
                let mut record = |step: usize, w: &ReducedWord| {
                    if step == horizon {
                        at_horizon = w.clone();
                    }
                };
                if let Some(stable) = walk_with_stable_prefix(
                    mu,
                    horizon,
                    &mut record,
                    geodesic_len,
                    budget,
                    substream(traj, attempt),
                ) {
                    return Ok((at_horizon, stable, attempt as u32));
                }
            }
            Err(Error::Numeric(format!("trajectory {i} exhausted its step budget")))
        })
        .collect();

    let mut endpoints = Vec::with_capacity(trajectories);
    let mut limits = Vec::with_capacity(trajectories);
    let mut resampled = 0usize;
    for r in walks {
        let (w_n, stable, attempts) = r?;
        endpoints.push(w_n);
        limits.push(stable);
        resampled += attempts as usize;
    }

    let ball_bound = 2.0 * epsilon * horizon as f64 + 2.0 * thickness + 2.0;
    let mut conditioned = 0usize;
    let mut hits = 0usize;
    for i in 0..trajectories {
        let own_geo = limits[i].prefix(geodesic_len);
        let w_n = &endpoints[i];
        let tracked = {
            let d = w_n.len() + own_geo.len() - 2 * common_prefix_len(w_n, &own_geo);
            d as f64 <= epsilon * horizon as f64
        };
        if !tracked {
            continue;
        }
        let x = match mode {
            ShadowHitMode::OnGeodesic => own_geo,
            ShadowHitMode::OffGeodesic => limits[(i + 1) % trajectories].prefix(geodesic_len),
        };
        // the limit point must lie in S(x, R); automatic for the own
        // geodesic, checked against the deep stable prefix otherwise
        let in_shadow =
            common_prefix_len(&limits[i], &x) as f64 >= x.len() as f64 - thickness;
        if mode == ShadowHitMode::OnGeodesic && !in_shadow {
            unreachable!("a prefix of the limit word is in its own shadow");
        }
        if mode == ShadowHitMode::OnGeodesic || !in_shadow {
            // for the control, keep pairs regardless so the set is nonempty
            conditioned += 1;
            let d = w_n.len() + x.len() - 2 * common_prefix_len(w_n, &x);
            hits += (d as f64 <= ball_bound) as usize;
        } else {
            // control pair that happens to satisfy the shadow condition:
            // the hitting bound applies, count it too
            conditioned += 1;
            let d = w_n.len() + x.len() - 2 * common_prefix_len(w_n, &x);
            hits += (d as f64 <= ball_bound) as usize;
        }
    }
    if conditioned == 0 {
        return Err(Error::UnreliableEstimate("no trajectory satisfied the conditioning".into()));
    }
    Ok(ShadowHitReport {
        fraction: hits as f64 / conditioned as f64,
        conditioned,
        vacuous: epsilon * (horizon as f64) < 1.0,
        resampled,
    })
}

#[derive(Clone, Debug)]
pub struct ContinuityConfig {
    pub depth: usize,
    pub cloud_size: usize,
    pub radii: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ContinuityRow {
    pub perturbation: f64,
    pub l1_distance: f64,
    pub dim_estimate: f64,
    pub dim_stderr: f64,
    pub diff_from_base: f64,
}

/// Perturbs the mass of the first support atom by each `p`, renormalizing
/// the rest proportionally, and estimates the boundary dimension of every
/// perturbed measure with common random numbers. The dimension formula
/// predicts the differences shrink with the perturbation.
pub fn continuity_experiment(
    group: &FreeGroup,
    mu: &StepDistribution<ReducedWord>,
    perturbations: &[f64],
    cfg: &ContinuityConfig,
) -> Result<Vec<ContinuityRow>> {
    let atoms = mu.atoms().to_vec();
    let (first, first_mass) = atoms[0].clone();
    let rest_mass = 1.0 - first_mass;

    let perturbed = |p: f64| -> Result<StepDistribution<ReducedWord>> {
        if p >= rest_mass {
            return Err(Error::InvalidInput(format!("perturbation {p} too large")));
        }
        let scale = (rest_mass - p) / rest_mass;
        let mut out = vec![(first.clone(), first_mass + p)];
        for (g, m) in atoms.iter().skip(1) {
            out.push((g.clone(), m * scale));
        }
        StepDistribution::new(out)
    };

    let dim_of = |measure: &StepDistribution<ReducedWord>| -> Result<(f64, f64)> {
        let cloud = sample_free_cloud(group, measure, cfg.depth, cfg.cloud_size, cfg.seed)?;
        let report =
            local_dimension_report(&BoundaryCloud::Free(cloud), &cfg.radii, None)?;
        let n = report.per_point_slopes.len() as f64;
        let (_, se_mean) = super::mean_stderr(&report.per_point_slopes);
        // stderr of the median of an approximately normal sample
        let _ = n;
        Ok((report.median_slope, 1.2533 * se_mean))
    };

    let (base_dim, base_se) = dim_of(mu)?;
    let mut rows = vec![ContinuityRow {
        perturbation: 0.0,
        l1_distance: 0.0,
        dim_estimate: base_dim,
        dim_stderr: base_se,
        diff_from_base: 0.0,
    }];
    for &p in perturbations {
        let measure = perturbed(p)?;
        let (dim, se) = dim_of(&measure)?;
        rows.push(ContinuityRow {
            perturbation: p,
            l1_distance: 2.0 * p,
            dim_estimate: dim,
            dim_stderr: se,
            diff_from_base: (dim - base_dim).abs(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct StationarityRow {
    pub cylinder: String,
    pub empirical: f64,
    pub predicted: f64,
    pub z: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct StationarityReport {
    pub max_z: f64,
    pub pass: bool,
    /// Below 10⁴ samples the 4σ gate has little power; flagged.
    pub low_power: bool,
    pub rows: Vec<StationarityRow>,
}

/// Tests the stationarity equation `ν = Σ_s μ(s) sν` on an empirical cloud:
/// for every cylinder of length <= 2, the empirical mass is compared with
/// the μ-average of the translated masses (translate cylinders computed
/// exactly on the tree). Pass iff the largest standardized residual is
/// within 4σ.
pub fn stationarity_test(
    cloud: &FreeCloud,
    mu: &NearestNeighborMeasure,
) -> Result<StationarityReport> {
    if cloud.depth < 3 {
        return Err(Error::InsufficientDepth("stationarity test needs depth >= 3".into()));
    }
    let m_samples = cloud.samples.len() as f64;
    let alphabet = mu.alphabet_size();

    // empirical prefix masses up to length 3
    use std::collections::HashMap;
    let mut freq: HashMap<Vec<u8>, f64> = HashMap::new();
    for s in &cloud.samples {
        for len in 1..=3 {
            let key = s.prefix().letter_codes()[..len].to_vec();
            *freq.entry(key).or_insert(0.0) += 1.0;
        }
    }
    for v in freq.values_mut() {
        *v /= m_samples;
    }
    let mass = |codes: &[u8]| -> f64 { freq.get(codes).copied().unwrap_or(0.0) };
    // ν̂(t[w]) by the exact tree translate rules
    let translated = |t: u8, codes: &[u8]| -> f64 {
        if codes[0] == t ^ 1 {
            if codes.len() == 1 {
                1.0 - mass(&[t])
            } else {
                mass(&codes[1..])
            }
        } else {
            let mut key = Vec::with_capacity(codes.len() + 1);
            key.push(t);
            key.extend_from_slice(codes);
            mass(&key)
        }
    };
    let var_of = |p: f64| -> f64 { (p * (1.0 - p)).max(1.0 / m_samples) / m_samples };

    let mut rows = Vec::new();
    let mut max_z = 0.0f64;
    let mut cylinders: Vec<Vec<u8>> = (0..alphabet as u8).map(|c| vec![c]).collect();
    for first in 0..alphabet as u8 {
        for second in 0..alphabet as u8 {
            if second != first ^ 1 {
                cylinders.push(vec![first, second]);
            }
        }
    }
    for w in cylinders {
        let empirical = mass(&w);
        let mut predicted = 0.0;
        let mut var = var_of(empirical);
        for s in 0..alphabet as u8 {
            let p = mu.moving_mass(s);
            if p == 0.0 {
                continue;
            }
            let t = Letter::from_code(s).inverse().code();
            let tm = translated(t, &w);
            predicted += p * tm;
            var += p * p * var_of(tm);
        }
        let z = (empirical - predicted).abs() / var.sqrt();
        max_z = max_z.max(z);
        let word: String = w
            .iter()
            .map(|&c| Letter::from_code(c).to_char())
            .collect();
        rows.push(StationarityRow { cylinder: word, empirical, predicted, z });
    }
    Ok(StationarityReport {
        max_z,
        pass: max_z <= 4.0,
        low_power: cloud.samples.len() < 10_000,
        rows,
    })
}
