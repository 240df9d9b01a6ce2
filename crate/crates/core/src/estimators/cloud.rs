//! Boundary clouds: i.i.d. samples from the walk's limiting law.
//!
//! Free model: the proxy is the limit word's prefix. A trajectory is run
//! until its word is comfortably longer than the requested depth; once the
//! walk is `STABILITY_MARGIN` letters past the prefix, the probability that
//! the prefix ever changes again is a large power of the backtracking
//! probability and is negligible at desk scale.
//!
//! `SL(2,Z)` model: the proxy is the radial circle projection of a deep
//! trajectory endpoint, computed from exact integer matrix data.

use rayon::prelude::*;

use crate::free::{BoundaryWord, FreeGroup, ReducedWord};
use crate::rng::{substream, CounterRng};
use crate::sl2::{CircleSample, Sl2Matrix};
use crate::walk::StepDistribution;
use crate::{Error, Result};

use super::{drift_mc, Sl2Model, CLOUD_TAG};

/// Letters past the requested depth before a prefix is trusted as final.
const STABILITY_MARGIN: usize = 25;
/// Fresh sub-seeds tried per sample before giving up.
const MAX_ATTEMPTS: u64 = 32;
/// Budget multiplier over the expected number of steps.
const BUDGET_FACTOR: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct FreeCloud {
    pub samples: Vec<BoundaryWord>,
    pub depth: usize,
    pub resampled: usize,
}

#[derive(Clone, Debug)]
pub struct CircleCloud {
    pub samples: Vec<CircleSample>,
    pub resampled: usize,
}

/// A cloud of boundary proxies from either model, with uniform access to
/// leave-one-out ball counts in the model's visual quasi-metric.
#[derive(Clone, Debug)]
pub enum BoundaryCloud {
    Free(FreeCloud),
    Circle(CircleCloud),
}

impl BoundaryCloud {
    pub fn len(&self) -> usize {
        match self {
            BoundaryCloud::Free(c) => c.samples.len(),
            BoundaryCloud::Circle(c) => c.samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resampled(&self) -> usize {
        match self {
            BoundaryCloud::Free(c) => c.resampled,
            BoundaryCloud::Circle(c) => c.resampled,
        }
    }

    /// Resampling above 1% deserves a visible warning in reports.
    pub fn high_resample_rate(&self) -> bool {
        self.resampled() as f64 > 0.01 * self.len() as f64
    }

    /// Leave-one-out counts `#{j != i : ρ(ξ_i, ξ_j) <= r}` for every sample
    /// and every radius.
    pub fn ball_counts(&self, radii: &[f64]) -> Result<Vec<Vec<u32>>> {
        match self {
            BoundaryCloud::Free(c) => free_ball_counts(c, radii),
            BoundaryCloud::Circle(c) => circle_ball_counts(c, radii),
        }
    }
}

/// Tree balls are cylinders: `ρ(ξ, η) <= r` iff the common prefix length is
/// at least `⌈-ln r⌉`, so one hash map of prefix multiplicities per level
/// answers every query at that radius.
fn free_ball_counts(cloud: &FreeCloud, radii: &[f64]) -> Result<Vec<Vec<u32>>> {
    use std::collections::HashMap;
    let m = cloud.samples.len();
    let mut counts = vec![vec![0u32; radii.len()]; m];
    for (r_idx, &r) in radii.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius {r} must be positive")));
        }
        let level = (-r.ln()).ceil().max(0.0) as usize;
        if level == 0 {
            for row in counts.iter_mut() {
                row[r_idx] = (m - 1) as u32;
            }
            continue;
        }
        if level > cloud.depth {
            return Err(Error::InsufficientScales(format!(
                "radius {r:.3e} needs prefix level {level} > cloud depth {}",
                cloud.depth
            )));
        }
        let mut table: HashMap<&[u8], u32> = HashMap::with_capacity(m);
        for s in &cloud.samples {
            *table.entry(&s.prefix().letter_codes()[..level]).or_insert(0) += 1;
        }
        for (i, s) in cloud.samples.iter().enumerate() {
            counts[i][r_idx] = table[&s.prefix().letter_codes()[..level]] - 1;
        }
    }
    Ok(counts)
}

/// Chordal balls are angular windows: `sin(Δθ/2) <= r` iff
/// `Δθ <= 2 asin(r)`; counting is binary search over sorted angles.
fn circle_ball_counts(cloud: &CircleCloud, radii: &[f64]) -> Result<Vec<Vec<u32>>> {
    let m = cloud.samples.len();
    let tau = std::f64::consts::TAU;
    let mut sorted: Vec<f64> = cloud.samples.iter().map(|s| s.point.angle()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count_window = |lo: f64, hi: f64| -> u32 {
        // number of sorted angles in [lo, hi], both within [0, tau)
        let a = sorted.partition_point(|&x| x < lo);
        let b = sorted.partition_point(|&x| x <= hi);
        (b - a) as u32
    };
    let mut counts = vec![vec![0u32; radii.len()]; m];
    for (r_idx, &r) in radii.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius {r} must be positive")));
        }
        if r >= 1.0 {
            for row in counts.iter_mut() {
                row[r_idx] = (m - 1) as u32;
            }
            continue;
        }
        let half_width = 2.0 * r.asin();
        for (i, s) in cloud.samples.iter().enumerate() {
            let theta = s.point.angle();
            let lo = theta - half_width;
            let hi = theta + half_width;
            let c = if half_width >= std::f64::consts::PI {
                m as u32
            } else if lo < 0.0 {
                count_window(lo + tau, tau) + count_window(0.0, hi)
            } else if hi >= tau {
                count_window(lo, tau) + count_window(0.0, hi - tau)
            } else {
                count_window(lo, hi)
            };
            counts[i][r_idx] = c - 1; // drop the sample itself
        }
    }
    Ok(counts)
}

/// Samples `count` boundary proxies of the free-group walk at the given
/// prefix depth. A trajectory that fails to out-run the depth within ten
/// times the expected number of steps is resampled with a fresh sub-seed.
pub fn sample_free_cloud(
    group: &FreeGroup,
    mu: &StepDistribution<ReducedWord>,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<FreeCloud> {
    if depth == 0 {
        return Err(Error::InvalidInput("cloud depth must be >= 1".into()));
    }
    let stream = substream(seed, CLOUD_TAG);
    // pilot drift estimate to size the step budget
    let pilot = drift_mc(group, mu, 200, 16, substream(stream, u64::MAX)).value.max(0.02);
    let target_len = depth + STABILITY_MARGIN;
    let budget = ((BUDGET_FACTOR * target_len as f64 / pilot) as usize).max(4 * target_len);

    let results: Vec<Result<(BoundaryWord, u32)>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let traj_stream = substream(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = CounterRng::new(substream(traj_stream, attempt));
                let mut w = ReducedWord::identity();
                let mut steps = 0usize;
                while w.len() < target_len && steps < budget {
                    w = w.multiply(mu.sample(rng.next_f64()));
                    steps += 1;
                }
                if w.len() >= target_len {
                    return Ok((BoundaryWord::new(w.prefix(depth))?, attempt as u32));
                }
            }
            Err(Error::Numeric(format!(
                "trajectory {i} failed to reach depth {depth} in {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect();

    let mut samples = Vec::with_capacity(count);
    let mut resampled = 0usize;
    for r in results {
        let (b, attempts) = r?;
        samples.push(b);
        resampled += attempts as usize;
    }
    Ok(FreeCloud { samples, depth, resampled })
}

/// Samples `count` circle proxies of an `SL(2,Z)` walk. The horizon is sized
/// from a pilot drift estimate so endpoints land near `target_depth`;
/// endpoints shallower than `min_depth` are resampled with fresh sub-seeds.
pub fn sample_circle_cloud(
    mu: &StepDistribution<Sl2Matrix>,
    target_depth: f64,
    min_depth: f64,
    count: usize,
    seed: u64,
) -> Result<CircleCloud> {
    if !(target_depth >= min_depth) {
        return Err(Error::InvalidInput(format!(
            "target depth {target_depth} below the proxy minimum {min_depth}"
        )));
    }
    let stream = substream(seed, CLOUD_TAG);
    let pilot = drift_mc(&Sl2Model, mu, 150, 16, substream(stream, u64::MAX)).value.max(0.02);
    let horizon = ((target_depth / pilot).ceil() as usize).max(8);

    let results: Vec<Result<(CircleSample, u32)>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let traj_stream = substream(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = CounterRng::new(substream(traj_stream, attempt));
                let mut g = Sl2Matrix::identity();
                for _ in 0..horizon {
                    g = g.multiply(mu.sample(rng.next_f64()));
                }
                match g.orbit_circle_sample(min_depth) {
                    Ok(s) => return Ok((s, attempt as u32)),
                    Err(_) => continue,
                }
            }
            Err(Error::Numeric(format!(
                "trajectory {i} stayed shallower than {min_depth} in {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect();

    let mut samples = Vec::with_capacity(count);
    let mut resampled = 0usize;
    for r in results {
        let (s, attempts) = r?;
        samples.push(s);
        resampled += attempts as usize;
    }
    Ok(CircleCloud { samples, resampled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::sanov_generators;
    use crate::walk::simple_random_walk;

    #[test]
    fn free_cloud_first_letter_frequencies_match_oracle() {
        let group = FreeGroup::new(2).unwrap();
        let mu = simple_random_walk(2);
        let cloud = sample_free_cloud(&group, &mu, 8, 20_000, 31).unwrap();
        let mut counts = [0usize; 4];
        for s in &cloud.samples {
            counts[s.prefix().letter_codes()[0] as usize] += 1;
        }
        for c in counts {
            let p = c as f64 / cloud.samples.len() as f64;
            assert!((p - 0.25).abs() < 0.012, "initial-letter frequency {p}");
        }
        assert!(!BoundaryCloud::Free(cloud).high_resample_rate());
    }

    #[test]
    fn free_cloud_point_mass_is_a_single_ray() {
        let group = FreeGroup::new(2).unwrap();
        let mu = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let cloud = sample_free_cloud(&group, &mu, 5, 50, 7).unwrap();
        for s in &cloud.samples {
            assert_eq!(s.prefix(), &"aaaaa".parse().unwrap());
        }
    }

    #[test]
    fn free_ball_counts_agree_with_brute_force() {
        let group = FreeGroup::new(2).unwrap();
        let mu = simple_random_walk(2);
        let cloud = sample_free_cloud(&group, &mu, 10, 400, 13).unwrap();
        let radii = [(-2.0f64).exp(), (-3.5f64).exp(), (-5.0f64).exp()];
        let counts = BoundaryCloud::Free(cloud.clone()).ball_counts(&radii).unwrap();
        for i in (0..cloud.samples.len()).step_by(37) {
            for (r_idx, &r) in radii.iter().enumerate() {
                let level = (-r.ln()).ceil() as usize;
                let brute = cloud
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(j, s)| {
                        *j != i
                            && crate::free::common_prefix_len(
                                s.prefix(),
                                cloud.samples[i].prefix(),
                            ) >= level
                    })
                    .count();
                assert_eq!(counts[i][r_idx] as usize, brute);
            }
        }
    }

    #[test]
    fn free_ball_counts_reject_radii_below_resolution() {
        let group = FreeGroup::new(2).unwrap();
        let mu = simple_random_walk(2);
        let cloud = sample_free_cloud(&group, &mu, 4, 50, 3).unwrap();
        let err = BoundaryCloud::Free(cloud).ball_counts(&[(-9.0f64).exp()]);
        assert!(matches!(err, Err(Error::InsufficientScales(_))));
    }

    #[test]
    fn circle_ball_counts_agree_with_brute_force() {
        let (a, b) = sanov_generators();
        let mu = StepDistribution::uniform(vec![a.clone(), a.inverse(), b.clone(), b.inverse()])
            .unwrap();
        let cloud = sample_circle_cloud(&mu, 18.0, 12.0, 300, 5).unwrap();
        let radii = [0.25, 0.05, 0.01];
        let counts = BoundaryCloud::Circle(cloud.clone()).ball_counts(&radii).unwrap();
        for i in (0..cloud.samples.len()).step_by(29) {
            for (r_idx, &r) in radii.iter().enumerate() {
                let brute = cloud
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(j, s)| {
                        *j != i
                            && crate::sl2::circle_visual_quasimetric(
                                &s.point,
                                &cloud.samples[i].point,
                            ) <= r
                    })
                    .count();
                assert_eq!(counts[i][r_idx] as usize, brute, "i = {i}, r = {r}");
            }
        }
    }

    #[test]
    fn clouds_are_deterministic_across_thread_counts() {
        let group = FreeGroup::new(2).unwrap();
        let mu = simple_random_walk(2);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_free_cloud(&group, &mu, 6, 500, 17).unwrap());
        let b = four.install(|| sample_free_cloud(&group, &mu, 6, 500, 17).unwrap());
        assert_eq!(a.samples, b.samples);
    }
}
