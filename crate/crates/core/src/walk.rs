//! Step distributions, trajectory sampling and exact sparse convolution
//! powers `μ*ⁿ` over hashable group elements.
//!
//! Trajectories are sampled by inverse CDF from counter-based streams, so a
//! trajectory is a pure function of `(μ, horizon, stream key)` and Monte
//! Carlo layers can fan trajectories out across threads freely.
//! Convolution tables are kept in insertion-ordered maps: iteration order is
//! then a function of the atom order alone, which keeps floating-point
//! reductions bitwise reproducible.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::free::ReducedWord;
use crate::rng::CounterRng;
use crate::sl2::Sl2Matrix;
use crate::{Error, Result};

/// A group element a random walk can live on.
pub trait GroupElement: Clone + Eq + Ord + std::hash::Hash + Send + Sync {
    fn identity() -> Self;
    fn op(&self, rhs: &Self) -> Self;
    fn inverse(&self) -> Self;
}

impl GroupElement for ReducedWord {
    fn identity() -> Self {
        ReducedWord::identity()
    }

    fn op(&self, rhs: &Self) -> Self {
        self.multiply(rhs)
    }

    fn inverse(&self) -> Self {
        self.inverse()
    }
}

impl GroupElement for Sl2Matrix {
    fn identity() -> Self {
        Sl2Matrix::identity()
    }

    fn op(&self, rhs: &Self) -> Self {
        self.multiply(rhs)
    }

    fn inverse(&self) -> Self {
        self.inverse()
    }
}

/// Tolerance on the total mass of a step distribution.
pub const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on group elements.
///
/// Atoms are kept sorted in the element order, so identical specifications
/// produce identical iteration and sampling behavior.
#[derive(Clone, Debug)]
pub struct StepDistribution<G: GroupElement> {
    atoms: Vec<(G, f64)>,
    cumulative: Vec<f64>,
}

impl<G: GroupElement> StepDistribution<G> {
    pub fn new(mut atoms: Vec<(G, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("step distribution needs support".into()));
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        // merge duplicate support points
        let mut merged: Vec<(G, f64)> = Vec::with_capacity(atoms.len());
        for (g, p) in atoms {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidInput(format!("atom mass {p} outside (0, 1]")));
            }
            match merged.last_mut() {
                Some((last, mass)) if *last == g => *mass += p,
                _ => merged.push((g, p)),
            }
        }
        let total: f64 = merged.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!("atom masses sum to {total}, not 1")));
        }
        let mut cumulative = Vec::with_capacity(merged.len());
        let mut acc = 0.0;
        for (_, p) in &merged {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(StepDistribution { atoms: merged, cumulative })
    }

    pub fn point_mass(g: G) -> Self {
        StepDistribution { atoms: vec![(g, 1.0)], cumulative: vec![1.0] }
    }

    pub fn uniform(support: Vec<G>) -> Result<Self> {
        let p = 1.0 / support.len() as f64;
        StepDistribution::new(support.into_iter().map(|g| (g, p)).collect())
    }

    pub fn atoms(&self) -> &[(G, f64)] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn mass_of(&self, g: &G) -> f64 {
        self.atoms
            .binary_search_by(|(a, _)| a.cmp(g))
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    /// Inverse-CDF draw from a uniform variate.
    pub fn sample(&self, u: f64) -> &G {
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.atoms[i.min(self.atoms.len() - 1)].0
    }

    /// The reflected measure `μ̌(g) = μ(g⁻¹)`.
    pub fn reflected(&self) -> Self {
        let atoms = self.atoms.iter().map(|(g, p)| (g.inverse(), *p)).collect();
        StepDistribution::new(atoms).expect("reflection preserves a probability measure")
    }
}

/// A sampled walk `w_0 = id, w_1, ..., w_n` with its stream key.
#[derive(Clone, Debug)]
pub struct Trajectory<G: GroupElement> {
    pub positions: Vec<G>,
    pub seed: u64,
}

/// Samples a full trajectory; identical output for identical
/// `(μ, n, stream key)` regardless of caller threading.
pub fn sample_trajectory<G: GroupElement>(
    mu: &StepDistribution<G>,
    n: usize,
    stream: u64,
) -> Trajectory<G> {
    let mut rng = CounterRng::new(stream);
    let mut positions = Vec::with_capacity(n + 1);
    positions.push(G::identity());
    let mut current = G::identity();
    for _ in 0..n {
        current = current.op(mu.sample(rng.next_f64()));
        positions.push(current.clone());
    }
    Trajectory { positions, seed: stream }
}

/// Streaming walk: calls `visit(step_index, position)` for each
/// `w_1, ..., w_n` without storing the trajectory.
pub fn walk_positions<G: GroupElement>(
    mu: &StepDistribution<G>,
    n: usize,
    stream: u64,
    mut visit: impl FnMut(usize, &G),
) -> G {
    let mut rng = CounterRng::new(stream);
    let mut current = G::identity();
    for step in 1..=n {
        current = current.op(mu.sample(rng.next_f64()));
        visit(step, &current);
    }
    current
}

/// Walk endpoint `w_n` alone.
pub fn walk_endpoint<G: GroupElement>(mu: &StepDistribution<G>, n: usize, stream: u64) -> G {
    walk_positions(mu, n, stream, |_, _| {})
}

/// An exact sparse convolution power `μ*ⁿ`, with audited pruning.
#[derive(Clone, Debug)]
pub struct ConvolutionTable<G: GroupElement> {
    n: usize,
    masses: IndexMap<G, f64>,
    pruned_mass: f64,
}

impl<G: GroupElement> ConvolutionTable<G> {
    /// The 0-th power: the point mass at the identity.
    pub fn delta() -> Self {
        let mut masses = IndexMap::new();
        masses.insert(G::identity(), 1.0);
        ConvolutionTable { n: 0, masses, pruned_mass: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn mass_of(&self, g: &G) -> Option<f64> {
        self.masses.get(g).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&G, f64)> {
        self.masses.iter().map(|(g, &m)| (g, m))
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum::<f64>() + self.pruned_mass
    }

    /// `Σ m f(g)` over retained atoms.
    pub fn expectation(&self, mut f: impl FnMut(&G) -> f64) -> f64 {
        self.masses.iter().map(|(g, &m)| m * f(g)).sum()
    }

    /// One more convolution by `μ`. Atoms falling below `prune_threshold`
    /// are dropped into the pruned-mass ledger; exceeding `budget` is an
    /// error so pruning can never silently bias entropy sums.
    pub fn convolve(
        &self,
        mu: &StepDistribution<G>,
        prune_threshold: f64,
        budget: f64,
    ) -> Result<ConvolutionTable<G>> {
        let mut next: IndexMap<G, f64> =
            IndexMap::with_capacity(self.masses.len() * mu.support_size() / 2 + 16);
        for (g, &m) in &self.masses {
            for (h, p) in mu.atoms() {
                *next.entry(g.op(h)).or_insert(0.0) += m * p;
            }
        }
        let mut pruned = self.pruned_mass;
        if prune_threshold > 0.0 {
            next.retain(|_, m| {
                if *m < prune_threshold {
                    pruned += *m;
                    false
                } else {
                    true
                }
            });
        }
        if pruned > budget {
            return Err(Error::BudgetExceeded(format!(
                "pruned mass {pruned:.3e} over budget {budget:.3e} at n = {}",
                self.n + 1
            )));
        }
        Ok(ConvolutionTable { n: self.n + 1, masses: next, pruned_mass: pruned })
    }

    /// Shannon entropy `-Σ m log m` over retained atoms (nats).
    pub fn shannon_entropy(&self) -> f64 {
        self.masses.values().map(|&m| if m > 0.0 { -m * m.ln() } else { 0.0 }).sum()
    }

    /// Entropy together with the interval bound accounting for pruned mass:
    /// the pruned mass is spread over at most `|supp μ|ⁿ` elements, so it can
    /// hide at most `p (n log |supp μ| - log p)` nats.
    pub fn shannon_entropy_interval(&self, support_size: usize) -> (f64, f64) {
        let h = self.shannon_entropy();
        if self.pruned_mass <= 0.0 {
            return (h, h);
        }
        let p = self.pruned_mass;
        let bound = p * (self.n as f64 * (support_size as f64).ln() - p.ln());
        (h, h + bound.max(0.0))
    }
}

/// One trajectory endpoint scored against the table at its horizon:
/// `-(1/n) log μ*ⁿ(w_n)`, or the pruning lower bound when `w_n` was pruned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShannonSample {
    Exact(f64),
    PrunedLowerBound(f64),
}

impl ShannonSample {
    pub fn value(self) -> f64 {
        match self {
            ShannonSample::Exact(v) | ShannonSample::PrunedLowerBound(v) => v,
        }
    }

    pub fn is_pruned(self) -> bool {
        matches!(self, ShannonSample::PrunedLowerBound(_))
    }
}

/// Scores one endpoint. `prune_threshold` is the threshold the table was
/// built with; a missing mass is only legal when pruning is active.
pub fn pointwise_shannon_sample<G: GroupElement>(
    table: &ConvolutionTable<G>,
    w: &G,
    prune_threshold: f64,
) -> Result<ShannonSample> {
    let n = table.n() as f64;
    if n == 0.0 {
        return Err(Error::InvalidInput("pointwise sample needs n >= 1".into()));
    }
    match table.mass_of(w) {
        Some(m) => Ok(ShannonSample::Exact(-m.ln() / n)),
        None if prune_threshold > 0.0 => {
            Ok(ShannonSample::PrunedLowerBound(-prune_threshold.ln() / n))
        }
        None => Err(Error::Numeric(
            "endpoint missing from an exact convolution table".into(),
        )),
    }
}

/// Heuristic non-elementarity precondition: looks for two support elements
/// that generate a free sub-semigroup up to word length 6 (all words over
/// the pair are pairwise distinct). Sufficient at desk scale, not a proof.
pub fn non_elementarity_heuristic<G: GroupElement>(mu: &StepDistribution<G>) -> bool {
    const DEPTH: usize = 6;
    let support: Vec<&G> = mu.atoms().iter().map(|(g, _)| g).collect();
    for (i, &g) in support.iter().enumerate() {
        for &h in support.iter().skip(i + 1) {
            let mut words: Vec<G> = vec![g.clone(), h.clone()];
            let mut all: Vec<G> = words.clone();
            for _ in 1..DEPTH {
                let mut next = Vec::with_capacity(words.len() * 2);
                for w in &words {
                    next.push(w.op(g));
                    next.push(w.op(h));
                }
                all.extend(next.iter().cloned());
                words = next;
            }
            let expected = all.len();
            all.sort();
            all.dedup();
            if all.len() == expected {
                return true;
            }
        }
    }
    false
}

/// Wire format for step distributions:
/// `{"model": "free"|"sl2z", "atoms": [{"g": <word or matrix>, "p": <mass>}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Free { atoms: Vec<Atom<ReducedWord>> },
    Sl2z { atoms: Vec<Atom<Sl2Matrix>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom<G> {
    pub g: G,
    pub p: f64,
}

impl MeasureSpec {
    pub fn free_distribution(&self) -> Result<StepDistribution<ReducedWord>> {
        match self {
            MeasureSpec::Free { atoms } => {
                StepDistribution::new(atoms.iter().map(|a| (a.g.clone(), a.p)).collect())
            }
            MeasureSpec::Sl2z { .. } => {
                Err(Error::UnsupportedModel("expected a free-group measure".into()))
            }
        }
    }

    pub fn sl2_distribution(&self) -> Result<StepDistribution<Sl2Matrix>> {
        match self {
            MeasureSpec::Sl2z { atoms } => {
                StepDistribution::new(atoms.iter().map(|a| (a.g.clone(), a.p)).collect())
            }
            MeasureSpec::Free { .. } => {
                Err(Error::UnsupportedModel("expected an sl2z measure".into()))
            }
        }
    }
}

/// Uniform nearest-neighbor step distribution on `F_k` (the simple random
/// walk on the Cayley tree).
pub fn simple_random_walk(rank: u8) -> StepDistribution<ReducedWord> {
    let group = crate::free::FreeGroup::new(rank).expect("valid rank");
    let letters: Vec<ReducedWord> = group.letters().map(ReducedWord::letter).collect();
    StepDistribution::uniform(letters).expect("uniform measure is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::FreeGroup;
    use proptest::prelude::*;

    fn srw2() -> StepDistribution<ReducedWord> {
        simple_random_walk(2)
    }

    #[test]
    fn distribution_validation() {
        assert!(StepDistribution::<ReducedWord>::new(vec![]).is_err());
        let short = vec![("a".parse::<ReducedWord>().unwrap(), 0.5)];
        assert!(StepDistribution::new(short).is_err());
        let dup = vec![
            ("a".parse::<ReducedWord>().unwrap(), 0.5),
            ("a".parse().unwrap(), 0.25),
            ("b".parse().unwrap(), 0.25),
        ];
        let mu = StepDistribution::new(dup).unwrap();
        assert_eq!(mu.support_size(), 2);
        assert!((mu.mass_of(&"a".parse().unwrap()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn trajectory_basics() {
        let mu = srw2();
        let t = sample_trajectory(&mu, 0, 1);
        assert_eq!(t.positions, vec![ReducedWord::identity()]);

        let point = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let t = sample_trajectory(&point, 5, 9);
        assert_eq!(t.positions[5], "aaaaa".parse().unwrap());

        // deterministic in the stream key
        let a = sample_trajectory(&mu, 50, 77);
        let b = sample_trajectory(&mu, 50, 77);
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn srw_endpoint_drift_is_near_half() {
        let mu = srw2();
        let n = 10_000;
        let w = walk_endpoint(&mu, n, 4242);
        let speed = w.len() as f64 / n as f64;
        assert!((0.45..0.55).contains(&speed), "speed {speed}");
    }

    #[test]
    fn exact_second_convolution_of_srw() {
        let mu = srw2();
        let t1 = ConvolutionTable::delta().convolve(&mu, 0.0, 0.0).unwrap();
        let t2 = t1.convolve(&mu, 0.0, 0.0).unwrap();
        assert_eq!(t2.n(), 2);
        assert_eq!(t2.len(), 13); // e plus twelve reduced 2-words
        assert!((t2.mass_of(&ReducedWord::identity()).unwrap() - 0.25).abs() < 1e-15);
        let ab: ReducedWord = "ab".parse().unwrap();
        assert!((t2.mass_of(&ab).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!((t2.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(t2.pruned_mass(), 0.0);

        // brute-force oracle: enumerate all products of two steps
        let mut brute: std::collections::HashMap<ReducedWord, f64> = Default::default();
        for (g, p) in mu.atoms() {
            for (h, q) in mu.atoms() {
                *brute.entry(g.op(h)).or_insert(0.0) += p * q;
            }
        }
        for (g, m) in t2.iter() {
            assert!((brute[g] - m).abs() < 1e-15);
        }
    }

    #[test]
    fn convolution_entropy_values() {
        let mu = srw2();
        let t1 = ConvolutionTable::delta().convolve(&mu, 0.0, 0.0).unwrap();
        assert!((t1.shannon_entropy() - 4f64.ln()).abs() < 1e-12);
        let t2 = t1.convolve(&mu, 0.0, 0.0).unwrap();
        let expected = 0.25 * 4f64.ln() + 0.75 * 16f64.ln();
        assert!((t2.shannon_entropy() - expected).abs() < 1e-12);

        let point = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let mut t = ConvolutionTable::delta();
        for _ in 0..6 {
            t = t.convolve(&point, 0.0, 0.0).unwrap();
        }
        assert_eq!(t.len(), 1);
        assert_eq!(t.shannon_entropy(), 0.0);
        assert_eq!(t.mass_of(&"aaaaaa".parse().unwrap()), Some(1.0));
    }

    #[test]
    fn srw_support_is_in_the_ball() {
        let mu = srw2();
        let mut t = ConvolutionTable::delta();
        for n in 1..=7 {
            t = t.convolve(&mu, 0.0, 0.0).unwrap();
            assert!(t.iter().all(|(g, _)| g.len() <= n));
            assert!(t.len() <= 1 + 2 * 3usize.pow(n as u32));
            assert!((t.total_mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_is_subadditive_on_exact_tables() {
        let mu = srw2();
        let mut tables = vec![ConvolutionTable::delta()];
        for _ in 1..=8 {
            tables.push(tables.last().unwrap().convolve(&mu, 0.0, 0.0).unwrap());
        }
        let h: Vec<f64> = tables.iter().map(|t| t.shannon_entropy()).collect();
        for n in 1..=7 {
            for m in 1..=(8 - n) {
                assert!(h[n + m] <= h[n] + h[m] + 1e-9, "H_{} > H_{} + H_{}", n + m, n, m);
            }
        }
    }

    #[test]
    fn pruning_is_audited() {
        let mu = srw2();
        let mut t = ConvolutionTable::delta();
        for _ in 0..6 {
            // straight words at n = 6 carry (1/4)^6 < 1e-3 and get pruned
            t = t.convolve(&mu, 1e-3, 1.0).unwrap();
        }
        assert!(t.pruned_mass() > 0.0);
        assert!((t.total_mass() - 1.0).abs() < 1e-10);
        let (lo, hi) = t.shannon_entropy_interval(mu.support_size());
        assert!(lo < hi);

        // a tight budget trips the error
        let res = ConvolutionTable::delta()
            .convolve(&mu, 0.0, 0.0)
            .and_then(|t| t.convolve(&mu, 0.3, 1e-3));
        assert!(matches!(res, Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn pointwise_samples() {
        let mu = srw2();
        let t1 = ConvolutionTable::delta().convolve(&mu, 0.0, 0.0).unwrap();
        let a: ReducedWord = "a".parse().unwrap();
        let s = pointwise_shannon_sample(&t1, &a, 0.0).unwrap();
        assert!((s.value() - 4f64.ln()).abs() < 1e-12);

        let t2 = t1.convolve(&mu, 0.0, 0.0).unwrap();
        let s = pointwise_shannon_sample(&t2, &ReducedWord::identity(), 0.0).unwrap();
        assert!((s.value() - 0.5 * 4f64.ln()).abs() < 1e-12);

        // missing atom on an exact table is a hard error
        let far: ReducedWord = "abab".parse().unwrap();
        assert!(pointwise_shannon_sample(&t2, &far, 0.0).is_err());
    }

    #[test]
    fn reflection_is_an_involution_and_fixes_symmetric_measures() {
        let mu = srw2();
        let back = mu.reflected().reflected();
        assert_eq!(mu.atoms().len(), back.atoms().len());
        for ((g, p), (h, q)) in mu.atoms().iter().zip(back.atoms()) {
            assert_eq!(g, h);
            assert_eq!(p, q);
        }

        let biased = StepDistribution::new(vec![
            ("a".parse::<ReducedWord>().unwrap(), 0.4),
            ("A".parse().unwrap(), 0.1),
            ("b".parse().unwrap(), 0.25),
            ("B".parse().unwrap(), 0.25),
        ])
        .unwrap();
        let refl = biased.reflected();
        assert!((refl.mass_of(&"A".parse().unwrap()) - 0.4).abs() < 1e-15);
        assert!((refl.mass_of(&"a".parse().unwrap()) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn non_elementarity_heuristic_examples() {
        assert!(non_elementarity_heuristic(&srw2()));
        let point = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        assert!(!non_elementarity_heuristic(&point));
        let cyclic = StepDistribution::new(vec![
            ("a".parse::<ReducedWord>().unwrap(), 0.5),
            ("A".parse().unwrap(), 0.5),
        ])
        .unwrap();
        assert!(!non_elementarity_heuristic(&cyclic));

        let (g, h) = crate::sl2::sanov_generators();
        let sanov = StepDistribution::uniform(vec![
            g.clone(),
            g.inverse(),
            h.clone(),
            h.inverse(),
        ])
        .unwrap();
        assert!(non_elementarity_heuristic(&sanov));
    }

    #[test]
    fn measure_spec_wire_format() {
        let json = r#"{"model":"free","atoms":[{"g":"a","p":0.5},{"g":"A","p":0.5}]}"#;
        let spec: MeasureSpec = serde_json::from_str(json).unwrap();
        let mu = spec.free_distribution().unwrap();
        assert_eq!(mu.support_size(), 2);
        assert!(spec.sl2_distribution().is_err());

        let json = r#"{"model":"sl2z","atoms":[
            {"g":[["1","2"],["0","1"]],"p":0.5},
            {"g":[["1","0"],["2","1"]],"p":0.5}]}"#;
        let spec: MeasureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.sl2_distribution().unwrap().support_size(), 2);

        // unknown keys are rejected
        let bad = r#"{"model":"free","atoms":[{"g":"a","p":1.0,"extra":1}]}"#;
        assert!(serde_json::from_str::<MeasureSpec>(bad).is_err());
    }

    proptest! {
        #[test]
        fn tables_conserve_mass_under_pruning(threshold in 0.0f64..1e-3) {
            let mu = srw2();
            let mut t = ConvolutionTable::delta();
            for _ in 0..5 {
                t = t.convolve(&mu, threshold, 1.0).unwrap();
            }
            prop_assert!((t.total_mass() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn sampling_matches_masses(seed in 0u64..1_000) {
            let mu = StepDistribution::new(vec![
                ("a".parse::<ReducedWord>().unwrap(), 0.7),
                ("b".parse::<ReducedWord>().unwrap(), 0.3),
            ]).unwrap();
            let mut rng = CounterRng::new(seed);
            let mut hits = 0;
            let n = 2_000;
            for _ in 0..n {
                if mu.sample(rng.next_f64()) == &"a".parse::<ReducedWord>().unwrap() {
                    hits += 1;
                }
            }
            let p = hits as f64 / n as f64;
            prop_assert!((p - 0.7).abs() < 0.05);
        }
    }

    #[test]
    fn free_group_letters_roundtrip() {
        let group = FreeGroup::new(3).unwrap();
        assert_eq!(group.letters().count(), 6);
    }
}
