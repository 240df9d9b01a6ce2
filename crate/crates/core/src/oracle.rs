//! Exact (non-Monte-Carlo) harmonic measure, drift and entropy for
//! nearest-neighbor measures on the free group.
//!
//! The boundary of the tree carries the harmonic measure ν as a Markov
//! measure: an initial letter law plus a non-backtracking transition kernel.
//! The solver derives both from the stationarity equation expanded on
//! cylinders of length one and two, using the exact translate identities of
//! cylinders under generators. The Markov ansatz is not trusted: the returned
//! measure is verified a posteriori against the stationarity equation on all
//! cylinders of length up to three, and a residual above `1e-10` is a hard
//! error, never a silent return.
//!
//! Laziness (`μ(id) > 0`) is handled by time change: the harmonic measure is
//! that of the renormalized moving measure, while drift and entropy pick up
//! the factor `1 - μ(id)` automatically through the raw masses.

use rayon::prelude::*;

use crate::accel::{parity_aitken, Extrapolation};
use crate::free::{BoundaryWord, FreeGroup, Letter, ReducedWord};
use crate::rng::substream;
use crate::walk::{walk_endpoint, ConvolutionTable, StepDistribution};
use crate::{Error, Result};

/// Sup-norm tolerance for fixed-point iterations.
const FIXED_POINT_TOL: f64 = 1e-14;
/// Residual tolerance for the first-passage system.
const FIRST_PASSAGE_RESIDUAL: f64 = 1e-12;
/// Stationarity residual tolerance on cylinders of length <= 3.
pub const STATIONARITY_RESIDUAL: f64 = 1e-10;
/// Iteration cap for either solve.
const MAX_ITERATIONS: usize = 1_000_000;
/// Damping factor for the stationarity solve.
const DAMPING: f64 = 0.5;

/// A nearest-neighbor step distribution on `F_k`: mass on single letters,
/// plus an optional lazy component at the identity.
#[derive(Clone, Debug)]
pub struct NearestNeighborMeasure {
    rank: u8,
    letter_mass: Vec<f64>,
    lazy: f64,
}

impl NearestNeighborMeasure {
    pub fn from_distribution(mu: &StepDistribution<ReducedWord>, rank: u8) -> Result<Self> {
        let group = FreeGroup::new(rank)?;
        let mut letter_mass = vec![0.0; group.alphabet_size()];
        let mut lazy = 0.0;
        for (g, p) in mu.atoms() {
            if g.is_identity() {
                lazy += p;
            } else if g.len() == 1 && group.contains(g) {
                letter_mass[g.letter_codes()[0] as usize] += p;
            } else {
                return Err(Error::UnsupportedModel(format!(
                    "atom {g:?} is not a generator of F_{rank}: the exact oracle only covers nearest-neighbor measures"
                )));
            }
        }
        if lazy >= 1.0 - MASS_FLOOR {
            return Err(Error::InvalidInput("measure is (almost) purely lazy".into()));
        }
        Ok(NearestNeighborMeasure { rank, letter_mass, lazy })
    }

    pub fn rank(&self) -> u8 {
        self.rank
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.rank as usize
    }

    /// Raw mass of a letter (summing with `lazy` to one).
    pub fn letter_mass(&self, code: u8) -> f64 {
        self.letter_mass[code as usize]
    }

    pub fn lazy_mass(&self) -> f64 {
        self.lazy
    }

    /// Time-changed mass conditioned on actually moving.
    pub fn moving_mass(&self, code: u8) -> f64 {
        self.letter_mass[code as usize] / (1.0 - self.lazy)
    }

    /// Back to a general step distribution (for walk routes).
    pub fn to_distribution(&self) -> StepDistribution<ReducedWord> {
        let mut atoms: Vec<(ReducedWord, f64)> = Vec::new();
        if self.lazy > 0.0 {
            atoms.push((ReducedWord::identity(), self.lazy));
        }
        for (code, &p) in self.letter_mass.iter().enumerate() {
            if p > 0.0 {
                atoms.push((ReducedWord::letter(Letter::from_code(code as u8)), p));
            }
        }
        StepDistribution::new(atoms).expect("nearest-neighbor masses form a measure")
    }

    pub fn reflected(&self) -> Self {
        let mut letter_mass = vec![0.0; self.letter_mass.len()];
        for (code, &p) in self.letter_mass.iter().enumerate() {
            letter_mass[code ^ 1] = p;
        }
        NearestNeighborMeasure { rank: self.rank, letter_mass, lazy: self.lazy }
    }

    /// Non-elementarity precondition: at least two distinct generators carry
    /// mass (so the support is not contained in a single `⟨a⟩`).
    pub fn is_non_elementary(&self) -> bool {
        if self.rank < 2 {
            return false;
        }
        let mut generators_seen = std::collections::BTreeSet::new();
        for (code, &p) in self.letter_mass.iter().enumerate() {
            if p > 0.0 {
                generators_seen.insert(code / 2);
            }
        }
        generators_seen.len() >= 2
    }
}

const MASS_FLOOR: f64 = 1e-12;

/// First-passage probabilities: `q[s]` is the probability that the walk
/// started at `e` ever reaches the neighbor `s`.
#[derive(Clone, Debug)]
pub struct FirstPassageVector {
    q: Vec<f64>,
}

impl FirstPassageVector {
    pub fn q(&self, code: u8) -> f64 {
        self.q[code as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }
}

/// Minimal nonnegative solution of
/// `q[s] = μ(s) + Σ_{b≠s} μ(b) q[b⁻¹] q[s]`
/// by monotone fixed-point iteration from zero.
///
/// The system closes because any path from a neighbor `b ≠ s` to `s` in the
/// tree must pass back through the root.
pub fn solve_first_passage(mu: &NearestNeighborMeasure) -> Result<FirstPassageVector> {
    let m = mu.alphabet_size();
    let p: Vec<f64> = (0..m).map(|c| mu.moving_mass(c as u8)).collect();
    let mut q = vec![0.0f64; m];
    let mut iterations = 0usize;
    loop {
        let mut next = vec![0.0f64; m];
        let mut diff = 0.0f64;
        for s in 0..m {
            let mut acc = p[s];
            for b in 0..m {
                if b != s {
                    acc += p[b] * q[b ^ 1] * q[s];
                }
            }
            next[s] = acc;
            diff = diff.max((acc - q[s]).abs());
        }
        q = next;
        iterations += 1;
        if diff < FIXED_POINT_TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Numeric(format!(
                "first-passage iteration failed to converge (sup diff {diff:.3e})"
            )));
        }
    }
    // residual of the fixed-point system
    let mut residual = 0.0f64;
    for s in 0..m {
        let mut acc = p[s];
        for b in 0..m {
            if b != s {
                acc += p[b] * q[b ^ 1] * q[s];
            }
        }
        residual = residual.max((acc - q[s]).abs());
    }
    if residual > FIRST_PASSAGE_RESIDUAL {
        return Err(Error::Numeric(format!("first-passage residual {residual:.3e}")));
    }
    Ok(FirstPassageVector { q })
}

/// The harmonic measure on `∂F_k` as a Markov measure: an initial letter law
/// and a non-backtracking transition kernel, with the measured stationarity
/// residual it was verified at.
#[derive(Clone, Debug)]
pub struct BoundaryMarkovMeasure {
    rank: u8,
    initial: Vec<f64>,
    kernel: Vec<f64>, // row-major (2k x 2k), backtracking entries exactly 0
    residual: f64,
}

impl BoundaryMarkovMeasure {
    pub fn rank(&self) -> u8 {
        self.rank
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.rank as usize
    }

    pub fn initial(&self, code: u8) -> f64 {
        self.initial[code as usize]
    }

    pub fn kernel(&self, from: u8, to: u8) -> f64 {
        self.kernel[from as usize * self.alphabet_size() + to as usize]
    }

    /// Max stationarity residual over cylinders of length <= 3, recorded at
    /// verification time.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_verified(&self) -> bool {
        self.residual <= STATIONARITY_RESIDUAL
    }

    /// The maximal-entropy (uniform non-backtracking) measure; the harmonic
    /// measure of the simple random walk.
    pub fn uniform(rank: u8) -> Result<Self> {
        let group = FreeGroup::new(rank)?;
        let m = group.alphabet_size();
        let initial = vec![1.0 / m as f64; m];
        let mut kernel = vec![0.0; m * m];
        for from in 0..m {
            for to in 0..m {
                if to != from ^ 1 {
                    kernel[from * m + to] = 1.0 / (m - 1) as f64;
                }
            }
        }
        Ok(BoundaryMarkovMeasure { rank, initial, kernel, residual: 0.0 })
    }

    /// `ν([w]) = initial(w_1) Π kernel(w_i, w_{i+1})`.
    pub fn cylinder_measure(&self, w: &ReducedWord) -> Result<f64> {
        if w.is_identity() {
            return Err(Error::InvalidInput("cylinder needs length >= 1".into()));
        }
        Ok(self.cylinder_mass_codes(w.letter_codes()))
    }

    fn cylinder_mass_codes(&self, codes: &[u8]) -> f64 {
        let mut mass = self.initial[codes[0] as usize];
        for pair in codes.windows(2) {
            mass *= self.kernel(pair[0], pair[1]);
        }
        mass
    }

    /// `ν(t[w])`, the mass of a cylinder translated by a single letter `t`,
    /// from the exact tree identities: prepending when no cancellation
    /// occurs, unwinding one letter otherwise, and `t[t⁻¹] = ∂X ∖ [t]`.
    pub fn translated_cylinder_measure(&self, t: Letter, codes: &[u8]) -> f64 {
        debug_assert!(!codes.is_empty());
        let tc = t.code();
        if codes[0] == tc ^ 1 {
            if codes.len() == 1 {
                1.0 - self.initial[tc as usize]
            } else {
                self.cylinder_mass_codes(&codes[1..])
            }
        } else {
            let mut mass = self.initial[tc as usize] * self.kernel(tc, codes[0]);
            for pair in codes.windows(2) {
                mass *= self.kernel(pair[0], pair[1]);
            }
            mass
        }
    }

    /// Exact local dimension sample `log ν(B(ξ, e^{-t})) / (-t)`: on the tree
    /// the ball of radius `e^{-t}` around ξ is the cylinder of its prefix of
    /// length `⌈t⌉`.
    pub fn exact_local_dimension(&self, xi: &BoundaryWord, t_max: f64) -> Result<f64> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidInput(format!("scale t_max = {t_max} must be positive")));
        }
        let m = t_max.ceil() as usize;
        if xi.depth() < m {
            return Err(Error::InsufficientDepth(format!(
                "proxy depth {} < ceil(t_max) = {m}",
                xi.depth()
            )));
        }
        let mass = self.cylinder_mass_codes(&xi.prefix().letter_codes()[..m]);
        if mass <= 0.0 {
            return Err(Error::InvalidInput(
                "cylinder has zero harmonic mass; the point is not ν-realizable".into(),
            ));
        }
        Ok(mass.ln() / (-t_max))
    }

    /// Stationary law of the letter chain and the chain's entropy rate
    /// `-Σ π(s) K(s,t) log K(s,t)`; by exact dimensionality this equals the
    /// a.e. local dimension of ν on the tree.
    pub fn letter_chain_entropy_rate(&self) -> f64 {
        let m = self.alphabet_size();
        let mut pi = self.initial.clone();
        for _ in 0..20_000 {
            let mut next = vec![0.0f64; m];
            for s in 0..m {
                if pi[s] == 0.0 {
                    continue;
                }
                for t in 0..m {
                    next[t] += pi[s] * self.kernel[s * m + t];
                }
            }
            let mut diff = 0.0f64;
            for s in 0..m {
                diff = diff.max((next[s] - pi[s]).abs());
            }
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        let mut h = 0.0;
        for s in 0..m {
            for t in 0..m {
                let k = self.kernel[s * m + t];
                if k > 0.0 && pi[s] > 0.0 {
                    h -= pi[s] * k * k.ln();
                }
            }
        }
        h
    }
}

/// All reduced words of the given length as code vectors.
fn reduced_words(alphabet: usize, len: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * (alphabet - 1));
        for w in &out {
            for c in 0..alphabet as u8 {
                if w.last() != Some(&(c ^ 1)) {
                    let mut v = w.clone();
                    v.push(c);
                    next.push(v);
                }
            }
        }
        out = next;
    }
    out
}

/// Max residual of the stationarity equation `ν = Σ_s μ(s) sν` over all
/// cylinders of length <= `max_len`.
pub fn stationarity_residual(
    mu: &NearestNeighborMeasure,
    nu: &BoundaryMarkovMeasure,
    max_len: usize,
) -> f64 {
    let m = mu.alphabet_size();
    let mut worst = 0.0f64;
    for len in 1..=max_len {
        for w in reduced_words(m, len) {
            let lhs = nu.cylinder_mass_codes(&w);
            let mut rhs = 0.0;
            for s in 0..m as u8 {
                let p = mu.moving_mass(s);
                if p > 0.0 {
                    // ν(s⁻¹ [w]) translated by the letter s⁻¹
                    rhs += p
                        * nu.translated_cylinder_measure(Letter::from_code(s).inverse(), &w);
                }
            }
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// Solves the stationarity equations for the Markov boundary measure by
/// damped fixed-point iteration, then verifies the result on all cylinders
/// of length <= 3.
pub fn solve_stationary_markov(
    mu: &NearestNeighborMeasure,
    q: &FirstPassageVector,
) -> Result<BoundaryMarkovMeasure> {
    if !mu.is_non_elementary() {
        return Err(Error::UnsupportedModel(
            "stationary boundary measure needs a non-elementary nearest-neighbor measure"
                .into(),
        ));
    }
    let m = mu.alphabet_size();
    let p: Vec<f64> = (0..m).map(|c| mu.moving_mass(c as u8)).collect();

    // first-passage-informed initial guess keeps the early iterates sane
    let mut initial: Vec<f64> = (0..m).map(|s| q.q(s as u8).max(1e-3)).collect();
    let z: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|v| *v /= z);
    let mut kernel = vec![0.0f64; m * m];
    for from in 0..m {
        let mut row: Vec<f64> = (0..m)
            .map(|to| if to == from ^ 1 { 0.0 } else { q.q(to as u8).max(1e-3) })
            .collect();
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
        kernel[from * m..(from + 1) * m].copy_from_slice(&row);
    }

    let mut iterations = 0usize;
    loop {
        // T[x]: mass flowing into [x] from steps that do not start with x
        let mut t_flow = vec![0.0f64; m];
        for x in 0..m {
            let mut acc = p[x ^ 1] * initial[x] * kernel[x * m + x];
            for b in 0..m {
                if b != x && b != x ^ 1 {
                    acc += p[b] * initial[b ^ 1] * kernel[(b ^ 1) * m + x];
                }
            }
            t_flow[x] = acc;
        }

        let mut next_initial = vec![0.0f64; m];
        for x in 0..m {
            next_initial[x] = p[x] * (1.0 - initial[x ^ 1]) + t_flow[x];
        }
        let mut next_kernel = vec![0.0f64; m * m];
        for x in 0..m {
            if initial[x] < 1e-300 {
                // unreachable letter: keep its (measure-zero) row
                next_kernel[x * m..(x + 1) * m]
                    .copy_from_slice(&kernel[x * m..(x + 1) * m]);
                continue;
            }
            for y in 0..m {
                if y == x ^ 1 {
                    continue;
                }
                next_kernel[x * m + y] =
                    (p[x] * initial[y] + kernel[x * m + y] * t_flow[x]) / initial[x];
            }
        }

        // damped update, projected back onto probability vectors
        let mut diff = 0.0f64;
        for x in 0..m {
            let v = DAMPING * initial[x] + (1.0 - DAMPING) * next_initial[x];
            diff = diff.max((v - initial[x]).abs());
            initial[x] = v;
        }
        let z: f64 = initial.iter().sum();
        initial.iter_mut().for_each(|v| *v /= z);
        for x in 0..m {
            let row = &mut kernel[x * m..(x + 1) * m];
            let next_row = &next_kernel[x * m..(x + 1) * m];
            for y in 0..m {
                let v = DAMPING * row[y] + (1.0 - DAMPING) * next_row[y];
                diff = diff.max((v - row[y]).abs());
                row[y] = v;
            }
            let z: f64 = row.iter().sum();
            if z > 0.0 {
                row.iter_mut().for_each(|v| *v /= z);
            }
        }

        iterations += 1;
        if diff < FIXED_POINT_TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Numeric(format!(
                "stationarity iteration failed to converge (sup diff {diff:.3e})"
            )));
        }
    }

    let mut nu = BoundaryMarkovMeasure { rank: mu.rank(), initial, kernel, residual: f64::NAN };
    let residual = stationarity_residual(mu, &nu, 3);
    if residual > STATIONARITY_RESIDUAL {
        return Err(Error::OracleInconsistent(format!(
            "stationarity residual {residual:.3e} exceeds {STATIONARITY_RESIDUAL:.1e}"
        )));
    }
    nu.residual = residual;
    Ok(nu)
}

/// Furstenberg-type entropy of `(∂F_k, ν)`:
/// `h = Σ_s μ(s) Σ_{|w|=2} ν[w] log( ν[w] / ν(s[w]) )`.
///
/// For nearest-neighbor steps the Radon-Nikodym derivative is constant on
/// cylinders of length two, so the double sum is finite and exact. The lazy
/// part of μ contributes zero.
pub fn furstenberg_entropy(
    mu: &NearestNeighborMeasure,
    nu: &BoundaryMarkovMeasure,
) -> Result<f64> {
    if !nu.is_verified() {
        return Err(Error::OracleInconsistent(
            "boundary measure was not stationarity-verified".into(),
        ));
    }
    let m = mu.alphabet_size();
    let mut h = 0.0f64;
    for s in 0..m as u8 {
        let mass = mu.letter_mass(s);
        if mass == 0.0 {
            continue;
        }
        let mut kl = 0.0f64;
        for w in reduced_words(m, 2) {
            let nu_w = nu.cylinder_mass_codes(&w);
            if nu_w <= 0.0 {
                continue;
            }
            let translated = nu.translated_cylinder_measure(Letter::from_code(s), &w);
            if translated <= 0.0 {
                return Err(Error::OracleInconsistent(format!(
                    "translated cylinder s[w] has zero mass for s = {s}, w = {w:?}"
                )));
            }
            kl += nu_w * (nu_w / translated).ln();
        }
        h += mass * kl;
    }
    Ok(h)
}

/// Closed-form drift from the boundary law of the reflected walk: the last
/// letter of `w_n` is distributed like the inverse of the first letter of a
/// `μ̌`-walk, so the stationary distance increment is
/// `l = (1 - μ(id)) - 2 Σ_s μ(s) ι̌(s)`.
///
/// Used as an independent cross-check of the table route.
pub fn drift_boundary_formula(
    mu: &NearestNeighborMeasure,
    reflected_nu: &BoundaryMarkovMeasure,
) -> f64 {
    let mut acc = 1.0 - mu.lazy_mass();
    for s in 0..mu.alphabet_size() as u8 {
        acc -= 2.0 * mu.letter_mass(s) * reflected_nu.initial(s);
    }
    acc
}

#[derive(Clone, Debug)]
pub struct DriftConfig {
    /// Largest convolution power for the table route.
    pub table_n_max: usize,
    /// Retained-atom budget that adaptively caps the table route.
    pub table_atom_budget: usize,
    pub mc_horizon: usize,
    pub mc_trajectories: usize,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            table_n_max: 12,
            table_atom_budget: 2_000_000,
            mc_horizon: 10_000,
            mc_trajectories: 10_000,
            seed: 0x0dd5_eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DriftResult {
    /// Table-route value (the headline number).
    pub value: f64,
    /// Union interval covering both routes with their error scales.
    pub lo: f64,
    pub hi: f64,
    pub table_route: Extrapolation,
    pub table_n_used: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
}

const DRIFT_MC_TAG: u64 = 0x11;

/// Drift via two independent routes whose agreement is the contract:
/// exact convolution tables with parity-aware Aitken extrapolation of the
/// increments `L(μ*ⁿ⁺¹) - L(μ*ⁿ)`, and a Monte Carlo endpoint estimate with
/// a CLT interval. Disagreement beyond the union interval is an error.
pub fn exact_drift(mu: &NearestNeighborMeasure, cfg: &DriftConfig) -> Result<DriftResult> {
    let dist = mu.to_distribution();

    // route (i): exact tables
    let mut table = ConvolutionTable::delta();
    let mut lengths = vec![0.0f64];
    while table.n() < cfg.table_n_max {
        if table.len() * (dist.support_size().saturating_sub(1)).max(1) > cfg.table_atom_budget
        {
            break;
        }
        table = table.convolve(&dist, 0.0, 0.0)?;
        lengths.push(table.expectation(|g| g.len() as f64));
    }
    let n_used = lengths.len() - 1;
    if n_used < 4 {
        return Err(Error::Numeric(format!(
            "table route only reached n = {n_used}; budget too small"
        )));
    }
    let increments: Vec<f64> = lengths.windows(2).map(|w| w[1] - w[0]).collect();
    let table_route = parity_aitken(&increments);

    // route (ii): Monte Carlo endpoints, reduced in fixed index order
    let stream = substream(cfg.seed, DRIFT_MC_TAG);
    let speeds: Vec<f64> = (0..cfg.mc_trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let w = walk_endpoint(&dist, cfg.mc_horizon, substream(stream, i));
            w.len() as f64 / cfg.mc_horizon as f64
        })
        .collect();
    let mc_n = speeds.len() as f64;
    let mc_mean = speeds.iter().sum::<f64>() / mc_n;
    let var = speeds.iter().map(|s| (s - mc_mean).powi(2)).sum::<f64>() / (mc_n - 1.0);
    let mc_stderr = (var / mc_n).sqrt();

    let gap = (table_route.value - mc_mean).abs();
    let allowance = 3.0 * (table_route.error + mc_stderr) + 1e-9;
    if gap > allowance {
        return Err(Error::OracleInconsistent(format!(
            "drift routes disagree: table {0:.6} vs MC {mc_mean:.6} (gap {gap:.2e} > {allowance:.2e})",
            table_route.value
        )));
    }

    let lo = (table_route.value - 3.0 * table_route.error).min(mc_mean - 3.0 * mc_stderr);
    let hi = (table_route.value + 3.0 * table_route.error).max(mc_mean + 3.0 * mc_stderr);
    Ok(DriftResult {
        value: table_route.value,
        lo,
        hi,
        table_route,
        table_n_used: n_used,
        mc_mean,
        mc_stderr,
    })
}

/// Everything the oracle knows about one nearest-neighbor measure.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub measure: NearestNeighborMeasure,
    pub first_passage: FirstPassageVector,
    pub harmonic: BoundaryMarkovMeasure,
    pub drift: DriftResult,
    pub entropy: f64,
}

/// Full oracle run: first passage, stationary boundary measure, drift via
/// both routes, Furstenberg entropy.
pub fn solve_oracle(
    mu: &StepDistribution<ReducedWord>,
    rank: u8,
    drift_cfg: &DriftConfig,
) -> Result<OracleSolution> {
    let nn = NearestNeighborMeasure::from_distribution(mu, rank)?;
    let q = solve_first_passage(&nn)?;
    let harmonic = solve_stationary_markov(&nn, &q)?;
    let drift = exact_drift(&nn, drift_cfg)?;
    let entropy = furstenberg_entropy(&nn, &harmonic)?;
    Ok(OracleSolution { measure: nn, first_passage: q, harmonic, drift, entropy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::walk::simple_random_walk;

    fn srw2_nn() -> NearestNeighborMeasure {
        NearestNeighborMeasure::from_distribution(&simple_random_walk(2), 2).unwrap()
    }

    fn biased_nn() -> NearestNeighborMeasure {
        let mu = StepDistribution::new(vec![
            ("a".parse().unwrap(), 0.4),
            ("A".parse().unwrap(), 0.1),
            ("b".parse().unwrap(), 0.25),
            ("B".parse().unwrap(), 0.25),
        ])
        .unwrap();
        NearestNeighborMeasure::from_distribution(&mu, 2).unwrap()
    }

    #[test]
    fn nearest_neighbor_extraction_rejects_long_atoms() {
        let mu = StepDistribution::new(vec![
            ("ab".parse().unwrap(), 0.5),
            ("A".parse().unwrap(), 0.5),
        ])
        .unwrap();
        assert!(matches!(
            NearestNeighborMeasure::from_distribution(&mu, 2),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn first_passage_srw_is_one_third() {
        let q = solve_first_passage(&srw2_nn()).unwrap();
        for s in 0..4 {
            assert!((q.q(s) - 1.0 / 3.0).abs() < 1e-12, "q[{s}] = {}", q.q(s));
        }
    }

    #[test]
    fn first_passage_deterministic_walk() {
        let mu = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let nn = NearestNeighborMeasure::from_distribution(&mu, 2).unwrap();
        let q = solve_first_passage(&nn).unwrap();
        assert!((q.q(0) - 1.0).abs() < 1e-14);
        for s in 1..4 {
            assert_eq!(q.q(s), 0.0);
        }
    }

    #[test]
    fn first_passage_biased_matches_monte_carlo() {
        let nn = biased_nn();
        let q = solve_first_passage(&nn).unwrap();
        // Monte Carlo: has the walk hit each neighbor of the root by the
        // time it escapes to distance 40?
        let dist = nn.to_distribution();
        let trials = 1_000_000usize;
        let mut hits = [0u32; 4];
        let base = crate::rng::substream(0xfeed, 0x91);
        for i in 0..trials {
            let mut rng = CounterRng::for_stream(base, i as u64);
            let mut w = ReducedWord::identity();
            let mut seen = [false; 4];
            while w.len() < 40 {
                w = w.multiply(dist.sample(rng.next_f64()));
                if w.len() == 1 {
                    seen[w.letter_codes()[0] as usize] = true;
                }
            }
            for s in 0..4 {
                hits[s] += seen[s] as u32;
            }
        }
        for s in 0..4u8 {
            let p_hat = hits[s as usize] as f64 / trials as f64;
            let se = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
            assert!(
                (p_hat - q.q(s)).abs() < 3.0 * se + 1e-9,
                "letter {s}: MC {p_hat:.5} vs exact {:.5}",
                q.q(s)
            );
        }
    }

    #[test]
    fn stationary_measure_of_srw_is_uniform() {
        let nn = srw2_nn();
        let q = solve_first_passage(&nn).unwrap();
        let nu = solve_stationary_markov(&nn, &q).unwrap();
        for s in 0..4 {
            assert!((nu.initial(s) - 0.25).abs() < 1e-12);
            for t in 0..4 {
                let expect = if t == s ^ 1 { 0.0 } else { 1.0 / 3.0 };
                assert!((nu.kernel(s, t) - expect).abs() < 1e-12);
            }
        }
        assert!(nu.residual() <= STATIONARITY_RESIDUAL);
        let ab: ReducedWord = "ab".parse().unwrap();
        assert!((nu.cylinder_measure(&ab).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_measure_rejects_elementary_input() {
        let mu = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let nn = NearestNeighborMeasure::from_distribution(&mu, 2).unwrap();
        let q = solve_first_passage(&nn).unwrap();
        assert!(solve_stationary_markov(&nn, &q).is_err());
    }

    #[test]
    fn stationary_measure_biased_properties() {
        let nn = biased_nn();
        let q = solve_first_passage(&nn).unwrap();
        let nu = solve_stationary_markov(&nn, &q).unwrap();
        assert!(nu.residual() <= STATIONARITY_RESIDUAL);
        let m = nn.alphabet_size();
        // rows sum to one, backtracking entries are exactly zero
        for s in 0..m as u8 {
            let row: f64 = (0..m as u8).map(|t| nu.kernel(s, t)).sum();
            assert!((row - 1.0).abs() < 1e-12);
            assert_eq!(nu.kernel(s, s ^ 1), 0.0);
        }
        // cylinder masses of a fixed length sum to one
        for len in 1..=3 {
            let total: f64 = super::reduced_words(m, len)
                .iter()
                .map(|w| nu.cylinder_mass_codes(w))
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "length {len} total {total}");
        }
        // quasi-invariance: translate ratios bounded and positive
        for s in 0..m as u8 {
            for w in super::reduced_words(m, 3) {
                let ratio = nu.translated_cylinder_measure(Letter::from_code(s), &w)
                    / nu.cylinder_mass_codes(&w);
                assert!(ratio.is_finite() && ratio > 0.0);
                assert!(ratio < 1e3, "unbounded translate ratio {ratio}");
            }
        }
    }

    #[test]
    fn stationarity_residual_detects_wrong_measure() {
        let nn = biased_nn();
        let uniform = BoundaryMarkovMeasure::uniform(2).unwrap();
        assert!(stationarity_residual(&nn, &uniform, 3) > 1e-2);
    }

    #[test]
    fn furstenberg_entropy_of_srw_is_half_log_three() {
        let nn = srw2_nn();
        let q = solve_first_passage(&nn).unwrap();
        let nu = solve_stationary_markov(&nn, &q).unwrap();
        let h = furstenberg_entropy(&nn, &nu).unwrap();
        assert!((h - 0.5 * 3f64.ln()).abs() < 1e-6, "h = {h}");
        // entropy bounds: 0 < h <= H(μ)
        assert!(h > 0.0 && h <= 4f64.ln() + 1e-12);
    }

    #[test]
    fn furstenberg_requires_verified_measure() {
        let nn = srw2_nn();
        let mut nu = BoundaryMarkovMeasure::uniform(2).unwrap();
        nu.residual = 1.0;
        assert!(furstenberg_entropy(&nn, &nu).is_err());
    }

    #[test]
    fn exact_drift_of_srw_f2() {
        let cfg = DriftConfig { mc_horizon: 2_000, mc_trajectories: 2_000, ..Default::default() };
        let drift = exact_drift(&srw2_nn(), &cfg).unwrap();
        assert!((drift.value - 0.5).abs() < 1e-9, "drift {}", drift.value);
        assert!(drift.lo <= 0.5 && 0.5 <= drift.hi);
        assert_eq!(drift.table_n_used, 12);
    }

    #[test]
    fn exact_drift_of_point_mass() {
        let mu = StepDistribution::point_mass("a".parse::<ReducedWord>().unwrap());
        let nn = NearestNeighborMeasure::from_distribution(&mu, 2).unwrap();
        let cfg = DriftConfig { mc_horizon: 100, mc_trajectories: 16, ..Default::default() };
        let drift = exact_drift(&nn, &cfg).unwrap();
        assert!((drift.value - 1.0).abs() < 1e-12);
        assert_eq!(drift.mc_stderr, 0.0);
    }

    #[test]
    fn drift_entropy_dimension_triangle() {
        // letter-chain entropy rate = h / l, with l from the closed-form
        // boundary formula; three independent computations in one identity
        for nn in [srw2_nn(), biased_nn()] {
            let q = solve_first_passage(&nn).unwrap();
            let nu = solve_stationary_markov(&nn, &q).unwrap();
            let h = furstenberg_entropy(&nn, &nu).unwrap();

            let refl = nn.reflected();
            let q_r = solve_first_passage(&refl).unwrap();
            let nu_r = solve_stationary_markov(&refl, &q_r).unwrap();
            let l = drift_boundary_formula(&nn, &nu_r);

            let dim = nu.letter_chain_entropy_rate();
            assert!(
                (dim - h / l).abs() < 1e-8,
                "entropy rate {dim} vs h/l = {}",
                h / l
            );
        }
    }

    #[test]
    fn closed_form_drift_matches_table_route() {
        let nn = biased_nn();
        let refl = nn.reflected();
        let q_r = solve_first_passage(&refl).unwrap();
        let nu_r = solve_stationary_markov(&refl, &q_r).unwrap();
        let formula = drift_boundary_formula(&nn, &nu_r);

        let cfg = DriftConfig { mc_horizon: 4_000, mc_trajectories: 2_000, ..Default::default() };
        let drift = exact_drift(&nn, &cfg).unwrap();
        assert!(
            (formula - drift.value).abs() <= 3.0 * drift.table_route.error + 1e-6,
            "formula {formula} vs table {}",
            drift.value
        );
    }

    #[test]
    fn lazy_walk_time_change() {
        // adding laziness leaves ν alone and scales drift and entropy
        let lazy_mu = StepDistribution::new(vec![
            (ReducedWord::identity(), 0.2),
            ("a".parse().unwrap(), 0.2),
            ("A".parse().unwrap(), 0.2),
            ("b".parse().unwrap(), 0.2),
            ("B".parse().unwrap(), 0.2),
        ])
        .unwrap();
        let nn = NearestNeighborMeasure::from_distribution(&lazy_mu, 2).unwrap();
        let q = solve_first_passage(&nn).unwrap();
        let nu = solve_stationary_markov(&nn, &q).unwrap();
        assert!((nu.initial(0) - 0.25).abs() < 1e-12);

        let h = furstenberg_entropy(&nn, &nu).unwrap();
        assert!((h - 0.8 * 0.5 * 3f64.ln()).abs() < 1e-6, "lazy entropy {h}");

        let cfg = DriftConfig { mc_horizon: 2_000, mc_trajectories: 2_000, ..Default::default() };
        let drift = exact_drift(&nn, &cfg).unwrap();
        assert!((drift.value - 0.4).abs() < 2e-3, "lazy drift {}", drift.value);
    }

    #[test]
    fn exact_local_dimension_closed_form() {
        let nu = BoundaryMarkovMeasure::uniform(2).unwrap();
        let mut prefix = ReducedWord::identity();
        for _ in 0..20 {
            prefix.push_letter(Letter::from_code(if prefix.len() % 2 == 0 { 0 } else { 2 }));
        }
        let xi = BoundaryWord::new(prefix).unwrap();
        let v = nu.exact_local_dimension(&xi, 20.0).unwrap();
        let expect = (19.0 * 3f64.ln() + 4f64.ln()) / 20.0;
        assert!((v - expect).abs() < 1e-12);
        assert!(nu.exact_local_dimension(&xi, 25.0).is_err());

        // t = 40 closed form from a deeper proxy
        let mut prefix = ReducedWord::identity();
        for _ in 0..40 {
            prefix.push_letter(Letter::from_code(if prefix.len() % 2 == 0 { 0 } else { 2 }));
        }
        let xi = BoundaryWord::new(prefix).unwrap();
        let v = nu.exact_local_dimension(&xi, 40.0).unwrap();
        assert!((v - (39.0 * 3f64.ln() + 4f64.ln()) / 40.0).abs() < 1e-12);
    }
}
