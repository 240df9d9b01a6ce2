//! The free group `F_k` with the word metric.
//!
//! Elements are cancellation-free letter strings; the Cayley graph is a
//! `2k`-regular tree, Gromov products based at the identity are common
//! prefix lengths, and boundary points are infinite reduced words
//! represented here by finite-depth prefixes.
//!
//! Letters are packed into a single byte `2 * generator + inverted`, so the
//! inverse of a letter code is `code ^ 1` and the byte order is the canonical
//! total order (generator index, then inverted flag). Words serialize as
//! ASCII strings over lowercase generators and uppercase inverses,
//! e.g. `"abA"` is a·b·a⁻¹; the empty string is the identity.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::rng::CounterRng;
use crate::{Error, Result};

/// Letters stay inline up to 22 codes; convolution-table keys never spill to
/// the heap at desk scale.
type Letters = SmallVec<[u8; 22]>;

/// One generator or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub generator: u8,
    pub inverted: bool,
}

impl Letter {
    pub fn new(generator: u8, inverted: bool) -> Self {
        Letter { generator, inverted }
    }

    pub fn inverse(self) -> Self {
        Letter { generator: self.generator, inverted: !self.inverted }
    }

    #[inline]
    pub fn code(self) -> u8 {
        2 * self.generator + self.inverted as u8
    }

    #[inline]
    pub fn from_code(code: u8) -> Self {
        Letter { generator: code / 2, inverted: code % 2 == 1 }
    }

    pub fn to_char(self) -> char {
        let base = if self.inverted { b'A' } else { b'a' };
        (base + self.generator) as char
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'a'..='z' => Ok(Letter::new(c as u8 - b'a', false)),
            'A'..='Z' => Ok(Letter::new(c as u8 - b'A', true)),
            other => Err(Error::InvalidInput(format!("invalid letter {other:?}"))),
        }
    }
}

/// A free-group element as a cancellation-free letter string.
///
/// Doubles as a vertex of the Cayley tree; `|w| = d(e, w)` in the word
/// metric. Immutable value semantics: all operations return new words.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReducedWord {
    letters: Letters,
}

impl ReducedWord {
    pub fn identity() -> Self {
        ReducedWord::default()
    }

    /// Builds a word from letters, rejecting adjacent cancellations.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Result<Self> {
        let mut out = Letters::new();
        for l in letters {
            let code = l.code();
            if out.last() == Some(&(code ^ 1)) {
                return Err(Error::InvalidInput(
                    "word is not reduced (adjacent cancellation)".into(),
                ));
            }
            out.push(code);
        }
        Ok(ReducedWord { letters: out })
    }

    /// Single-letter word.
    pub fn letter(l: Letter) -> Self {
        let mut letters = Letters::new();
        letters.push(l.code());
        ReducedWord { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letter_codes(&self) -> &[u8] {
        &self.letters
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        self.letters.iter().map(|&c| Letter::from_code(c))
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().map(|&c| Letter::from_code(c))
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().map(|&c| Letter::from_code(c))
    }

    /// Group law with free reduction at the junction:
    /// `|uv| = |u| + |v| - 2c` where `c` letters cancel.
    pub fn multiply(&self, rhs: &ReducedWord) -> ReducedWord {
        let mut out = self.letters.clone();
        for &code in rhs.letters.iter() {
            if out.last() == Some(&(code ^ 1)) {
                out.pop();
            } else {
                out.push(code);
            }
        }
        ReducedWord { letters: out }
    }

    pub fn inverse(&self) -> ReducedWord {
        ReducedWord { letters: self.letters.iter().rev().map(|&c| c ^ 1).collect() }
    }

    /// Appends one letter with cancellation; the nearest-neighbor walk step.
    pub fn push_letter(&mut self, l: Letter) {
        let code = l.code();
        if self.letters.last() == Some(&(code ^ 1)) {
            self.letters.pop();
        } else {
            self.letters.push(code);
        }
    }

    pub fn prefix(&self, n: usize) -> ReducedWord {
        ReducedWord { letters: self.letters[..n.min(self.letters.len())].iter().copied().collect() }
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            write!(f, "e")
        } else {
            write!(f, "{self}")
        }
    }
}

impl FromStr for ReducedWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Result<Vec<Letter>> = s.chars().map(Letter::from_char).collect();
        ReducedWord::from_letters(letters?)
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReducedWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Longest common prefix length; equals the Gromov product `(u|v)_e`.
pub fn common_prefix_len(u: &ReducedWord, v: &ReducedWord) -> usize {
    u.letters.iter().zip(v.letters.iter()).take_while(|(a, b)| a == b).count()
}

/// Word metric: `d(u, v) = |u⁻¹ v| = |u| + |v| - 2 (u|v)_e`.
pub fn word_distance(u: &ReducedWord, v: &ReducedWord) -> usize {
    u.len() + v.len() - 2 * common_prefix_len(u, v)
}

/// Gromov product at the identity, exactly the common prefix length.
pub fn word_gromov_product(u: &ReducedWord, v: &ReducedWord) -> usize {
    common_prefix_len(u, v)
}

/// Finite-depth proxy for a boundary point (an infinite reduced word).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryWord {
    prefix: ReducedWord,
}

impl BoundaryWord {
    pub fn new(prefix: ReducedWord) -> Result<Self> {
        if prefix.is_identity() {
            return Err(Error::InvalidInput("boundary proxy needs depth >= 1".into()));
        }
        Ok(BoundaryWord { prefix })
    }

    pub fn prefix(&self) -> &ReducedWord {
        &self.prefix
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }
}

/// Gromov product of two boundary proxies. Exact whenever the common prefix
/// ends strictly before one of the proxies does; otherwise the true product
/// is only bounded below by the proxy depth, which is reported as saturated
/// rather than silently under-reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryProduct {
    Exact(usize),
    SaturatedAtDepth(usize),
}

impl BoundaryProduct {
    pub fn value(self) -> usize {
        match self {
            BoundaryProduct::Exact(v) | BoundaryProduct::SaturatedAtDepth(v) => v,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, BoundaryProduct::SaturatedAtDepth(_))
    }
}

/// `(ξ|η)_e` from finite-depth proxies.
pub fn boundary_product(xi: &BoundaryWord, eta: &BoundaryWord) -> BoundaryProduct {
    let cpl = common_prefix_len(&xi.prefix, &eta.prefix);
    if cpl < xi.depth().min(eta.depth()) {
        BoundaryProduct::Exact(cpl)
    } else {
        BoundaryProduct::SaturatedAtDepth(cpl)
    }
}

/// Left translation of a boundary point by a group element.
///
/// Requires `depth(ξ) > |g|` so that at most `|g|` proxy letters can cancel
/// and the translated prefix is determined by the proxy alone; the result
/// has depth >= depth - |g| and satisfies `(gξ|gη) >= (ξ|η) - |g|`.
pub fn left_translate_boundary(g: &ReducedWord, xi: &BoundaryWord) -> Result<BoundaryWord> {
    if xi.depth() <= g.len() {
        return Err(Error::InsufficientDepth(format!(
            "translating depth-{} proxy by |g| = {}",
            xi.depth(),
            g.len()
        )));
    }
    BoundaryWord::new(g.multiply(&xi.prefix))
}

/// The free group `F_k` as a metric model: word distances, base point `e`,
/// letter enumeration and boundary sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeGroup {
    rank: u8,
}

impl FreeGroup {
    pub fn new(rank: u8) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::InvalidInput(format!("rank {rank} outside 1..=26")));
        }
        Ok(FreeGroup { rank })
    }

    pub fn rank(&self) -> u8 {
        self.rank
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.rank as usize
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..2 * self.rank).map(Letter::from_code)
    }

    /// Validates that a word only uses generators below the rank.
    pub fn contains(&self, w: &ReducedWord) -> bool {
        w.letter_codes().iter().all(|&c| c < 2 * self.rank)
    }

    pub fn parse_word(&self, s: &str) -> Result<ReducedWord> {
        let w: ReducedWord = s.parse()?;
        if !self.contains(&w) {
            return Err(Error::InvalidInput(format!(
                "word {s:?} uses generators outside rank {}",
                self.rank
            )));
        }
        Ok(w)
    }

    /// Draws a boundary proxy from the maximal-entropy cylinder measure:
    /// first letter uniform over 2k, then uniform over the 2k-1
    /// non-backtracking continuations.
    pub fn uniform_boundary_sample(&self, rng: &mut CounterRng, depth: usize) -> Result<BoundaryWord> {
        if depth == 0 {
            return Err(Error::InvalidInput("depth must be >= 1".into()));
        }
        if self.rank < 2 {
            return Err(Error::UnsupportedModel(
                "uniform boundary sampling needs rank >= 2".into(),
            ));
        }
        let n = self.alphabet_size();
        let mut word = ReducedWord::identity();
        let first = rng.next_below(n) as u8;
        word.push_letter(Letter::from_code(first));
        for _ in 1..depth {
            let forbidden = word.letter_codes().last().unwrap() ^ 1;
            let mut pick = rng.next_below(n - 1) as u8;
            if pick >= forbidden {
                pick += 1;
            }
            word.push_letter(Letter::from_code(pick));
        }
        debug_assert_eq!(word.len(), depth);
        BoundaryWord::new(word)
    }

    /// Mass that the maximal-entropy measure gives a cylinder.
    pub fn uniform_cylinder_mass(&self, len: usize) -> f64 {
        if len == 0 {
            return 1.0;
        }
        let n = self.alphabet_size() as f64;
        1.0 / (n * (n - 1.0).powi(len as i32 - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> ReducedWord {
        s.parse().unwrap()
    }

    #[test]
    fn multiply_identity_and_inverse_laws() {
        let e = ReducedWord::identity();
        let ab = w("ab");
        assert_eq!(e.multiply(&ab), ab);
        assert_eq!(ab.multiply(&e), ab);
        assert_eq!(w("a").multiply(&w("A")), e);
        assert_eq!(ab.inverse().multiply(&ab), e);
    }

    #[test]
    fn multiply_cancels_at_the_junction() {
        // "ab" * "b⁻¹a" = "aa"
        assert_eq!(w("ab").multiply(&w("Ba")), w("aa"));
        assert_eq!(w("ab").multiply(&w("BA")), ReducedWord::identity());
    }

    #[test]
    fn gromov_product_is_common_prefix_and_matches_distance_formula() {
        assert_eq!(word_gromov_product(&w("ab"), &w("ab")), 2);
        assert_eq!(word_gromov_product(&w("ab"), &w("ac")), 1);
        assert_eq!(word_gromov_product(&w("ab"), &w("Ab")), 0);
        // (|u| + |v| - |u⁻¹v|) / 2 cross-check
        let (u, v) = (w("ab"), w("ac"));
        let d = u.inverse().multiply(&v).len();
        assert_eq!(d, word_distance(&u, &v));
        assert_eq!((u.len() + v.len() - d) / 2, 1);
    }

    #[test]
    fn parse_display_round_trip_and_reduced_validation() {
        assert_eq!(w("abA").to_string(), "abA");
        assert_eq!(w("").len(), 0);
        assert!("aA".parse::<ReducedWord>().is_err());
        assert!("a1".parse::<ReducedWord>().is_err());
    }

    #[test]
    fn boundary_product_saturation() {
        let xi = BoundaryWord::new(w("abab")).unwrap();
        let eta = BoundaryWord::new(w("abba")).unwrap();
        assert_eq!(boundary_product(&xi, &eta), BoundaryProduct::Exact(2));

        let same = boundary_product(&xi, &xi);
        assert!(same.is_saturated());
        assert_eq!(same.value(), 4);

        let xi1 = BoundaryWord::new(w("a")).unwrap();
        let eta1 = BoundaryWord::new(w("b")).unwrap();
        assert_eq!(boundary_product(&xi1, &eta1), BoundaryProduct::Exact(0));
    }

    #[test]
    fn left_translate_examples() {
        let xi = BoundaryWord::new(w("Abab")).unwrap();
        let moved = left_translate_boundary(&w("a"), &xi).unwrap();
        assert_eq!(moved.prefix(), &w("bab"));
        assert_eq!(moved.depth(), 3);

        let eta = BoundaryWord::new(w("abab")).unwrap();
        let moved = left_translate_boundary(&w("b"), &eta).unwrap();
        assert_eq!(moved.prefix(), &w("babab"));

        let id_moved = left_translate_boundary(&ReducedWord::identity(), &eta).unwrap();
        assert_eq!(id_moved.prefix(), eta.prefix());

        let shallow = BoundaryWord::new(w("a")).unwrap();
        assert!(left_translate_boundary(&w("ba"), &shallow).is_err());
    }

    #[test]
    fn uniform_sample_depth_one_frequencies() {
        let group = FreeGroup::new(2).unwrap();
        let mut rng = CounterRng::new(7);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            let b = group.uniform_boundary_sample(&mut rng, 1).unwrap();
            counts[b.prefix().letter_codes()[0] as usize] += 1;
        }
        for c in counts {
            let p = c as f64 / n as f64;
            assert!((p - 0.25).abs() < 0.01, "letter frequency {p}");
        }
    }

    #[test]
    fn uniform_sample_cylinder_mass_matches_monte_carlo() {
        // cylinder ["ab"] has mass 1/12 under the maximal-entropy measure
        let group = FreeGroup::new(2).unwrap();
        let mut rng = CounterRng::new(11);
        let target = w("ab");
        let n = 120_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let b = group.uniform_boundary_sample(&mut rng, 2).unwrap();
            if b.prefix() == &target {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let expect = group.uniform_cylinder_mass(2);
        assert!((expect - 1.0 / 12.0).abs() < 1e-15);
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p - expect).abs() < 3.0 * sigma, "p = {p}, expect = {expect}");
    }

    proptest! {
        #[test]
        fn word_metric_identity_holds(a in "[abAB]{0,14}", b in "[abAB]{0,14}") {
            // strings may be unreduced; reduce them through multiplication
            let u = free_reduce(&a);
            let v = free_reduce(&b);
            let d = u.inverse().multiply(&v).len();
            prop_assert_eq!(d, u.len() + v.len() - 2 * common_prefix_len(&u, &v));
        }

        #[test]
        fn multiply_is_associative(a in "[abAB]{0,12}", b in "[abAB]{0,12}", c in "[abAB]{0,12}") {
            let (u, v, t) = (free_reduce(&a), free_reduce(&b), free_reduce(&c));
            prop_assert_eq!(u.multiply(&v).multiply(&t), u.multiply(&v.multiply(&t)));
        }

        #[test]
        fn ball_deformation_inequality_exact_form(
            g in "[abAB]{0,6}",
            x in "[abAB]{12,20}",
            y in "[abAB]{12,20}",
        ) {
            // (gξ|gη) >= (ξ|η) - |g| whenever depths allow the translation
            let g = free_reduce(&g);
            let xi = free_reduce(&x);
            let eta = free_reduce(&y);
            prop_assume!(xi.len() > g.len() && eta.len() > g.len());
            let xi = BoundaryWord::new(xi).unwrap();
            let eta = BoundaryWord::new(eta).unwrap();
            let before = boundary_product(&xi, &eta);
            prop_assume!(!before.is_saturated());
            let gxi = left_translate_boundary(&g, &xi).unwrap();
            let geta = left_translate_boundary(&g, &eta).unwrap();
            prop_assert!(
                boundary_product(&gxi, &geta).value() as isize
                    >= before.value() as isize - g.len() as isize
            );
        }
    }

    fn free_reduce(s: &str) -> ReducedWord {
        let mut out = ReducedWord::identity();
        for c in s.chars() {
            out.push_letter(Letter::from_char(c).unwrap());
        }
        out
    }
}
