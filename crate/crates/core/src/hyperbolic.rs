//! Generic Gromov-hyperbolic kernel.
//!
//! Everything here is parameterized by a [`MetricModel`]: a distance function
//! plus a distinguished base point `o`. The concrete models are the free
//! group with the word metric and the hyperbolic plane; the kernel provides
//! Gromov products, the visual quasi-metric `ρ = e^{-(ξ|η)}`, shadows, the
//! four-point δ estimate and the shadow/ball sandwich measurement.

use crate::free::{word_distance, FreeGroup, ReducedWord};
use crate::rng::CounterRng;
use crate::sl2::{hyp_distance, HalfPlanePoint};
use crate::{Error, Result};

/// Absolute tolerance for clamping floating-point distance arithmetic.
pub const CLAMP_TOL: f64 = 1e-9;

/// A metric space with a base point.
pub trait MetricModel {
    type Point: Clone;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;
    fn basepoint(&self) -> Self::Point;
}

impl MetricModel for FreeGroup {
    type Point = ReducedWord;

    fn distance(&self, x: &ReducedWord, y: &ReducedWord) -> f64 {
        word_distance(x, y) as f64
    }

    fn basepoint(&self) -> ReducedWord {
        ReducedWord::identity()
    }
}

/// The upper half-plane with curvature -1 and base point `i`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HalfPlane;

impl MetricModel for HalfPlane {
    type Point = HalfPlanePoint;

    fn distance(&self, x: &HalfPlanePoint, y: &HalfPlanePoint) -> f64 {
        hyp_distance(x, y)
    }

    fn basepoint(&self) -> HalfPlanePoint {
        HalfPlanePoint::base()
    }
}

/// `(x|y)_z = (d(z,x) + d(z,y) - d(x,y)) / 2`, clamped to be nonnegative.
pub fn gromov_product<M: MetricModel>(
    model: &M,
    x: &M::Point,
    y: &M::Point,
    z: &M::Point,
) -> f64 {
    let p = 0.5 * (model.distance(z, x) + model.distance(z, y) - model.distance(x, y));
    if p < 0.0 {
        debug_assert!(p > -CLAMP_TOL, "Gromov product {p} below clamp tolerance");
        0.0
    } else {
        p
    }
}

/// The visual quasi-metric `ρ = e^{-(x|y)}`, in (0, 1] for finite products.
pub fn visual_quasimetric(product: f64) -> f64 {
    debug_assert!(product >= 0.0);
    (-product).exp()
}

/// A shadow `S_w(x, R)`: boundary points whose Gromov product with the
/// center `x`, based at `w`, is at least `d(w, x) - R`.
#[derive(Clone, Debug)]
pub struct ShadowSpec<P> {
    pub base: P,
    pub center: P,
    pub thickness: f64,
}

impl<P> ShadowSpec<P> {
    pub fn new(base: P, center: P, thickness: f64) -> Result<Self> {
        if !(thickness >= 0.0) {
            return Err(Error::InvalidInput(format!("shadow thickness {thickness} < 0")));
        }
        Ok(ShadowSpec { base, center, thickness })
    }

    /// Membership test from externally supplied products: the group model
    /// computes `(ξ|x)_w` (exact on the tree, deep proxy elsewhere) and
    /// `d(w, x)`.
    pub fn contains(&self, boundary_product: f64, center_distance: f64) -> bool {
        boundary_product >= center_distance - self.thickness
    }
}

/// Convenience wrapper computing the center distance from the model.
pub fn shadow_contains<M: MetricModel>(
    model: &M,
    shadow: &ShadowSpec<M::Point>,
    boundary_product: f64,
) -> bool {
    shadow.contains(boundary_product, model.distance(&shadow.base, &shadow.center))
}

/// Result of the four-point hyperbolicity scan.
#[derive(Clone, Copy, Debug)]
pub struct DeltaEstimate {
    /// max over tested quadruples of `min{(x|z)_w, (z|y)_w} - (x|y)_w`, clamped at 0.
    pub delta: f64,
    pub quadruple_count: usize,
}

/// Number of ordered triples above which the scan samples instead of
/// enumerating; sampling uses a fixed sub-seed so the estimate is
/// deterministic given the point order and the cap.
pub const DEFAULT_QUADRUPLE_CAP: usize = 1_000_000;
const DELTA_SCAN_SEED: u64 = 0x5eed_de17_a5ca;

/// Estimates the hyperbolicity constant of a point set with base `w`.
///
/// Exhaustive over ordered triples `(x, y, z)` when their number is within
/// the cap, sampled otherwise. Trees give exactly 0.
pub fn estimate_delta<M: MetricModel>(
    model: &M,
    points: &[M::Point],
    w: &M::Point,
    cap: Option<usize>,
) -> Result<DeltaEstimate> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "delta estimation needs >= 4 points, got {}",
            points.len()
        )));
    }
    let cap = cap.unwrap_or(DEFAULT_QUADRUPLE_CAP);
    let n = points.len();

    // Pairwise products based at w; the scan then only reads the table.
    let dw: Vec<f64> = points.iter().map(|p| model.distance(w, p)).collect();
    let mut product = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let p = 0.5 * (dw[i] + dw[j] - model.distance(&points[i], &points[j]));
            product[i * n + j] = p;
            product[j * n + i] = p;
        }
    }

    let defect = |i: usize, j: usize, l: usize| -> f64 {
        product[i * n + l].min(product[l * n + j]) - product[i * n + j]
    };

    let total = n * n * n;
    let mut delta = 0.0f64;
    let quadruple_count;
    if total <= cap {
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    delta = delta.max(defect(i, j, l));
                }
            }
        }
        quadruple_count = total;
    } else {
        let mut rng = CounterRng::new(DELTA_SCAN_SEED);
        for _ in 0..cap {
            let i = rng.next_below(n);
            let j = rng.next_below(n);
            let l = rng.next_below(n);
            delta = delta.max(defect(i, j, l));
        }
        quadruple_count = cap;
    }

    Ok(DeltaEstimate { delta: delta.max(0.0), quadruple_count })
}

/// One boundary sample for the sandwich check: its product with the shadow
/// center and its product with the reference point `ξ` (both based at `o`).
#[derive(Clone, Copy, Debug)]
pub struct SandwichSample {
    pub product_with_center: f64,
    pub product_with_reference: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SandwichReport {
    /// Smallest `C >= 1` making both inclusions of the shadow/ball sandwich
    /// hold over the supplied samples.
    pub c: f64,
    pub in_shadow: usize,
    pub out_of_shadow: usize,
}

/// Measures the sandwich `B(ξ, e^{-|x|+R}/C) ⊂ S(x, R) ⊂ B(ξ, C e^{-|x|+R})`
/// for a reference boundary point `ξ ∈ S(x, R)` against a sample cloud.
///
/// For samples inside the shadow the right inclusion needs
/// `C >= ρ(ξ', ξ) e^{|x|-R}`; for samples outside it the left inclusion
/// needs `C >= e^{(ξ'|ξ) - |x| + R}`.
pub fn shadow_ball_sandwich_check<M: MetricModel>(
    model: &M,
    x: &M::Point,
    thickness: f64,
    samples: &[SandwichSample],
) -> Result<SandwichReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("sandwich check needs samples".into()));
    }
    let center_distance = model.distance(&model.basepoint(), x);
    let log_scale = center_distance - thickness; // -log of the sandwich radius
    let mut c: f64 = 1.0;
    let mut in_shadow = 0;
    let mut out_of_shadow = 0;
    for s in samples {
        if s.product_with_center >= center_distance - thickness {
            in_shadow += 1;
            // ρ(ξ', ξ) <= C e^{-|x|+R}
            c = c.max((log_scale - s.product_with_reference).exp());
        } else {
            out_of_shadow += 1;
            // ρ(ξ', ξ) >= (1/C) e^{-|x|+R}
            c = c.max((s.product_with_reference - log_scale).exp());
        }
    }
    Ok(SandwichReport { c, in_shadow, out_of_shadow })
}
