//! Exact-integer `SL(2,Z)` acting on the hyperbolic plane.
//!
//! Matrices keep arbitrary-precision entries: along a random walk the entries
//! grow exponentially and fixed-width integers would overflow near step 50.
//! All group arithmetic is exact; only distances and boundary angles are
//! extracted in floating point, through log-scaled entries once the exact
//! values exceed the f64 range.
//!
//! The model realizes the Kleinian setting in dimension two: the Möbius
//! action on the upper half-plane, hyperbolic distances, limit points on the
//! circle (via the Cayley transform, which sends the base point `i` to the
//! disk center), and the chordal visual metric `sin(Δθ/2)`.

use std::fmt;

use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Default minimal hyperbolic depth for boundary proxies: `e^{-15} ≈ 3e-7`
/// is far below the finest regression radius used anywhere in the crate.
pub const DEFAULT_MIN_PROXY_DEPTH: f64 = 15.0;

/// An element of SL(2,Z); `ad - bc = 1` is checked at construction and, in
/// debug builds, after every product.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sl2Matrix {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    d: BigInt,
}

impl Sl2Matrix {
    pub fn new(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Result<Self> {
        let det = &a * &d - &b * &c;
        if det != BigInt::from(1) {
            return Err(Error::InvalidInput(format!("determinant {det} != 1")));
        }
        Ok(Sl2Matrix { a, b, c, d })
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        Sl2Matrix::new(BigInt::from(a), BigInt::from(b), BigInt::from(c), BigInt::from(d))
    }

    pub fn identity() -> Self {
        Sl2Matrix {
            a: BigInt::from(1),
            b: BigInt::from(0),
            c: BigInt::from(0),
            d: BigInt::from(1),
        }
    }

    pub fn is_identity(&self) -> bool {
        self == &Sl2Matrix::identity()
    }

    pub fn entries(&self) -> [&BigInt; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// Exact integer product.
    pub fn multiply(&self, rhs: &Sl2Matrix) -> Sl2Matrix {
        let out = Sl2Matrix {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        };
        debug_assert_eq!(&out.a * &out.d - &out.b * &out.c, BigInt::from(1));
        out
    }

    pub fn inverse(&self) -> Sl2Matrix {
        Sl2Matrix { a: self.d.clone(), b: -&self.b, c: -&self.c, d: self.a.clone() }
    }

    /// `d(o, g·o) = arccosh((a² + b² + c² + d²) / 2)` for `o = i`.
    ///
    /// For entries beyond the f64 range this degrades to `log s` where
    /// `s = a² + b² + c² + d²`; the dropped correction term
    /// `log((1 + sqrt(1 - 4/s²)) / 2)` is below 4/s², i.e. far under f64
    /// resolution whenever the branch is taken.
    pub fn origin_distance(&self) -> f64 {
        let s: BigInt = &self.a * &self.a + &self.b * &self.b + &self.c * &self.c + &self.d * &self.d;
        let bits = s.bits();
        if bits <= 1000 {
            let t = bigint_to_f64(&s) / 2.0;
            t.acosh()
        } else {
            bigint_ln(&s)
        }
    }

    /// Möbius action `z ↦ (az + b)/(cz + d)` in floating point.
    pub fn apply(&self, z: &HalfPlanePoint) -> HalfPlanePoint {
        let (a, b, c, d) =
            (bigint_to_f64(&self.a), bigint_to_f64(&self.b), bigint_to_f64(&self.c), bigint_to_f64(&self.d));
        let (x, y) = (z.re(), z.im());
        // (az+b) * conj(cz+d) / |cz+d|²; the imaginary part is y·det/|cz+d|².
        let nr = a * x + b;
        let ni = a * y;
        let dr = c * x + d;
        let di = c * y;
        let denom = dr * dr + di * di;
        let re = (nr * dr + ni * di) / denom;
        let im = y / denom;
        HalfPlanePoint { re, im }
    }

    /// The orbit point `g·i` exactly: `((ac + bd) + i) / (c² + d²)`.
    pub fn orbit_point(&self) -> HalfPlanePoint {
        let p: BigInt = &self.a * &self.c + &self.b * &self.d;
        let q: BigInt = &self.c * &self.c + &self.d * &self.d;
        let (pf, qf) = bigint_pair_to_f64(&p, &q);
        HalfPlanePoint { re: pf / qf, im: 1.0 / qf }
    }

    /// Circle proxy of the orbit point `g·i`, computed from exact integer
    /// data so it stays meaningful when `im(g·i)` underflows f64.
    ///
    /// The disk coordinate of `x + iy` with `x = p/q`, `y = 1/q` is
    /// `(p + i(1 - q)) / (p + i(1 + q))`; its argument only needs the joint
    /// scale of `p` and `q`.
    pub fn orbit_circle_sample(&self, min_depth: f64) -> Result<CircleSample> {
        let depth = self.origin_distance();
        if depth < min_depth {
            return Err(Error::InsufficientDepth(format!(
                "orbit point at hyperbolic depth {depth:.3} < {min_depth}"
            )));
        }
        let p: BigInt = &self.a * &self.c + &self.b * &self.d;
        let q: BigInt = &self.c * &self.c + &self.d * &self.d;
        let (pf, qf) = bigint_pair_to_f64(&p, &q);
        let angle = f64::atan2(1.0 - qf, pf) - f64::atan2(1.0 + qf, pf);
        Ok(CircleSample { point: CirclePoint::new(angle), depth })
    }
}

impl fmt::Debug for Sl2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

impl Serialize for Sl2Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        // JSON wire format: [[a, b], [c, d]] as decimal strings.
        let rows = [
            [self.a.to_string(), self.b.to_string()],
            [self.c.to_string(), self.d.to_string()],
        ];
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sl2Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[String; 2]; 2]>::deserialize(deserializer)?;
        let parse = |s: &String| {
            s.parse::<BigInt>()
                .map_err(|e| D::Error::custom(format!("bad integer {s:?}: {e}")))
        };
        Sl2Matrix::new(
            parse(&rows[0][0])?,
            parse(&rows[0][1])?,
            parse(&rows[1][0])?,
            parse(&rows[1][1])?,
        )
        .map_err(D::Error::custom)
    }
}

/// A point of the upper half-plane model (`im > 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlanePoint {
    re: f64,
    im: f64,
}

impl HalfPlanePoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidInput(format!("({re}, {im}) is not in the upper half-plane")));
        }
        Ok(HalfPlanePoint { re, im })
    }

    /// The base point `o = i`.
    pub fn base() -> Self {
        HalfPlanePoint { re: 0.0, im: 1.0 }
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }
}

/// `d(z, w) = arccosh(1 + |z - w|² / (2 im(z) im(w)))`.
pub fn hyp_distance(z: &HalfPlanePoint, w: &HalfPlanePoint) -> f64 {
    let dx = z.re - w.re;
    let dy = z.im - w.im;
    let u = (dx * dx + dy * dy) / (2.0 * z.im * w.im);
    if u > 1e150 {
        // acosh(1 + u) = ln(2u) + O(1/u); the square below would overflow
        u.ln() + std::f64::consts::LN_2
    } else {
        // acosh(1 + u) = ln(1 + u + sqrt(u (u + 2))), stable near u = 0
        (u + (u * (u + 2.0)).sqrt()).ln_1p()
    }
}

/// Cayley transform `(z - i)/(z + i)`; sends `o = i` to the disk center.
pub fn to_disk(z: &HalfPlanePoint) -> (f64, f64) {
    let nr = z.re;
    let ni = z.im - 1.0;
    let dr = z.re;
    let di = z.im + 1.0;
    let denom = dr * dr + di * di;
    ((nr * dr + ni * di) / denom, (ni * dr - nr * di) / denom)
}

/// A point of `∂H² ≅ S¹`, the unit circle of the disk model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirclePoint {
    angle: f64,
}

impl CirclePoint {
    /// Canonicalizes the angle into `[0, 2π)`.
    pub fn new(angle: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let mut a = angle % tau;
        if a < 0.0 {
            a += tau;
        }
        if a >= tau {
            a = 0.0;
        }
        CirclePoint { angle: a }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// Circle proxy together with the hyperbolic depth of the interior point it
/// was projected from, kept for error propagation.
#[derive(Clone, Copy, Debug)]
pub struct CircleSample {
    pub point: CirclePoint,
    pub depth: f64,
}

/// Radial projection of a deep trajectory endpoint to the circle.
pub fn boundary_proxy(endpoint: &HalfPlanePoint, min_depth: f64) -> Result<CircleSample> {
    let depth = hyp_distance(&HalfPlanePoint::base(), endpoint);
    if depth < min_depth {
        return Err(Error::InsufficientDepth(format!(
            "endpoint at hyperbolic depth {depth:.3} < {min_depth}"
        )));
    }
    let (x, y) = to_disk(endpoint);
    Ok(CircleSample { point: CirclePoint::new(f64::atan2(y, x)), depth })
}

/// Chordal visual quasi-metric on the circle: `|chord|/2 = sin(Δθ/2)`.
pub fn circle_visual_quasimetric(xi: &CirclePoint, eta: &CirclePoint) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut delta = (xi.angle - eta.angle).abs() % tau;
    if delta > std::f64::consts::PI {
        delta = tau - delta;
    }
    (0.5 * delta).sin()
}

/// The Sanov generators: `[[1,2],[0,1]]` and `[[1,0],[2,1]]` generate a free
/// subgroup of rank two.
pub fn sanov_generators() -> (Sl2Matrix, Sl2Matrix) {
    (
        Sl2Matrix::from_i64(1, 2, 0, 1).unwrap(),
        Sl2Matrix::from_i64(1, 0, 2, 1).unwrap(),
    )
}

/// Exhaustively checks that no nonempty reduced word of length <= `max_len`
/// over `{g, g⁻¹, h, h⁻¹}` is the identity. Entries stay below `3^max_len`
/// in magnitude for the desk-scale generators used here, so the enumeration
/// runs in machine integers.
///
/// Returns the number of reduced words inspected.
pub fn verify_free_up_to(g: &Sl2Matrix, h: &Sl2Matrix, max_len: usize) -> Result<usize> {
    type M = [i64; 4];
    let to_small = |m: &Sl2Matrix| -> Result<M> {
        let mut out = [0i64; 4];
        for (slot, entry) in out.iter_mut().zip(m.entries()) {
            *slot = i64::try_from(entry.clone()).map_err(|_| {
                Error::InvalidInput("freeness check expects small generator entries".into())
            })?;
        }
        Ok(out)
    };
    let mul = |x: &M, y: &M| -> M {
        [
            x[0] * y[0] + x[1] * y[2],
            x[0] * y[1] + x[1] * y[3],
            x[2] * y[0] + x[3] * y[2],
            x[2] * y[1] + x[3] * y[3],
        ]
    };
    let inv = |x: &M| -> M { [x[3], -x[1], -x[2], x[0]] };
    let identity: M = [1, 0, 0, 1];

    let ga = to_small(g)?;
    let hb = to_small(h)?;
    // alphabet order g, g⁻¹, h, h⁻¹ so that the inverse of letter i is i ^ 1
    let alphabet: [M; 4] = [ga, inv(&ga), hb, inv(&hb)];

    // overflow guard: |entries| <= (max |gen entry| + 1)^max_len must fit i64
    let max_entry = alphabet
        .iter()
        .flat_map(|m| m.iter())
        .map(|e| e.unsigned_abs())
        .max()
        .unwrap_or(1);
    let growth = ((max_entry + 1) as f64).powi(max_len as i32 + 1);
    if growth >= i64::MAX as f64 {
        return Err(Error::Numeric("freeness enumeration would overflow i64".into()));
    }

    let mut count = 0usize;
    let mut stack: Vec<(M, usize, usize)> = (0..4).map(|i| (alphabet[i], i, 1)).collect();
    while let Some((m, last, len)) = stack.pop() {
        count += 1;
        if m == identity {
            return Err(Error::InvalidInput(format!(
                "nonempty reduced word of length {len} equals the identity"
            )));
        }
        if len < max_len {
            for i in 0..4 {
                if i != last ^ 1 {
                    stack.push((mul(&m, &alphabet[i]), i, len + 1));
                }
            }
        }
    }
    Ok(count)
}

/// Approximates a BigInt in f64, surviving values beyond the f64 range only
/// through [`bigint_pair_to_f64`] / [`bigint_ln`].
fn bigint_to_f64(v: &BigInt) -> f64 {
    use num_bigint::Sign;
    let (sign, mag) = v.clone().into_parts();
    let bits = mag.bits();
    let x = if bits <= 1000 {
        // within f64 range; convert via the top 64 bits
        if bits <= 63 {
            u64::try_from(&mag).map(|u| u as f64).unwrap_or(f64::INFINITY)
        } else {
            let shift = bits - 53;
            let top: u64 = u64::try_from(&(mag >> shift)).unwrap_or(u64::MAX);
            top as f64 * 2f64.powi(shift as i32)
        }
    } else {
        f64::INFINITY
    };
    match sign {
        Sign::Minus => -x,
        _ => x,
    }
}

/// Converts a pair to f64 after a joint power-of-two rescale, preserving the
/// ratio even when both values are far outside the f64 range.
fn bigint_pair_to_f64(p: &BigInt, q: &BigInt) -> (f64, f64) {
    let bits = p.bits().max(q.bits());
    if bits <= 900 {
        return (bigint_to_f64(p), bigint_to_f64(q));
    }
    let shift = (bits - 53) as i64;
    let ps = p >> shift;
    let qs = q >> shift;
    (bigint_to_f64(&ps), bigint_to_f64(&qs))
}

/// Natural log of a positive BigInt via its top 53 bits.
fn bigint_ln(v: &BigInt) -> f64 {
    let bits = v.bits();
    debug_assert!(bits > 0);
    if bits <= 53 {
        return bigint_to_f64(v).ln();
    }
    let shift = bits - 53;
    let top = bigint_to_f64(&(v >> shift));
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
