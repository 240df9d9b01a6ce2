//! Sequence extrapolation helpers.
//!
//! Subadditive averages like `L(μ*ⁿ)/n` and `H(μ*ⁿ)/n` converge slowly, but
//! their increments `a_{n+1} - a_n` converge geometrically to the same limit.
//! Nearest-neighbor walks are 2-periodic, so the increments are extrapolated
//! per parity class: Aitken's Δ² on the last three same-parity terms removes
//! the leading geometric mode, and for simple random walks the odd-index
//! class is exactly constant.

/// Aitken Δ² on three consecutive terms of one class. Falls back to the last
/// term when the second difference is numerically degenerate (an already
/// converged sequence).
pub fn aitken(x0: f64, x1: f64, x2: f64) -> (f64, f64) {
    let denom = x2 - 2.0 * x1 + x0;
    let scale = x0.abs().max(x1.abs()).max(x2.abs()).max(1.0);
    if denom.abs() < 1e-12 * scale {
        (x2, (x2 - x1).abs())
    } else {
        let v = x2 - (x2 - x1) * (x2 - x1) / denom;
        (v, (v - x2).abs())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Extrapolation {
    pub value: f64,
    /// Heuristic error scale: extrapolation correction, within-class spread
    /// and cross-parity disagreement, whichever is largest.
    pub error: f64,
}

/// Extrapolates the limit of a sequence of increments `d[0], d[1], ...`
/// (`d[i]` understood as the increment at index `i`, so parity alternates).
///
/// Panics on empty input.
pub fn parity_aitken(increments: &[f64]) -> Extrapolation {
    assert!(!increments.is_empty(), "no increments to extrapolate");

    let class = |parity: usize| -> Vec<f64> {
        increments
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 2 == parity)
            .map(|(_, &v)| v)
            .collect()
    };

    let settle = |vals: &[f64]| -> Option<(f64, f64)> {
        match vals {
            [] => None,
            [x] => Some((*x, x.abs())),
            [x0, x1] => Some((*x1, (x1 - x0).abs())),
            more => {
                let tail = &more[more.len() - 3..];
                let (v, corr) = aitken(tail[0], tail[1], tail[2]);
                let spread = (tail[2] - tail[1]).abs().max((tail[1] - tail[0]).abs());
                Some((v, corr.max(spread * 0.5)))
            }
        }
    };

    let even = settle(&class(0));
    let odd = settle(&class(1));
    match (even, odd) {
        (Some((ve, ee)), Some((vo, eo))) => {
            let (value, err) = if ee <= eo { (ve, ee) } else { (vo, eo) };
            Extrapolation { value, error: err.max((ve - vo).abs()).max(1e-15) }
        }
        (Some((v, e)), None) | (None, Some((v, e))) => {
            Extrapolation { value: v, error: e.max(1e-15) }
        }
        (None, None) => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_kills_a_geometric_mode() {
        let l = 0.7;
        let seq: Vec<f64> = (0..3).map(|n| l + 0.3 * 0.6f64.powi(n)).collect();
        let (v, _) = aitken(seq[0], seq[1], seq[2]);
        assert!((v - l).abs() < 1e-12, "extrapolated {v}");
    }

    #[test]
    fn aitken_handles_constant_sequences() {
        let (v, e) = aitken(0.5, 0.5, 0.5);
        assert_eq!(v, 0.5);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn parity_classes_pick_the_settled_one() {
        // odd-index increments exactly at the limit, even ones still moving
        let mut d = Vec::new();
        for n in 0..10 {
            if n % 2 == 1 {
                d.push(0.5);
            } else {
                d.push(0.5 + 0.4 * 0.75f64.powi(n / 2));
            }
        }
        let ext = parity_aitken(&d);
        assert!((ext.value - 0.5).abs() < 1e-12);
    }
}
