//! Cross-model properties of the two metric models: metric axioms on
//! sampled triples, isometric group actions, the exactness of tree shadows,
//! and the comparability of the chordal circle metric with the visual
//! quasi-metric.

use hmdim_core::estimators::{drift_mc, Sl2Model};
use hmdim_core::free::{common_prefix_len, FreeGroup, ReducedWord};
use hmdim_core::hyperbolic::{gromov_product, HalfPlane, MetricModel, ShadowSpec};
use hmdim_core::rng::{substream, CounterRng};
use hmdim_core::sl2::{circle_visual_quasimetric, hyp_distance, sanov_generators, Sl2Matrix};
use hmdim_core::walk::{walk_endpoint, StepDistribution};

fn sanov_measure() -> StepDistribution<Sl2Matrix> {
    let (a, b) = sanov_generators();
    StepDistribution::uniform(vec![a.clone(), a.inverse(), b.clone(), b.inverse()]).unwrap()
}

fn sanov_orbit(count: usize, seed: u64) -> Vec<hmdim_core::sl2::HalfPlanePoint> {
    let mu = sanov_measure();
    (0..count as u64)
        .map(|i| walk_endpoint(&mu, 3 + (i % 20) as usize, substream(seed, i)).orbit_point())
        .collect()
}

#[test]
fn metric_axioms_hold_on_sampled_triples() {
    // free model: exact integers
    let f2 = FreeGroup::new(2).unwrap();
    let mut rng = CounterRng::new(1);
    let words: Vec<ReducedWord> = (0..60)
        .map(|_| {
            let depth = 1 + rng.next_below(14);
            f2.uniform_boundary_sample(&mut rng, depth).unwrap().prefix().clone()
        })
        .collect();
    for x in &words {
        assert_eq!(f2.distance(x, x), 0.0);
        for y in &words {
            assert_eq!(f2.distance(x, y), f2.distance(y, x));
            for z in &words {
                assert!(f2.distance(x, y) <= f2.distance(x, z) + f2.distance(z, y));
            }
        }
    }

    // hyperbolic plane: floating point with the 1e-9 clamp tolerance
    let h = HalfPlane;
    let pts = sanov_orbit(40, 2);
    for x in &pts {
        assert!(h.distance(x, x).abs() < 1e-12);
        for y in &pts {
            assert!((h.distance(x, y) - h.distance(y, x)).abs() < 1e-12);
            for z in &pts {
                assert!(h.distance(x, y) <= h.distance(x, z) + h.distance(z, y) + 1e-9);
            }
        }
    }
}

#[test]
fn gromov_products_are_symmetric_and_bounded_by_distances() {
    let h = HalfPlane;
    let o = h.basepoint();
    let pts = sanov_orbit(30, 3);
    for x in &pts {
        for y in &pts {
            let p = gromov_product(&h, x, y, &o);
            let q = gromov_product(&h, y, x, &o);
            assert_eq!(p, q);
            assert!(p <= h.distance(&o, x).min(h.distance(&o, y)) + 1e-9);
        }
    }
}

#[test]
fn moebius_action_is_isometric() {
    let pts = sanov_orbit(20, 5);
    let (a, b) = sanov_generators();
    for g in [a.clone(), b.clone(), a.multiply(&b), b.inverse().multiply(&a)] {
        for z in &pts {
            for w in &pts {
                let before = hyp_distance(z, w);
                let after = hyp_distance(&g.apply(z), &g.apply(w));
                assert!((before - after).abs() < 1e-9, "{before} vs {after}");
            }
        }
    }
}

#[test]
fn tree_shadows_are_exact_prefix_sets() {
    // with base e and |x| = n: ξ ∈ S(x, R) iff the common prefix of ξ and x
    // has length at least ⌈n - R⌉
    let f2 = FreeGroup::new(2).unwrap();
    let mut rng = CounterRng::new(7);
    for _ in 0..2_000 {
        let n = 1 + rng.next_below(10);
        let x = f2.uniform_boundary_sample(&mut rng, n).unwrap().prefix().clone();
        let thickness = rng.next_f64() * n as f64;
        let shadow = ShadowSpec::new(ReducedWord::identity(), x.clone(), thickness).unwrap();
        let xi = f2.uniform_boundary_sample(&mut rng, 16).unwrap();
        let product = common_prefix_len(xi.prefix(), &x);
        let member = shadow.contains(product as f64, n as f64);
        let rule = product >= (n as f64 - thickness).ceil() as usize;
        assert_eq!(member, rule, "n = {n}, R = {thickness}, product = {product}");
    }
}

#[test]
fn chordal_metric_is_comparable_to_the_visual_quasimetric() {
    // deep orbit pairs: |(-log chord) - (x|y)_o| stays far below the 2δ
    // allowance (the disk-centered chord form is asymptotically exact here)
    let mu = sanov_measure();
    let h = HalfPlane;
    let o = h.basepoint();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for i in 0..400u64 {
        let g1 = walk_endpoint(&mu, 24, substream(11, 2 * i));
        let g2 = walk_endpoint(&mu, 24, substream(11, 2 * i + 1));
        let (p1, p2) = (g1.orbit_point(), g2.orbit_point());
        if hyp_distance(&o, &p1) < 10.0 || hyp_distance(&o, &p2) < 10.0 {
            continue;
        }
        let chord = circle_visual_quasimetric(
            &g1.orbit_circle_sample(1.0).unwrap().point,
            &g2.orbit_circle_sample(1.0).unwrap().point,
        );
        if chord > 1e-12 {
            checked += 1;
            worst = worst.max((-(chord.ln()) - gromov_product(&h, &p1, &p2, &o)).abs());
        }
    }
    assert!(checked > 100, "only {checked} usable pairs");
    // measured 6.2e-4 once; frozen with headroom, still far below 2δ ≈ 1.4
    assert!(worst < 0.05, "worst log-gap {worst}");
}

#[test]
fn sanov_drift_regression_value() {
    // measured once and frozen: d(o, w_n o)/n at n = 2000 over 400 walks
    let est = drift_mc(&Sl2Model, &sanov_measure(), 2_000, 400, 0x5a);
    assert!((est.value - 0.6419).abs() < 3.0 * est.stderr + 2e-3, "drift {}", est.value);
}
