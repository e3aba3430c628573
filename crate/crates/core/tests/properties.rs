//! Property tests for the structural invariants of each module.

use num_bigint::BigUint;
use proptest::prelude::*;
use randcover::covering::{measure_fraction, realize, stage_gridset, GridSet, StageMode, StageWindow};
use randcover::estimators::{binomial_interval, box_dimension_fit, local_dimension_profile, SelfSimilarMeasure};
use randcover::lengths::{
    alpha_exponent, borel_cantelli_classify, critical_sum_exponent, scale_census, Block, LengthSequenceSpec,
    MeasureClass,
};
use randcover::report::{verdict_of, Check, TheoryKind, Verdict};
use randcover::targets::schedule::{build_schedule_prop14, default_betas};
use randcover::targets::{build_levels, natural_measure_weight, TargetSetSpec};
use randcover::torus::{
    ball_contains_cube, ball_intersects_cube, cube_of_point, cube_subset, torus_distance, DyadicCube, TorusBall,
    TorusPoint,
};

fn point(d: usize) -> impl Strategy<Value = TorusPoint> {
    prop::collection::vec(0.0f64..1.0, d).prop_map(|c| TorusPoint::new(c).unwrap())
}

fn block_spec() -> impl Strategy<Value = LengthSequenceSpec> {
    prop::collection::vec((1u32..120, 0.0f64..200.0), 1..8).prop_map(|steps| {
        let mut first = BigUint::from(1u8);
        let mut lv = -1.0;
        let mut blocks = Vec::new();
        for (grow, drop) in steps {
            blocks.push(Block { log2_value: lv, first_index: first.clone() });
            first = (&first << grow) + 1u8;
            lv -= 0.5 + drop;
        }
        LengthSequenceSpec::block_constant(blocks, first, 1).unwrap()
    })
}

fn self_similar() -> impl Strategy<Value = TargetSetSpec> {
    (2u64..10, 2u64..5, 1u64..5)
        .prop_map(|(q, c, p)| TargetSetSpec::SelfSimilarCantor { ratio_num: p, ratio_den: q, copies: c })
        .prop_filter("valid cantor", |s| s.validate().is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // torus --------------------------------------------------------------

    #[test]
    fn cubes_nest(x in point(3), n in 0u32..40) {
        let fine = cube_of_point(&x, n + 1);
        let coarse = cube_of_point(&x, n);
        prop_assert!(cube_subset(&fine, &coarse).unwrap());
    }

    #[test]
    fn containment_implies_intersection(c in point(2), r in 1e-4f64..0.5, n in 1u32..8, i in 0u64..256, j in 0u64..256) {
        let side = 1u64 << n;
        let q = DyadicCube::new(n, vec![i % side, j % side]).unwrap();
        let b = TorusBall::new(c, r).unwrap();
        if ball_contains_cube(&b, &q) {
            prop_assert!(ball_intersects_cube(&b, &q));
        }
    }

    #[test]
    fn triangle_inequality(x in point(3), y in point(3), z in point(3)) {
        let lhs = torus_distance(&x, &z);
        prop_assert!(lhs <= torus_distance(&x, &y) + torus_distance(&y, &z) + 1e-12);
        prop_assert!(torus_distance(&x, &y) <= (3f64).sqrt() / 2.0 + 1e-12);
    }

    // length sequences ---------------------------------------------------

    #[test]
    fn exponents_agree_on_power_laws(alpha in 0.01f64..=1.0, c in 0.01f64..=0.5) {
        let s = LengthSequenceSpec::power_law_with(alpha, c, 1).unwrap();
        prop_assert_eq!(alpha_exponent(&s).value, critical_sum_exponent(&s).value);
    }

    #[test]
    fn exponents_agree_on_blocks(s in block_spec()) {
        prop_assert_eq!(alpha_exponent(&s).value, critical_sum_exponent(&s).value);
    }

    #[test]
    fn power_law_values_non_increasing(alpha in 0.01f64..=2.0, n in 1u64..1_000_000) {
        let s = LengthSequenceSpec::power_law(alpha, 2).unwrap();
        prop_assert!(s.value_at(n + 1).unwrap() <= s.value_at(n).unwrap());
    }

    #[test]
    fn block_values_non_increasing(s in block_spec(), a in 0u32..600, b in 0u32..600) {
        let h = s.horizon().unwrap();
        let i = (BigUint::from(1u8) << a.min(b)) % &h + 1u8;
        let j = (BigUint::from(1u8) << a.max(b)) % &h + 1u8;
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        prop_assert!(s.log2_value_at(&j).unwrap() <= s.log2_value_at(&i).unwrap());
    }

    #[test]
    fn power_law_classification(alpha in 0.05f64..=2.0) {
        let s = LengthSequenceSpec::power_law(alpha, 2).unwrap();
        let want = if alpha < 2.0 { MeasureClass::MeasureZero } else { MeasureClass::FullMeasure };
        prop_assert_eq!(borel_cantelli_classify(&s), want);
    }

    #[test]
    fn census_counts_every_index(alpha in 0.2f64..=1.0, h in 1u64..20_000) {
        let s = LengthSequenceSpec::power_law(alpha, 1).unwrap();
        let c = scale_census(&s, &BigUint::from(h)).unwrap();
        prop_assert_eq!(c.total(), BigUint::from(h));
    }

    // covering -----------------------------------------------------------

    #[test]
    fn contained_within_intersected(seed in any::<u64>(), alpha in 0.3f64..=1.0, first in 1u64..50, len in 1u64..50, level in 1u32..10) {
        let spec = LengthSequenceSpec::power_law(alpha, 1).unwrap();
        let r = realize(seed, &spec, 200).unwrap();
        let w = StageWindow::new(first, first + len - 1).unwrap();
        let inner = stage_gridset(&r, w, level, StageMode::Contained).unwrap();
        let outer = stage_gridset(&r, w, level, StageMode::Intersected).unwrap();
        prop_assert!(inner.is_subset_of(&outer));
    }

    #[test]
    fn contained_within_intersected_2d(seed in any::<u64>(), first in 1u64..20, len in 1u64..20, level in 1u32..6) {
        let spec = LengthSequenceSpec::power_law(1.5, 2).unwrap();
        let r = realize(seed, &spec, 100).unwrap();
        let w = StageWindow::new(first, first + len - 1).unwrap();
        let inner = stage_gridset(&r, w, level, StageMode::Contained).unwrap();
        let outer = stage_gridset(&r, w, level, StageMode::Intersected).unwrap();
        prop_assert!(inner.is_subset_of(&outer));
    }

    #[test]
    fn widening_window_adds_measure(seed in any::<u64>(), first in 1u64..40, a in 0u64..40, b in 0u64..40, level in 1u32..12) {
        let spec = LengthSequenceSpec::power_law(0.7, 1).unwrap();
        let r = realize(seed, &spec, 200).unwrap();
        let narrow = stage_gridset(&r, StageWindow::new(first, first + a).unwrap(), level, StageMode::Intersected).unwrap();
        let wide = stage_gridset(&r, StageWindow::new(first, first + a + b).unwrap(), level, StageMode::Intersected).unwrap();
        prop_assert!(measure_fraction(&wide) >= measure_fraction(&narrow));
    }

    #[test]
    fn rle_roundtrip(bits in prop::collection::vec(any::<bool>(), 64), level in 1u32..4, d in 1u32..3) {
        let mut g = GridSet::empty(level, d).unwrap();
        for (i, &b) in bits.iter().enumerate().take(g.cells() as usize) {
            if b {
                g.insert_linear(i as u64);
            }
        }
        prop_assert_eq!(GridSet::from_rle(&g.to_rle()).unwrap(), g);
    }

    // targets ------------------------------------------------------------

    #[test]
    fn construction_intervals_nest(spec in self_similar()) {
        let fams = build_levels(&spec, 3).unwrap();
        for w in fams.windows(2) {
            let (parent, child) = (&w[0], &w[1]);
            prop_assert_eq!(parent.base, child.base);
            let scale = BigUint::from(child.base).pow(child.denom_exp - parent.denom_exp);
            let plen = BigUint::from(parent.length_num) * &scale;
            for &o in &child.offsets {
                let lo = BigUint::from(o);
                let hi = &lo + child.length_num;
                let holders = parent
                    .offsets
                    .iter()
                    .filter(|&&p| {
                        let p = BigUint::from(p) * &scale;
                        p <= lo && hi <= &p + &plen
                    })
                    .count();
                prop_assert_eq!(holders, 1);
            }
        }
    }

    #[test]
    fn natural_measure_is_a_probability(spec in self_similar()) {
        let fams = build_levels(&spec, 3).unwrap();
        for f in &fams {
            let total: f64 = f
                .offsets
                .iter()
                .map(|&o| natural_measure_weight(&fams, f.base, f.denom_exp, o, f.length_num).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
        // additivity: a parent's weight is the sum over the children it holds
        let (parent, child) = (&fams[1], &fams[2]);
        let scale = (child.base as u128).pow(child.denom_exp - parent.denom_exp);
        for &p in &parent.offsets {
            let wp = natural_measure_weight(&fams, parent.base, parent.denom_exp, p, parent.length_num).unwrap();
            let lo = p * scale;
            let hi = lo + parent.length_num * scale;
            let wc: f64 = child
                .offsets
                .iter()
                .filter(|&&o| lo <= o && o + child.length_num <= hi)
                .map(|&o| natural_measure_weight(&fams, child.base, child.denom_exp, o, child.length_num).unwrap())
                .sum();
            prop_assert!((wp - wc).abs() < 1e-12);
        }
    }

    // estimators and verdicts ---------------------------------------------

    #[test]
    fn slope_stable_when_coarsest_level_dropped(slope in 0.1f64..1.0, noise in prop::collection::vec(-0.3f64..0.3, 8)) {
        let counts: Vec<(u32, u64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let n = i as u32 + 4;
                (n, (slope * n as f64 + 10.0 + e).exp2().round() as u64)
            })
            .collect();
        let full = box_dimension_fit(&counts).unwrap();
        let cut = box_dimension_fit(&counts[1..]).unwrap();
        let max_resid = full
            .points
            .iter()
            .map(|&(x, y)| (y - full.slope * x - full.intercept).abs())
            .fold(0.0, f64::max);
        let bound = 2.0 / counts.len() as f64 * max_resid;
        prop_assert!((full.slope - cut.slope).abs() < bound.max(1e-9), "{} vs {}", full.slope, cut.slope);
    }

    #[test]
    fn self_similar_profile_sandwiched(x in 0.0f64..1.0) {
        // snap x onto the middle-third set via its ternary digits
        let mut y = 0.0;
        let mut scale = 1.0;
        let mut t = x;
        for _ in 0..30 {
            scale /= 3.0;
            let digit = if t < 0.5 { 0.0 } else { 2.0 };
            y += digit * scale;
            t = (t * 2.0).fract();
        }
        let m = SelfSimilarMeasure { ratio: 1.0 / 3.0, copies: 2 };
        let dim = 2f64.ln() / 3f64.ln();
        let radii: Vec<f64> = (3..15).map(|k| (k as f64) * 1.5).collect();
        let p = local_dimension_profile(&m, &y, &radii).unwrap();
        // balls of radius r meet at most 2 and contain at least 1 piece of
        // length ≥ r/3, so the ratio is within log 3 / log(1/r) of dim
        for (u, ratio) in p.neg_log2_radii.iter().zip(&p.ratios) {
            let slack = 2.0 * 3f64.log2() / u;
            prop_assert!((ratio - dim).abs() <= slack, "u={u} ratio={ratio}");
        }
    }

    #[test]
    fn verdict_is_pure(est in -1.0f64..2.0, lo in -1.0f64..2.0, w in 0.0f64..1.0, th in -1.0f64..2.0, k in 0usize..3, app in any::<bool>()) {
        let kind = [TheoryKind::Exact, TheoryKind::UpperBound, TheoryKind::LowerBound][k];
        let a = verdict_of(est, (lo, lo + w), th, kind, None, None, app);
        let b = verdict_of(est, (lo, lo + w), th, kind, None, None, app);
        prop_assert_eq!(a, b);
        if !app {
            prop_assert_eq!(a, Verdict::Inconclusive);
        }
    }

    #[test]
    fn upper_bounds_never_fail_below(successes in 0u64..1000, extra in 0u64..1000, bound in 0.0f64..1.0) {
        let trials = successes + extra + 1;
        let freq = successes as f64 / trials as f64;
        let c = Check::frequency_upper("x", successes, trials, bound.max(freq));
        prop_assert_eq!(c.verdict, Verdict::Pass);
        prop_assert_eq!(c.verdict, c.recompute());
    }

    #[test]
    fn wilson_width_shrinks(p in 0.05f64..0.95, n in 50u64..500) {
        let width = |t: u64| {
            let (lo, hi) = binomial_interval((p * t as f64).round() as u64, t, 0.99);
            hi - lo
        };
        let (w1, w100) = (width(n), width(100 * n));
        let ratio = w1 / w100;
        prop_assert!((ratio - 10.0).abs() < 1.5, "ratio {ratio}");
    }
}

/// Exhaustive small cases: a cube holding the center lies in any ball whose
/// radius is at least the cube diameter.
#[test]
fn small_cube_inside_ball_of_its_diameter() {
    for d in 1..=2usize {
        for n in 1..=4u32 {
            let side = 1u64 << n;
            let diam = (d as f64).sqrt() / side as f64;
            if diam > 0.5 {
                continue;
            }
            let cells = side.pow(d as u32);
            for lin in 0..cells {
                let idx: Vec<u64> = (0..d).map(|i| (lin >> (n as usize * i)) % side).collect();
                let q = DyadicCube::new(n, idx.clone()).unwrap();
                for sub in 0..=4u64 {
                    let c: Vec<f64> = idx.iter().map(|&i| (i as f64 + sub as f64 / 4.0 * 0.999) / side as f64).collect();
                    let b = TorusBall::new(TorusPoint::new(c).unwrap(), (diam * (1.0 + 1e-12)).min(0.5)).unwrap();
                    assert!(ball_contains_cube(&b, &q), "d={d} n={n} cube={lin} sub={sub}");
                }
            }
        }
    }
}

/// Inside a level-(k−1) construction interval of the t-parameter set, the
/// δ_k-grid cubes touching F number 2^{⌊n_k t⌋} ≥ 2^{n_k s} for s ≤ t − 1/n_k.
#[test]
fn per_parent_cube_count_at_construction_scales() {
    for &(t, a) in &[(0.3, 0.6), (0.6, 0.3)] {
        let eps: Vec<f64> = (1..=3).map(|k| 0.5f64.powi(k)).collect();
        let sched = build_schedule_prop14(t, a, &default_betas(a, 3), &eps, 3).unwrap();
        for l in &sched.levels {
            let g = l.g.as_ref().unwrap();
            // children are spaced 2^{-(D_{k-1}+bits)} ≥ δ_k, so each sits in its own δ_k cube
            assert!(g.slot_bits <= l.n);
            let s = t - 1.0 / l.n as f64;
            assert!(g.slot_bits as f64 >= l.n as f64 * s, "level n={} bits={}", l.n, g.slot_bits);
        }
    }
}

/// Full-measure specs keep a positive fraction of the circle covered by
/// windows [K, 10K]; measure-zero specs lose it as K grows. Contained mode:
/// intersected grids saturate once the ball count exceeds the cube count.
#[test]
fn borel_cantelli_trends() {
    let level = 22;
    let frac = |alpha: f64, k: u64| {
        let spec = LengthSequenceSpec::power_law(alpha, 1).unwrap();
        let seeds = 8u64;
        (0..seeds)
            .map(|s| {
                let r = realize(s, &spec, 10 * k).unwrap();
                measure_fraction(&stage_gridset(&r, StageWindow::new(k, 10 * k).unwrap(), level, StageMode::Contained).unwrap())
            })
            .sum::<f64>()
            / seeds as f64
    };
    let ks = [100u64, 1000, 10000];
    let full: Vec<f64> = ks.iter().map(|&k| frac(1.0, k)).collect();
    let zero: Vec<f64> = ks.iter().map(|&k| frac(0.5, k)).collect();
    assert!(full.iter().all(|&f| f > 0.4), "{full:?}");
    assert!(zero.windows(2).all(|w| w[1] < w[0]), "{zero:?}");
    assert!(zero[2] < 0.1, "{zero:?}");
}
