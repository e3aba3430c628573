//! Acceptance suites at desk scale. One line per criterion is printed; the
//! test fails if any criterion fails.

use num_bigint::BigUint;
use randcover::covering::StageWindow;
use randcover::harness::{
    dichotomy_experiment, prop13_experiment, prop14_experiment, verify_coincidence_lemma,
    verify_covering_lemma, verify_moment_lemma,
};
use randcover::lengths::{
    alpha_exponent, condition_c_diagnose, critical_sum_exponent, scale_census, Block, ConditionCVerdict,
    LengthSequenceSpec,
};
use randcover::report::{ExperimentReport, Verdict};
use randcover::rng::CounterRng;
use randcover::targets::schedule::build_schedule_prop13;
use randcover::targets::TargetSetSpec;
use std::io::Write;
use std::time::{Duration, Instant};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    note: String,
}

fn all_pass(rs: &[ExperimentReport]) -> bool {
    rs.iter().all(|r| r.verdict == Verdict::Pass && r.verdicts_consistent())
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn check<'a>(r: &'a ExperimentReport, label: &str) -> &'a randcover::report::Check {
    r.checks.iter().find(|c| c.label == label).unwrap_or_else(|| panic!("{} lacks {label}", r.name))
}

// suites ------------------------------------------------------------------

fn moment_suite() -> Vec<ExperimentReport> {
    let spec = LengthSequenceSpec::power_law(1.0, 1).unwrap();
    let mut out = Vec::new();
    for n0 in [0u32, 2] {
        for l in [256u64, 1024] {
            // the first index of PowerLaw alpha=1 has l_1 = 1/2; start at 2
            // when n0 > 0 so that every ball sits below the cube scale
            let first = if n0 == 0 { 1 } else { 2 };
            let w = StageWindow::new(first, first + l - 1).unwrap();
            out.push(verify_moment_lemma(n0, 20, &spec, w, 10_000, 11).unwrap());
        }
    }
    out
}

fn coincidence_suite() -> Vec<ExperimentReport> {
    [8u32, 10, 12]
        .iter()
        .map(|&n| verify_coincidence_lemma(0, n, 0.6, 0.6, 1, 10_000, 12).unwrap())
        .collect()
}

fn covering_suite() -> Vec<ExperimentReport> {
    [6, 8, 10]
        .iter()
        .map(|&e| verify_covering_lemma(2f64.powi(-e), 0.5, 0.9, 1.0, 1.0, 10_000, 13).unwrap())
        .collect()
}

fn dichotomy_suite() -> Vec<ExperimentReport> {
    let spec = LengthSequenceSpec::power_law(0.5, 1).unwrap();
    let ends = [1_000u64, 10_000, 100_000];
    let cantor: Vec<_> = ends.iter().map(|&n| StageWindow::new(n * 9 / 10 + 1, n).unwrap()).collect();
    let point: Vec<_> = ends.iter().map(|&n| StageWindow::new(n / 1000, n).unwrap()).collect();
    vec![
        dichotomy_experiment(&spec, &TargetSetSpec::middle_third(), None, &cantor, 1000, 14).unwrap(),
        dichotomy_experiment(&spec, &TargetSetSpec::SinglePoint { x: 0.3 }, None, &point, 1000, 14).unwrap(),
    ]
}

fn prop13_inputs() -> (Vec<f64>, Vec<f64>) {
    let s = (1..=3).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let e = (1..=3).map(|k| 0.5f64.powi(k)).collect();
    (s, e)
}

fn prop13_suite() -> Vec<ExperimentReport> {
    let (s, e) = prop13_inputs();
    vec![prop13_experiment(&s, &e, 3, 1000, 15, false).unwrap()]
}

fn prop14_suite() -> Vec<ExperimentReport> {
    [(0.3, 0.6), (0.6, 0.3)]
        .iter()
        .map(|&(t, a)| prop14_experiment(t, a, 3, 64, 16).unwrap())
        .collect()
}

fn random_specs(n: usize) -> Vec<LengthSequenceSpec> {
    let rng = CounterRng::new(17);
    (0..n as u64)
        .map(|i| {
            if i % 2 == 0 {
                let alpha = 0.05 + 0.95 * rng.f64_at(0, i, 0);
                LengthSequenceSpec::power_law(alpha, 1).unwrap()
            } else {
                let nb = 2 + rng.below(1, i, 10);
                let mut first = BigUint::from(1u8);
                let mut lv = -1.0;
                let mut blocks = Vec::new();
                for b in 0..nb {
                    blocks.push(Block { log2_value: lv, first_index: first.clone() });
                    let grow = 1 + rng.below(2, i * 64 + b, 200);
                    first = (&first << grow as u32) + 1u8;
                    lv -= 1.0 + 300.0 * rng.f64_at(3, i * 64 + b, 0);
                }
                LengthSequenceSpec::block_constant(blocks, first, 1).unwrap()
            }
        })
        .collect()
}

// criteria ----------------------------------------------------------------

fn run_all() -> Vec<Vec<ExperimentReport>> {
    vec![moment_suite(), coincidence_suite(), covering_suite(), dichotomy_suite(), prop13_suite(), prop14_suite()]
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = Vec::new();

    let (moments, t) = timed(moment_suite);
    outcomes.push(Outcome {
        id: 1,
        name: "moment suite",
        pass: all_pass(&moments) && t < Duration::from_secs(60),
        note: format!("{} reports, {:.1}s", moments.len(), t.as_secs_f64()),
    });

    let (coinc, t) = timed(coincidence_suite);
    let bounds: Vec<f64> = coinc.iter().map(|r| check(r, "miss_vs_bound").theory_value).collect();
    outcomes.push(Outcome {
        id: 2,
        name: "coincidence suite",
        pass: all_pass(&coinc) && strictly_decreasing(&bounds) && t < Duration::from_secs(60),
        note: format!("bounds {bounds:.4?}, {:.1}s", t.as_secs_f64()),
    });

    let (cover, t) = timed(covering_suite);
    let freqs: Vec<f64> = cover.iter().map(|r| check(r, "noncover_vs_bound").estimate).collect();
    outcomes.push(Outcome {
        id: 3,
        name: "covering suite",
        pass: all_pass(&cover) && strictly_decreasing(&freqs) && t < Duration::from_secs(120),
        note: format!("non-cover {freqs:.4?}, {:.1}s", t.as_secs_f64()),
    });

    let (dich, t) = timed(dichotomy_suite);
    let cantor = dich[0].checks[0].series.clone().unwrap_or_default();
    let point = dich[1].checks[0].series.clone().unwrap_or_default();
    let deepest_point = dich[1].checks.last().unwrap();
    outcomes.push(Outcome {
        id: 4,
        name: "dichotomy suite",
        pass: all_pass(&dich)
            && strictly_increasing(&cantor)
            && cantor.last().is_some_and(|&f| f > 0.9)
            && strictly_decreasing(&point)
            && deepest_point.verdict == Verdict::Pass
            && t < Duration::from_secs(300),
        note: format!("cantor {cantor:.3?}, point {point:.3?}, {:.1}s", t.as_secs_f64()),
    });

    let (p13, t) = timed(prop13_suite);
    let slope = check(&p13[0], "log2_frequency_slope").estimate;
    outcomes.push(Outcome {
        id: 5,
        name: "block-hit suite",
        pass: all_pass(&p13) && t < Duration::from_secs(300),
        note: format!(
            "freqs {:.3?}, log2 slope {slope:.3}, {:.1}s",
            p13[0].checks[0..3].iter().map(|c| c.estimate).collect::<Vec<_>>(),
            t.as_secs_f64()
        ),
    });

    let (p14, t) = timed(prop14_suite);
    let slopes: Vec<f64> = p14.iter().map(|r| check(r, "box_slope").estimate).collect();
    outcomes.push(Outcome {
        id: 6,
        name: "Cantor G suite",
        pass: all_pass(&p14) && t < Duration::from_secs(600),
        note: format!("box slopes {slopes:.3?}, {:.1}s", t.as_secs_f64()),
    });

    let (analytic, t) = timed(|| {
        let specs = random_specs(100);
        let equal = specs
            .iter()
            .filter(|s| alpha_exponent(s).value == critical_sum_exponent(s).value)
            .count();
        let pl = LengthSequenceSpec::power_law(0.5, 1).unwrap();
        let pl_c = condition_c_diagnose(&scale_census(&pl, &BigUint::from(1_000_000u32)).unwrap());
        let (s, e) = prop13_inputs();
        let blocks = build_schedule_prop13(&s, &e, 3).unwrap().length_spec().unwrap();
        let bc = condition_c_diagnose(&scale_census(&blocks, &blocks.horizon().unwrap()).unwrap());
        (equal, pl_c.verdict, bc.verdict)
    });
    let (equal, pl_v, bc_v) = analytic;
    outcomes.push(Outcome {
        id: 7,
        name: "analytic cross-checks",
        pass: equal == 100
            && pl_v == ConditionCVerdict::Consistent
            && bc_v == ConditionCVerdict::Violated
            && t < Duration::from_secs(10),
        note: format!("{equal}/100 equal, power law {pl_v:?}, blocks {bc_v:?}, {:.1}s", t.as_secs_f64()),
    });

    let first: Vec<String> = [moments, coinc, cover, dich, p13, p14]
        .iter()
        .flat_map(|s| s.iter().map(|r| r.to_json()))
        .collect();
    let second: Vec<String> = run_all().iter().flat_map(|s| s.iter().map(|r| r.to_json())).collect();
    let same = first.len() == second.len() && first.iter().zip(&second).all(|(a, b)| a == b);
    outcomes.push(Outcome {
        id: 8,
        name: "determinism",
        pass: same,
        note: format!("{} reports compared", first.len()),
    });

    // written to stderr directly so the lines show without --nocapture
    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        writeln!(
            err,
            "criterion {} [{}] {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.note
        )
        .unwrap();
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
