//! Experiment reports and the pure verdict function.

use crate::estimators::binomial_interval;
use serde::{Deserialize, Serialize};

/// Confidence level of the interval whose half-width is the slack on bounds.
pub const SLACK_CONFIDENCE: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryKind {
    Exact,
    UpperBound,
    LowerBound,
    LimitTrend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub estimate: f64,
    pub interval: (f64, f64),
    pub theory_value: f64,
    pub theory_kind: TheoryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    /// False when the hypothesis of the tested statement does not hold; the
    /// verdict is then inconclusive whatever the numbers say.
    pub applicable: bool,
    pub verdict: Verdict,
}

/// Verdict semantics:
/// * exact: theory value inside the interval;
/// * upper bound: estimate ≤ theory + half-width of the interval;
/// * lower bound: estimate ≥ theory − half-width;
/// * limit trend: at least three values, strictly monotone in `direction`.
pub fn verdict_of(
    estimate: f64,
    interval: (f64, f64),
    theory_value: f64,
    kind: TheoryKind,
    series: Option<&[f64]>,
    direction: Option<Direction>,
    applicable: bool,
) -> Verdict {
    if !applicable {
        return Verdict::Inconclusive;
    }
    if estimate.is_nan() {
        return Verdict::Fail;
    }
    let slack = (interval.1 - interval.0) / 2.0;
    let ok = match kind {
        TheoryKind::Exact => interval.0 <= theory_value && theory_value <= interval.1,
        TheoryKind::UpperBound => estimate <= theory_value + slack,
        TheoryKind::LowerBound => estimate >= theory_value - slack,
        TheoryKind::LimitTrend => match (series, direction) {
            (Some(s), Some(dir)) if s.len() >= 3 => s.windows(2).all(|w| match dir {
                Direction::Increasing => w[1] > w[0],
                Direction::Decreasing => w[1] < w[0],
            }),
            (Some(_), Some(_)) => return Verdict::Inconclusive,
            _ => false,
        },
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl Check {
    fn finish(mut self) -> Self {
        self.verdict = self.recompute();
        self
    }

    pub fn recompute(&self) -> Verdict {
        verdict_of(
            self.estimate,
            self.interval,
            self.theory_value,
            self.theory_kind,
            self.series.as_deref(),
            self.direction,
            self.applicable,
        )
    }

    fn base(label: &str, estimate: f64, interval: (f64, f64), theory: f64, kind: TheoryKind) -> Self {
        Check {
            label: label.to_string(),
            estimate,
            interval,
            theory_value: theory,
            theory_kind: kind,
            series: None,
            direction: None,
            applicable: true,
            verdict: Verdict::Inconclusive,
        }
    }

    /// Frequency `successes/trials` against an upper bound, with the 99%
    /// Wilson interval supplying the slack.
    pub fn frequency_upper(label: &str, successes: u64, trials: u64, bound: f64) -> Self {
        let est = successes as f64 / trials as f64;
        let ci = binomial_interval(successes, trials, SLACK_CONFIDENCE);
        Self::base(label, est, ci, bound, TheoryKind::UpperBound).finish()
    }

    pub fn frequency_lower(label: &str, successes: u64, trials: u64, bound: f64) -> Self {
        let est = successes as f64 / trials as f64;
        let ci = binomial_interval(successes, trials, SLACK_CONFIDENCE);
        Self::base(label, est, ci, bound, TheoryKind::LowerBound).finish()
    }

    /// Estimate within `k` standard errors of an exact value.
    pub fn within_se(label: &str, estimate: f64, se: f64, k: f64, theory: f64) -> Self {
        Self::base(label, estimate, (estimate - k * se, estimate + k * se), theory, TheoryKind::Exact).finish()
    }

    /// Estimate within a fixed tolerance of an exact value.
    pub fn within_tolerance(label: &str, estimate: f64, tol: f64, theory: f64) -> Self {
        Self::base(label, estimate, (estimate - tol, estimate + tol), theory, TheoryKind::Exact).finish()
    }

    /// Strict monotone trend toward `limit`; the estimate is the last value.
    pub fn trend(label: &str, series: Vec<f64>, direction: Direction, limit: f64) -> Self {
        let last = series.last().copied().unwrap_or(f64::NAN);
        let mut c = Self::base(label, last, (last, last), limit, TheoryKind::LimitTrend);
        c.series = Some(series);
        c.direction = Some(direction);
        c.finish()
    }

    /// Point estimate against an upper bound, no slack.
    pub fn at_most(label: &str, estimate: f64, bound: f64) -> Self {
        Self::base(label, estimate, (estimate, estimate), bound, TheoryKind::UpperBound).finish()
    }

    pub fn not_applicable(mut self) -> Self {
        self.applicable = false;
        self.finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: serde_json::Value,
    /// Headline numbers, copied from the first check.
    pub estimate: f64,
    pub interval: (f64, f64),
    pub theory_value: f64,
    pub theory_kind: TheoryKind,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    /// Free-form supporting numbers (per-depth tables, diagnostics).
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Fail dominates, then inconclusive.
pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in verdicts {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Pass => {}
        }
    }
    out
}

impl ExperimentReport {
    pub fn new(name: &str, parameters: serde_json::Value, checks: Vec<Check>, details: serde_json::Value) -> Self {
        assert!(!checks.is_empty(), "a report needs at least one check");
        let h = &checks[0];
        ExperimentReport {
            name: name.to_string(),
            parameters,
            estimate: h.estimate,
            interval: h.interval,
            theory_value: h.theory_value,
            theory_kind: h.theory_kind,
            verdict: combine(checks.iter().map(|c| c.verdict)),
            checks,
            details,
        }
    }

    /// True when every stored verdict equals its recomputation.
    pub fn verdicts_consistent(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == c.recompute())
            && self.verdict == combine(self.checks.iter().map(|c| c.verdict))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fixed CSV columns shared by every experiment.
pub const CSV_COLUMNS: [&str; 9] = [
    "experiment",
    "check",
    "estimate",
    "lo",
    "hi",
    "theory_value",
    "theory_kind",
    "applicable",
    "verdict",
];

pub fn write_csv<W: std::io::Write>(reports: &[ExperimentReport], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_COLUMNS)?;
    for r in reports {
        for c in &r.checks {
            let kind = serde_json::to_value(c.theory_kind).unwrap();
            let verdict = serde_json::to_value(c.verdict).unwrap();
            wr.write_record([
                r.name.clone(),
                c.label.clone(),
                c.estimate.to_string(),
                c.interval.0.to_string(),
                c.interval.1.to_string(),
                c.theory_value.to_string(),
                kind.as_str().unwrap().to_string(),
                c.applicable.to_string(),
                verdict.as_str().unwrap().to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}
