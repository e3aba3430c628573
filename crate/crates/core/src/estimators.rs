//! Dimension and statistics estimators.

use crate::error::{invalid, Error, Result};
use crate::numeric::least_squares;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Wilson score interval for a binomial proportion.
pub fn binomial_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0, "need 0 ≤ successes ≤ trials, trials > 0");
    assert!(confidence > 0.0 && confidence < 1.0, "confidence must be in (0,1)");
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0).min(p) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0).max(p) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// (log2 1/scale, log2 count)
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares slope of log2(count) against level n.
pub fn box_dimension_fit(counts: &[(u32, u64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .map(|&(n, c)| {
            if c == 0 {
                invalid("box counts must be positive")
            } else {
                Ok((n as f64, (c as f64).log2()))
            }
        })
        .collect::<Result<_>>()?;
    fit_log_points(pts)
}

/// Fit on points already in log2 form (for counts beyond u64).
pub fn fit_log_points(points: Vec<(f64, f64)>) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: points.len() });
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return invalid("scales must be strictly decreasing");
    }
    let (slope, intercept, r2) = least_squares(&points);
    Ok(SlopeFit { points, slope, intercept, r2 })
}

impl SlopeFit {
    pub fn csv_rows(&self) -> Vec<[String; 2]> {
        self.points.iter().map(|p| [p.0.to_string(), p.1.to_string()]).collect()
    }
}

/// Access to ball masses of a measure, in the log2 domain.
pub trait BallMeasure<P> {
    /// log2 μ(B(x, 2^{-u})); −∞ for a null ball.
    fn log2_ball_mass(&self, x: &P, u: f64) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDimProfile {
    /// u = −log2 r per radius, increasing (radii decreasing).
    pub neg_log2_radii: Vec<f64>,
    /// log μ(B(x,r)) / log r per radius.
    pub ratios: Vec<f64>,
    /// Minimum over the finest half of the radii.
    pub liminf_estimate: f64,
}

/// Ratios log μ(B(x,r))/log r at radii r = 2^{-u}.
pub fn local_dimension_profile<P, M: BallMeasure<P> + ?Sized>(
    measure: &M,
    x: &P,
    neg_log2_radii: &[f64],
) -> Result<LocalDimProfile> {
    if neg_log2_radii.is_empty() {
        return invalid("no radii");
    }
    if neg_log2_radii.iter().any(|&u| !(u > 1.0)) {
        return invalid("radii must lie in (0, 1/2)");
    }
    if neg_log2_radii.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radii must be strictly decreasing");
    }
    let mut ratios = Vec::with_capacity(neg_log2_radii.len());
    for &u in neg_log2_radii {
        let lm = measure.log2_ball_mass(x, u);
        if lm == f64::NEG_INFINITY {
            return Err(Error::ZeroMass(u));
        }
        ratios.push(-lm / u);
    }
    let tail = &ratios[ratios.len() / 2..];
    let liminf_estimate = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LocalDimProfile {
        neg_log2_radii: neg_log2_radii.to_vec(),
        ratios,
        liminf_estimate,
    })
}

/// Convenience form taking radii as reals.
pub fn local_dimension_profile_radii<P, M: BallMeasure<P> + ?Sized>(
    measure: &M,
    x: &P,
    radii: &[f64],
) -> Result<LocalDimProfile> {
    let u: Vec<f64> = radii.iter().map(|r| -r.log2()).collect();
    local_dimension_profile(measure, x, &u)
}

/// Lebesgue measure on the circle.
pub struct UniformCircle;

impl BallMeasure<f64> for UniformCircle {
    fn log2_ball_mass(&self, _x: &f64, u: f64) -> f64 {
        (1.0 - u).min(0.0)
    }
}

/// Natural measure of a self-similar Cantor set in [0,1]: `copies` pieces of
/// relative length `ratio`, evenly spaced with the first at 0 and the last
/// ending at 1, each carrying mass 1/copies.
pub struct SelfSimilarMeasure {
    pub ratio: f64,
    pub copies: u32,
}

impl SelfSimilarMeasure {
    fn offsets(&self) -> Vec<f64> {
        if self.copies == 1 {
            return vec![0.0];
        }
        let gap = (1.0 - self.ratio) / (self.copies - 1) as f64;
        (0..self.copies).map(|i| i as f64 * gap).collect()
    }

    /// Mass of the closed interval [a, b] ⊂ [0,1].
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let offs = self.offsets();
        let mut total = 0.0;
        // (left, length, weight) pieces still straddling an endpoint
        let mut stack = vec![(0.0f64, 1.0f64, 1.0f64)];
        while let Some((p, len, w)) = stack.pop() {
            let q = p + len;
            if q < a || p > b {
                continue;
            }
            if a <= p && q <= b {
                total += w;
                continue;
            }
            if len < 1e-300 || w < 1e-300 {
                let overlap = (q.min(b) - p.max(a)).max(0.0);
                total += w * overlap / len;
                continue;
            }
            let cl = len * self.ratio;
            for &o in &offs {
                stack.push((p + o * len, cl, w / self.copies as f64));
            }
        }
        total
    }
}

impl BallMeasure<f64> for SelfSimilarMeasure {
    fn log2_ball_mass(&self, x: &f64, u: f64) -> f64 {
        let r = (-u).exp2();
        let (a, b) = (x - r, x + r);
        let mut m = 0.0;
        if a < 0.0 {
            m += self.interval_mass(1.0 + a, 1.0);
        }
        if b > 1.0 {
            m += self.interval_mass(0.0, b - 1.0);
        }
        m += self.interval_mass(a.max(0.0), b.min(1.0));
        m.min(1.0).log2()
    }
}
