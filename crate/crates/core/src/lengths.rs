//! Diameter sequences (l_n): evaluation, the exponent α(l_n), the critical
//! sum exponent, the dyadic scale census and the measure classification.

use crate::error::{invalid, Error, Result};
use crate::numeric::{bigstr, dyadic_band, least_squares, log2_big};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_PREFACTOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// log2 of the common length in the block; lengths are stored in the log
    /// domain so that scales far below f64 range stay representable.
    pub log2_value: f64,
    #[serde(with = "bigstr")]
    pub first_index: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LengthVariant {
    /// l_n = c · n^{-1/alpha}
    PowerLaw { alpha: f64, c: f64 },
    /// Blocks of constant length; block k covers [first_k, first_{k+1}) and
    /// the last block ends before `end`.
    BlockConstant {
        blocks: Vec<Block>,
        #[serde(with = "bigstr")]
        end: BigUint,
    },
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthSequenceSpec {
    #[serde(flatten)]
    pub variant: LengthVariant,
    pub d: u32,
}

/// A finite-horizon exponent; `estimate` marks values that are not exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub value: f64,
    pub estimate: bool,
}

impl LengthSequenceSpec {
    pub fn power_law(alpha: f64, d: u32) -> Result<Self> {
        Self::power_law_with(alpha, DEFAULT_PREFACTOR, d)
    }

    pub fn power_law_with(alpha: f64, c: f64, d: u32) -> Result<Self> {
        let s = LengthSequenceSpec {
            variant: LengthVariant::PowerLaw { alpha, c },
            d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn block_constant(blocks: Vec<Block>, end: BigUint, d: u32) -> Result<Self> {
        let s = LengthSequenceSpec {
            variant: LengthVariant::BlockConstant { blocks, end },
            d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(values: Vec<f64>, d: u32) -> Result<Self> {
        let s = LengthSequenceSpec {
            variant: LengthVariant::Explicit { values },
            d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return invalid("dimension d must be positive");
        }
        match &self.variant {
            LengthVariant::PowerLaw { alpha, c } => {
                if !(*alpha > 0.0 && *alpha <= self.d as f64) {
                    return invalid(format!("power-law alpha {alpha} not in (0, d]"));
                }
                if !(*c > 0.0 && *c <= 0.5) {
                    return invalid(format!("prefactor c {c} not in (0, 1/2]"));
                }
            }
            LengthVariant::BlockConstant { blocks, end } => {
                if blocks.is_empty() {
                    return invalid("block-constant sequence needs a block");
                }
                if blocks[0].first_index != BigUint::one() {
                    return invalid("first block must start at index 1");
                }
                for w in blocks.windows(2) {
                    if w[1].first_index <= w[0].first_index {
                        return invalid("block first indices must increase");
                    }
                    if w[1].log2_value > w[0].log2_value {
                        return invalid("block values must not increase");
                    }
                }
                if *end <= blocks.last().unwrap().first_index {
                    return invalid("last block is empty");
                }
                if blocks.iter().any(|b| !(b.log2_value <= -1.0) || !b.log2_value.is_finite()) {
                    return invalid("block values must lie in (0, 1/2]");
                }
            }
            LengthVariant::Explicit { values } => {
                if values.is_empty() {
                    return invalid("explicit sequence is empty");
                }
                if values.iter().any(|&v| !(v > 0.0 && v <= 0.5)) {
                    return invalid("explicit values must lie in (0, 1/2]");
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return invalid("explicit values must be non-increasing");
                }
            }
        }
        Ok(())
    }

    /// Number of indices the sequence defines, `None` if unbounded.
    pub fn horizon(&self) -> Option<BigUint> {
        match &self.variant {
            LengthVariant::PowerLaw { .. } => None,
            LengthVariant::BlockConstant { end, .. } => Some(end - 1u8),
            LengthVariant::Explicit { values } => Some(BigUint::from(values.len())),
        }
    }

    /// log2 l_n.
    pub fn log2_value_at(&self, n: &BigUint) -> Result<f64> {
        if n.is_zero() {
            return invalid("indices start at 1");
        }
        match &self.variant {
            LengthVariant::PowerLaw { alpha, c } => Ok(c.log2() - log2_big(n) / alpha),
            LengthVariant::BlockConstant { blocks, end } => {
                if n >= end {
                    return Err(Error::OutOfHorizon(n.to_string()));
                }
                let k = blocks.partition_point(|b| &b.first_index <= n) - 1;
                Ok(blocks[k].log2_value)
            }
            LengthVariant::Explicit { values } => {
                let i = n.to_usize().filter(|&i| i <= values.len());
                match i {
                    Some(i) => Ok(values[i - 1].log2()),
                    None => Err(Error::OutOfHorizon(n.to_string())),
                }
            }
        }
    }

    /// l_n in f64; underflows to 0 for scales below f64 range.
    pub fn value_at(&self, n: u64) -> Result<f64> {
        match &self.variant {
            LengthVariant::PowerLaw { alpha, c } => {
                if n == 0 {
                    return invalid("indices start at 1");
                }
                Ok(c * (n as f64).powf(-1.0 / alpha))
            }
            LengthVariant::Explicit { values } => {
                if n == 0 {
                    return invalid("indices start at 1");
                }
                values
                    .get(n as usize - 1)
                    .copied()
                    .ok_or_else(|| Error::OutOfHorizon(n.to_string()))
            }
            LengthVariant::BlockConstant { .. } => Ok(self.log2_value_at(&BigUint::from(n))?.exp2()),
        }
    }

    /// Blocks with their last index, for the block variant.
    fn block_ends(&self) -> Vec<(f64, BigUint, BigUint)> {
        match &self.variant {
            LengthVariant::BlockConstant { blocks, end } => blocks
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let next = blocks.get(k + 1).map(|n| &n.first_index).unwrap_or(end);
                    (b.log2_value, b.first_index.clone(), next - 1u8)
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Tail used by finite-horizon limsups: the second half of the terms.
fn tail_start(len: usize) -> usize {
    len / 2
}

/// α(l_n) = limsup log n / (−log l_n).
///
/// Power laws return alpha. Block sequences evaluate the ratio at the last
/// index of each block in the tail half, where it peaks within the block.
/// Explicit lists take the max over the tail half of the indices.
pub fn alpha_exponent(spec: &LengthSequenceSpec) -> Exponent {
    match &spec.variant {
        LengthVariant::PowerLaw { alpha, .. } => Exponent { value: *alpha, estimate: false },
        LengthVariant::BlockConstant { .. } => {
            let ends = spec.block_ends();
            let value = ends[tail_start(ends.len())..]
                .iter()
                .map(|(lv, _, last)| log_ratio(log2_big(last), *lv))
                .fold(f64::NEG_INFINITY, f64::max);
            Exponent { value, estimate: false }
        }
        LengthVariant::Explicit { values } => {
            let value = (tail_start(values.len())..values.len())
                .map(|i| log_ratio(((i + 1) as f64).log2(), values[i].log2()))
                .fold(f64::NEG_INFINITY, f64::max);
            Exponent { value, estimate: true }
        }
    }
}

#[inline]
fn log_ratio(log2_n: f64, log2_l: f64) -> f64 {
    log2_n / -log2_l
}

/// sup{s : Σ l_n^s = ∞}.
///
/// Power laws: Σ n^{-s/α} diverges iff s ≤ α. Block sequences: by the
/// condensation bound Σ_{n ≤ b_k} l_n^s ≥ b_k v_k^s, each block contributes
/// the root of b_k v_k^s = 1; the tail limsup of these roots is returned.
/// Explicit lists use the same per-term roots n · l_n^s = 1.
pub fn critical_sum_exponent(spec: &LengthSequenceSpec) -> Exponent {
    match &spec.variant {
        LengthVariant::PowerLaw { alpha, .. } => {
            // p-series Σ n^{-p} diverges iff p ≤ 1; p = s/alpha
            let critical_p = 1.0;
            Exponent { value: alpha * critical_p, estimate: false }
        }
        LengthVariant::BlockConstant { .. } => {
            let ends = spec.block_ends();
            let roots: Vec<f64> = ends
                .iter()
                .map(|(lv, _, last)| condensation_root(log2_big(last), *lv))
                .collect();
            let value = roots[tail_start(roots.len())..]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            Exponent { value, estimate: false }
        }
        LengthVariant::Explicit { values } => {
            let value = values
                .iter()
                .enumerate()
                .skip(tail_start(values.len()))
                .map(|(i, v)| condensation_root(((i + 1) as f64).log2(), v.log2()))
                .fold(f64::NEG_INFINITY, f64::max);
            Exponent { value, estimate: true }
        }
    }
}

/// s solving m · 2^{s · log2_v} = 1, i.e. s = log2 m / −log2 v.
#[inline]
fn condensation_root(log2_m: f64, log2_v: f64) -> f64 {
    log2_m / -log2_v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleCensus {
    /// band k → #{n ≤ horizon : l_n ∈ [2^{-k+1}, 2^{-k+2})}
    #[serde(with = "census_map")]
    pub counts: BTreeMap<i64, BigUint>,
    #[serde(with = "bigstr")]
    pub horizon: BigUint,
    /// Band that continues past the horizon, if any; its count is partial.
    pub truncated_band: Option<i64>,
}

mod census_map {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(m: &BTreeMap<i64, BigUint>, s: S) -> Result<S::Ok, S::Error> {
        let v: BTreeMap<i64, String> = m.iter().map(|(k, c)| (*k, c.to_string())).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<i64, BigUint>, D::Error> {
        let v = BTreeMap::<i64, String>::deserialize(d)?;
        v.into_iter()
            .map(|(k, c)| {
                BigUint::from_str(&c)
                    .map(|c| (k, c))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

impl ScaleCensus {
    pub fn total(&self) -> BigUint {
        self.counts.values().sum()
    }
}

/// Exact band counts over 1 ≤ n ≤ horizon.
pub fn scale_census(spec: &LengthSequenceSpec, horizon: &BigUint) -> Result<ScaleCensus> {
    if horizon.is_zero() {
        return invalid("census horizon must be at least 1");
    }
    if let Some(h) = spec.horizon() {
        if *horizon > h {
            return Err(Error::OutOfHorizon(horizon.to_string()));
        }
    }
    let mut counts: BTreeMap<i64, BigUint> = BTreeMap::new();
    let band_of_log2 = |lv: f64| 1 - lv.floor() as i64;
    let band_at_big = |n: &BigUint| -> Result<i64> {
        match &spec.variant {
            LengthVariant::BlockConstant { .. } => Ok(band_of_log2(spec.log2_value_at(n)?)),
            _ => {
                let n = n.to_u64().ok_or_else(|| Error::OutOfHorizon(n.to_string()))?;
                Ok(dyadic_band(spec.value_at(n)?))
            }
        }
    };
    let next_band = band_at_big(&(horizon + 1u8)).ok();
    let last_band = band_at_big(horizon)?;
    match &spec.variant {
        LengthVariant::PowerLaw { .. } => {
            let h = horizon
                .to_u64()
                .ok_or_else(|| Error::Budget("power-law census horizon above u64".into()))?;
            // walk band boundaries: the last index with band ≤ k is found by
            // inverting the formula and correcting against value_at
            let band_at = |n: u64| dyadic_band(spec.value_at(n).unwrap());
            let mut start = 1u64;
            while start <= h {
                let k = band_at(start);
                let end = last_index_in_band(spec, start, h, k, &band_at);
                *counts.entry(k).or_insert_with(BigUint::zero) += BigUint::from(end - start + 1);
                start = end + 1;
            }
        }
        LengthVariant::BlockConstant { .. } => {
            for (lv, first, last) in spec.block_ends() {
                if &first > horizon {
                    break;
                }
                let stop = if &last < horizon { last } else { horizon.clone() };
                *counts.entry(band_of_log2(lv)).or_insert_with(BigUint::zero) += stop - first + 1u8;
            }
        }
        LengthVariant::Explicit { values } => {
            let h = horizon.to_usize().unwrap();
            for v in &values[..h] {
                *counts.entry(dyadic_band(*v)).or_insert_with(BigUint::zero) += 1u8;
            }
        }
    }
    Ok(ScaleCensus {
        counts,
        horizon: horizon.clone(),
        truncated_band: next_band.filter(|&b| b == last_band),
    })
}

/// Largest n in [start, h] with band k, for a non-increasing sequence.
fn last_index_in_band(
    spec: &LengthSequenceSpec,
    start: u64,
    h: u64,
    k: i64,
    band_at: &dyn Fn(u64) -> i64,
) -> u64 {
    let guess = match &spec.variant {
        LengthVariant::PowerLaw { alpha, c } => {
            // l_n ≥ 2^{1-k}  ⇔  n ≤ (c 2^{k-1})^alpha
            let x = (c.log2() + (k - 1) as f64) * alpha;
            if x >= 63.0 {
                h
            } else {
                (x.exp2().floor() as u64).clamp(start, h)
            }
        }
        _ => start,
    };
    // correct the guess to the exact boundary
    let mut lo = start;
    let mut hi = h;
    if band_at(guess) == k {
        lo = guess;
        // exponential search upwards
        let mut step = 1u64;
        while lo < h {
            let probe = lo.saturating_add(step).min(h);
            if band_at(probe) == k {
                lo = probe;
                step = step.saturating_mul(2);
            } else {
                hi = probe - 1;
                break;
            }
        }
        if lo == h {
            return h;
        }
    } else {
        hi = guess - 1;
    }
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if band_at(mid) == k {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionCVerdict {
    Consistent,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCReport {
    pub verdict: ConditionCVerdict,
    /// Bands k_i of the witness subsequence.
    pub witness: Vec<i64>,
    /// log2 n_{k_i} / k_i along the witness.
    pub ratios: Vec<f64>,
    /// Least-squares slope of log2 n_k against k over the tail half of the
    /// nonzero bands; the limit of log2 n_k / k when the census is regular.
    pub limit_estimate: Option<f64>,
    /// Verdicts are finite-horizon statements about a limit property.
    pub finite_horizon: bool,
}

pub const CONDITION_C_TOLERANCE: f64 = 0.05;
pub const CONDITION_C_WINDOW: usize = 5;
pub const CONDITION_C_MIN_BANDS: usize = 10;
/// Gap ratio k_{i+1}/k_i treated as bounded away from 1.
pub const CONDITION_C_GAP: f64 = 1.25;
/// Deepest band needed before sparse bands count as a violation.
pub const CONDITION_C_DEEP_BAND: i64 = 32;

pub fn condition_c_diagnose(census: &ScaleCensus) -> ConditionCReport {
    let nz: Vec<(i64, f64)> = census
        .counts
        .iter()
        .filter(|(k, c)| !c.is_zero() && Some(**k) != census.truncated_band && **k >= 1)
        .map(|(k, c)| (*k, log2_big(c)))
        .collect();
    let ratio = |(k, l): (i64, f64)| l / k as f64;
    let gaps = |w: &[(i64, f64)]| -> Vec<f64> { w.windows(2).map(|p| p[1].0 as f64 / p[0].0 as f64).collect() };

    let limit_estimate = {
        let kmax = nz.last().map(|p| p.0).unwrap_or(0);
        let tail: Vec<(f64, f64)> = nz
            .iter()
            .filter(|p| 2 * p.0 >= kmax)
            .map(|p| (p.0 as f64, p.1))
            .collect();
        (tail.len() >= 3).then(|| least_squares(&tail).0)
    };
    let mk = |verdict, w: &[(i64, f64)]| ConditionCReport {
        verdict,
        witness: w.iter().map(|p| p.0).collect(),
        ratios: w.iter().map(|&p| ratio(p)).collect(),
        limit_estimate,
        finite_horizon: true,
    };

    if nz.len() >= 3 && nz.last().unwrap().0 >= CONDITION_C_DEEP_BAND {
        let last3 = &nz[nz.len() - 3..];
        if gaps(last3).iter().all(|&g| g >= CONDITION_C_GAP) {
            return mk(ConditionCVerdict::Violated, last3);
        }
    }
    if nz.len() < CONDITION_C_MIN_BANDS {
        return mk(ConditionCVerdict::Inconclusive, &nz);
    }
    let w = &nz[nz.len() - CONDITION_C_WINDOW..];
    if gaps(w).iter().any(|&g| g > CONDITION_C_GAP) {
        return mk(ConditionCVerdict::Violated, w);
    }
    let rs: Vec<f64> = w.iter().map(|&p| ratio(p)).collect();
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    if rs.iter().all(|r| (r - mean).abs() < CONDITION_C_TOLERANCE) {
        mk(ConditionCVerdict::Consistent, w)
    } else {
        mk(ConditionCVerdict::Inconclusive, w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureClass {
    MeasureZero,
    FullMeasure,
}

/// Lebesgue measure of E by Borel–Cantelli: full iff Σ l_n^d diverges.
/// Power laws are decided exactly (Σ n^{-d/α} diverges iff α ≥ d); other
/// variants compare the finite-horizon critical exponent with d.
pub fn borel_cantelli_classify(spec: &LengthSequenceSpec) -> MeasureClass {
    let d = spec.d as f64;
    let full = match &spec.variant {
        LengthVariant::PowerLaw { alpha, .. } => *alpha >= d,
        _ => critical_sum_exponent(spec).value >= d,
    };
    if full {
        MeasureClass::FullMeasure
    } else {
        MeasureClass::MeasureZero
    }
}
