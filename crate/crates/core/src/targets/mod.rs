//! Deterministic target sets F: full torus, a point, self-similar Cantor
//! sets and the scheduled nested-interval constructions (d = 1).
//!
//! Construction intervals are exact rationals: every family stores integer
//! numerators over `base^denom_exp`.

pub mod gset;
pub mod schedule;

pub use schedule::{build_schedule_prop13, build_schedule_prop14, default_betas, CantorSchedule, ScheduleKind};

use crate::covering::GridSet;
use crate::error::{invalid, Error, Result};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Maximum number of intervals in a materialized family.
pub const FAMILY_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TargetSetSpec {
    FullTorus,
    /// A point of the circle, kept to 53 fractional bits.
    SinglePoint { x: f64 },
    /// `copies` pieces of ratio `ratio_num/ratio_den`, evenly spaced, first
    /// at 0 and last ending at 1.
    SelfSimilarCantor { ratio_num: u64, ratio_den: u64, copies: u64 },
    Scheduled { schedule: CantorSchedule },
}

impl TargetSetSpec {
    pub fn middle_third() -> Self {
        TargetSetSpec::SelfSimilarCantor { ratio_num: 1, ratio_den: 3, copies: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSetSpec::FullTorus => Ok(()),
            TargetSetSpec::SinglePoint { x } => {
                if (0.0..1.0).contains(x) {
                    Ok(())
                } else {
                    invalid("point must lie in [0,1)")
                }
            }
            &TargetSetSpec::SelfSimilarCantor { ratio_num: p, ratio_den: q, copies: c } => {
                if p == 0 || q < 2 || p >= q || c < 2 {
                    return invalid("need 0 < ratio < 1 and copies ≥ 2");
                }
                if p.checked_mul(c).is_none_or(|pc| pc > q) {
                    return invalid("ratio·copies must be ≤ 1");
                }
                if (q - p) % (c - 1) != 0 {
                    return invalid("piece spacing (1 − ratio)/(copies − 1) must be a multiple of 1/ratio_den");
                }
                Ok(())
            }
            TargetSetSpec::Scheduled { schedule } => {
                if schedule.levels.is_empty() {
                    invalid("empty schedule")
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Level-k construction intervals [offset, offset + length), both as
/// numerators over base^denom_exp. A zero length marks a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub level: usize,
    pub base: u64,
    pub denom_exp: u32,
    pub length_num: u128,
    pub offsets: Vec<u128>,
}

impl IntervalFamily {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn denom(&self) -> BigUint {
        BigUint::from(self.base).pow(self.denom_exp)
    }

    pub fn length(&self) -> f64 {
        self.length_num as f64 / self.denom().to_f64().unwrap()
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i] as f64 / self.denom().to_f64().unwrap()
    }

    /// Exact export: (offset numerator, denominator exponent) per interval.
    pub fn export_pairs(&self) -> Vec<(u128, u32)> {
        self.offsets.iter().map(|&o| (o, self.denom_exp)).collect()
    }

    /// Text form: a header line then one numerator per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "family level={} base={} exp={} length={}\n",
            self.level, self.base, self.denom_exp, self.length_num
        );
        for o in &self.offsets {
            s.push_str(&o.to_string());
            s.push('\n');
        }
        s
    }
}

fn pow_u128(base: u64, exp: u32) -> Result<u128> {
    (base as u128)
        .checked_pow(exp)
        .ok_or_else(|| Error::Budget(format!("denominator {base}^{exp} exceeds 128 bits")))
}

fn check_budget(count: u128) -> Result<()> {
    if count > FAMILY_BUDGET as u128 {
        Err(Error::Budget(format!("{count} intervals exceed the budget of {FAMILY_BUDGET}")))
    } else {
        Ok(())
    }
}

/// Families for levels 0..=depth (level 0 is [0,1)).
pub fn build_levels(spec: &TargetSetSpec, depth: usize) -> Result<Vec<IntervalFamily>> {
    spec.validate()?;
    let root = IntervalFamily { level: 0, base: 2, denom_exp: 0, length_num: 1, offsets: vec![0] };
    let mut out = vec![root];
    match spec {
        TargetSetSpec::FullTorus => {
            for k in 1..=depth {
                out.push(IntervalFamily { level: k, ..out[0].clone() });
            }
        }
        TargetSetSpec::SinglePoint { x } => {
            let num = (x * 2f64.powi(53)).floor() as u128;
            for k in 1..=depth {
                out.push(IntervalFamily { level: k, base: 2, denom_exp: 53, length_num: 0, offsets: vec![num] });
            }
        }
        &TargetSetSpec::SelfSimilarCantor { ratio_num: p, ratio_den: q, copies: c } => {
            let stride = (q - p) / (c - 1);
            out[0].base = q;
            for k in 1..=depth {
                check_budget((c as u128).saturating_pow(k as u32))?;
                let prev = &out[k - 1];
                let e = k as u32;
                pow_u128(q, e)?;
                // prev numerators are over q^{k-1}
                let plen = prev.length_num;
                let mut offs = Vec::with_capacity(prev.len() * c as usize);
                for &o in &prev.offsets {
                    for i in 0..c as u128 {
                        offs.push(o * q as u128 + i * stride as u128 * plen);
                    }
                }
                out.push(IntervalFamily { level: k, base: q, denom_exp: e, length_num: plen * p as u128, offsets: offs });
            }
        }
        TargetSetSpec::Scheduled { schedule } => build_scheduled(schedule, depth, &mut out)?,
    }
    Ok(out)
}

fn build_scheduled(s: &CantorSchedule, depth: usize, out: &mut Vec<IntervalFamily>) -> Result<()> {
    if depth > s.depth() {
        return Err(Error::OutOfHorizon(format!("schedule has {} levels, asked for {depth}", s.depth())));
    }
    for k in 1..=depth {
        let l = &s.levels[k - 1];
        let d_prev = s.delta_exp(k - 1);
        // 2^bits children per parent, spaced 2^{-bits}δ_{k-1}
        let bits = match s.kind {
            // 2^{m_k} pieces, leftmost δ_k in each
            ScheduleKind::Prop13 => l.m,
            // 2^{⌊n_k t⌋} slots
            ScheduleKind::Prop14 => schedule::prop14_slots(s, k),
        };
        let prev = &out[k - 1];
        check_budget((prev.len() as u128).saturating_mul(1u128.checked_shl(bits as u32).unwrap_or(u128::MAX)))?;
        let e = l.delta_exp;
        if e > 127 {
            return Err(Error::Budget(format!("level {k} needs 2^-{e} resolution, beyond 128-bit numerators")));
        }
        let lift = e - prev.denom_exp as u64;
        let step_exp = d_prev + bits; // slot width 2^{-step_exp}
        let mut offs = Vec::with_capacity(prev.len() << bits);
        for &o in &prev.offsets {
            let base = o << lift;
            for j in 0..(1u128 << bits) {
                offs.push(base + (j << (e - step_exp)));
            }
        }
        out.push(IntervalFamily { level: k, base: 2, denom_exp: e as u32, length_num: 1, offsets: offs });
    }
    Ok(())
}

/// floor(num·2^n / den) and ceil of the same.
fn scaled_floor_ceil(num: u128, n: u32, den: &BigUint) -> (u64, u64) {
    let x = BigUint::from(num) << n;
    let (q, r) = x.div_rem(den);
    let f = q.to_u64().unwrap();
    (f, if r.is_zero() { f } else { f + 1 })
}

/// Level-n cubes meeting some interval of the family (intervals half-open,
/// points as single cubes).
pub fn to_gridset(family: &IntervalFamily, n: u32) -> Result<GridSet> {
    let mut g = GridSet::empty(n, 1)?;
    let den = family.denom();
    let cells = 1u64 << n;
    for &o in &family.offsets {
        let (first, _) = scaled_floor_ceil(o, n, &den);
        if family.length_num == 0 {
            g.insert_linear(first.min(cells - 1));
            continue;
        }
        let (_, end) = scaled_floor_ceil(o + family.length_num, n, &den);
        for i in first..end.min(cells) {
            g.insert_linear(i);
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionPair {
    pub hausdorff: f64,
    pub packing: f64,
    /// False for finite-horizon bounds read off a schedule.
    pub rigorous: bool,
    pub note: String,
}

pub fn analytic_dimensions(spec: &TargetSetSpec) -> Result<DimensionPair> {
    spec.validate()?;
    let exact = |v: f64, note: &str| DimensionPair { hausdorff: v, packing: v, rigorous: true, note: note.into() };
    Ok(match spec {
        TargetSetSpec::FullTorus => exact(1.0, "full circle"),
        TargetSetSpec::SinglePoint { .. } => exact(0.0, "point"),
        &TargetSetSpec::SelfSimilarCantor { ratio_num: p, ratio_den: q, copies: c } => {
            exact((c as f64).ln() / (q as f64 / p as f64).ln(), "similarity dimension")
        }
        TargetSetSpec::Scheduled { schedule } => {
            let ratios: Vec<f64> =
                schedule.levels.iter().map(|l| l.log2_n as f64 / l.delta_exp as f64).collect();
            let tail = &ratios[ratios.len() / 2..];
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            match schedule.kind {
                ScheduleKind::Prop14 => DimensionPair {
                    hausdorff: schedule.t,
                    packing: 1.0,
                    rigorous: true,
                    note: "limits of the schedule".into(),
                },
                ScheduleKind::Prop13 => DimensionPair {
                    hausdorff: lo,
                    packing: 1.0,
                    rigorous: false,
                    note: "Hausdorff value is the finite-horizon min of log N_k/-log δ_k".into(),
                },
            }
        }
    })
}

/// Natural-measure weight of a construction interval given by its exact
/// offset and length numerators over `base^denom_exp`.
pub fn natural_measure_weight(
    families: &[IntervalFamily],
    base: u64,
    denom_exp: u32,
    offset_num: u128,
    length_num: u128,
) -> Result<f64> {
    let qden = BigUint::from(base).pow(denom_exp);
    for f in families {
        let fden = f.denom();
        // length_num/qden == f.length_num/fden
        if BigUint::from(length_num) * &fden != BigUint::from(f.length_num) * &qden {
            continue;
        }
        let hit = f
            .offsets
            .binary_search_by(|&o| (BigUint::from(o) * &qden).cmp(&(BigUint::from(offset_num) * &fden)));
        if hit.is_ok() {
            return Ok(1.0 / f.len() as f64);
        }
    }
    Err(Error::NotAligned(format!("{offset_num}/{base}^{denom_exp} is not a construction interval")))
}
