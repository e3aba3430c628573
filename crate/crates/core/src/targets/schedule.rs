//! Level schedules for the two nested-interval constructions.
//!
//! All scales are powers of two kept as integer exponents: δ_k = 2^{-D_k}
//! with D_k = n_1 + … + n_k, and η_k = 2^{-H_k} with H_k = m_1 + … + m_k.
//! Cardinalities are kept as log2 values (they reach 2^(10^6)).

use crate::error::{Error, Result};
use crate::lengths::{Block, LengthSequenceSpec};
use crate::numeric::pow2_floor;
#[cfg(test)]
use crate::numeric::log2_big;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Hard cap on any single m_k or n_k.
pub const PROP13_CAP: u64 = 1 << 20;
pub const PROP14_CAP: u64 = 1 << 28;
/// Ratio tolerance for log M_k/−log η_k and log L_k/−log δ_k.
pub const PROP14_RATIO_TOL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Prop13,
    Prop14,
}

/// One level of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleLevel {
    pub m: u64,
    pub n: u64,
    /// D_k: δ_k = 2^{-D_k}
    pub delta_exp: u64,
    /// log2 N_k (an integer for both constructions)
    pub log2_n: u64,
    /// prop13: s_k; prop14: unused (0)
    pub s: f64,
    pub eps: f64,
    /// prop14 only
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GLevelParams>,
}

/// Parameters of the random Cantor set G at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GLevelParams {
    /// H_k: η_k = 2^{-H_k}
    pub eta_exp: u64,
    pub beta: f64,
    /// ⌊n_k t⌋: level-k slots per parent interval are 2^{slot_bits}
    pub slot_bits: u64,
    /// h_k = η_k^{β_k} rounded down to 53 significant bits: h = h_mant · 2^{-h_exp}
    pub h_mant: u64,
    pub h_exp: u64,
    /// x_k with e_k = 2^{x_k} − 2 intervals kept per covering interval J of
    /// level k−1 (0 at level 1)
    pub keep_exp: u64,
    pub log2_l: f64,
    pub log2_m: f64,
    /// log2 of the number of balls B_k in block k
    pub log2_block: f64,
    /// log2 of the covering-failure bound 3h^{-1}(1 − h/2)^{B_k}
    pub log2_cover_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorSchedule {
    pub kind: ScheduleKind,
    pub levels: Vec<ScheduleLevel>,
    /// prop14 only
    pub t: f64,
    pub alpha: f64,
}

impl CantorSchedule {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn delta_exp(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.levels[k - 1].delta_exp
        }
    }

    pub fn log2_n(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.levels[k - 1].log2_n
        }
    }

    /// Whether the random set G can be built (prop14 with t > 0).
    pub fn g_feasible(&self) -> bool {
        self.kind == ScheduleKind::Prop14 && self.levels.iter().all(|l| l.g.is_some())
    }

    /// First index of each block of the matching covering sequence.
    ///
    /// prop13: block k is ⌊2^{n_{k-1}s_{k-1}}⌋ ≤ n < ⌊2^{n_k s_k}⌋ with length δ_k;
    /// prop14: block k is ⌊2^{m_{k-1}α}⌋ ≤ n < ⌊2^{m_k α}⌋ with length η_k.
    pub fn block_bounds(&self) -> Vec<BigUint> {
        let mut out = vec![BigUint::from(1u8)];
        for l in &self.levels {
            let e = match self.kind {
                ScheduleKind::Prop13 => l.n as f64 * l.s,
                ScheduleKind::Prop14 => l.m as f64 * self.alpha,
            };
            out.push(pow2_floor(e).max(BigUint::from(1u8)));
        }
        out
    }

    /// Number of balls in block k (1-based).
    pub fn block_count(&self, k: usize) -> BigUint {
        let b = self.block_bounds();
        if b[k] > b[k - 1] {
            &b[k] - &b[k - 1]
        } else {
            BigUint::default()
        }
    }

    /// The block-constant length sequence driving the covering.
    pub fn length_spec(&self) -> Result<LengthSequenceSpec> {
        let bounds = self.block_bounds();
        let mut blocks = Vec::new();
        let mut eta_exp = 0;
        for (k, l) in self.levels.iter().enumerate() {
            eta_exp += l.m;
            if bounds[k + 1] <= bounds[k] {
                continue;
            }
            let lv = match self.kind {
                ScheduleKind::Prop13 => -(l.delta_exp as f64),
                ScheduleKind::Prop14 => -(eta_exp as f64),
            };
            blocks.push(Block { log2_value: lv, first_index: bounds[k].clone() });
        }
        LengthSequenceSpec::block_constant(blocks, bounds.last().unwrap().clone(), 1)
    }
}

/// log2 of the prop13 miss bound 3 N_k 2^{n_k s_k} δ_k.
pub fn prop13_log2_bound(log2_n: u64, n: u64, s: f64, delta_exp: u64) -> f64 {
    3f64.log2() + log2_n as f64 + n as f64 * s - delta_exp as f64
}

/// Greedy schedule for the counterexample with packing dimension 1.
pub fn build_schedule_prop13(s: &[f64], eps: &[f64], depth: usize) -> Result<CantorSchedule> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be ≥ 1".into()));
    }
    if s.len() < depth || eps.len() < depth {
        return Err(Error::InvalidArgument("s_k and eps_k need one entry per level".into()));
    }
    for k in 0..depth {
        if !(s[k] > 0.0 && s[k] < 1.0) || (k > 0 && s[k] <= s[k - 1]) {
            return Err(Error::InvalidArgument("s_k must increase inside (0,1)".into()));
        }
        if !(eps[k] >= 0.0) {
            return Err(Error::InvalidArgument("eps_k must be nonnegative".into()));
        }
    }
    let mut levels: Vec<ScheduleLevel> = Vec::new();
    let (mut d_prev, mut log2_n_prev, mut m_prev, mut n_prev) = (0u64, 0u64, 0u64, 0u64);
    for k in 0..depth {
        let sk = s[k];
        // 2^{m} N_{k-1} (2^{-m} δ_{k-1})^{s_k} ≥ 1
        let cond1 = |m: u64| m as f64 + log2_n_prev as f64 - sk * (m as f64 + d_prev as f64) >= 0.0;
        let m = (m_prev + 1..=PROP13_CAP)
            .find(|&m| cond1(m))
            .ok_or_else(|| Error::Infeasible(format!("level {}: no m_k ≤ {PROP13_CAP}", k + 1)))?;
        let log2_n = log2_n_prev + m;
        let target = if eps[k] > 0.0 { eps[k].log2() } else { f64::NEG_INFINITY };
        let n = (m.max(n_prev) + 1..=PROP13_CAP)
            .find(|&n| prop13_log2_bound(log2_n, n, sk, d_prev + n) <= target)
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "level {}: 3N_k 2^(n_k s_k) δ_k ≤ eps_k = {} has no n_k ≤ {PROP13_CAP}",
                    k + 1,
                    eps[k]
                ))
            })?;
        let delta_exp = d_prev + n;
        levels.push(ScheduleLevel { m, n, delta_exp, log2_n, s: sk, eps: eps[k], g: None });
        d_prev = delta_exp;
        log2_n_prev = log2_n;
        m_prev = m;
        n_prev = n;
    }
    Ok(CantorSchedule { kind: ScheduleKind::Prop13, levels, t: 0.0, alpha: 0.0 })
}

/// Default β_k = α(1 − 0.1/k), increasing to α.
pub fn default_betas(alpha: f64, depth: usize) -> Vec<f64> {
    (1..=depth).map(|k| alpha * (1.0 - 0.1 / k as f64)).collect()
}

/// h = 2^{-βH} rounded down to 53 significant bits, as (mantissa, exponent).
pub fn h_repr(beta: f64, eta_exp: u64) -> (u64, u64) {
    let x = beta * eta_exp as f64;
    let he = x.ceil() as u64 + 52;
    let m = ((he as f64 - x).exp2()).floor() as u64;
    // 2^{he − x} ∈ [2^52, 2^53]
    (m.min((1u64 << 53) - 1), he)
}

/// log2 ⌊2^{e}/(3 h_mant)⌋ for e ≥ 0 (−∞ when the floor is 0).
fn log2_floor_ratio(e: u64, h_mant: u64) -> f64 {
    let den = 3 * h_mant as u128;
    if e < 120 {
        let v = (1u128 << e) / den;
        if v == 0 {
            f64::NEG_INFINITY
        } else {
            (v as f64).log2()
        }
    } else {
        e as f64 - (den as f64).log2()
    }
}

/// log2(2^x − 2) for x ≥ 2.
fn log2_keep(x: u64) -> f64 {
    if x >= 60 {
        x as f64
    } else {
        (((1u64 << x) - 2) as f64).log2()
    }
}

/// log2 of 3h^{-1}(1 − h/2)^{B}, h = h_mant·2^{-h_exp}, B = 2^{log2_b}.
pub fn log2_cover_bound(h_mant: u64, h_exp: u64, log2_b: f64) -> f64 {
    let log2_h = (h_mant as f64).log2() - h_exp as f64;
    // B·ln(1 − h/2) ≈ −B h/2 (1 + h/4 + …)
    let h = log2_h.exp2();
    let log2_lam = if log2_h > -30.0 {
        log2_b + (-(1.0 - h / 2.0).ln()).log2()
    } else {
        log2_b + log2_h - 1.0
    };
    if log2_lam > 1000.0 {
        return f64::NEG_INFINITY;
    }
    3f64.log2() - log2_h - log2_lam.exp2() * std::f64::consts::LOG2_E
}

/// log2 B_k for block ⌊2^{m_{k-1}α}⌋ ≤ n < ⌊2^{m_k α}⌋.
fn log2_block(alpha: f64, m_prev: u64, m: u64) -> f64 {
    let hi = alpha * m as f64;
    let lo = alpha * m_prev as f64;
    if hi < 60.0 {
        let b = hi.exp2().floor() - lo.exp2().floor();
        if b <= 0.0 {
            f64::NEG_INFINITY
        } else {
            b.log2()
        }
    } else {
        // floors are invisible at this size
        hi + (-(lo - hi).exp2()).ln_1p() * std::f64::consts::LOG2_E
    }
}

/// Greedy schedule for the intersection example: F with dim_H F = t and the
/// random Cantor set G ⊂ E ∩ F with ratios approaching (α, t).
///
/// Per level: n_k minimal (> m_{k-1}) such that at least two level-k
/// intervals fit in each covering interval of level k−1 and, on tail levels,
/// |log L_k/−log δ_k − t| < tol; then m_k minimal (> n_k) with
/// η_k^{β_k} < δ_k/12, covering bound ≤ eps_k and, on tail levels,
/// |log M_k/−log η_k − α| < tol. Tail levels are k > K/2 and k = K.
pub fn build_schedule_prop14(t: f64, alpha: f64, betas: &[f64], eps: &[f64], depth: usize) -> Result<CantorSchedule> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&t) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("need 0 ≤ t ≤ 1 and 0 < alpha ≤ 1".into()));
    }
    if betas.len() < depth || eps.len() < depth {
        return Err(Error::InvalidArgument("beta_k and eps_k need one entry per level".into()));
    }
    for k in 0..depth {
        if !(betas[k] > 0.0 && betas[k] < alpha) || (k > 0 && betas[k] < betas[k - 1]) {
            return Err(Error::InvalidArgument("beta_k must increase inside (0, alpha)".into()));
        }
        if !(eps[k] > 0.0) {
            return Err(Error::Infeasible(format!("eps_{} must be positive", k + 1)));
        }
    }
    let tol = PROP14_RATIO_TOL;
    let tail = |k: usize| 2 * k > depth || k == depth;
    let with_g = t > 0.0;
    let mut levels = Vec::new();
    let (mut d_prev, mut h_prev, mut m_prev, mut log2_n_prev) = (0u64, 0u64, 0u64, 0u64);
    let mut log2_m_prev = 0.0f64;
    for k in 1..=depth {
        let beta = betas[k - 1];
        // --- n_k
        let min_n = m_prev + 1;
        let start_n = if with_g && k >= 2 {
            // need ⌊n t⌋ ≥ H_{k-1} − D_{k-1} + 2
            let need = (h_prev + 2).saturating_sub(d_prev) as f64;
            ((need / t).floor() as u64).saturating_sub(1).max(min_n)
        } else {
            min_n
        };
        let mut found = None;
        for n in start_n..=PROP14_CAP {
            let f = (n as f64 * t).floor() as u64;
            let dk = d_prev + n;
            if !with_g {
                found = Some((n, f, 0u64, 0.0));
                break;
            }
            let (keep, log2_l) = if k == 1 {
                (0, f as f64)
            } else {
                let x = (d_prev + f).saturating_sub(h_prev);
                if d_prev + f < h_prev + 2 {
                    continue;
                }
                (x, log2_m_prev + log2_keep(x))
            };
            if tail(k) && !((log2_l / dk as f64 - t).abs() < tol) {
                continue;
            }
            found = Some((n, f, keep, log2_l));
            break;
        }
        let (n, f, keep_exp, log2_l) =
            found.ok_or_else(|| Error::Infeasible(format!("level {k}: no n_k ≤ {PROP14_CAP}")))?;
        let dk = d_prev + n;
        let log2_n = log2_n_prev + f;
        // --- m_k
        let target = eps[k - 1].log2();
        // below this the expected cover count B·h is < 1 and the bound exceeds 1
        let start_m = ((beta * h_prev as f64) / (alpha - beta)).floor() as u64;
        let start_m = start_m.max(n + 1);
        let mut found_m = None;
        for m in start_m..=PROP14_CAP {
            let hk = h_prev + m;
            if !(beta * hk as f64 > dk as f64 + 12f64.log2()) {
                continue;
            }
            let (hm, he) = h_repr(beta, hk);
            if he < dk {
                continue;
            }
            let lb = log2_block(alpha, m_prev, m);
            let bound = log2_cover_bound(hm, he, lb);
            if !(bound <= target) {
                continue;
            }
            let log2_c = log2_floor_ratio(he - dk, hm);
            if log2_c == f64::NEG_INFINITY {
                continue;
            }
            let log2_m = if with_g { log2_l + log2_c } else { 0.0 };
            if with_g && tail(k) && !((log2_m / hk as f64 - alpha).abs() < tol) {
                continue;
            }
            found_m = Some((m, hm, he, lb, bound, log2_m));
            break;
        }
        let (m, hm, he, lb, bound, log2_m) =
            found_m.ok_or_else(|| Error::Infeasible(format!("level {k}: no m_k ≤ {PROP14_CAP}")))?;
        let hk = h_prev + m;
        levels.push(ScheduleLevel {
            m,
            n,
            delta_exp: dk,
            log2_n,
            s: 0.0,
            eps: eps[k - 1],
            g: with_g.then_some(GLevelParams {
                eta_exp: hk,
                beta,
                slot_bits: f,
                h_mant: hm,
                h_exp: he,
                keep_exp,
                log2_l,
                log2_m,
                log2_block: lb,
                log2_cover_bound: bound,
            }),
        });
        d_prev = dk;
        h_prev = hk;
        m_prev = m;
        log2_n_prev = log2_n;
        log2_m_prev = log2_m;
    }
    Ok(CantorSchedule { kind: ScheduleKind::Prop14, levels, t, alpha })
}

/// log2 ⌊2^{n t}⌋-style slot count of level k for F (prop14): 2^{⌊n_k t⌋}.
pub fn prop14_slots(sched: &CantorSchedule, k: usize) -> u64 {
    (sched.levels[k - 1].n as f64 * sched.t).floor() as u64
}
