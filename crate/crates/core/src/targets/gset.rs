//! The random Cantor set G ⊂ E ∩ F of the intersection example, built
//! lazily.
//!
//! Level k has intervals I of length δ_k (L_k of them). Inside each I sit
//! c_k = ⌊δ_k/(3h_k)⌋ windows [a + 3h_k i, a + 3h_k i + 2h_k]; the covering
//! interval J (length η_k) kept in window i is the ball of block k whose
//! center is nearest to the window midpoint. Under the Poisson model of the
//! block-k centers (intensity B_k) that distance is Exp(2B_k), so J is
//! sampled on demand from a hash of its path. A window whose nearest center
//! is farther than h_k/2 breaks the full-cover event the construction is
//! conditioned on; this is reported as `Error::Conditioning` and the caller
//! retries with a fresh attempt. Inside J the level-(k+1) intervals are the
//! 2^{x_{k+1}} − 2 leftmost slots of width 2^{-⌊n_{k+1}t⌋}δ_k lying in J.
//!
//! Positions are integers in units of 2^{-P}, P = H_K + 128.

use super::schedule::{CantorSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::numeric::{log2_add, log2_big};
use crate::rng::{hash_words, to_open_unit_f64, CounterRng};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

const G_STREAM: u64 = 0x47;
const SAMPLER_STREAM: u64 = 0x53;

struct Level {
    delta: BigUint,
    eta: BigUint,
    half_eta: BigUint,
    h: BigUint,
    two_h: BigUint,
    three_h: BigUint,
    /// windows per I
    windows: BigUint,
    /// slot width of level-k intervals inside their parent
    slot: BigUint,
    /// level-k intervals per parent (2^{f_1} at level 1, e_k below)
    per_parent: BigUint,
    eta_exp: u64,
    log2_l: f64,
    log2_m: f64,
    log2_rho: f64,
    log2_h: f64,
    /// lowest bit position of J centers that is randomized
    low_bit: u64,
}

/// A level-k construction interval [left, left + δ_k].
#[derive(Clone, Debug)]
pub struct IPiece {
    pub level: usize,
    pub left: BigUint,
    id: u64,
}

/// A covering interval [center − η_k/2, center + η_k/2] inside `parent`.
#[derive(Clone, Debug)]
pub struct JPiece {
    pub level: usize,
    pub center: BigUint,
    parent_left: BigUint,
    id: u64,
}

/// Pieces at `first + j` (0 ≤ j < count) occupying
/// [base + (first+j)·stride, base + (first+j)·stride + len].
struct Row<'a> {
    base: &'a BigUint,
    stride: &'a BigUint,
    len: &'a BigUint,
    first: BigUint,
    count: BigUint,
}

impl Row<'_> {
    fn start(&self, j: &BigUint) -> BigUint {
        self.base + j * self.stride
    }

    /// (number of pieces inside [lo, hi], indices of pieces meeting it partially)
    fn classify(&self, lo: &BigUint, hi: &BigUint) -> (BigUint, Vec<BigUint>) {
        let last = &self.first + &self.count; // exclusive
        let mut partial = Vec::new();
        // full: start ≥ lo and start + len ≤ hi
        let jmin = if lo <= self.base {
            BigUint::zero()
        } else {
            let (q, r) = (lo - self.base).div_rem(self.stride);
            if r.is_zero() {
                q
            } else {
                q + 1u8
            }
        };
        let jmin = jmin.max(self.first.clone());
        let full = if *hi >= self.base + self.len {
            let jmax1 = (hi - self.base - self.len) / self.stride + 1u8; // exclusive
            let jmax1 = jmax1.min(last.clone());
            if jmax1 > jmin {
                jmax1 - &jmin
            } else {
                BigUint::zero()
            }
        } else {
            BigUint::zero()
        };
        for y in [lo, hi] {
            if *y < *self.base {
                continue;
            }
            let j = (y - self.base) / self.stride;
            if j < self.first || j >= last {
                continue;
            }
            let s = self.start(&j);
            let e = &s + self.len;
            if *y > e {
                continue;
            }
            let inside = s >= *lo && e <= *hi;
            if !inside && !partial.contains(&j) {
                partial.push(j);
            }
        }
        (full, partial)
    }
}

fn random_bits(rng: &CounterRng, stream: u64, nbits: u64) -> BigUint {
    if nbits == 0 {
        return BigUint::zero();
    }
    let words = nbits.div_ceil(64);
    let mut digits = Vec::with_capacity(2 * words as usize);
    for i in 0..words {
        let w = rng.u64_at(stream, i / 2, (i % 2) as usize);
        digits.push(w as u32);
        digits.push((w >> 32) as u32);
    }
    BigUint::new(digits) >> (words * 64 - nbits)
}

fn random_below(rng: &CounterRng, stream: u64, n: &BigUint) -> BigUint {
    random_bits(rng, stream, n.bits() + 64) % n
}

pub struct GConstruction {
    levels: Vec<Level>,
    prec: u64,
    key: u64,
    pub attempt: u32,
}

impl GConstruction {
    /// G for a prop14 schedule with t > 0, from `seed` and retry `attempt`.
    pub fn new(sched: &CantorSchedule, seed: u64, attempt: u32) -> Result<Self> {
        if sched.kind != ScheduleKind::Prop14 || !sched.g_feasible() {
            return Err(Error::Infeasible("G needs a prop14 schedule with t > 0".into()));
        }
        let depth = sched.depth();
        let gl = |k: usize| sched.levels[k - 1].g.as_ref().unwrap();
        let prec = gl(depth).eta_exp + 128;
        let one = BigUint::one();
        let mut levels = Vec::with_capacity(depth);
        for k in 1..=depth {
            let l = &sched.levels[k - 1];
            let g = gl(k);
            let h = BigUint::from(g.h_mant) << (prec - g.h_exp);
            let windows = (BigUint::from(1u8) << (g.h_exp - l.delta_exp)) / (BigUint::from(g.h_mant) * 3u8);
            let (slot, per_parent) = if k == 1 {
                (&one << (prec - g.slot_bits), &one << g.slot_bits)
            } else {
                (&one << (prec - sched.delta_exp(k - 1) - g.slot_bits), (&one << g.keep_exp) - 2u8)
            };
            let low_bit = if k < depth {
                let next = sched.delta_exp(k) + gl(k + 1).slot_bits + 64;
                prec.saturating_sub(next)
            } else {
                prec - (g.eta_exp + 64)
            };
            levels.push(Level {
                delta: &one << (prec - l.delta_exp),
                eta: &one << (prec - g.eta_exp),
                half_eta: &one << (prec - g.eta_exp - 1),
                two_h: &h * 2u8,
                three_h: &h * 3u8,
                h,
                windows,
                slot,
                per_parent,
                eta_exp: g.eta_exp,
                log2_l: g.log2_l,
                log2_m: g.log2_m,
                log2_rho: g.log2_block,
                log2_h: (g.h_mant as f64).log2() - g.h_exp as f64,
                low_bit,
            });
        }
        let key = hash_words(seed, &[G_STREAM, attempt as u64]);
        Ok(GConstruction { levels, prec, key, attempt })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn precision_bits(&self) -> u64 {
        self.prec
    }

    fn lv(&self, k: usize) -> &Level {
        &self.levels[k - 1]
    }

    fn top_row(&self) -> Row<'_> {
        static ZERO: std::sync::OnceLock<BigUint> = std::sync::OnceLock::new();
        let l = self.lv(1);
        Row {
            base: ZERO.get_or_init(BigUint::zero),
            stride: &l.slot,
            len: &l.delta,
            first: BigUint::zero(),
            count: l.per_parent.clone(),
        }
    }

    pub fn top_piece(&self, j: &BigUint) -> IPiece {
        IPiece { level: 1, left: j * &self.lv(1).slot, id: hash_words(self.key, &digits_with(1, j)) }
    }

    fn window_row<'a>(&'a self, i: &'a IPiece) -> Row<'a> {
        let l = self.lv(i.level);
        Row { base: &i.left, stride: &l.three_h, len: &l.two_h, first: BigUint::zero(), count: l.windows.clone() }
    }

    /// First slot index (relative to the parent interval) inside J.
    fn first_child_slot(&self, j: &JPiece) -> BigUint {
        let l = self.lv(j.level);
        let s = &self.lv(j.level + 1).slot;
        let lo = &j.center - &l.half_eta - &j.parent_left;
        let (q, r) = lo.div_rem(s);
        if r.is_zero() {
            q
        } else {
            q + 1u8
        }
    }

    fn child_row<'a>(&'a self, j: &'a JPiece) -> Row<'a> {
        let n = self.lv(j.level + 1);
        Row { base: &j.parent_left, stride: &n.slot, len: &n.delta, first: self.first_child_slot(j), count: n.per_parent.clone() }
    }

    pub fn child(&self, j: &JPiece, slot: &BigUint) -> IPiece {
        let n = self.lv(j.level + 1);
        IPiece {
            level: j.level + 1,
            left: &j.parent_left + slot * &n.slot,
            id: hash_words(j.id, &digits_with(j.level as u64 + 1, slot)),
        }
    }

    /// The covering interval kept in window `w` of `i`.
    pub fn window(&self, i: &IPiece, w: &BigUint) -> Result<JPiece> {
        let l = self.lv(i.level);
        let id = hash_words(i.id, &digits_with(0, w));
        let rng = CounterRng::new(id);
        let v = -to_open_unit_f64(rng.u64_at(0, 0, 0)).ln();
        let right = rng.u64_at(0, 0, 1) & 1 == 1;
        // nearest center at distance v/(2ρ); needs ≤ h/2, i.e. v ≤ ρh
        let log2_rho_h = l.log2_rho + l.log2_h;
        if log2_rho_h < 8.0 && v > log2_rho_h.exp2() {
            return Err(Error::Conditioning(i.level as u32));
        }
        // v·2^{E}, E = P − 1 − log2 ρ, as a 53-bit mantissa plus random low bits
        let e = self.prec as f64 - 1.0 - l.log2_rho;
        let fe = e.floor();
        let mant = (v * (e - fe).exp2() * 2f64.powi(52)).floor() as u64;
        let shift = fe as i64 - 52;
        let dist = if shift >= 0 {
            let s = shift as u64;
            let fill = s.saturating_sub(l.low_bit);
            (BigUint::from(mant) << s) + (random_bits(&rng, 1, fill) << (s - fill))
        } else {
            BigUint::from(mant >> (-shift) as u64)
        };
        let mid = &i.left + &l.h + &l.three_h * w;
        let center = if right { mid + dist } else { mid - dist };
        Ok(JPiece { level: i.level, center, parent_left: i.left.clone(), id })
    }

    fn j_bounds(&self, j: &JPiece) -> (BigUint, BigUint) {
        let l = self.lv(j.level);
        (&j.center - &l.half_eta, &j.center + &l.half_eta)
    }

    /// log2 μ([lo, hi]) for 0 ≤ lo ≤ hi < 2^P.
    pub fn log2_interval_mass(&self, lo: &BigUint, hi: &BigUint) -> Result<f64> {
        let row = self.top_row();
        let (full, partial) = row.classify(lo, hi);
        let mut acc = count_mass(&full, self.lv(1).log2_l);
        for j in partial {
            acc = log2_add(acc, self.mass_i(&self.top_piece(&j), lo, hi)?);
        }
        Ok(acc)
    }

    fn mass_i(&self, i: &IPiece, lo: &BigUint, hi: &BigUint) -> Result<f64> {
        let l = self.lv(i.level);
        let (full, partial) = self.window_row(i).classify(lo, hi);
        let mut acc = count_mass(&full, l.log2_m);
        for w in partial {
            let j = self.window(i, &w)?;
            acc = log2_add(acc, self.mass_j(&j, lo, hi)?);
        }
        Ok(acc)
    }

    fn mass_j(&self, j: &JPiece, lo: &BigUint, hi: &BigUint) -> Result<f64> {
        let l = self.lv(j.level);
        let (a, b) = self.j_bounds(j);
        if b < *lo || a > *hi {
            return Ok(f64::NEG_INFINITY);
        }
        if a >= *lo && b <= *hi {
            return Ok(-l.log2_m);
        }
        if j.level == self.depth() {
            let x = a.max(lo.clone());
            let y = b.min(hi.clone());
            if y <= x {
                return Ok(f64::NEG_INFINITY);
            }
            return Ok(log2_big(&(y - x)) - log2_big(&l.eta) - l.log2_m);
        }
        let n = self.lv(j.level + 1);
        let (full, partial) = self.child_row(j).classify(lo, hi);
        let mut acc = count_mass(&full, n.log2_l);
        for s in partial {
            acc = log2_add(acc, self.mass_i(&self.child(j, &s), lo, hi)?);
        }
        Ok(acc)
    }

    /// log2 μ(B(x, 2^{-u})) on the circle.
    pub fn log2_ball_mass(&self, x: &BigUint, u: u64) -> Result<f64> {
        if u < 2 || u >= self.prec {
            return Err(Error::InvalidArgument(format!("radius exponent {u} outside 2..{}", self.prec)));
        }
        let full = BigUint::one() << self.prec;
        let top = &full - 1u8;
        let r = BigUint::one() << (self.prec - u);
        let mut pieces = Vec::new();
        if *x < r {
            pieces.push((BigUint::zero(), x + &r));
            pieces.push((&full - (&r - x), top.clone()));
        } else if x + &r > top {
            pieces.push((x - &r, top.clone()));
            pieces.push((BigUint::zero(), x + &r - &full));
        } else {
            pieces.push((x - &r, x + &r));
        }
        let mut acc = f64::NEG_INFINITY;
        for (lo, hi) in pieces {
            acc = log2_add(acc, self.log2_interval_mass(&lo, &hi)?);
        }
        Ok(acc.min(0.0))
    }

    /// A μ-random covering interval of level `k` (uniform over the M_k
    /// intervals), from sample index `s`.
    pub fn sample_j(&self, k: usize, s: u64) -> Result<JPiece> {
        let rng = CounterRng::new(hash_words(self.key, &[SAMPLER_STREAM, s]));
        let top = self.lv(1);
        let mut piece = self.top_piece(&random_below(&rng, 0, &top.per_parent));
        let mut level = 1;
        loop {
            let w = random_below(&rng, 2 * level as u64, &self.lv(level).windows);
            let j = self.window(&piece, &w)?;
            if level == k {
                return Ok(j);
            }
            let first = self.first_child_slot(&j);
            let off = random_below(&rng, 2 * level as u64 + 1, &self.lv(level + 1).per_parent);
            piece = self.child(&j, &(first + off));
            level += 1;
        }
    }

    /// A μ-typical point: the center of a random deepest covering interval.
    pub fn sample_point(&self, s: u64) -> Result<BigUint> {
        Ok(self.sample_j(self.depth(), s)?.center)
    }

    /// Grid cells of side η_k met by G ∩ J.
    pub fn boxes_in(&self, j: &JPiece) -> u32 {
        if j.level == self.depth() {
            return 2;
        }
        let n = self.lv(j.level + 1);
        let first = self.first_child_slot(j);
        let lo = &j.parent_left + (&first + 1u8) * &n.slot;
        let hi = &j.parent_left + (&first + &n.per_parent - 1u8) * &n.slot;
        let eta = &self.lv(j.level).eta;
        let (q, r) = lo.div_rem(eta);
        let up = if r.is_zero() { q } else { q + 1u8 };
        if hi / eta >= up {
            2
        } else {
            1
        }
    }

    pub fn log2_l(&self, k: usize) -> f64 {
        self.lv(k).log2_l
    }

    pub fn log2_m(&self, k: usize) -> f64 {
        self.lv(k).log2_m
    }

    pub fn eta_exp(&self, k: usize) -> u64 {
        self.lv(k).eta_exp
    }

    /// Position in [0,1) as f64.
    pub fn to_f64(&self, x: &BigUint) -> f64 {
        let s = self.prec.saturating_sub(60);
        (x >> s).to_f64().unwrap() * 2f64.powi(-((self.prec - s) as i32))
    }
}

fn count_mass(count: &BigUint, log2_total: f64) -> f64 {
    if count.is_zero() {
        f64::NEG_INFINITY
    } else {
        log2_big(count) - log2_total
    }
}

fn digits_with(tag: u64, x: &BigUint) -> Vec<u64> {
    let mut v = vec![tag];
    v.extend(x.to_u64_digits());
    v
}
