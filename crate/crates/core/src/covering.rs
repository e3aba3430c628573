//! Seeded translation centers, finite-stage grid approximations of the
//! covering, the cube counter N(Q,n) and hitting tests.

use crate::error::{invalid, Error, Result};
use crate::lengths::LengthSequenceSpec;
use crate::report::{Check, Direction, ExperimentReport};
use crate::rng::{to_unit_f64, CounterRng};
use crate::torus::{interval_distance_range, DyadicCube, TorusBall, TorusPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Stream id reserved for center coordinates.
pub const CENTER_STREAM: u64 = 0;

/// Maximum n·d for dense grids (2^30 bits = 128 MiB).
pub const MAX_GRID_BITS: u32 = 30;

/// Centers ξ_1..ξ_N, generated on demand.
///
/// Coordinate `c` of ξ_j is word `c % 2` of the Philox block
/// `(stream 0, index j·⌈d/2⌉ + c/2)` under key `seed`, truncated to its top
/// 53 bits so the f64 value is exact.
#[derive(Clone, Debug)]
pub struct CoveringRealization {
    pub seed: u64,
    pub spec: LengthSequenceSpec,
    pub n: u64,
    rng: CounterRng,
}

pub fn realize(seed: u64, spec: &LengthSequenceSpec, n: u64) -> Result<CoveringRealization> {
    if n == 0 {
        return invalid("a realization needs N ≥ 1");
    }
    spec.validate()?;
    Ok(CoveringRealization {
        seed,
        spec: spec.clone(),
        n,
        rng: CounterRng::new(seed),
    })
}

impl CoveringRealization {
    pub fn dim(&self) -> usize {
        self.spec.d as usize
    }

    /// Raw 64-bit fixed-point coordinates of ξ_j (low 11 bits zero).
    pub fn center_raw(&self, j: u64) -> Vec<u64> {
        assert!(j >= 1 && j <= self.n, "center index {j} outside 1..={}", self.n);
        let d = self.dim() as u64;
        let per = d.div_ceil(2);
        (0..d)
            .map(|c| self.rng.u64_at(CENTER_STREAM, j * per + c / 2, (c % 2) as usize) >> 11 << 11)
            .collect()
    }

    /// First coordinate only, for d = 1 fast paths.
    #[inline]
    pub fn center_raw_1d(&self, j: u64) -> u64 {
        let per = (self.spec.d as u64).div_ceil(2);
        self.rng.u64_at(CENTER_STREAM, j * per, 0) >> 11 << 11
    }

    pub fn center(&self, j: u64) -> TorusPoint {
        TorusPoint::new(self.center_raw(j).into_iter().map(to_unit_f64).collect()).unwrap()
    }

    pub fn radius(&self, j: u64) -> Result<f64> {
        Ok(self.spec.value_at(j)? / 2.0)
    }

    pub fn ball(&self, j: u64) -> Result<TorusBall> {
        TorusBall::new(self.center(j), self.radius(j)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageWindow {
    pub first: u64,
    pub last: u64,
}

impl StageWindow {
    pub fn new(first: u64, last: u64) -> Result<Self> {
        if first < 1 || first > last {
            return invalid(format!("window [{first}, {last}] must satisfy 1 ≤ first ≤ last"));
        }
        Ok(StageWindow { first, last })
    }

    pub fn len(&self) -> u64 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageMode {
    Contained,
    Intersected,
}

/// Dense set of level-n dyadic cubes of T^d. Linear index of a cube is
/// Σ_i index_i · 2^{n·i}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSet {
    level: u32,
    dim: u32,
    bits: Vec<u64>,
}

impl GridSet {
    pub fn empty(level: u32, dim: u32) -> Result<Self> {
        if dim == 0 {
            return invalid("grid dimension must be positive");
        }
        let total = level as u64 * dim as u64;
        if total > MAX_GRID_BITS as u64 {
            return Err(Error::Budget(format!(
                "dense grid needs n·d = {total} > {MAX_GRID_BITS}"
            )));
        }
        let cells = 1u64 << total;
        Ok(GridSet {
            level,
            dim,
            bits: vec![0; cells.div_ceil(64) as usize],
        })
    }

    pub fn full(level: u32, dim: u32) -> Result<Self> {
        let mut g = Self::empty(level, dim)?;
        let cells = g.cells();
        for i in 0..cells {
            g.insert_linear(i);
        }
        Ok(g)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn cells(&self) -> u64 {
        1u64 << (self.level * self.dim)
    }

    #[inline]
    pub fn insert_linear(&mut self, i: u64) {
        self.bits[(i / 64) as usize] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn contains_linear(&self, i: u64) -> bool {
        self.bits[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    pub fn linear_index(&self, q: &DyadicCube) -> u64 {
        assert_eq!(q.level, self.level);
        q.index
            .iter()
            .enumerate()
            .map(|(i, &x)| x << (self.level as usize * i))
            .sum()
    }

    pub fn cube(&self, linear: u64) -> DyadicCube {
        let mask = (1u64 << self.level) - 1;
        let index = (0..self.dim)
            .map(|i| (linear >> (self.level * i)) & mask)
            .collect();
        DyadicCube { level: self.level, index }
    }

    pub fn insert(&mut self, q: &DyadicCube) {
        let i = self.linear_index(q);
        self.insert_linear(i);
    }

    pub fn contains(&self, q: &DyadicCube) -> bool {
        self.contains_linear(self.linear_index(q))
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Sorted linear indices of member cubes.
    pub fn members(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for (wi, &w) in self.bits.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as u64;
                out.push(wi as u64 * 64 + b);
                w &= w - 1;
            }
        }
        out
    }

    pub fn is_subset_of(&self, other: &GridSet) -> bool {
        self.level == other.level
            && self.dim == other.dim
            && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Every descendant at `level` of every member cube.
    pub fn refine(&self, level: u32) -> Result<GridSet> {
        if level < self.level {
            return Err(Error::LevelMismatch(level, self.level));
        }
        let mut g = GridSet::empty(level, self.dim)?;
        let shift = level - self.level;
        let span = 1u64 << shift;
        for m in self.members() {
            let q = self.cube(m);
            let mut idx = vec![0u64; self.dim as usize];
            loop {
                let fine = DyadicCube {
                    level,
                    index: q.index.iter().zip(&idx).map(|(&a, &o)| (a << shift) + o).collect(),
                };
                g.insert(&fine);
                if !odometer(&mut idx, span) {
                    break;
                }
            }
        }
        Ok(g)
    }

    /// Run-length text: a header line, then `start count` per maximal run of
    /// consecutive linear indices.
    pub fn to_rle(&self) -> String {
        let mut s = format!("gridset level={} dim={}\n", self.level, self.dim);
        let m = self.members();
        let mut i = 0;
        while i < m.len() {
            let start = m[i];
            let mut j = i;
            while j + 1 < m.len() && m[j + 1] == m[j] + 1 {
                j += 1;
            }
            writeln!(s, "{} {}", start, j - i + 1).unwrap();
            i = j + 1;
        }
        s
    }

    pub fn from_rle(text: &str) -> Result<GridSet> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty RLE".into()))?;
        let mut level = None;
        let mut dim = None;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("gridset") {
            return invalid("RLE header must start with 'gridset'");
        }
        for p in parts {
            match p.split_once('=') {
                Some(("level", v)) => level = v.parse::<u32>().ok(),
                Some(("dim", v)) => dim = v.parse::<u32>().ok(),
                _ => return invalid(format!("bad RLE header field {p}")),
            }
        }
        let (level, dim) = match (level, dim) {
            (Some(l), Some(d)) => (l, d),
            _ => return invalid("RLE header needs level and dim"),
        };
        let mut g = GridSet::empty(level, dim)?;
        let mut prev_end = 0u64;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut it = line.split_whitespace().map(|t| t.parse::<u64>());
            let (start, count) = match (it.next(), it.next(), it.next()) {
                (Some(Ok(s)), Some(Ok(c)), None) if c > 0 => (s, c),
                _ => return invalid(format!("bad RLE run '{line}'")),
            };
            if start < prev_end || start + count > g.cells() {
                return invalid("RLE runs must be sorted, disjoint and in range");
            }
            for i in start..start + count {
                g.insert_linear(i);
            }
            prev_end = start + count;
        }
        Ok(g)
    }
}

/// Advance a mixed-radix counter; false once it wraps to all zeros.
fn odometer(idx: &mut [u64], radix: u64) -> bool {
    for x in idx.iter_mut() {
        *x += 1;
        if *x < radix {
            return true;
        }
        *x = 0;
    }
    false
}

/// Mark the cubes a single ball contains or meets.
fn stage_ball(g: &mut GridSet, center: &[f64], radius: f64, mode: StageMode) {
    let n = g.level;
    let side = (-(n as f64)).exp2();
    let cells = 1u64 << n;
    let scale = (n as f64).exp2();
    // candidate index ranges per coordinate (cyclic), as (start, count)
    let ranges: Vec<(u64, u64)> = center
        .iter()
        .map(|&c| {
            if 2.0 * radius + 2.0 * side >= 1.0 {
                (0, cells)
            } else {
                let lo = ((c - radius) * scale).floor() as i64;
                let hi = ((c + radius) * scale).floor() as i64;
                (lo.rem_euclid(cells as i64) as u64, (hi - lo + 1) as u64)
            }
        })
        .collect();
    let r2 = radius * radius;
    let mut off = vec![0u64; center.len()];
    let counts: Vec<u64> = ranges.iter().map(|r| r.1).collect();
    loop {
        let mut acc = 0.0;
        let mut linear = 0u64;
        let mut ok = true;
        for (i, &c) in center.iter().enumerate() {
            let idx = (ranges[i].0 + off[i]) % cells;
            let lo = idx as f64 * side;
            let (dmin, dmax) = interval_distance_range(c, lo, lo + side);
            let d = match mode {
                StageMode::Contained => dmax,
                StageMode::Intersected => dmin,
            };
            acc += d * d;
            let within = match mode {
                StageMode::Contained => acc <= r2,
                StageMode::Intersected => acc < r2,
            };
            if !within {
                ok = false;
                break;
            }
            linear |= idx << (n as usize * i);
        }
        if ok {
            g.insert_linear(linear);
        }
        // mixed-radix advance
        let mut carried = true;
        for i in 0..off.len() {
            off[i] += 1;
            if off[i] < counts[i] {
                carried = false;
                break;
            }
            off[i] = 0;
        }
        if carried {
            break;
        }
    }
}

/// Grid approximation of ∪_{j∈w} B(ξ_j, l_j/2).
pub fn stage_gridset(r: &CoveringRealization, w: StageWindow, level: u32, mode: StageMode) -> Result<GridSet> {
    if level < 1 {
        return invalid("stage level must be ≥ 1");
    }
    let mut g = GridSet::empty(level, r.spec.d)?;
    if w.first > r.n {
        return Ok(g);
    }
    for j in w.first..=w.last.min(r.n) {
        let l = r.spec.value_at(j)?;
        if l > 1.0 {
            return Err(Error::RadiusCap(l / 2.0));
        }
        let c: Vec<f64> = r.center_raw(j).into_iter().map(to_unit_f64).collect();
        stage_ball(&mut g, &c, l / 2.0, mode);
    }
    Ok(g)
}

/// N(Q,n) together with the band size L_n and the exact-containment variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeCount {
    /// #{j in band : Q^j ⊂ Q}, the band being 2^{-n}√d ≤ l_j ≤ 2^{-n0}√d.
    pub count: u64,
    /// L_n: number of indices in the band.
    pub band_size: u64,
    /// #{j in band : Q^j ⊂ Q and B(ξ_j, l_j/2) ⊇ Q^j}.
    pub exact_count: u64,
}

/// Indices j in `w` whose diameter lies in [2^{-n}√d, 2^{-n0}√d].
pub fn band_indices(spec: &LengthSequenceSpec, w: StageWindow, n0: u32, n: u32) -> Result<Vec<u64>> {
    if n < n0 {
        return Err(Error::LevelMismatch(n, n0));
    }
    let sd = (spec.d as f64).sqrt();
    let lo = (-(n as f64)).exp2() * sd;
    let hi = (-(n0 as f64)).exp2() * sd;
    let mut out = Vec::new();
    for j in w.first..=w.last {
        let l = spec.value_at(j)?;
        if l >= lo && l <= hi {
            out.push(j);
        }
    }
    Ok(out)
}

/// N(Q,n) over the centers of `w` (clipped to the realization).
pub fn count_n_q_n_in(r: &CoveringRealization, w: StageWindow, q: &DyadicCube, n: u32) -> Result<CubeCount> {
    if q.dim() != r.dim() {
        return invalid("cube dimension differs from the sequence dimension");
    }
    if n < q.level {
        return Err(Error::LevelMismatch(n, q.level));
    }
    if n > 53 {
        return invalid("level above center resolution (53 bits)");
    }
    let w = StageWindow::new(w.first, w.last.min(r.n))?;
    let band = band_indices(&r.spec, w, q.level, n)?;
    let mut count = 0;
    let mut exact = 0;
    let n0 = q.level;
    for &j in &band {
        let raw = r.center_raw(j);
        let inside = raw
            .iter()
            .zip(&q.index)
            .all(|(&x, &qi)| if n0 == 0 { true } else { x >> (64 - n0) == qi });
        if inside {
            count += 1;
            let qj = DyadicCube {
                level: n,
                index: raw.iter().map(|&x| if n == 0 { 0 } else { x >> (64 - n) }).collect(),
            };
            let ball = r.ball(j)?;
            if crate::torus::ball_contains_cube(&ball, &qj) {
                exact += 1;
            }
        }
    }
    Ok(CubeCount {
        count,
        band_size: band.len() as u64,
        exact_count: exact,
    })
}

/// N(Q,n) over all centers ξ_1..ξ_N of the realization.
pub fn count_n_q_n(r: &CoveringRealization, q: &DyadicCube, n: u32) -> Result<CubeCount> {
    count_n_q_n_in(r, StageWindow { first: 1, last: r.n }, q, n)
}

pub fn measure_fraction(g: &GridSet) -> f64 {
    g.count() as f64 / g.cells() as f64
}

/// Nonempty intersection; the coarser set is refined first.
pub fn hits(ge: &GridSet, gf: &GridSet) -> Result<bool> {
    if ge.dim != gf.dim {
        return invalid("dimension mismatch");
    }
    let level = ge.level.max(gf.level);
    let a = if ge.level < level { std::borrow::Cow::Owned(ge.refine(level)?) } else { std::borrow::Cow::Borrowed(ge) };
    let b = if gf.level < level { std::borrow::Cow::Owned(gf.refine(level)?) } else { std::borrow::Cow::Borrowed(gf) };
    Ok(a.bits.iter().zip(&b.bits).any(|(x, y)| x & y != 0))
}

/// Whether the intersected-mode stage of one window meets `target`, tested
/// ball by ball without building the stage grid.
fn window_hits(r: &CoveringRealization, w: StageWindow, target: &GridSet) -> Result<bool> {
    let mut scratch = GridSet::empty(target.level, target.dim)?;
    for j in w.first..=w.last.min(r.n) {
        let l = r.spec.value_at(j)?;
        if l > 1.0 {
            return Err(Error::RadiusCap(l / 2.0));
        }
        let c: Vec<f64> = r.center_raw(j).into_iter().map(to_unit_f64).collect();
        scratch.bits.iter_mut().for_each(|b| *b = 0);
        stage_ball(&mut scratch, &c, l / 2.0, StageMode::Intersected);
        if scratch.bits.iter().zip(&target.bits).any(|(x, y)| x & y != 0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Hit frequency per window over seeds base_seed + t.
pub fn hitting_probability_mc(
    spec: &LengthSequenceSpec,
    target: &GridSet,
    windows: &[StageWindow],
    level: u32,
    trials: u64,
    base_seed: u64,
) -> Result<ExperimentReport> {
    if trials < 1 {
        return invalid("trials must be ≥ 1");
    }
    if windows.is_empty() {
        return invalid("no windows");
    }
    let target = if target.level < level {
        target.refine(level)?
    } else if target.level == level {
        target.clone()
    } else {
        return Err(Error::LevelMismatch(level, target.level));
    };
    let horizon = windows.iter().map(|w| w.last).max().unwrap();
    let per_trial: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<bool>> {
            let r = realize(base_seed.wrapping_add(t), spec, horizon)?;
            windows.iter().map(|w| window_hits(&r, *w, &target)).collect()
        })
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut freqs = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let s = per_trial.iter().filter(|v| v[i]).count() as u64;
        freqs.push(s as f64 / trials as f64);
        // report-only row: the bound 1 always holds
        checks.push(Check::frequency_upper(&format!("window_{}_{}", w.first, w.last), s, trials, 1.0));
    }
    if windows.len() >= 3 {
        checks.push(Check::trend("frequency_trend", freqs.clone(), Direction::Increasing, 1.0).not_applicable());
    }
    Ok(ExperimentReport::new(
        "hitting_probability_mc",
        serde_json::json!({
            "spec": spec,
            "level": level,
            "windows": windows,
            "trials": trials,
            "base_seed": base_seed,
        }),
        checks,
        serde_json::json!({ "frequencies": freqs }),
    ))
}
