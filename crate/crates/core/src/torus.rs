//! Geometry of the d-torus [0,1)^d: points, half-open dyadic cubes and balls
//! under the wrap-around Euclidean metric.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Reduces every coordinate mod 1.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return invalid("a torus point needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coordinate");
        }
        Ok(TorusPoint {
            coords: coords.into_iter().map(wrap01).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// x mod 1 in [0,1).
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap distance between two reals on the circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 1.0;
    d.min(1.0 - d)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<u64>,
}

impl DyadicCube {
    pub fn new(level: u32, index: Vec<u64>) -> Result<Self> {
        if level > 63 {
            return invalid(format!("dyadic level {level} exceeds 63"));
        }
        if index.is_empty() {
            return invalid("cube needs at least one coordinate");
        }
        let side = 1u64 << level;
        if let Some(i) = index.iter().find(|&&i| i >= side) {
            return invalid(format!("cube index {i} not below 2^{level}"));
        }
        Ok(DyadicCube { level, index })
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Half-open interval [lo, hi) of coordinate `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let s = self.side();
        let lo = self.index[i] as f64 * s;
        (lo, lo + s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBall {
    pub center: TorusPoint,
    pub radius: f64,
}

impl TorusBall {
    pub fn new(center: TorusPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return invalid("ball radius must be positive");
        }
        if radius > 0.5 {
            return Err(Error::RadiusCap(radius));
        }
        Ok(TorusBall { center, radius })
    }
}

pub fn cube_of_point(x: &TorusPoint, n: u32) -> DyadicCube {
    assert!(n <= 53, "cube_of_point: level above f64 resolution");
    let scale = (n as f64).exp2();
    let side = 1u64 << n;
    let index = x
        .coords
        .iter()
        .map(|&c| ((c * scale) as u64).min(side - 1))
        .collect();
    DyadicCube { level: n, index }
}

pub fn cube_subset(child: &DyadicCube, parent: &DyadicCube) -> Result<bool> {
    if child.level < parent.level {
        return Err(Error::LevelMismatch(child.level, parent.level));
    }
    if child.dim() != parent.dim() {
        return invalid("dimension mismatch");
    }
    let shift = child.level - parent.level;
    Ok(child
        .index
        .iter()
        .zip(&parent.index)
        .all(|(&c, &p)| c >> shift == p))
}

pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> f64 {
    assert_eq!(x.dim(), y.dim(), "dimension mismatch");
    x.coords
        .iter()
        .zip(&y.coords)
        .map(|(&a, &b)| {
            let d = circle_distance(a, b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest and largest wrap distance from `c` to points of [lo, hi].
/// The largest is 1/2 when the antipode of `c` lies in the interval.
#[inline]
pub fn interval_distance_range(c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let inside = |x: f64| {
        // is x (mod 1) in [lo, hi]?
        let y = lo + wrap01(x - lo);
        y <= hi
    };
    let dmin = if inside(c) {
        0.0
    } else {
        circle_distance(c, lo).min(circle_distance(c, hi))
    };
    let dmax = if inside(c + 0.5) {
        0.5
    } else {
        circle_distance(c, lo).max(circle_distance(c, hi))
    };
    (dmin, dmax)
}

/// Exact containment: the farthest point of the closed cube is within the radius.
pub fn ball_contains_cube(b: &TorusBall, q: &DyadicCube) -> bool {
    assert_eq!(b.center.dim(), q.dim(), "dimension mismatch");
    let r2 = b.radius * b.radius;
    let mut acc = 0.0;
    for i in 0..q.dim() {
        let (lo, hi) = q.interval(i);
        let (_, dmax) = interval_distance_range(b.center.coords[i], lo, hi);
        acc += dmax * dmax;
        if acc > r2 {
            return false;
        }
    }
    true
}

/// Distance from the center to the cube is strictly below the radius.
pub fn ball_intersects_cube(b: &TorusBall, q: &DyadicCube) -> bool {
    assert_eq!(b.center.dim(), q.dim(), "dimension mismatch");
    let r2 = b.radius * b.radius;
    let mut acc = 0.0;
    for i in 0..q.dim() {
        let (lo, hi) = q.interval(i);
        let (dmin, _) = interval_distance_range(b.center.coords[i], lo, hi);
        acc += dmin * dmin;
        if acc >= r2 {
            return false;
        }
    }
    true
}
