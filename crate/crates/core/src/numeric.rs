//! Small numeric helpers shared across modules: big-integer logarithms,
//! floors of powers of two, and least squares.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// log2 of a positive big integer, accurate to f64 precision.
pub fn log2_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log2 of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let top = (x >> (bits - 64)).to_u64().unwrap();
    (bits - 64) as f64 + (top as f64).log2()
}

/// floor(2^e) for e ≥ 0. Exact for integer e and for e < 53; otherwise the
/// 53 leading bits come from the f64 value of 2^frac(e) and the rest are zero.
pub fn pow2_floor(e: f64) -> BigUint {
    assert!(e >= 0.0 && e.is_finite());
    let i = e.floor();
    let f = e - i;
    if f == 0.0 {
        return BigUint::from(1u8) << (i as u64);
    }
    if e < 53.0 {
        return BigUint::from(e.exp2().floor() as u64);
    }
    let m = (f.exp2() * (1u64 << 52) as f64).floor() as u64;
    BigUint::from(m) << (i as u64 - 52)
}

/// floor of a nonnegative finite f64 as a big integer.
pub fn big_floor(x: f64) -> BigUint {
    assert!(x >= 0.0 && x.is_finite());
    if x < 1.8e19 {
        return BigUint::from(x.floor() as u64);
    }
    let (m, e) = frexp(x);
    // x = m · 2^e with m in [0.5, 1)
    let mant = (m * (1u64 << 53) as f64) as u64;
    BigUint::from(mant) << ((e - 53) as u64)
}

fn frexp(x: f64) -> (f64, i32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    assert!(exp != 0, "subnormal");
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, exp - 1022)
}

/// Band index k with l in [2^{-k+1}, 2^{-k+2}), computed from the exact
/// binary exponent of l.
pub fn dyadic_band(l: f64) -> i64 {
    assert!(l > 0.0 && l.is_finite());
    let e = floor_log2(l);
    1 - e
}

/// floor(log2 x) for positive normal or subnormal x, exact.
pub fn floor_log2(x: f64) -> i64 {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    if exp == 0 {
        let mant = bits & ((1u64 << 52) - 1);
        return -1074 + 63 - mant.leading_zeros() as i64;
    }
    exp - 1023
}

/// Unweighted least squares y = a + b x. Returns (slope, intercept, r2).
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// log2(2^a + 2^b) without overflow.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

pub mod bigstr {
    //! Serialize big integers as decimal strings.
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::from_str(&s).map_err(D::Error::custom)
    }
}
