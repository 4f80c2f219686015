//! Exact rational arithmetic on f64 inputs.
//!
//! Every finite f64 is a dyadic rational, so sums and comparisons of
//! coordinate data can be done without rounding.  Used where a feasibility
//! threshold sits exactly on a partial sum and float accumulation would
//! tip the comparison the wrong way.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact value of a finite f64 as a rational. Panics on NaN/inf.
pub fn rat(x: f64) -> BigRational {
    assert!(x.is_finite(), "non-finite value has no rational representation");
    if x == 0.0 {
        return BigRational::zero();
    }
    let (mantissa, exponent, sign) = integer_decode(x);
    let mut num = BigInt::from(mantissa);
    if sign < 0 {
        num = -num;
    }
    if exponent >= 0 {
        BigRational::from(num << exponent as usize)
    } else {
        BigRational::new(num, BigInt::one() << (-exponent) as usize)
    }
}

fn integer_decode(x: f64) -> (u64, i16, i8) {
    let bits = x.to_bits();
    let sign: i8 = if bits >> 63 == 0 { 1 } else { -1 };
    let mut exponent = (bits >> 52 & 0x7ff) as i16;
    let mantissa = if exponent == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    exponent -= 1075;
    (mantissa, exponent, sign)
}

pub fn rat_sum<'a>(xs: impl IntoIterator<Item = &'a f64>) -> BigRational {
    xs.into_iter().map(|&x| rat(x)).sum()
}

pub fn rat_abs_sum<'a>(xs: impl IntoIterator<Item = &'a f64>) -> BigRational {
    xs.into_iter().map(|&x| rat(x).abs()).sum()
}

/// Exact test of sum_i |x_i| <= t.
pub fn abs_sum_le(xs: &[f64], t: f64) -> bool {
    rat_abs_sum(xs) <= rat(t)
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::MIN
        } else {
            f64::MAX
        }
    })
}
