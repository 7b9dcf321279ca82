//! Exact rational weights and their conversion to integer flow units.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"num/den"` or a bare integer `"num"`.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Rational::new(num, den))
}

/// Always `"num/den"`, reduced, with a positive denominator.
pub fn format(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &Rational) -> f64 {
    // BigRational::to_f64 rounds correctly for the magnitudes seen here.
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Scales every value by `scale` and returns the integers, failing if any
/// product is not integral or does not fit in an `i64`.
pub fn to_units(values: &[Rational], scale: &BigInt) -> Result<Vec<i64>> {
    values
        .iter()
        .map(|r| {
            let scaled = r * Rational::from_integer(scale.clone());
            if !scaled.is_integer() {
                return Err(Error::domain("weight is not a multiple of the unit"));
            }
            scaled
                .to_integer()
                .to_i64()
                .ok_or_else(|| Error::Overflow(format!("{} units exceed i64", scale)))
        })
        .collect()
}

pub fn is_nonnegative(r: &Rational) -> bool {
    !r.is_negative()
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values.into_iter().fold(Rational::zero(), |acc, r| acc + r)
}

/// `floor(r)` as an `i64`.
pub fn floor_i64(r: &Rational) -> Option<i64> {
    r.floor().to_integer().to_i64()
}

/// `1 / 2^k`.
pub fn dyadic(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        assert_eq!(parse("2/4"), Some(ratio(1, 2)));
        assert_eq!(parse(" 3 "), Some(int(3)));
        assert_eq!(parse("-1/3"), Some(ratio(-1, 3)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("x"), None);
        assert_eq!(format(&ratio(2, 6)), "1/3");
        assert_eq!(format(&int(0)), "0/1");
    }

    #[test]
    fn units_from_common_denominator() {
        let w = vec![ratio(1, 4), ratio(1, 6), ratio(7, 12)];
        let l = lcm_of_denominators(&w);
        assert_eq!(l, BigInt::from(12));
        assert_eq!(to_units(&w, &l).unwrap(), vec![3, 2, 7]);
        assert!(to_units(&w, &BigInt::from(5)).is_err());
    }

    #[test]
    fn dyadic_powers() {
        assert_eq!(dyadic(0), int(1));
        assert_eq!(dyadic(3), ratio(1, 8));
    }
}
