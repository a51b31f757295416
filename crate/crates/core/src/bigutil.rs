//! Helpers for turning exact big-integer counts into floating point
//! quantities without overflowing `f64`.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

/// Ratio `num / den` as an `f64`, accurate to a few ulps even when both
/// operands are far outside the `f64` range.
pub fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return if num.is_zero() { f64::NAN } else { f64::INFINITY };
    }
    // Exact integer part, so whole-number ratios come out exact.
    let (q, r) = num.div_rem(den);
    let whole = q.to_f64().unwrap_or(f64::INFINITY);
    if r.is_zero() {
        return whole;
    }
    whole + fraction(&r, den)
}

/// `r / den` for `r < den`.
fn fraction(r: &BigUint, den: &BigUint) -> f64 {
    let shift = den.bits().saturating_sub(1000);
    let n = (r >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Signed variant of [`ratio`].
pub fn signed_ratio(num: &BigInt, den: &BigUint) -> f64 {
    let mag = ratio(num.magnitude(), den);
    match num.sign() {
        Sign::Minus => -mag,
        _ => mag,
    }
}

/// Signed ratio of two signed big integers.
pub fn signed_ratio_int(num: &BigInt, den: &BigInt) -> f64 {
    let mag = ratio(num.magnitude(), den.magnitude());
    if (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus) {
        -mag
    } else {
        mag
    }
}

/// Serde helpers writing big integers as decimal strings.
pub mod decimal {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(x: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(x)
    }

    pub fn deserialize<'de, T: FromStr, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|_| D::Error::custom(format!("invalid decimal integer \"{s}\"")))
    }

    pub mod seq {
        use super::*;
        use serde::Serialize;

        #[derive(Serialize)]
        struct Dec<'a, T: Display>(#[serde(with = "super")] &'a T);

        pub fn serialize<T: Display, S: Serializer>(x: &[T], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(x.iter().map(Dec))
        }

        pub fn deserialize<'de, T: FromStr, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|s| {
                    s.parse()
                        .map_err(|_| D::Error::custom(format!("invalid decimal integer \"{s}\"")))
                })
                .collect()
        }
    }

    pub mod matrix {
        use super::*;
        use serde::Serialize;

        #[derive(Serialize)]
        struct Row<'a, T: Display>(#[serde(with = "super::seq")] &'a [T]);

        pub fn serialize<T: Display, S: Serializer>(x: &[Vec<T>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(x.iter().map(|r| Row(r)))
        }

        pub fn deserialize<'de, T: FromStr, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<T>>, D::Error> {
            Vec::<Vec<String>>::deserialize(d)?
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|s| {
                            s.parse().map_err(|_| {
                                D::Error::custom(format!("invalid decimal integer \"{s}\""))
                            })
                        })
                        .collect()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn ratio_of_huge_values() {
        let three = BigUint::from(3u32);
        let a = num_traits::pow(three.clone(), 1000);
        let b = num_traits::pow(three, 999);
        assert!((ratio(&a, &b) - 3.0).abs() < 1e-14);
        assert!((ratio(&b, &a) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_small_over_huge() {
        let big = BigUint::one() << 5000usize;
        assert_eq!(ratio(&BigUint::one(), &big), 0.0);
        assert!(ratio(&big, &BigUint::one()).is_infinite());
    }

    #[test]
    fn decimal_strings() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct P {
            #[serde(with = "decimal")]
            a: BigUint,
            #[serde(with = "decimal::seq")]
            b: Vec<BigInt>,
            #[serde(with = "decimal::matrix")]
            c: Vec<Vec<BigInt>>,
        }
        let p = P {
            a: num_traits::pow(BigUint::from(3u32), 50),
            b: vec![BigInt::from(-7)],
            c: vec![vec![BigInt::from(1), BigInt::from(-2)]],
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"a":"717897987691852588770249","b":["-7"],"c":[["1","-2"]]}"#);
        assert_eq!(serde_json::from_str::<P>(&s).unwrap(), p);
    }

    #[test]
    fn signed() {
        let n = BigInt::from(-6);
        assert_eq!(signed_ratio(&n, &BigUint::from(4u32)), -1.5);
        assert_eq!(signed_ratio_int(&n, &BigInt::from(-4)), 1.5);
    }
}
