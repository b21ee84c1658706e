//! Exact rational scalars.
//!
//! Every structural coefficient in the engine (inductances, couplings,
//! constraint coefficients, bracket values) is a [`Scalar`]. Equality and
//! zero tests on scalars are exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Scalar = BigRational;

pub fn int(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Scalar {
    Scalar::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Scalar {
    Scalar::zero()
}

pub fn one() -> Scalar {
    Scalar::one()
}

pub fn to_f64(s: &Scalar) -> f64 {
    s.to_f64().unwrap_or(f64::NAN)
}

/// Exact dyadic value of a finite float.
pub fn from_f64_exact(x: f64) -> Option<Scalar> {
    Scalar::from_float(x)
}

/// Parses a decimal literal (`12`, `0.25`, `1e-3`, `2.5E+2`) exactly.
pub fn parse_decimal(text: &str) -> Option<Scalar> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Scalar::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Scalar::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Parses `num/den` or a plain integer, the serialized form of a scalar.
pub fn parse_scalar(text: &str) -> Option<Scalar> {
    text.trim().parse::<Scalar>().ok()
}

/// Positive factor that turns `v` into a primitive integer vector
/// (integer entries with gcd 1). Returns 1 for the zero vector.
pub fn primitive_scale(v: &[Scalar]) -> Scalar {
    let nonzero: Vec<&Scalar> = v.iter().filter(|x| !x.is_zero()).collect();
    if nonzero.is_empty() {
        return one();
    }
    let lcm_den = nonzero
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let gcd_num = nonzero
        .iter()
        .fold(BigInt::zero(), |acc, x| acc.gcd(&(x.numer() * (&lcm_den / x.denom()))));
    Scalar::new(lcm_den, gcd_num).abs()
}

/// Human-readable form: `3`, `-3/2`.
pub fn fmt(s: &Scalar) -> String {
    s.to_string()
}

/// Appends a signed term to an expression under construction.
pub(crate) fn push_term(out: &mut String, coeff: &Scalar, body: &str) {
    let negative = coeff.is_negative();
    let magnitude = coeff.abs();
    if out.is_empty() {
        if negative {
            out.push('-');
        }
    } else {
        out.push_str(if negative { " - " } else { " + " });
    }
    if body.is_empty() {
        out.push_str(&magnitude.to_string());
    } else if magnitude.is_one() {
        out.push_str(body);
    } else {
        out.push_str(&format!("{magnitude}*{body}"));
    }
}

/// Serde adapter storing scalars as `"num/den"` strings.
pub mod serde_scalar {
    use super::Scalar;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_scalar(&text).ok_or_else(|| D::Error::custom(format!("bad rational {text:?}")))
    }
}

/// Serde adapter for `Vec<Scalar>`.
pub mod serde_scalar_vec {
    use super::Scalar;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &[Scalar], s: S) -> Result<S::Ok, S::Error> {
        value.iter().map(|x| x.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Scalar>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|t| super::parse_scalar(&t).ok_or_else(|| D::Error::custom(format!("bad rational {t:?}"))))
            .collect()
    }
}

/// Serde adapter for row-major `Vec<Vec<Scalar>>`.
pub mod serde_scalar_rows {
    use super::Scalar;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &[Vec<Scalar>], s: S) -> Result<S::Ok, S::Error> {
        value
            .iter()
            .map(|row| row.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Scalar>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|t| super::parse_scalar(&t).ok_or_else(|| D::Error::custom(format!("bad rational {t:?}"))))
                    .collect()
            })
            .collect()
    }
}
