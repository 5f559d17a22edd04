//! Lebesgue exponents in text form: `"inf"` for infinity, fractions such as
//! `"4/3"`, or plain decimals.

use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub fn parse_exponent(text: &str) -> Result<f64> {
    let t = text.trim();
    let q = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => match t.split_once('/') {
            Some((a, b)) => {
                let num: f64 = a.trim().parse().map_err(|_| bad(t))?;
                let den: f64 = b.trim().parse().map_err(|_| bad(t))?;
                num / den
            }
            None => t.parse().map_err(|_| bad(t))?,
        },
    };
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "exponent {t} must lie in [1, inf]"
        )));
    }
    Ok(q)
}

fn bad(t: &str) -> Error {
    Error::InvalidArgument(format!("cannot parse exponent {t:?}"))
}

/// Short human form: `inf`, `4/3`, `2`.
pub fn display_exponent(q: f64) -> String {
    if q.is_infinite() {
        return "inf".into();
    }
    for den in 1..=12u32 {
        let num = q * den as f64;
        if (num - num.round()).abs() < 1e-12 {
            return if den == 1 {
                format!("{}", num.round())
            } else {
                format!("{}/{}", num.round(), den)
            };
        }
    }
    format!("{q}")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

fn from_repr<E: serde::de::Error>(r: Repr) -> std::result::Result<f64, E> {
    match r {
        Repr::Num(q) => Ok(q),
        Repr::Text(s) => parse_exponent(&s).map_err(E::custom),
    }
}

/// `#[serde(with = ...)]` for a single exponent; infinity is written as `"inf"`.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(q: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if q.is_finite() {
            s.serialize_f64(*q)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

/// `#[serde(with = ...)]` for a list of exponents.
pub mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(qs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(qs.len()))?;
        for q in qs {
            if q.is_finite() {
                seq.serialize_element(q)?;
            } else {
                seq.serialize_element("inf")?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(from_repr)
            .collect()
    }
}
