//! SI quantities with unit-suffix parsing ("4.7mH", "345kHz", "2.1uA").
//!
//! Everything inside the crate is plain SI `f64`. Scenario files may spell a
//! quantity either as a bare number (already SI) or as a string carrying an
//! optional metric prefix and the expected unit symbol.

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

pub const PICO: f64 = 1e-12;
pub const NANO: f64 = 1e-9;
pub const MICRO: f64 = 1e-6;
pub const MILLI: f64 = 1e-3;
pub const KILO: f64 = 1e3;
pub const MEGA: f64 = 1e6;

/// Picofarads to farads.
pub fn pf(v: f64) -> f64 {
    v * PICO
}

/// Nanofarads to farads.
pub fn nf(v: f64) -> f64 {
    v * NANO
}

/// Millihenries to henries.
pub fn mh(v: f64) -> f64 {
    v * MILLI
}

/// Kilohertz to hertz.
pub fn khz(v: f64) -> f64 {
    v * KILO
}

fn prefix_scale(prefix: &str) -> Option<f64> {
    Some(match prefix {
        "" => 1.0,
        "p" => PICO,
        "n" => NANO,
        "u" | "µ" | "μ" => MICRO,
        "m" => MILLI,
        "k" | "K" => KILO,
        "M" => MEGA,
        "G" => 1e9,
        _ => return None,
    })
}

/// Parses `text` as a quantity in `unit` (e.g. `"Hz"`, `"H"`, `"F"`).
///
/// The unit symbol itself is optional so `"345k"` is accepted for hertz.
/// `"Ohm"` also accepts `"ohm"` and `"Ω"`.
pub fn parse_quantity(text: &str, unit: &str) -> Result<f64> {
    let s = text.trim();
    let bad = || Error::Format(format!("cannot parse '{text}' as a quantity in {unit}"));
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || c == '_')
                && !((c == 'e' || c == 'E') && is_exponent(s, i))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, rest) = s.split_at(split);
    let value: f64 = num.replace('_', "").parse().map_err(|_| bad())?;
    let rest = rest.trim();

    let aliases = match unit {
        "Ohm" => vec!["Ohms", "ohms", "Ohm", "ohm", "Ω"],
        other => vec![other],
    };
    let mut prefix = rest;
    for alias in aliases {
        if let Some(p) = rest.strip_suffix(alias) {
            prefix = p;
            break;
        }
    }
    let scale = prefix_scale(prefix.trim()).ok_or_else(bad)?;
    let out = value * scale;
    if !out.is_finite() {
        return Err(bad());
    }
    Ok(out)
}

// "1e-3" is a number, "1mH" is not an exponent.
fn is_exponent(s: &str, i: usize) -> bool {
    let next = s[i + 1..].chars().next();
    matches!(next, Some(c) if c.is_ascii_digit() || c == '-' || c == '+')
        && s[..i]
            .chars()
            .last()
            .is_some_and(|c| c.is_ascii_digit() || c == '.')
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Num(f64),
    Text(String),
}

fn de_unit<'de, D: Deserializer<'de>>(d: D, unit: &str) -> std::result::Result<f64, D::Error> {
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) => parse_quantity(&t, unit).map_err(serde::de::Error::custom),
    }
}

fn de_unit_opt<'de, D: Deserializer<'de>>(
    d: D,
    unit: &str,
) -> std::result::Result<Option<f64>, D::Error> {
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) => Ok(Some(v)),
        Some(Raw::Text(t)) => parse_quantity(&t, unit)
            .map(Some)
            .map_err(serde::de::Error::custom),
    }
}

macro_rules! unit_serde {
    ($($name:ident => $sym:literal),* $(,)?) => {
        $(
            #[doc = concat!("serde helpers for quantities in `", $sym, "`.")]
            pub mod $name {
                use serde::Deserializer;

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                    super::de_unit(d, $sym)
                }

                pub mod option {
                    use serde::Deserializer;

                    pub fn deserialize<'de, D: Deserializer<'de>>(
                        d: D,
                    ) -> Result<Option<f64>, D::Error> {
                        super::super::de_unit_opt(d, $sym)
                    }
                }
            }
        )*
    };
}

unit_serde! {
    hertz => "Hz",
    henry => "H",
    farad => "F",
    volt => "V",
    ampere => "A",
    ohm => "Ohm",
    second => "s",
    feet => "ft",
    decibel => "dB",
}

/// Deserializes a list of farads.
pub fn farad_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Vec::<Raw>::deserialize(d)?
        .into_iter()
        .map(|r| match r {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => parse_quantity(&t, "F").map_err(serde::de::Error::custom),
        })
        .collect()
}
