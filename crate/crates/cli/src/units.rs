//! Physical quantities written as `"<number> <unit>"` strings.
//!
//! Frequencies are stored as angular frequencies in rad/µs, so `"5 MHz"`
//! becomes `2π·5`. Bare numbers are rejected.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn split(text: &str) -> Result<(f64, &str), String> {
    let t = text.trim();
    let idx = t
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .ok_or_else(|| format!("'{text}' has no unit suffix"))?;
    let (num, unit) = t.split_at(idx);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a number in '{text}'", num.trim()))?;
    if !value.is_finite() {
        return Err(format!("'{text}' is not finite"));
    }
    Ok((value, unit.trim()))
}

macro_rules! quantity {
    ($name:ident, $what:literal, $canonical:literal, [$($unit:literal => $scale:expr),+ $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNITS: &'static [&'static str] = &[$($unit),+];

            pub fn parse(text: &str) -> Result<Self, String> {
                let (value, unit) = split(text)?;
                $(
                    if unit == $unit {
                        return Ok(Self(value * $scale));
                    }
                )+
                Err(format!(
                    "unknown {} unit '{unit}' in '{text}' (expected one of {})",
                    $what,
                    Self::UNITS.join(", ")
                ))
            }

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $canonical)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, "a {} string such as \"1 {}\"", $what, $name::UNITS[0])
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $name::parse(v).map_err(E::custom)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Err(E::custom(format!("{} {v} needs a unit, e.g. \"{v} {}\"", $what, $name::UNITS[0])))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        self.visit_f64(v as f64)
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        self.visit_f64(v as f64)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(Frequency, "frequency", "rad/us", [
    "MHz" => 2.0 * PI,
    "kHz" => 2.0 * PI * 1e-3,
    "rad/us" => 1.0,
]);

quantity!(Time, "time", "us", [
    "us" => 1.0,
    "µs" => 1.0,
    "ns" => 1e-3,
    "ms" => 1e3,
]);

quantity!(Length, "length", "um", [
    "um" => 1.0,
    "µm" => 1.0,
    "nm" => 1e-3,
]);

quantity!(C6, "C6 coefficient", "rad/us um^6", [
    "MHz um^6" => 2.0 * PI,
    "rad/us um^6" => 1.0,
]);
