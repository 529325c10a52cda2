//! Structured results of empirical checks and their tidy CSV profiles.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// A real number that survives JSON round trips even when infinite or NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    _ => Err(E::custom(format!("not a number: {v}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

/// Serde adapter for plain `f64` fields that may be infinite.
pub mod num_f64 {
    use super::Num;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Num(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Num::deserialize(d).map(|n| n.0)
    }
}

/// Conventions in force when a report was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub boundary: String,
    pub overlap: String,
    pub quadrature: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            boundary: "open spatial balls; centered cylinders [t-r^2/2, t+r^2/2); backward cylinders (t-r^2, t]".into(),
            overlap: "exact ball-cell overlap".into(),
            quadrature: "closed form between atom breakpoints; Gauss-Legendre in log r for densities".into(),
        }
    }
}

/// Sampled curve attached to a report, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Samples {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Num>>,
}

impl Samples {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.iter().map(|v| Num(*v)).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub fitted_constants: BTreeMap<String, Num>,
    pub worst_ratio: Num,
    pub pass: bool,
    pub status: String,
    pub samples: Samples,
    pub conventions: Conventions,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            params: BTreeMap::new(),
            fitted_constants: BTreeMap::new(),
            worst_ratio: Num(0.0),
            pass: false,
            status: "pending".into(),
            samples: Samples::default(),
            conventions: Conventions::default(),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn set_constant(&mut self, key: &str, value: f64) {
        self.fitted_constants.insert(key.to_string(), Num(value));
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.fitted_constants.get(key).map(|n| n.0)
    }

    pub fn finish(mut self, pass: bool, status: &str) -> Self {
        self.pass = pass;
        self.status = status.to_string();
        self
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Tidy CSV of a report's samples: header row then one row per sample.
pub fn emit_profile(report: &VerificationReport) -> String {
    let mut out = report.samples.columns.join(",");
    out.push('\n');
    for row in &report.samples.rows {
        let line: Vec<String> = row.iter().map(|v| fmt_num(v.0)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
