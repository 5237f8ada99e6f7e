//! Terminology and unit normalization.
//!
//! Lengths are canonicalised to millimetres and volumes to millilitres.
//! Unit conversions between metric prefixes are powers of ten, so when the
//! magnitude comes from text the decimal point is shifted on the digits
//! themselves and "8.2 cm" becomes exactly 82 mm.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{fold_term, CanonicalUnit, FieldSpec, SynonymTable, ValueType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("`{unit}` is not convertible to {expected}")]
    IncompatibleUnit { unit: String, expected: String },
    #[error("value `{token}` is not in the vocabulary of `{field_id}`")]
    ValueOutOfVocabulary { field_id: String, token: String },
    #[error("cannot parse a number from `{0}`")]
    NumericParse(String),
    #[error("empty value")]
    EmptyValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalTerm {
    pub token: String,
    pub surface_form: String,
    /// False when the surface form had no table entry and `token` is just
    /// the folded input.
    pub mapped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitValue {
    pub magnitude: f64,
    pub unit: CanonicalUnit,
}

/// A normalized field value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizedValue {
    Category(String),
    Quantity(UnitValue),
    Boolean(bool),
    Text(String),
}

impl NormalizedValue {
    /// Canonical cell rendering: tokens as-is, magnitudes in shortest
    /// round-trip decimal form without unit, booleans as yes/no.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// The value as plain JSON (string, number or bool).
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            NormalizedValue::Category(t) | NormalizedValue::Text(t) => t.clone().into(),
            NormalizedValue::Quantity(q) => q.magnitude.into(),
            NormalizedValue::Boolean(b) => (*b).into(),
        }
    }
}

impl fmt::Display for NormalizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizedValue::Category(t) | NormalizedValue::Text(t) => f.write_str(t),
            NormalizedValue::Quantity(q) => write!(f, "{}", q.magnitude),
            NormalizedValue::Boolean(true) => f.write_str("yes"),
            NormalizedValue::Boolean(false) => f.write_str("no"),
        }
    }
}

/// A recognised unit: its canonical unit and the power of ten that converts
/// one of it into the canonical unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitScale {
    pub canonical: CanonicalUnit,
    pub exponent: i32,
}

pub fn lookup_unit(unit: &str) -> Option<UnitScale> {
    use CanonicalUnit::*;
    let folded = fold_term(unit);
    let (canonical, exponent) = match folded.trim_end_matches('.') {
        "mm" | "millimetre" | "millimetres" | "millimeter" | "millimeters" => (Millimetre, 0),
        "cm" | "centimetre" | "centimetres" | "centimeter" | "centimeters" => (Millimetre, 1),
        "m" | "metre" | "metres" | "meter" | "meters" => (Millimetre, 3),
        "ml" | "millilitre" | "millilitres" | "milliliter" | "milliliters" | "cc" | "cm3" | "cm³" => {
            (Millilitre, 0)
        }
        "l" | "litre" | "litres" | "liter" | "liters" => (Millilitre, 3),
        _ => return None,
    };
    Some(UnitScale { canonical, exponent })
}

/// Case-folded, whitespace-collapsed synonym lookup. Misses are returned
/// as the folded input with `mapped = false`.
pub fn normalize_term(raw: &str, table: &SynonymTable) -> CanonicalTerm {
    match table.lookup(raw) {
        Some(token) => CanonicalTerm {
            token: token.to_string(),
            surface_form: raw.to_string(),
            mapped: true,
        },
        None => CanonicalTerm {
            token: fold_term(raw),
            surface_form: raw.to_string(),
            mapped: false,
        },
    }
}

pub fn normalize_unit(magnitude: f64, unit: &str) -> Result<UnitValue, NormalizeError> {
    if !magnitude.is_finite() {
        return Err(NormalizeError::NumericParse(magnitude.to_string()));
    }
    let scale = lookup_unit(unit).ok_or_else(|| NormalizeError::UnknownUnit(unit.to_string()))?;
    Ok(UnitValue {
        magnitude: magnitude * 10f64.powi(scale.exponent),
        unit: scale.canonical,
    })
}

/// Expresses a canonical value in another unit of the same dimension.
pub fn express_in(value: UnitValue, unit: &str) -> Result<f64, NormalizeError> {
    let scale = lookup_unit(unit).ok_or_else(|| NormalizeError::UnknownUnit(unit.to_string()))?;
    if scale.canonical != value.unit {
        return Err(NormalizeError::IncompatibleUnit {
            unit: unit.to_string(),
            expected: value.unit.token().to_string(),
        });
    }
    Ok(value.magnitude / 10f64.powi(scale.exponent))
}

/// Moves the decimal point of a plain decimal literal `exponent` places to
/// the right and parses the result.
fn shift_decimal(literal: &str, exponent: i32) -> Option<f64> {
    let (sign, digits) = match literal.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", literal.strip_prefix('+').unwrap_or(literal)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let point = int_part.len() as i64 + i64::from(exponent);
    let shifted = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), all)
    } else if point as usize >= all.len() {
        format!("{}{}", all, "0".repeat(point as usize - all.len()))
    } else {
        format!("{}.{}", &all[..point as usize], &all[point as usize..])
    };
    format!("{sign}{shifted}").parse().ok()
}

fn split_number_unit(raw: &str) -> Option<(&str, &str)> {
    let s = raw.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || (i == 0 && (c == '-' || c == '+'))))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    Some((&s[..end], s[end..].trim()))
}

/// Normalizes a raw extracted string according to the field's value type.
pub fn normalize_field(
    raw: &str,
    spec: &FieldSpec,
    table: &SynonymTable,
) -> Result<NormalizedValue, NormalizeError> {
    if raw.trim().is_empty() {
        return Err(NormalizeError::EmptyValue);
    }
    match spec.value_type {
        ValueType::Categorical => {
            let term = normalize_term(raw, table);
            let allowed = spec.allowed_values.as_deref().unwrap_or_default();
            if allowed.contains(&term.token) {
                Ok(NormalizedValue::Category(term.token))
            } else {
                Err(NormalizeError::ValueOutOfVocabulary {
                    field_id: spec.field_id.clone(),
                    token: term.token,
                })
            }
        }
        ValueType::Numeric => {
            let canonical = spec
                .canonical_unit
                .expect("validated schema: numeric fields carry a unit");
            let (number, unit) =
                split_number_unit(raw).ok_or_else(|| NormalizeError::NumericParse(raw.to_string()))?;
            let scale = if unit.is_empty() {
                UnitScale { canonical, exponent: 0 }
            } else {
                lookup_unit(unit).ok_or_else(|| NormalizeError::UnknownUnit(unit.to_string()))?
            };
            if scale.canonical != canonical {
                return Err(NormalizeError::IncompatibleUnit {
                    unit: unit.to_string(),
                    expected: canonical.token().to_string(),
                });
            }
            let magnitude = shift_decimal(number, scale.exponent)
                .filter(|m| m.is_finite())
                .ok_or_else(|| NormalizeError::NumericParse(raw.to_string()))?;
            Ok(NormalizedValue::Quantity(UnitValue {
                magnitude,
                unit: canonical,
            }))
        }
        ValueType::Boolean => {
            let term = normalize_term(raw, table);
            match term.token.as_str() {
                "yes" | "true" | "y" | "present" | "positive" => Ok(NormalizedValue::Boolean(true)),
                "no" | "false" | "n" | "absent" | "negative" => Ok(NormalizedValue::Boolean(false)),
                _ => Err(NormalizeError::ValueOutOfVocabulary {
                    field_id: spec.field_id.clone(),
                    token: term.token,
                }),
            }
        }
        ValueType::Text => Ok(NormalizedValue::Text(raw.trim().to_string())),
    }
}
