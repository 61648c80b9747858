//! Typed scalar values shared by data, predicates and statistics.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Attribute kinds supported by the advisor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Integer,
    Decimal,
    Date,
    Text,
}

impl Kind {
    /// Storage width in bytes for fixed-length kinds.
    pub fn fixed_width(self) -> Option<u32> {
        match self {
            Kind::Integer => Some(4),
            Kind::Decimal => Some(8),
            Kind::Date => Some(4),
            Kind::Text => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Integer => "integer",
            Kind::Decimal => "decimal",
            Kind::Date => "date",
            Kind::Text => "text",
        }
    }

    /// Type name in the reference DBMS dialect used by catalog exports.
    pub fn sql_type(self) -> &'static str {
        match self {
            Kind::Integer => "int4",
            Kind::Decimal => "numeric",
            Kind::Date => "date",
            Kind::Text => "text",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed-point decimal with four fractional digits.
///
/// Stored as a scaled integer so that equality and ordering are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Decimal(i64);

impl Decimal {
    pub const SCALE: i64 = 10_000;

    pub fn from_scaled(raw: i64) -> Self {
        Decimal(raw)
    }

    pub fn from_int(v: i64) -> Self {
        Decimal(v * Self::SCALE)
    }

    pub fn scaled(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("invalid decimal '{s}'"));
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(format!("invalid decimal '{s}'"));
        }
        if frac_part.len() > 4 && frac_part[4..].chars().any(|c| c != '0') {
            return Err(format!("decimal '{s}' has more than 4 fractional digits"));
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| format!("decimal '{s}' out of range"))?
        };
        let mut frac = 0i64;
        let mut mul = 1_000i64;
        for c in frac_part.chars().take(4) {
            frac += (c as i64 - '0' as i64) * mul;
            mul /= 10;
        }
        let raw = int
            .checked_mul(Self::SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| format!("decimal '{s}' out of range"))?;
        Ok(Decimal(if neg { -raw } else { raw }))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / Self::SCALE as u64;
        let frac = abs % Self::SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{int}.0")
        } else {
            let digits = format!("{frac:04}");
            write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl From<Decimal> for String {
    fn from(d: Decimal) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Decimal {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A typed constant or attribute value. Attributes are NOT NULL throughout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Integer(i64),
    Decimal(Decimal),
    Date(NaiveDate),
    Text(String),
}

impl Value {
    pub fn kind(&self) -> Kind {
        match self {
            Value::Integer(_) => Kind::Integer,
            Value::Decimal(_) => Kind::Decimal,
            Value::Date(_) => Kind::Date,
            Value::Text(_) => Kind::Text,
        }
    }

    /// Stored byte length of this value.
    pub fn byte_len(&self) -> usize {
        match self {
            Value::Text(s) => s.len(),
            other => other.kind().fixed_width().unwrap_or(0) as usize,
        }
    }

    /// Parse a raw text cell as a value of `kind`.
    pub fn parse_as(kind: Kind, raw: &str) -> Result<Value, String> {
        match kind {
            Kind::Integer => raw
                .trim()
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| format!("invalid integer '{raw}'")),
            Kind::Decimal => raw.parse::<Decimal>().map(Value::Decimal),
            Kind::Date => NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| format!("invalid date '{raw}' (expected YYYY-MM-DD)")),
            Kind::Text => Ok(Value::Text(raw.to_string())),
        }
    }

    /// Coerce to the attribute's kind where the conversion is lossless.
    pub fn coerce(self, kind: Kind) -> Result<Value, String> {
        if self.kind() == kind {
            return Ok(self);
        }
        match (self, kind) {
            (Value::Integer(i), Kind::Decimal) => Ok(Value::Decimal(Decimal::from_int(i))),
            (Value::Decimal(d), Kind::Integer) if d.scaled() % Decimal::SCALE == 0 => {
                Ok(Value::Integer(d.scaled() / Decimal::SCALE))
            }
            (Value::Text(s), Kind::Date) => Value::parse_as(Kind::Date, &s),
            (v, k) => Err(format!("cannot use {} constant {v} as {k}", v.kind())),
        }
    }

    /// Numeric projection used for histogram interpolation.
    pub fn as_scalar(&self) -> f64 {
        match self {
            Value::Integer(i) => *i as f64,
            Value::Decimal(d) => d.to_f64(),
            Value::Date(d) => d.num_days_from_ce() as f64,
            Value::Text(s) => {
                let mut acc = 0.0;
                let mut scale = 1.0;
                for b in s.bytes().take(8) {
                    acc += b as f64 * scale;
                    scale /= 256.0;
                }
                acc
            }
        }
    }

    /// SQL literal rendering, re-parseable by the workload parser.
    pub fn sql_literal(&self) -> String {
        match self {
            Value::Integer(i) => i.to_string(),
            Value::Decimal(d) => d.to_string(),
            Value::Date(d) => format!("DATE '{}'", d.format("%Y-%m-%d")),
            Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }

    /// Plain rendering used inside CSV cells and array literals.
    pub fn raw_string(&self) -> String {
        match self {
            Value::Integer(i) => i.to_string(),
            Value::Decimal(d) => d.to_string(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Decimal(a), Value::Decimal(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            // binary collation
            (Value::Text(a), Value::Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            (a, b) => a.kind().cmp(&b.kind()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.sql_literal())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_and_print() {
        let d: Decimal = "12.5".parse().unwrap();
        assert_eq!(d.scaled(), 125_000);
        assert_eq!(d.to_string(), "12.5");
        assert_eq!("-0.0001".parse::<Decimal>().unwrap().scaled(), -1);
        assert_eq!("7".parse::<Decimal>().unwrap().to_string(), "7.0");
        assert!("1.23456".parse::<Decimal>().is_err());
        assert!("abc".parse::<Decimal>().is_err());
    }

    #[test]
    fn coercion_rules() {
        assert_eq!(
            Value::Integer(3).coerce(Kind::Decimal).unwrap(),
            Value::Decimal(Decimal::from_int(3))
        );
        let date = Value::Text("1997-12-01".into()).coerce(Kind::Date).unwrap();
        assert_eq!(date.kind(), Kind::Date);
        assert!(Value::Text("x".into()).coerce(Kind::Integer).is_err());
    }

    #[test]
    fn text_orders_bytewise() {
        assert!(Value::Text("B".into()) < Value::Text("a".into()));
        assert!(Value::Text("MFGR#12".into()) < Value::Text("MFGR#2".into()));
    }
}
