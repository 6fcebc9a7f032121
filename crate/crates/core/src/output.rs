//! Machine-readable output helpers shared by the table writer and the CLI.
//!
//! Records are flat JSON objects; CSV headers are taken from the first
//! record's keys in insertion order.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Version tag placed at the top level of every JSON document.
pub const SCHEMA: &str = "mdpcal/1";

/// Default number of significant digits for printed reals.
pub const DEFAULT_PRECISION: usize = 6;

/// Round `x` to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    let digits = digits.clamp(1, 17);
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Recursively round every float in a JSON value. Integers are left alone.
pub fn round_value(v: &mut Value, digits: usize) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(x) = num.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x, digits)) {
                    *num = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|i| round_value(i, digits)),
        Value::Object(map) => map.values_mut().for_each(|i| round_value(i, digits)),
        _ => {}
    }
}

/// Serialise into a JSON value. Plain non-finite floats become `null`; fields
/// that can legitimately be infinite use [`extended_f64`].
pub fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Parse(e.to_string()))
}

/// Wrap a payload in a versioned document: `{"schema": ..., "kind": ..., <payload>}`.
pub fn document(kind: &str, payload: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), Value::String(SCHEMA.into()));
    map.insert("kind".into(), Value::String(kind.into()));
    match payload {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    Value::Object(map)
}

/// Serde adapter writing `+inf` as the string `"inf"` and finite values as
/// numbers.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Write flat records as CSV with a header row.
pub fn write_csv<W: Write>(records: &[Value], digits: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Parse(e.to_string());
    let Some(first) = records.first().and_then(Value::as_object) else {
        return w.flush().map_err(|e| Error::Parse(e.to_string()));
    };
    let header: Vec<&String> = first.keys().collect();
    w.write_record(header.iter().map(|k| k.as_str())).map_err(io_err)?;
    for rec in records {
        let mut rec = rec.clone();
        round_value(&mut rec, digits);
        let obj = rec
            .as_object()
            .ok_or_else(|| Error::Parse("CSV records must be JSON objects".into()))?;
        w.write_record(header.iter().map(|k| obj.get(k.as_str()).map(cell).unwrap_or_default()))
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn csv_string(records: &[Value], digits: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, digits, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

/// Serialise a slice of rows into JSON records.
pub fn records<T: Serialize>(rows: &[T]) -> Result<Vec<Value>> {
    rows.iter().map(to_value).collect()
}
