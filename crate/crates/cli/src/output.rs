//! Report emission: one JSON document or `key: value` lines.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Value};

pub const SCHEMA: &str = "genbound/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa.to_string()), exp)
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Compact JSON with `%.17g` floats; non-finite values become strings.
struct FloatFormatter;

impl Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let s = format_f64(value);
        if value.is_finite() {
            writer.write_all(s.as_bytes())
        } else {
            write!(writer, "\"{s}\"")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FloatFormatter);
    value.serialize(&mut ser).expect("serialisable report");
    String::from_utf8(buf).expect("utf-8 json")
}

/// Non-finite floats become strings.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Value {
    crate::value::to_value(value).expect("serialisable report")
}

/// Top-level document: schema tag, command name, then the payload fields.
pub fn envelope(command: &str, payload: Value) -> Value {
    let mut doc = Map::new();
    doc.insert("schema".into(), SCHEMA.into());
    doc.insert("command".into(), command.into());
    match payload {
        Value::Object(m) => doc.extend(m),
        other => {
            doc.insert("result".into(), other);
        }
    }
    Value::Object(doc)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("null".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format_f64(f),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(xs) if xs.iter().all(|x| scalar(x).is_some()) => {
            let items: Vec<String> = xs.iter().map(|x| scalar(x).unwrap()).collect();
            out.push(format!("{prefix}: [{}]", items.join(", ")));
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push(format!("{prefix}: {}", scalar(other).unwrap())),
    }
}

pub fn render(doc: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = to_json_string(doc);
            s.push('\n');
            s
        }
        Format::Text => {
            let mut lines = Vec::new();
            flatten("", doc, &mut lines);
            let mut s = lines.join("\n");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.5), "0.5");
        assert_eq!(format_f64(0.1), "0.10000000000000001");
        assert_eq!(format_f64(49.0 / 9.0), "5.4444444444444446");
        assert_eq!(format_f64(4.0), "4");
        assert_eq!(format_f64(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_f64(1e20), "1e20");
        assert_eq!(format_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn roundtrip_exact() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789, -7.25e-9] {
            let back: f64 = format_f64(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn non_finite_as_strings() {
        let v = to_value(&vec![1.5, f64::INFINITY]);
        assert_eq!(to_json_string(&v), "[1.5,\"inf\"]");
    }

    #[test]
    fn text_lines() {
        let doc = envelope("x", serde_json::json!({"a": {"b": 0.5, "c": [1, 2]}, "d": "s"}));
        let t = render(&doc, Format::Text);
        assert_eq!(t, "schema: genbound/1\ncommand: x\na.b: 0.5\na.c: [1, 2]\nd: s\n");
    }
}
