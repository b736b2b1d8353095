//! Machine-readable reports.
//!
//! Reports are built as `serde_json::Value` so keys come out sorted and a
//! parsed report re-emits byte for byte. `timing_ms` is left out of
//! `report_digest`, which covers everything else.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::instance::digest;

pub struct Report {
    pub command: Value,
    pub instance_digest: String,
    pub result: Value,
}

impl Report {
    pub fn to_value(&self, timing_ms: f64) -> Value {
        let body = json!({
            "command": self.command,
            "instance_digest": self.instance_digest,
            "result": self.result,
        });
        let hash = digest(serde_json::to_string(&body).expect("json values serialize").as_bytes());
        let Value::Object(mut map) = body else { unreachable!() };
        map.insert("report_digest".into(), Value::String(hash));
        map.insert("timing_ms".into(), json!(timing_ms));
        Value::Object(map)
    }
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Flattened `path = value` lines for terminal reading.
pub fn to_text(v: &Value) -> String {
    let mut lines = BTreeMap::new();
    flatten("", v, &mut lines);
    let width = lines.keys().map(|k| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in lines {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    let numeric_leaf = |v: &Value| match v {
        Value::Array(items) => items.iter().all(|x| x.is_number() || x.is_null() || is_numeric_array(x)),
        _ => false,
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) if !numeric_leaf(v) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), compact(v));
        }
    }
}

fn is_numeric_array(v: &Value) -> bool {
    matches!(v, Value::Array(items) if items.iter().all(|x| x.is_number() || is_numeric_array(x)))
}

fn compact(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.6}").trim_end_matches('0').trim_end_matches('.').to_string(),
            _ => n.to_string(),
        },
        Value::Array(items) => format!("[{}]", items.iter().map(compact).collect::<Vec<_>>().join(", ")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparsed_report_reemits_identically() {
        let r = Report {
            command: json!({"name": "solve"}),
            instance_digest: "sha256:00".into(),
            result: json!({"prices": [0.1 + 0.2, 3.0, 1e-300], "zeta": 1, "alpha": [[0.3]]}),
        };
        let text = to_json(&r.to_value(1.25));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn digest_ignores_timing() {
        let r = Report {
            command: json!("x"),
            instance_digest: String::new(),
            result: json!(1.5),
        };
        assert_eq!(r.to_value(1.0)["report_digest"], r.to_value(99.0)["report_digest"]);
    }

    #[test]
    fn text_flattens_nested_values() {
        let text = to_text(&json!({"a": {"b": [1.5, 2.0]}, "c": [{"d": true}]}));
        assert!(text.contains("a.b"));
        assert!(text.contains("[1.5, 2]"));
        assert!(text.contains("c[0].d"));
    }
}
