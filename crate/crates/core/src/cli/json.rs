//! Deterministic JSON text: sorted keys, two-space indent, floats at 17 significant digits.

use crate::numerics::{fmt17, C};
use serde_json::{json, Value};

pub const SCHEMA: u64 = 1;

/// Complex number as `[re, im]`.
pub fn cjson(z: C) -> Value {
    json!([z.re, z.im])
}

pub fn cjson_list(zs: &[C]) -> Value {
    Value::Array(zs.iter().map(|z| cjson(*z)).collect())
}

fn number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        let x = n.as_f64().unwrap_or(f64::NAN);
        if x.is_finite() {
            fmt17(x)
        } else {
            "null".into()
        }
    } else {
        n.to_string()
    }
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) if a.iter().all(|x| x.is_number()) => {
            let items: Vec<String> = a.iter().map(|x| if let Value::Number(n) = x { number(n) } else { unreachable!() }).collect();
            out.push('[');
            out.push_str(&items.join(", "));
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write(&m[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = render(&json!({"b": 0.1, "a": [1, 2.5], "c": {"z": null, "y": "q\"t"}}));
        assert_eq!(
            s,
            "{\n  \"a\": [1, 2.5000000000000000e0],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {\n    \"y\": \"q\\\"t\",\n    \"z\": null\n  }\n}\n"
        );
    }

    #[test]
    fn output_parses_back() {
        let v = json!({"x": [1e-300, -3.25], "n": f64::NAN.to_string()});
        let back: Value = serde_json::from_str(&render(&v)).unwrap();
        assert_eq!(back["x"][1], json!(-3.25));
    }
}
