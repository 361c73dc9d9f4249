//! JSON schema of light descriptors, with the ranges the server enforces.

use lumiedit_core::light::params::lambda_bounds;
use lumiedit_core::sg::Lobe;
use serde_json::{json, Value};

fn vec3() -> Value {
    json!({"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3})
}

fn rgb() -> Value {
    json!({"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 3, "maxItems": 3})
}

fn lobe(l: Lobe) -> Value {
    let (lo, hi) = lambda_bounds(l);
    json!({
        "type": "object",
        "required": ["w", "lambda", "d"],
        "properties": {
            "w": rgb(),
            "lambda": {"type": "number", "minimum": 0, "x-slider": {"scale": "log", "min": lo, "max": hi}},
            "d": {"description": "unit direction", "allOf": [vec3()]}
        }
    })
}

fn common(kind: &str) -> Value {
    json!({
        "type": {"const": kind},
        "id": {"type": ["string", "number"], "minLength": 1},
        "enabled": {"type": "boolean", "default": true}
    })
}

fn object(kind: &str, required: &[&str], extra: Value) -> Value {
    let mut props = common(kind);
    for (k, v) in extra.as_object().unwrap() {
        props[k] = v.clone();
    }
    let mut req = vec!["type", "id"];
    req.extend_from_slice(required);
    json!({"type": "object", "required": req, "properties": props})
}

pub fn light_schema() -> Value {
    let window = object(
        "window",
        &["c", "x", "y", "radiance"],
        json!({
            "visible": {"type": "boolean", "default": false},
            "c": vec3(),
            "x": {"description": "half-extent axis", "allOf": [vec3()]},
            "y": {"description": "half-extent axis, orthogonal to x", "allOf": [vec3()]},
            "mask_id": {"type": "string"},
            "radiance": {
                "type": "object",
                "required": ["sun", "sky", "ground"],
                "properties": {"sun": lobe(Lobe::Sun), "sky": lobe(Lobe::Sky), "ground": lobe(Lobe::Ground)}
            }
        }),
    );
    let box_lamp = object(
        "box_lamp",
        &["c", "x", "y", "z", "w"],
        json!({
            "visible": {"type": "boolean", "default": false},
            "c": vec3(),
            "x": {"description": "half-extent axes, mutually orthogonal", "allOf": [vec3()]},
            "y": vec3(),
            "z": vec3(),
            "w": rgb()
        }),
    );
    let surfel = object(
        "surfel_lamp",
        &["w"],
        json!({
            "visible": {"type": "boolean", "default": true},
            "c": vec3(),
            "w": rgb(),
            "mask_id": {"type": "string"}
        }),
    );
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "light",
        "oneOf": [window, box_lamp, surfel]
    })
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "array" => v.is_array(),
        "object" => v.is_object(),
        _ => true,
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Structural check of `v` against the subset of JSON schema used above:
/// types, required properties, array lengths, `const` and `oneOf` keyed by
/// the `type` tag. Numeric ranges are left to the physical validation.
/// Errors carry the path of the offending value.
pub fn check(schema: &Value, v: &Value, path: &str) -> Result<(), (String, String)> {
    let fail = |msg: String| Err((path.to_string(), msg));
    if let Some(c) = schema.get("const") {
        if v != c {
            return fail(format!("expected {c}"));
        }
    }
    match schema.get("type") {
        Some(Value::String(t)) if !type_matches(t, v) => return fail(format!("expected {t}")),
        Some(Value::Array(ts)) if !ts.iter().any(|t| type_matches(t.as_str().unwrap_or(""), v)) => {
            return fail(format!("expected one of {}", Value::Array(ts.clone())));
        }
        _ => {}
    }
    if let Some(all) = schema.get("allOf").and_then(Value::as_array) {
        for s in all {
            check(s, v, path)?;
        }
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let tag = v.get("type");
        let chosen = options.iter().find(|o| o["properties"]["type"].get("const") == tag);
        return match chosen {
            Some(s) => check(s, v, path),
            None => {
                let kinds: Vec<&Value> = options.iter().map(|o| &o["properties"]["type"]["const"]).collect();
                Err((join(path, "type"), format!("expected one of {kinds:?}")))
            }
        };
    }
    if let Some(obj) = v.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap_or("");
            if !obj.contains_key(key) {
                return Err((join(path, key), "missing".into()));
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (k, sub) in props {
                if let Some(x) = obj.get(k) {
                    check(sub, x, &join(path, k))?;
                }
            }
        }
    }
    if let Some(items) = v.as_array() {
        let len = items.len() as u64;
        if schema.get("minItems").and_then(Value::as_u64).is_some_and(|n| len < n)
            || schema.get("maxItems").and_then(Value::as_u64).is_some_and(|n| len > n)
        {
            return fail(format!("wrong length {len}"));
        }
        if let Some(sub) = schema.get("items") {
            for (i, x) in items.iter().enumerate() {
                check(sub, x, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
