//! Tolerant extraction of a JSON object from a raw model completion.
//!
//! Models wrap JSON in code fences, lead with prose, or trail off into
//! commentary. We take the first `{` from which a complete JSON object
//! parses, ignoring whatever follows it.

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub type JsonObject = Map<String, Value>;

/// First well-formed JSON object in `text`.
pub fn extract_json_object(text: &str) -> Result<JsonObject> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Ok(map);
        }
    }
    Err(Error::MalformedPayload)
}

pub(crate) fn required_str<'a>(obj: &'a JsonObject, field: &str) -> Result<&'a str> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(Error::SchemaViolation(format!(
            "{field} must be a string, got {}",
            kind(other)
        ))),
        None => Err(Error::SchemaViolation(format!(
            "missing required field {field}"
        ))),
    }
}

pub(crate) fn optional_str(obj: &JsonObject, field: &str) -> Result<String> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(_) => required_str(obj, field).map(|s| s.trim().to_string()),
    }
}

/// A list of strings, trimmed, with empty entries dropped. A bare string is
/// accepted as a one-element list; a missing field is an empty list.
pub(crate) fn string_list(obj: &JsonObject, field: &str) -> Result<Vec<String>> {
    let items = match obj.get(field) {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(values)) => values
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.as_str()),
                other => Err(Error::SchemaViolation(format!(
                    "{field} entries must be strings, got {}",
                    kind(other)
                ))),
            })
            .collect::<Result<_>>()?,
        Some(other) => {
            return Err(Error::SchemaViolation(format!(
                "{field} must be a list of strings, got {}",
                kind(other)
            )))
        }
    };
    Ok(items
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect())
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
