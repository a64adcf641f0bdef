//! Canonical JSON: keys sorted, two-space indentation, trailing newline.
//!
//! `serde_json::Value` objects are `BTreeMap`s, so routing every value
//! through `to_value` yields sorted keys regardless of struct field order or
//! map insertion order.

use serde::Serialize;

pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn to_canonical_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    to_canonical_string(value).map(String::into_bytes)
}
