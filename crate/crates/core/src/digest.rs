//! Stable content digests for configurations and output files.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 of the canonical JSON form of `value`.
///
/// Object keys are emitted in sorted order, so two values that differ only in
/// field ordering hash identically.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let canonical = canonicalize(serde_json::to_value(value).expect("serializable configuration"));
    bytes_digest(canonical.to_string().as_bytes())
}

fn canonicalize(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: std::collections::BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn bytes_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
