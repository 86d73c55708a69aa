//! Configuration merging. A subcommand's parameters come from an optional
//! JSON file overlaid by command-line flags; unknown keys are rejected and
//! every default that gets applied is written back so the report echoes it.

use crate::Failure;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => {
            if !t.is_null() {
                *b = t;
            }
        }
    }
}

/// File values first, then every flag that was given.
pub fn resolve<P: Serialize + DeserializeOwned>(flags: &P, file: Option<&Path>) -> Result<P, Failure> {
    let mut merged = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))?;
            if !v.is_object() {
                return Err(Failure::Validation("config must be a JSON object".into()));
            }
            v
        }
        None => Value::Object(Map::new()),
    };
    let cli = serde_json::to_value(flags).map_err(|e| Failure::Internal(e.to_string()))?;
    overlay(&mut merged, cli);
    serde_json::from_value(merged).map_err(|e| Failure::Validation(format!("config: {e}")))
}

/// `Some` defaults for every unset option, so nothing is silently defaulted.
#[macro_export]
macro_rules! defaults {
    ($self:ident { $($field:ident : $value:expr),* $(,)? }) => {
        $( if $self.$field.is_none() { $self.$field = Some($value.into()); } )*
    };
}
