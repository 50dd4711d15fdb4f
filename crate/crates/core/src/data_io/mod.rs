//! Manifests, synthetic data, and versioned JSON artifacts.

mod manifest;
mod model_file;
mod synth;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use manifest::{load_manifest, save_manifest, Manifest, ManifestRecord, COLUMNS};
pub use model_file::{load_model, model_from_str, model_to_string, save_model, ModelFormat};
pub use synth::{synth_generate, Bump, LinearEncoding, SynthField, SynthSpec, FIELD_KIND};

/// Version written into every JSON artifact.
pub const FORMAT_VERSION: u64 = 1;

/// Requires a top-level `format_version` equal to [`FORMAT_VERSION`].
pub fn check_version(value: &serde_json::Value) -> Result<()> {
    let found = value
        .get("format_version")
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?
        .as_u64()
        .ok_or_else(|| Error::Corrupt("format_version is not an unsigned integer".into()))?;
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Serializes a struct as a JSON object with `format_version` prepended.
pub fn versioned_json<T: Serialize>(value: &T) -> String {
    let mut map = serde_json::Map::new();
    map.insert("format_version".into(), FORMAT_VERSION.into());
    match serde_json::to_value(value).expect("artifact serializes") {
        serde_json::Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("json value serializes") + "\n"
}

pub fn write_versioned_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, versioned_json(value)).map_err(|e| Error::io(path, e))
}
