//! JSON parameter checkpoints.
//!
//! Layout (version 1):
//!
//! ```json
//! { "format": "signalfuse-params", "version": 1,
//!   "params": { "<name>": { "shape": [r, c], "values": [ ... ] } } }
//! ```
//!
//! Floats are written with shortest round-trip formatting, so a reload is
//! bit-identical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const PARAMS_FORMAT: &str = "signalfuse-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    params: BTreeMap<String, Entry>,
}

pub fn params_to_json(params: &Params) -> serde_json::Value {
    let doc = Document {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        params: params
            .iter()
            .map(|(k, t)| {
                (
                    k.clone(),
                    Entry {
                        shape: t.shape().to_vec(),
                        values: t.values().to_vec(),
                    },
                )
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("params serialize")
}

pub fn params_from_json(value: &serde_json::Value) -> Result<Params> {
    let doc: Document = serde_json::from_value(value.clone())
        .map_err(|e| Error::Checkpoint(format!("malformed parameter map: {e}")))?;
    if doc.format != PARAMS_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format `{}`", doc.format)));
    }
    if doc.version != PARAMS_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", doc.version)));
    }
    let mut params = Params::new();
    for (name, e) in doc.params {
        let t = Tensor::new(e.shape, e.values)
            .map_err(|err| Error::Checkpoint(format!("`{name}`: {err}")))?;
        params.insert(name, t);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reload_is_bit_identical() {
        let mut p = Params::new();
        p.insert("a", Tensor::new(vec![2, 2], vec![0.1, 1.0 / 3.0, -2e-300, 7.5]).unwrap());
        p.insert("b", Tensor::scalar(std::f64::consts::PI));
        let text = serde_json::to_string(&params_to_json(&p)).unwrap();
        let back = params_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn version_is_checked() {
        let mut v = params_to_json(&Params::new());
        v["version"] = serde_json::json!(99);
        assert!(params_from_json(&v).is_err());
    }
}
