//! Component library and rule-set configuration files.
//!
//! ```json
//! {
//!   "power_split":    { "loss_db": { "1510": 4.16, "1550": 4.07 } },
//!   "wavelength_mux": { "loss_db": { "1510": 1.27, "1550": 1.86 } },
//!   "amplifier":      { "gain_db": { "1550": 20.0 } },
//!   "rules":          { "preamp_floor": -26.38 }
//! }
//! ```
//!
//! Kind names also accept `S`/`M`. Every key is optional; rule fields left
//! out keep their defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bsd::ThresholdRuleSet;
use crate::error::{Error, Result};
use crate::optics::{ComponentKind, ComponentLibrary, ComponentSpec, WavelengthNm};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss_db: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain_db: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub library: ComponentLibrary,
    pub rules: Option<ThresholdRuleSet>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let root: BTreeMap<String, Value> = serde_json::from_str(text)
            .map_err(|e| cfg_err(format!("config is not a JSON object: {e}")))?;
        let mut out = ConfigFile::default();
        for (key, value) in root {
            if key == "rules" {
                let rules: ThresholdRuleSet =
                    serde_json::from_value(value).map_err(|e| cfg_err(format!("rules: {e}")))?;
                rules.validate()?;
                out.rules = Some(rules);
                continue;
            }
            let kind: ComponentKind = serde_json::from_value(Value::String(key.clone()))
                .map_err(|_| cfg_err(format!("unknown component kind {key:?}")))?;
            let entry: EffectEntry =
                serde_json::from_value(value).map_err(|e| cfg_err(format!("{key}: {e}")))?;
            let table = match (kind.is_passive(), entry.loss_db, entry.gain_db) {
                (true, Some(t), None) | (false, None, Some(t)) => t,
                (true, ..) => {
                    return Err(cfg_err(format!(
                        "{key}: expected exactly a \"loss_db\" map"
                    )))
                }
                (false, ..) => {
                    return Err(cfg_err(format!(
                        "{key}: expected exactly a \"gain_db\" map"
                    )))
                }
            };
            let effects = table
                .into_iter()
                .map(|(wl, db)| {
                    let nm: f64 = wl
                        .trim()
                        .parse()
                        .map_err(|_| cfg_err(format!("{key}: bad wavelength key {wl:?}")))?;
                    Ok((
                        WavelengthNm::new(nm).map_err(|e| cfg_err(e.to_string()))?,
                        db,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            out.library.insert(ComponentSpec::new(kind, effects)?);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut root = serde_json::Map::new();
        for spec in self.library.specs() {
            let table: BTreeMap<String, f64> = spec
                .effects()
                .iter()
                .map(|(wl, db)| (wl.value().to_string(), *db))
                .collect();
            let entry = if spec.kind().is_passive() {
                EffectEntry {
                    loss_db: Some(table),
                    ..Default::default()
                }
            } else {
                EffectEntry {
                    gain_db: Some(table),
                    ..Default::default()
                }
            };
            root.insert(
                spec.kind().name().to_string(),
                serde_json::to_value(entry).expect("plain data"),
            );
        }
        if let Some(rules) = &self.rules {
            root.insert(
                "rules".into(),
                serde_json::to_value(rules).expect("plain data"),
            );
        }
        serde_json::to_string_pretty(&Value::Object(root)).expect("plain data")
    }
}
