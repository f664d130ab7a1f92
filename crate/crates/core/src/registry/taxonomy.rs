use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::RegistryError;
use crate::codec::{BeaconConfig, ProximityUuid};

pub const DEFAULT_CATEGORY: &str = "visitor";

/// Category name → advertised configuration, plus the category given to
/// users the registry has never seen before.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileTaxonomy {
    categories: BTreeMap<String, BeaconConfig>,
    default_category: String,
}

impl ProfileTaxonomy {
    pub fn new(
        categories: BTreeMap<String, BeaconConfig>,
        default_category: impl Into<String>,
    ) -> Result<Self, RegistryError> {
        let default_category = default_category.into();
        if !categories.contains_key(&default_category) {
            return Err(RegistryError::InvalidTaxonomy(format!(
                "default category {default_category:?} is not defined"
            )));
        }
        Ok(Self {
            categories,
            default_category,
        })
    }

    pub fn get(&self, category: &str) -> Option<&BeaconConfig> {
        self.categories.get(category)
    }

    pub fn default_category(&self) -> &str {
        &self.default_category
    }

    pub fn default_config(&self) -> &BeaconConfig {
        &self.categories[&self.default_category]
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &BeaconConfig)> {
        self.categories.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Parses the taxonomy file format: a JSON object mapping category
    /// names to `{uuid, major, minor, power}` plus a `"default"` key naming
    /// the default category.
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| RegistryError::InvalidTaxonomy(e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, RegistryError> {
        let obj = value
            .as_object()
            .ok_or_else(|| RegistryError::InvalidTaxonomy("expected a JSON object".into()))?;
        let default = obj
            .get("default")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                RegistryError::InvalidTaxonomy("missing string key \"default\"".into())
            })?;
        let mut categories = BTreeMap::new();
        for (name, cfg) in obj.iter().filter(|(k, _)| k.as_str() != "default") {
            let cfg: BeaconConfig = serde_json::from_value(cfg.clone())
                .map_err(|e| RegistryError::InvalidTaxonomy(format!("category {name:?}: {e}")))?;
            categories.insert(name.clone(), cfg);
        }
        Self::new(categories, default)
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("default".into(), Value::String(self.default_category.clone()));
        for (name, cfg) in &self.categories {
            obj.insert(name.clone(), serde_json::to_value(cfg).expect("config serializes"));
        }
        Value::Object(obj)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("taxonomy serializes")
    }
}

impl Serialize for ProfileTaxonomy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProfileTaxonomy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Self::from_value(&value).map_err(serde::de::Error::custom)
    }
}

impl Default for ProfileTaxonomy {
    /// Three categories under one organization UUID, told apart by minor.
    fn default() -> Self {
        let uuid = ProximityUuid([
            0xf7, 0x82, 0x6d, 0xa6, 0x4f, 0xa2, 0x4e, 0x98, 0x80, 0x24, 0xbc, 0x5b, 0x71, 0xe0,
            0x89, 0x3e,
        ]);
        let categories = [("visitor", 1), ("student", 2), ("staff", 3)]
            .into_iter()
            .map(|(name, minor)| (name.to_owned(), BeaconConfig::new(uuid, 1, minor, -59)))
            .collect();
        Self::new(categories, DEFAULT_CATEGORY).expect("built-in taxonomy is valid")
    }
}
