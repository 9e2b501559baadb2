// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Static tenant registry: bearer token → tenant id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    tenants: Vec<TenantEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TenantEntry {
    id: String,
    token: String,
}

#[derive(Debug, Clone, Default)]
pub struct TenantRegistry {
    by_token: BTreeMap<String, String>,
}

impl TenantRegistry {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut by_token = BTreeMap::new();
        for t in file.tenants {
            if t.token.is_empty() {
                return Err(format!("tenant {} has an empty token", t.id));
            }
            if by_token.insert(t.token, t.id.clone()).is_some() {
                return Err(format!("tenant {} reuses a token", t.id));
            }
        }
        Ok(TenantRegistry { by_token })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        TenantRegistry::from_toml(&text)
    }

    pub fn with(pairs: &[(&str, &str)]) -> Self {
        TenantRegistry { by_token: pairs.iter().map(|(id, tok)| (tok.to_string(), id.to_string())).collect() }
    }

    /// Tenant owning the value of an `Authorization` header, if any.
    pub fn authenticate(&self, header: Option<&str>) -> Option<&str> {
        let token = header?.strip_prefix("Bearer ")?.trim();
        self.by_token.get(token).map(String::as_str)
    }
}
