// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Orchestrator configuration: a TOML file plus `NSL_PORT` / `NSL_DATA_DIR` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nslice_core::infra::{ResourceVector, DEFAULT_OVERBOOKING_FACTOR};
use nslice_core::lifecycle::{LifecycleConfig, DEFAULT_PRIORITY};
use nslice_core::placement::{Objective, ObjectiveKind, ReservationMode};
use nslice_core::slice_design::DEFAULT_MAX_OPTIONAL_ILS;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PORT: &str = "NSL_PORT";
pub const ENV_DATA_DIR: &str = "NSL_DATA_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    /// Directory holding `vnfs.*`, `nsds.*` and `templates.*`.
    pub catalog_dir: PathBuf,
    /// Optional `<template_id>.csv` traffic profiles; a missing file means a flat profile.
    pub profiles_dir: Option<PathBuf>,
    /// Static `[[tenants]]` registry with bearer tokens.
    pub tenants_file: Option<PathBuf>,
    /// Append a full state snapshot after this many events (0 disables snapshots).
    pub snapshot_every: u64,
    /// Run `/process` in the background and answer 202.
    pub async_process: bool,
    /// Overbooking factor β applied to soft reservations.
    pub overbooking_factor: f64,
    pub reservation_mode: ReservationMode,
    pub max_optional_ils: usize,
    pub placement: PlacementConfig,
    pub lifecycle: LifecycleConfig,
    pub priority: PriorityTable,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: 8080,
            data_dir: PathBuf::from("data"),
            catalog_dir: PathBuf::from("catalog"),
            profiles_dir: None,
            tenants_file: None,
            snapshot_every: 100,
            async_process: false,
            overbooking_factor: DEFAULT_OVERBOOKING_FACTOR,
            reservation_mode: ReservationMode::Hard,
            max_optional_ils: DEFAULT_MAX_OPTIONAL_ILS,
            placement: PlacementConfig::default(),
            lifecycle: LifecycleConfig::default(),
            priority: PriorityTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    pub objective: ObjectiveKind,
    /// Weights for vcpu, mem_gb and storage_gb.
    pub weights: [u64; 3],
    pub preferred_pops: Vec<String>,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig { objective: ObjectiveKind::MinResource, weights: [1, 1, 1], preferred_pops: Vec::new() }
    }
}

impl PlacementConfig {
    pub fn objective(&self) -> Objective {
        Objective {
            kind: self.objective,
            weights: ResourceVector::new(self.weights[0], self.weights[1], self.weights[2]),
            preferred_pops: self.preferred_pops.iter().map(nslice_core::infra::PopId::new).collect(),
        }
    }
}

/// Slice priority 0..=9 by tenant, falling back to `default`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorityTable {
    pub default: u8,
    pub tenants: BTreeMap<String, u8>,
}

impl Default for PriorityTable {
    fn default() -> Self {
        PriorityTable { default: DEFAULT_PRIORITY, tenants: BTreeMap::new() }
    }
}

impl PriorityTable {
    pub fn of(&self, tenant: &str) -> u8 {
        self.tenants.get(tenant).copied().unwrap_or(self.default)
    }
}

impl Config {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Config::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.catalog_dir);
        if let Some(p) = self.profiles_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.tenants_file.as_mut() {
            fix(p);
        }
    }

    /// Applies `NSL_PORT` and `NSL_DATA_DIR` from the given lookup.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(p) = get(ENV_PORT) {
            self.port = p.parse().map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={p} is not a port")))?;
        }
        if let Some(d) = get(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(d);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.overbooking_factor >= 1.0 && self.overbooking_factor.is_finite()) {
            return bad("overbooking_factor must be a finite number >= 1");
        }
        if !(0.0..1.0).contains(&self.lifecycle.hysteresis) {
            return bad("lifecycle.hysteresis must lie in [0, 1)");
        }
        if self.placement.weights.contains(&0) {
            return bad("placement.weights must be positive");
        }
        if self.priority.default > 9 || self.priority.tenants.values().any(|p| *p > 9) {
            return bad("priorities must lie in 0..=9");
        }
        Ok(())
    }
}
