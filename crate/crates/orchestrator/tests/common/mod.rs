// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nslice_core::catalog::load_catalog;
use nslice_core::infra::InfrastructureMap;
use nslice_orchestrator::config::Config;
use nslice_orchestrator::engine::{Clock, Engine};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn config(extra: &str) -> Config {
    let text = format!("catalog_dir = \"edge\"\nprofiles_dir = \"profiles\"\n{extra}");
    Config::from_toml(&text, &fixtures()).unwrap()
}

pub fn infra() -> InfrastructureMap {
    InfrastructureMap::load(&fixtures().join("infra.toml")).unwrap()
}

pub fn engine() -> Engine {
    let cfg = config("");
    let cat = load_catalog(&cfg.catalog_dir).unwrap();
    Engine::in_memory(cat, infra(), cfg, Clock::Fixed(0))
}

/// A file-backed engine rooted at `data`, with the fixture infrastructure installed.
pub fn file_engine(data: &Path, extra: &str) -> Engine {
    let mut cfg = config(extra);
    cfg.data_dir = data.to_path_buf();
    if !data.join("infra.json").exists() {
        Engine::install_infra(data, &infra(), false).unwrap();
    }
    Engine::open(cfg, Clock::Fixed(0)).unwrap()
}
