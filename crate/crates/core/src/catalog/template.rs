// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{invalid, CatalogError, PerformanceVector};
use crate::window::{validate_window_list, TimeWindow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NetworkReqs {
    pub performance: PerformanceVector,
    #[serde(default)]
    pub functional: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OperationalReqs {
    #[serde(default)]
    pub visible_metrics: BTreeSet<String>,
    #[serde(default)]
    pub allowed_actions: BTreeSet<String>,
}

/// Values a tenant may pick for a customizable attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum AllowedRange {
    Numeric { min: u64, max: u64 },
    Subset { subset_of: BTreeSet<String> },
}

impl AllowedRange {
    pub fn is_empty(&self) -> bool {
        match self {
            AllowedRange::Numeric { min, max } => min > max,
            AllowedRange::Subset { subset_of } => subset_of.is_empty(),
        }
    }
}

/// The requirement sections of a template (or of an order, once overrides are applied).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Requirements {
    /// Ordered chain of technology-agnostic node functions.
    pub topology: Vec<String>,
    pub network_reqs: NetworkReqs,
    #[serde(default)]
    pub temporal_reqs: Vec<TimeWindow>,
    /// Node function tag → regions where it may run. Tags absent here are unconstrained.
    #[serde(default)]
    pub geo_reqs: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub operational_reqs: OperationalReqs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ServiceTemplate {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub topology: Vec<String>,
    pub network_reqs: NetworkReqs,
    #[serde(default)]
    pub temporal_reqs: Vec<TimeWindow>,
    #[serde(default)]
    pub geo_reqs: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub operational_reqs: OperationalReqs,
    /// Dotted attribute path (relative to the requirement sections) → allowed values.
    #[serde(default)]
    pub customizable: BTreeMap<String, AllowedRange>,
}

impl ServiceTemplate {
    pub fn requirements(&self) -> Requirements {
        Requirements {
            topology: self.topology.clone(),
            network_reqs: self.network_reqs.clone(),
            temporal_reqs: self.temporal_reqs.clone(),
            geo_reqs: self.geo_reqs.clone(),
            operational_reqs: self.operational_reqs.clone(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), CatalogError> {
        if self.topology.is_empty() {
            return Err(invalid(&self.id, "topology is empty"));
        }
        if !self.network_reqs.performance.is_positive() {
            return Err(invalid(&self.id, "performance requirements must be positive"));
        }
        for tag in self.geo_reqs.keys() {
            if !self.topology.contains(tag) {
                return Err(invalid(&self.id, format!("geo requirement for {tag} which is not in the topology")));
            }
        }
        validate_window_list(&self.temporal_reqs).map_err(|e| invalid(&self.id, e.to_string()))?;
        let reqs = serde_json::to_value(self.requirements()).expect("requirements serialize");
        for (path, range) in &self.customizable {
            if range.is_empty() {
                return Err(invalid(&self.id, format!("customizable range for {path} is empty")));
            }
            let Some(current) = lookup_path(&reqs, path) else {
                return Err(invalid(&self.id, format!("customizable path {path} does not exist")));
            };
            let kind_ok = match range {
                AllowedRange::Numeric { .. } => current.is_u64(),
                AllowedRange::Subset { .. } => current.is_array(),
            };
            if !kind_ok {
                return Err(invalid(&self.id, format!("range kind for {path} does not match the attribute")));
            }
        }
        Ok(())
    }
}

/// Walks a dotted path through objects (by key) and arrays (by index).
pub(crate) fn lookup_path<'a>(value: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    path.split('.').try_fold(value, |cur, seg| match cur {
        serde_json::Value::Object(m) => m.get(seg),
        serde_json::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

pub(crate) fn lookup_path_mut<'a>(
    value: &'a mut serde_json::Value,
    path: &str,
) -> Option<&'a mut serde_json::Value> {
    path.split('.').try_fold(value, |cur, seg| match cur {
        serde_json::Value::Object(m) => m.get_mut(seg),
        serde_json::Value::Array(a) => seg.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    })
}
