// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! In-process stand-ins for the per-slice management plane.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::descriptor::ChainingRule;
use crate::catalog::{OperationalReqs, Triplet};

/// Every metric the NSL manager can report.
pub const METRIC_NAMESPACE: [&str; 7] =
    ["availability", "current_il", "latency_ms", "load_ratio", "sessions", "throughput_mbps", "vcpu_in_use"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExposureError {
    #[error("metric {0} is not exposed to the tenant")]
    MetricNotExposed(String),
    #[error("action {0} is not allowed for the tenant")]
    ActionNotAllowed(String),
    #[error("management plane of {0} is torn down")]
    TornDown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NslManager {
    pub slice_id: String,
    pub exposure: OperationalReqs,
    /// Latest reading of every metric in the namespace.
    pub readings: BTreeMap<String, f64>,
}

impl NslManager {
    pub fn query(&self, metric: &str) -> Result<f64, ExposureError> {
        if !self.exposure.visible_metrics.contains(metric) {
            return Err(ExposureError::MetricNotExposed(metric.into()));
        }
        Ok(self.readings.get(metric).copied().unwrap_or(0.0))
    }

    /// The tenant-visible subset of the latest readings.
    pub fn exposed(&self) -> BTreeMap<String, f64> {
        self.readings
            .iter()
            .filter(|(k, _)| self.exposure.visible_metrics.contains(*k))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn authorize(&self, action: &str) -> Result<(), ExposureError> {
        if self.exposure.allowed_actions.contains(action) {
            Ok(())
        } else {
            Err(ExposureError::ActionNotAllowed(action.into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct NsOrchestrator {
    pub current_il: String,
    pub triplets: Vec<Triplet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Vnfm {
    /// Instance group id.
    pub vnf: String,
    pub instances: u32,
    pub applied_primitives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct TenantSdnController {
    pub chaining_rules: Vec<ChainingRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ManagementPlane {
    pub live: bool,
    pub nsl_manager: NslManager,
    pub ns_orchestrator: NsOrchestrator,
    pub vnfm_list: Vec<Vnfm>,
    pub tenant_sdn_controller: TenantSdnController,
}

impl ManagementPlane {
    pub fn query(&self, metric: &str) -> Result<f64, ExposureError> {
        if !self.live {
            return Err(ExposureError::TornDown(self.nsl_manager.slice_id.clone()));
        }
        self.nsl_manager.query(metric)
    }
}
