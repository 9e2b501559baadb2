// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Preparation, activation, run-time scaling and termination of a reserved slice.

mod descriptor;
mod mgmt;
mod sim;

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::descriptor::*;
pub use self::mgmt::*;
pub use self::sim::*;
use crate::admission::{build_request, AdmissionRequest, CandidateSet, FeasibleSolution, InstanceKey};
use crate::catalog::{resolve_nsl, Catalog, CatalogError, OperationalReqs, PerformanceVector};
use crate::infra::{InfrastructureMap, PopId};
use crate::ordering::{effective_requirements, OrderError, OrderStatus, ServiceOrder};
use crate::placement::{bookings, project_solution, release, BookingRequest, ReservationMode};
use crate::slice_design::NslDesign;
use crate::window::{Minute, TimeWindow};

pub const DEFAULT_PRIORITY: u8 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LifecycleError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("level {0} cannot run inside the target placement")]
    NotProjectable(String),
    #[error("minute {now} is outside every active window")]
    OutsideActiveWindow { now: Minute },
    #[error("slice {0} is not active")]
    NotActive(String),
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
    #[error("priority {0} outside 0..=9")]
    BadPriority(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LifecycleConfig {
    pub hysteresis: f64,
    pub down_sustain_minutes: u64,
    pub reporting_period_s: u64,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        LifecycleConfig { hysteresis: 0.1, down_sustain_minutes: 0, reporting_period_s: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuntimeState {
    Prepared,
    Active,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct VnfInstanceRecord {
    pub instance: InstanceKey,
    pub pop: PopId,
}

/// Live state of one slice. Bookings for every level are fixed at preparation time so
/// scaling never re-places anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SliceRuntime {
    pub slice_id: String,
    pub state: RuntimeState,
    pub current_il: String,
    pub target_il: String,
    pub priority: u8,
    pub exposure: OperationalReqs,
    pub mode: ReservationMode,
    pub windows: Vec<TimeWindow>,
    /// Performance the order asked for at full load.
    pub ordered: PerformanceVector,
    /// Declared latency of each level.
    pub il_latency_ms: BTreeMap<String, u64>,
    pub mgmt_plane: ManagementPlane,
    pub il_bookings: BTreeMap<String, Vec<BookingRequest>>,
    pub il_solutions: BTreeMap<String, FeasibleSolution>,
    pub instances: Vec<VnfInstanceRecord>,
    /// Hours simulated since activation.
    pub clock_hour: u32,
    /// Consecutive minutes each workflow's trigger has held before the current hour.
    pub held_minutes: BTreeMap<String, u64>,
}

/// Builds the descriptor and runtime for a `RESERVED` order and moves it to `PREPARED`.
#[allow(clippy::too_many_arguments)]
pub fn prepare(
    cat: &Catalog,
    order: &mut ServiceOrder,
    design: &NslDesign,
    target_req: &AdmissionRequest,
    solution: &FeasibleSolution,
    cfg: &LifecycleConfig,
    priority: u8,
) -> Result<(NslDescriptor, SliceRuntime), LifecycleError> {
    if order.status != OrderStatus::Reserved {
        return Err(OrderError::IllegalTransition { from: order.status, to: OrderStatus::Prepared }.into());
    }
    if priority > 9 {
        return Err(LifecycleError::BadPriority(priority));
    }
    let reqs =
        effective_requirements(cat, order).ok_or_else(|| LifecycleError::UnknownTemplate(order.template_id.clone()))?;
    let il_set: Vec<_> = design.all_ils().into_iter().cloned().collect();
    let mut il_bookings = BTreeMap::new();
    let mut il_solutions = BTreeMap::new();
    for il in &il_set {
        let dep = resolve_nsl(cat, il)?;
        let req = build_request(&order.id, &il.id, &dep, CandidateSet::new(), &target_req.windows, target_req.mode);
        let sol = project_solution(solution, &req).ok_or_else(|| LifecycleError::NotProjectable(il.id.clone()))?;
        il_bookings.insert(il.id.clone(), bookings(&req, &sol));
        il_solutions.insert(il.id.clone(), sol);
    }

    let target_dep = resolve_nsl(cat, &design.target_il)?;
    let mut config_primitives = BTreeMap::new();
    for g in &target_dep.groups {
        let invocations = cat.vnfs[&g.vnf_id]
            .config_primitives
            .iter()
            .map(|p| PrimitiveInvocation { primitive: p.name.clone(), args: BTreeMap::new() })
            .collect();
        config_primitives.insert(g.id.clone(), invocations);
    }
    let chaining_rules: Vec<ChainingRule> = target_dep
        .groups
        .windows(2)
        .map(|w| ChainingRule { from_vnf: w[0].id.clone(), to_vnf: w[1].id.clone(), match_spec: "any".into() })
        .collect();
    let mut metrics: BTreeSet<String> = reqs.operational_reqs.visible_metrics.clone();
    metrics.insert(LOAD_METRIC.into());
    let descriptor = NslDescriptor {
        slice_id: order.id.clone(),
        target_il: design.target_il.id.clone(),
        workflows: scale_workflows(&il_set, &design.il_coverage, cfg.hysteresis, cfg.down_sustain_minutes),
        il_coverage: il_set.iter().map(|il| (il.id.clone(), design.coverage(&il.id))).collect(),
        il_set,
        config_primitives,
        chaining_rules: chaining_rules.clone(),
        monitoring_spec: MonitoringSpec {
            metrics,
            reporting_period_s: cfg.reporting_period_s,
            alarms: ["DEGRADED".to_string()].into_iter().collect(),
        },
    };
    descriptor.validate()?;

    let target = design.target_il.clone();
    let mgmt_plane = ManagementPlane {
        live: true,
        nsl_manager: NslManager {
            slice_id: order.id.clone(),
            exposure: reqs.operational_reqs.clone(),
            readings: METRIC_NAMESPACE.iter().map(|m| (m.to_string(), 0.0)).collect(),
        },
        ns_orchestrator: NsOrchestrator { current_il: target.id.clone(), triplets: target.triplets.clone() },
        vnfm_list: target_dep
            .groups
            .iter()
            .map(|g| Vnfm {
                vnf: g.id.clone(),
                instances: 0,
                applied_primitives: descriptor.config_primitives[&g.id].iter().map(|p| p.primitive.clone()).collect(),
            })
            .collect(),
        tenant_sdn_controller: TenantSdnController { chaining_rules },
    };
    let runtime = SliceRuntime {
        slice_id: order.id.clone(),
        state: RuntimeState::Prepared,
        current_il: target.id.clone(),
        target_il: target.id,
        priority,
        exposure: reqs.operational_reqs,
        mode: target_req.mode,
        windows: target_req.windows.clone(),
        ordered: reqs.network_reqs.performance,
        il_latency_ms: design.il_capacity.iter().map(|(id, c)| (id.clone(), c.max_latency_ms)).collect(),
        mgmt_plane,
        il_bookings,
        il_solutions,
        instances: Vec::new(),
        clock_hour: 0,
        held_minutes: BTreeMap::new(),
    };
    order.transition(OrderStatus::Prepared)?;
    Ok((descriptor, runtime))
}

impl SliceRuntime {
    fn sync_instances(&mut self) {
        let sol = &self.il_solutions[&self.current_il];
        self.instances = sol
            .assignment
            .iter()
            .map(|(k, p)| VnfInstanceRecord { instance: k.clone(), pop: p.clone() })
            .collect();
        for vnfm in &mut self.mgmt_plane.vnfm_list {
            vnfm.instances = sol.assignment.keys().filter(|k| k.group == vnfm.vnf).count() as u32;
        }
        self.mgmt_plane.ns_orchestrator.current_il = self.current_il.clone();
    }
}

/// Starts a `PREPARED` slice at its target level, provided `now` is inside an active window.
pub fn activate(
    runtime: &mut SliceRuntime,
    order: &mut ServiceOrder,
    descriptor: &NslDescriptor,
    now: Minute,
) -> Result<(), LifecycleError> {
    if order.status != OrderStatus::Prepared || runtime.state != RuntimeState::Prepared {
        return Err(OrderError::IllegalTransition { from: order.status, to: OrderStatus::Active }.into());
    }
    if !runtime.windows.iter().any(|w| w.contains(now)) {
        return Err(LifecycleError::OutsideActiveWindow { now });
    }
    runtime.current_il = descriptor.target_il.clone();
    runtime.mgmt_plane.ns_orchestrator.triplets = descriptor
        .il_set
        .iter()
        .find(|il| il.id == descriptor.target_il)
        .map(|il| il.triplets.clone())
        .unwrap_or_default();
    runtime.sync_instances();
    // No traffic has been fed yet.
    sim::refresh_readings(runtime, descriptor, 0.0);
    runtime.state = RuntimeState::Active;
    order.transition(OrderStatus::Active)?;
    Ok(())
}

/// Releases every reservation of the slice and tears the management plane down.
/// Terminating twice is a no-op.
pub fn terminate(
    runtime: &mut SliceRuntime,
    order: &mut ServiceOrder,
    map: &mut InfrastructureMap,
) -> Result<Vec<crate::placement::Reservation>, LifecycleError> {
    if runtime.state == RuntimeState::Terminated && order.status == OrderStatus::Terminated {
        return Ok(Vec::new());
    }
    order.transition(OrderStatus::Terminated)?;
    let released = release(map, &runtime.slice_id);
    runtime.state = RuntimeState::Terminated;
    runtime.mgmt_plane.live = false;
    runtime.instances.clear();
    for vnfm in &mut runtime.mgmt_plane.vnfm_list {
        vnfm.instances = 0;
    }
    Ok(released)
}

#[cfg(test)]
mod tests;
