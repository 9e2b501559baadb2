// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! The pipeline driver. Every operation computes on copies of the current state, turns
//! the outcome into events, and only then folds those events into the live state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use nslice_core::admission::{evaluate, AdmissionVerdict, FeasibleSolution, Infeasible, InfeasibleCause};
use nslice_core::catalog::{load_catalog, Catalog, ServiceTemplate};
use nslice_core::infra::{InfrastructureMap, PopId};
use nslice_core::lifecycle::{
    activate, prepare, step_hour, terminate, ExposureError, LifecycleError, RuntimeState, ScalingEvent, ScalingKind,
    SimulationReport, TimelineEntry,
};
use nslice_core::ordering::{effective_requirements, renegotiate, submit_order, OrderError, OrderStatus, OverrideValue, ServiceOrder};
use nslice_core::placement::{bookings, commit, optimize, utilization_table, Cost, PlacementError, Strategy};
use nslice_core::slice_design::{design, DesignOptions, TrafficProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::config::Config;
use crate::events::{read_log, AdmittedRecord, EventLog, LedgerDelta, LogError, PipelineEvent, RejectedRecord, StageRecord};
use crate::state::{ApplyError, OrderRecord, State, BASE_INFRA_FILE};

/// Attempts at reserving before a lost capacity race becomes a conflict.
const RESERVE_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Invalid { field: Option<String>, message: String },
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Exposure(#[from] ExposureError),
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

impl EngineError {
    fn not_found(kind: &'static str, id: &str) -> Self {
        EngineError::NotFound { kind, id: id.into() }
    }
}

/// Wall-clock source for event timestamps and activation time.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    /// Always the given epoch milliseconds; used by tests and golden runs.
    Fixed(u64),
}

impl Clock {
    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            Clock::Fixed(ms) => *ms,
        }
    }

    pub fn now_minute(&self) -> u64 {
        self.now_ms() / 60_000
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub il_id: String,
    pub assignment: BTreeMap<String, PopId>,
    pub pops_used: Vec<PopId>,
    pub link_routes: usize,
    pub cost: Option<Cost>,
    pub strategy: Option<Strategy>,
}

impl SolutionSummary {
    fn new(il_id: &str, sol: &FeasibleSolution, cost: Option<Cost>, strategy: Option<Strategy>) -> Self {
        SolutionSummary {
            il_id: il_id.into(),
            assignment: sol.assignment.iter().map(|(k, p)| (k.to_string(), p.clone())).collect(),
            pops_used: sol.pops_used().into_iter().cloned().collect(),
            link_routes: sol.link_routes.len(),
            cost,
            strategy,
        }
    }
}

/// What `/process` and `/validate` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictView {
    pub order_id: String,
    pub status: OrderStatus,
    /// `ADMITTED` or `REJECTED`.
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<InfeasibleCause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding_constraint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSummary>,
}

impl VerdictView {
    pub fn is_admitted(&self) -> bool {
        self.verdict == "ADMITTED"
    }

    fn rejected(order: &ServiceOrder, infeasible: Option<&Infeasible>, message: String) -> Self {
        VerdictView {
            order_id: order.id.clone(),
            status: order.status,
            verdict: "REJECTED".into(),
            cause: infeasible.map(|i| i.cause),
            binding_constraint: infeasible.map(|i| i.binding_constraint.clone()),
            message: Some(message),
            solution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEventsView {
    pub slice_id: String,
    pub target_il: String,
    pub current_il: String,
    pub il_set: Vec<String>,
    pub events: Vec<ScalingEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderView {
    pub order: ServiceOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_il: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<crate::state::RejectionInfo>,
}

/// Outcome of the design and admission stages on a copy of the state.
enum Assessment {
    DesignFailed(String),
    Admission { design: Box<nslice_core::slice_design::NslDesign>, verdict: AdmissionVerdict, record: Option<Box<AdmittedRecord>>, message: Option<String> },
}

pub struct Engine {
    catalog: Arc<Catalog>,
    config: Config,
    state: State,
    log: EventLog,
    clock: Clock,
    since_snapshot: u64,
}

impl Engine {
    /// An engine whose events are kept only in its state.
    pub fn in_memory(catalog: Catalog, mut map: InfrastructureMap, config: Config, clock: Clock) -> Self {
        map.overbooking_factor = config.overbooking_factor;
        Engine { catalog: Arc::new(catalog), config, state: State::new(map), log: EventLog::Memory, clock, since_snapshot: 0 }
    }

    /// Stores `map` as the base infrastructure of `data_dir`. Refuses when events exist
    /// unless `reset`, which also drops the log and snapshot.
    pub fn install_infra(data_dir: &Path, map: &InfrastructureMap, reset: bool) -> Result<(), EngineError> {
        std::fs::create_dir_all(data_dir).map_err(|e| EngineError::Setup(e.to_string()))?;
        let log = data_dir.join(crate::events::LOG_FILE);
        let has_events = std::fs::metadata(&log).is_ok_and(|m| m.len() > 0);
        if has_events && !reset {
            return Err(EngineError::Conflict(format!(
                "{} already holds events; pass --reset to start over",
                data_dir.display()
            )));
        }
        for f in [log, data_dir.join(crate::state::SNAPSHOT_FILE)] {
            let _ = std::fs::remove_file(f);
        }
        let text = serde_json::to_string_pretty(map).expect("map serializes");
        std::fs::write(data_dir.join(BASE_INFRA_FILE), text).map_err(|e| EngineError::Setup(e.to_string()))
    }

    /// Loads the catalog, the base infrastructure and the persisted events of `config.data_dir`.
    pub fn open(config: Config, clock: Clock) -> Result<Self, EngineError> {
        let catalog = load_catalog(&config.catalog_dir).map_err(|e| EngineError::Setup(e.to_string()))?;
        let dir = config.data_dir.clone();
        let base = std::fs::read_to_string(dir.join(BASE_INFRA_FILE)).map_err(|e| {
            EngineError::Setup(format!("no infrastructure in {} ({e}); run `infra load` first", dir.display()))
        })?;
        let mut map: InfrastructureMap = serde_json::from_str(&base).map_err(|e| EngineError::Setup(e.to_string()))?;
        map.overbooking_factor = config.overbooking_factor;
        let initial = State::load_snapshot(&dir).map_err(|e| EngineError::Setup(e.to_string()))?.unwrap_or_else(|| State::new(map));
        let events = read_log(&dir.join(crate::events::LOG_FILE))?;
        let state = State::replay(initial, &events)?;
        debug!(events = events.len(), last_seq = state.last_seq, "state restored");
        let log = EventLog::open(&dir)?;
        Ok(Engine { catalog: Arc::new(catalog), config, state, log, clock, since_snapshot: 0 })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn data_dir(&self) -> Option<PathBuf> {
        self.log.path().and_then(|p| p.parent()).map(Path::to_path_buf)
    }

    fn emit(&mut self, records: Vec<(String, StageRecord)>) -> Result<Vec<PipelineEvent>, EngineError> {
        let at = self.clock.now_ms();
        let mut out = Vec::with_capacity(records.len());
        let mut next = self.state.clone();
        for (order_id, record) in records {
            let e = PipelineEvent { seq: next.last_seq + 1, order_id, record, at };
            next.apply(&e)?;
            out.push(e);
        }
        self.log.append(&out)?;
        self.state = next;
        self.since_snapshot += out.len() as u64;
        if self.config.snapshot_every > 0 && self.since_snapshot >= self.config.snapshot_every {
            if let Some(dir) = self.data_dir() {
                self.state.save_snapshot(&dir).map_err(|e| EngineError::Setup(e.to_string()))?;
                self.since_snapshot = 0;
            }
        }
        Ok(out)
    }

    fn record(&self, tenant: Option<&str>, id: &str) -> Result<&OrderRecord, EngineError> {
        self.state
            .orders
            .get(id)
            .filter(|r| tenant.is_none_or(|t| r.order.tenant_id == t))
            .ok_or_else(|| EngineError::not_found("order", id))
    }

    /// Tenants may only run the actions their order's operational requirements allow;
    /// provider calls (`tenant = None`) are unrestricted.
    fn allow(&self, tenant: Option<&str>, rec: &OrderRecord, action: &str) -> Result<(), EngineError> {
        if tenant.is_none() {
            return Ok(());
        }
        let reqs = effective_requirements(&self.catalog, &rec.order)
            .ok_or_else(|| EngineError::not_found("template", &rec.order.template_id))?;
        if reqs.operational_reqs.allowed_actions.contains(action) {
            Ok(())
        } else {
            Err(ExposureError::ActionNotAllowed(action.into()).into())
        }
    }

    pub fn templates(&self) -> Vec<ServiceTemplate> {
        self.catalog.templates.values().cloned().collect()
    }

    /// Records a new `SUBMITTED` order, optionally as a re-negotiation of a rejected one.
    pub fn submit(
        &mut self,
        tenant: &str,
        template_id: &str,
        overrides: BTreeMap<String, OverrideValue>,
        renegotiates: Option<&str>,
    ) -> Result<ServiceOrder, EngineError> {
        let id = format!("ord-{:04}", self.state.orders.len() + 1);
        let created_at = self.clock.now_minute();
        let order = match renegotiates {
            Some(parent) => {
                let parent = self.record(Some(tenant), parent)?.order.clone();
                if parent.template_id != template_id {
                    return Err(EngineError::Invalid {
                        field: Some("template_id".into()),
                        message: "re-negotiation must keep the template".into(),
                    });
                }
                renegotiate(&self.catalog, &parent, id, overrides, created_at)?
            }
            None => match submit_order(&self.catalog, id, tenant, template_id, overrides, created_at) {
                Err(OrderError::UnknownTemplate(t)) => return Err(EngineError::not_found("template", &t)),
                r => r?,
            },
        };
        self.emit(vec![(order.id.clone(), StageRecord::Ordered { order: order.clone() })])?;
        info!(order = %order.id, template = template_id, "order submitted");
        Ok(order)
    }

    fn profile(&self, template_id: &str) -> Result<TrafficProfile, EngineError> {
        let Some(dir) = &self.config.profiles_dir else { return Ok(TrafficProfile::flat()) };
        let path = dir.join(format!("{template_id}.csv"));
        match std::fs::read_to_string(&path) {
            Ok(text) => TrafficProfile::from_table(&text)
                .map_err(|e| EngineError::Setup(format!("profile {}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(TrafficProfile::flat()),
            Err(e) => Err(EngineError::Setup(format!("profile {}: {e}", path.display()))),
        }
    }

    /// Design (unless already designed) and admission against `map`. Pure.
    fn assess(&self, rec: &OrderRecord, map: &InfrastructureMap) -> Result<Assessment, EngineError> {
        let order = &rec.order;
        let d = match (&rec.design, order.status) {
            (Some(d), OrderStatus::Designed) => d.clone(),
            _ => {
                let options = DesignOptions { max_optional_ils: self.config.max_optional_ils };
                match design(&self.catalog, order, &self.profile(&order.template_id)?, options) {
                    Ok(d) => d,
                    Err(e) => return Ok(Assessment::DesignFailed(e.to_string())),
                }
            }
        };
        let mut designed = order.clone();
        designed.status = OrderStatus::Designed;
        let outcome = match evaluate(&self.catalog, &designed, &d, map, self.config.reservation_mode) {
            Ok(o) => o,
            Err(e) => return Ok(Assessment::DesignFailed(e.to_string())),
        };
        let (record, message) = match (&outcome.verdict, outcome.request) {
            (AdmissionVerdict::Admitted { solution, sla }, Some(request)) => {
                match optimize(map, &request, &self.config.placement.objective()) {
                    Ok(p) => (
                        Some(Box::new(AdmittedRecord {
                            solution: p.solution,
                            cost: p.cost,
                            strategy: p.strategy,
                            sla: sla.clone(),
                            map_version: outcome.map_version,
                            request,
                        })),
                        None,
                    ),
                    Err(PlacementError::BadObjective(m)) => return Err(EngineError::Setup(m)),
                    // The admission witness is always a valid fallback placement.
                    Err(_) => {
                        let cost = nslice_core::placement::solution_cost(&request, solution, &self.config.placement.objective());
                        (
                            Some(Box::new(AdmittedRecord {
                                solution: solution.clone(),
                                cost,
                                strategy: Strategy::Heuristic,
                                sla: sla.clone(),
                                map_version: outcome.map_version,
                                request,
                            })),
                            None,
                        )
                    }
                }
            }
            (AdmissionVerdict::Rejected(i), _) => (None, Some(format!("{:?}: {}", i.cause, i.binding_constraint))),
            (AdmissionVerdict::Admitted { .. }, None) => (None, Some("admission returned no request".into())),
        };
        Ok(Assessment::Admission { design: Box::new(d), verdict: outcome.verdict, record, message })
    }

    /// Runs design, admission, placement and reservation; the verdict is final.
    pub fn process(&mut self, tenant: Option<&str>, id: &str) -> Result<VerdictView, EngineError> {
        for _ in 0..RESERVE_ATTEMPTS {
            let rec = self.record(tenant, id)?.clone();
            if !matches!(rec.order.status, OrderStatus::Submitted | OrderStatus::Designed) {
                return Err(OrderError::IllegalTransition { from: rec.order.status, to: OrderStatus::Designed }.into());
            }
            let mut records = Vec::new();
            match self.assess(&rec, &self.state.map)? {
                Assessment::DesignFailed(message) => {
                    records.push((
                        id.to_string(),
                        StageRecord::Rejected(RejectedRecord { during: "design".into(), infeasible: None, message: message.clone() }),
                    ));
                    self.emit(records)?;
                    return Ok(VerdictView::rejected(&self.state.orders[id].order, None, message));
                }
                Assessment::Admission { design, verdict, record, message } => {
                    if rec.order.status == OrderStatus::Submitted {
                        records.push((id.to_string(), StageRecord::Designed { design: *design }));
                    }
                    let Some(admitted) = record else {
                        let infeasible = match verdict {
                            AdmissionVerdict::Rejected(i) => Some(i),
                            AdmissionVerdict::Admitted { .. } => None,
                        };
                        let message = message.unwrap_or_default();
                        records.push((
                            id.to_string(),
                            StageRecord::Rejected(RejectedRecord {
                                during: "admission".into(),
                                infeasible: infeasible.clone(),
                                message: message.clone(),
                            }),
                        ));
                        self.emit(records)?;
                        info!(order = id, "order rejected");
                        return Ok(VerdictView::rejected(&self.state.orders[id].order, infeasible.as_ref(), message));
                    };
                    let summary = SolutionSummary::new(
                        &admitted.request.il_id,
                        &admitted.solution,
                        Some(admitted.cost),
                        Some(admitted.strategy),
                    );
                    let items = bookings(&admitted.request, &admitted.solution);
                    let mode = admitted.request.mode;
                    records.push((id.to_string(), StageRecord::Admitted(admitted)));
                    let mut map = self.state.map.clone();
                    match commit(&mut map, id, &items, mode) {
                        Ok(_) => {
                            let ledger = LedgerDelta::between(&self.state.map, &map);
                            records.push((id.to_string(), StageRecord::Reserved { ledger }));
                            self.emit(records)?;
                            info!(order = id, "order reserved");
                            return Ok(VerdictView {
                                order_id: id.into(),
                                status: OrderStatus::Reserved,
                                verdict: "ADMITTED".into(),
                                cause: None,
                                binding_constraint: None,
                                message: None,
                                solution: Some(summary),
                            });
                        }
                        Err(e) => {
                            // Lost the race: back to DESIGNED, then admit again.
                            let design = self.state.orders[id].design.clone().or_else(|| {
                                records.iter().find_map(|(_, r)| match r {
                                    StageRecord::Designed { design } => Some(design.clone()),
                                    _ => None,
                                })
                            });
                            records.push((id.to_string(), StageRecord::Designed { design: design.expect("designed") }));
                            self.emit(records)?;
                            info!(order = id, error = %e, "reservation raced");
                        }
                    }
                }
            }
        }
        Err(EngineError::Conflict(format!("order {id} kept losing capacity races")))
    }

    /// Design and admission on a copy; nothing is recorded and the ledger is untouched.
    pub fn validate(&self, tenant: Option<&str>, id: &str) -> Result<VerdictView, EngineError> {
        let rec = self.record(tenant, id)?;
        if !matches!(rec.order.status, OrderStatus::Submitted | OrderStatus::Designed) {
            return Err(OrderError::IllegalTransition { from: rec.order.status, to: OrderStatus::Designed }.into());
        }
        Ok(match self.assess(rec, &self.state.map)? {
            Assessment::DesignFailed(m) => VerdictView::rejected(&rec.order, None, m),
            Assessment::Admission { verdict, record, message, .. } => match (verdict, record) {
                (_, Some(a)) => VerdictView {
                    order_id: id.into(),
                    status: rec.order.status,
                    verdict: "ADMITTED".into(),
                    cause: None,
                    binding_constraint: None,
                    message: None,
                    solution: Some(SolutionSummary::new(&a.request.il_id, &a.solution, Some(a.cost), Some(a.strategy))),
                },
                (AdmissionVerdict::Rejected(i), None) => {
                    VerdictView::rejected(&rec.order, Some(&i), message.unwrap_or_default())
                }
                (_, None) => VerdictView::rejected(&rec.order, None, message.unwrap_or_default()),
            },
        })
    }

    pub fn order(&self, tenant: Option<&str>, id: &str) -> Result<OrderView, EngineError> {
        let rec = self.record(tenant, id)?;
        Ok(OrderView {
            order: rec.order.clone(),
            target_il: rec.design.as_ref().map(|d| d.target_il.id.clone()),
            rejection: rec.rejection.clone(),
        })
    }

    /// Prepares a `RESERVED` slice if needed, then activates it at `now` (epoch minutes).
    pub fn activate(&mut self, tenant: Option<&str>, id: &str, now: Option<u64>) -> Result<OrderView, EngineError> {
        let rec = self.record(tenant, id)?.clone();
        self.allow(tenant, &rec, "activate")?;
        let now = now.unwrap_or_else(|| self.clock.now_minute());
        let mut order = rec.order.clone();
        let (descriptor, mut runtime, mut records) = match order.status {
            OrderStatus::Reserved => {
                let (Some(d), Some(a)) = (&rec.design, &rec.admitted) else {
                    return Err(EngineError::Conflict(format!("order {id} has no admitted design")));
                };
                let priority = self.config.priority.of(&order.tenant_id);
                let (descriptor, runtime) =
                    prepare(&self.catalog, &mut order, d, &a.request, &a.solution, &self.config.lifecycle, priority)?;
                let rec = StageRecord::Prepared { descriptor: Box::new(descriptor.clone()), runtime: Box::new(runtime.clone()) };
                (descriptor, runtime, vec![(id.to_string(), rec)])
            }
            OrderStatus::Prepared => {
                let s = self.state.slices.get(id).ok_or_else(|| EngineError::not_found("slice", id))?;
                (s.descriptor.clone(), s.runtime.clone(), Vec::new())
            }
            from => return Err(OrderError::IllegalTransition { from, to: OrderStatus::Active }.into()),
        };
        let activated = activate(&mut runtime, &mut order, &descriptor, now);
        if activated.is_ok() {
            records.push((id.to_string(), StageRecord::Active { now, runtime: Box::new(runtime) }));
        }
        // Preparation is kept even when the window check fails.
        self.emit(records)?;
        activated?;
        info!(slice = id, now, "slice active");
        self.order(tenant, id)
    }

    /// Feeds one load value per hour to an active slice.
    pub fn trace(&mut self, tenant: Option<&str>, id: &str, loads: &[f64]) -> Result<SimulationReport, EngineError> {
        let rec = self.record(tenant, id)?;
        self.allow(tenant, rec, "trace")?;
        if let Some(i) = loads.iter().position(|l| !l.is_finite() || *l < 0.0) {
            return Err(EngineError::Invalid { field: Some(format!("loads[{i}]")), message: "load must be finite and >= 0".into() });
        }
        let slice = self.state.slices.get(id).ok_or_else(|| EngineError::not_found("slice", id))?;
        if slice.runtime.state != RuntimeState::Active {
            return Err(LifecycleError::NotActive(id.into()).into());
        }
        let descriptor = slice.descriptor.clone();
        let mut runtime = slice.runtime.clone();
        let mut map = self.state.map.clone();
        let mut report = SimulationReport::default();
        let mut records = Vec::new();
        for &load in loads {
            let before = map.clone();
            let hour = runtime.clock_hour;
            let events = step_hour(&mut runtime, &descriptor, load, &mut map)?;
            for event in &events {
                let rec = match event.kind {
                    ScalingKind::Scaled => StageRecord::Scaled { event: event.clone(), ledger: LedgerDelta::between(&before, &map) },
                    ScalingKind::Degraded => StageRecord::Degraded { event: event.clone() },
                };
                records.push((id.to_string(), rec));
            }
            report.events.extend(events);
            report.timeline.push(TimelineEntry { hour, il_id: runtime.current_il.clone(), load });
        }
        records.push((id.to_string(), StageRecord::Traced { loads: loads.to_vec(), runtime: Box::new(runtime) }));
        self.emit(records)?;
        Ok(report)
    }

    /// Releases the slice's reservations. Terminating a terminated slice changes nothing.
    pub fn terminate(&mut self, tenant: Option<&str>, id: &str) -> Result<OrderView, EngineError> {
        let rec = self.record(tenant, id)?.clone();
        self.allow(tenant, &rec, "terminate")?;
        if rec.order.status == OrderStatus::Terminated {
            return self.order(tenant, id);
        }
        let slice = self.state.slices.get(id).ok_or_else(|| {
            EngineError::from(OrderError::IllegalTransition { from: rec.order.status, to: OrderStatus::Terminated })
        })?;
        let mut runtime = slice.runtime.clone();
        let mut order = rec.order.clone();
        let mut map = self.state.map.clone();
        terminate(&mut runtime, &mut order, &mut map)?;
        let ledger = LedgerDelta::between(&self.state.map, &map);
        self.emit(vec![(id.to_string(), StageRecord::Terminated { ledger, runtime: Box::new(runtime) })])?;
        info!(slice = id, "slice terminated");
        self.order(tenant, id)
    }

    pub fn slice_events(&self, tenant: Option<&str>, id: &str) -> Result<SliceEventsView, EngineError> {
        self.record(tenant, id)?;
        let s = self.state.slices.get(id).ok_or_else(|| EngineError::not_found("slice", id))?;
        Ok(SliceEventsView {
            slice_id: id.into(),
            target_il: s.descriptor.target_il.clone(),
            current_il: s.runtime.current_il.clone(),
            il_set: s.descriptor.il_ids().into_iter().map(String::from).collect(),
            events: s.events.clone(),
        })
    }

    /// Latest metric readings, restricted to what the order exposes to its tenant.
    pub fn metrics(&self, tenant: Option<&str>, id: &str) -> Result<BTreeMap<String, f64>, EngineError> {
        self.record(tenant, id)?;
        let s = self.state.slices.get(id).ok_or_else(|| EngineError::not_found("slice", id))?;
        if !s.runtime.mgmt_plane.live {
            return Err(ExposureError::TornDown(id.into()).into());
        }
        Ok(s.runtime.mgmt_plane.nsl_manager.exposed())
    }

    pub fn descriptor_text(&self, tenant: Option<&str>, id: &str) -> Result<String, EngineError> {
        self.record(tenant, id)?;
        let s = self.state.slices.get(id).ok_or_else(|| EngineError::not_found("slice", id))?;
        Ok(s.descriptor.to_text())
    }

    pub fn reservations_table(&self) -> String {
        utilization_table(&self.state.map)
    }

    /// Every persisted event, oldest first. Empty for in-memory engines.
    pub fn persisted_events(&self) -> Result<Vec<PipelineEvent>, EngineError> {
        match self.log.path() {
            Some(p) => Ok(read_log(p)?),
            None => Ok(Vec::new()),
        }
    }
}

/// Reads an `hour,load` trace of any length. Header, blank and `#` lines are skipped;
/// hours must be 0..n with no gaps.
pub fn parse_trace(text: &str) -> Result<Vec<f64>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: BTreeMap<u64, f64> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        let (Some(h), Some(l)) = (row.get(0), row.get(1)) else {
            return Err(format!("row {}: expected `hour,load`", i + 1));
        };
        let Ok(hour) = h.parse::<u64>() else {
            if i == 0 {
                continue;
            }
            return Err(format!("row {}: bad hour {h:?}", i + 1));
        };
        let load: f64 = l.parse().map_err(|_| format!("row {}: bad load {l:?}", i + 1))?;
        if !load.is_finite() || load < 0.0 {
            return Err(format!("row {}: load must be finite and >= 0", i + 1));
        }
        if rows.insert(hour, load).is_some() {
            return Err(format!("hour {hour} appears twice"));
        }
    }
    if rows.keys().copied().ne(0..rows.len() as u64) {
        return Err("hours must run from 0 without gaps".into());
    }
    Ok(rows.into_values().collect())
}
