// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Hour-by-hour evaluation of scaling workflows against a load trace.

use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::descriptor::{Comparator, NslDescriptor, WorkflowAction};
use super::{LifecycleError, RuntimeState, SliceRuntime};
use crate::infra::InfrastructureMap;
use crate::placement::{replace, ReservedResource};

pub const REASON_RACED: &str = "capacity raced";
pub const REASON_OVERLOAD: &str = "load exceeds level capacity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScalingKind {
    Scaled,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScalingEvent {
    pub slice_id: String,
    pub hour: u32,
    pub kind: ScalingKind,
    pub from_il: String,
    pub to_il: String,
    pub load: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimelineEntry {
    pub hour: u32,
    pub il_id: String,
    pub load: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulationReport {
    pub events: Vec<ScalingEvent>,
    pub timeline: Vec<TimelineEntry>,
}

/// Sustained trigger check: the condition holds now and already held for `sustain`
/// minutes over the preceding consecutive hours.
fn fired(runtime: &mut SliceRuntime, id: &str, holds: bool, sustain: u64) -> bool {
    let prev = runtime.held_minutes.get(id).copied().unwrap_or(0);
    runtime.held_minutes.insert(id.into(), if holds { prev + 60 } else { 0 });
    holds && prev >= sustain
}

pub(crate) fn refresh_readings(runtime: &mut SliceRuntime, descriptor: &NslDescriptor, load: f64) {
    let idx = descriptor.il_index(&runtime.current_il).map_or(0, |i| i + 1);
    let vcpu: u64 = runtime.il_bookings[&runtime.current_il]
        .iter()
        .filter(|b| Some(&b.window) == runtime.windows.first())
        .filter_map(|b| match &b.resource {
            ReservedResource::Compute { amount, .. } => Some(amount.vcpu),
            ReservedResource::Bandwidth { .. } => None,
        })
        .sum();
    let r = &mut runtime.mgmt_plane.nsl_manager.readings;
    r.insert("load_ratio".into(), load);
    r.insert("current_il".into(), idx as f64);
    r.insert("vcpu_in_use".into(), vcpu as f64);
    r.insert("availability".into(), 1.0);
    let served = load.min(descriptor.coverage(&runtime.current_il));
    r.insert("throughput_mbps".into(), served * runtime.ordered.throughput_mbps as f64);
    r.insert("sessions".into(), served * runtime.ordered.max_sessions as f64);
    let latency = runtime.il_latency_ms.get(&runtime.current_il).copied().unwrap_or(0);
    r.insert("latency_ms".into(), latency as f64);
}

/// Runs one hour: evaluates the workflows, swaps reservations if a level change fires,
/// and reports overload.
pub fn step_hour(
    runtime: &mut SliceRuntime,
    descriptor: &NslDescriptor,
    load: f64,
    map: &mut InfrastructureMap,
) -> Result<Vec<ScalingEvent>, LifecycleError> {
    if runtime.state != RuntimeState::Active {
        return Err(LifecycleError::NotActive(runtime.slice_id.clone()));
    }
    let hour = runtime.clock_hour;
    let cur = descriptor.il_index(&runtime.current_il).unwrap_or(0);
    let mut up: Option<usize> = None;
    let mut down: Option<usize> = None;
    for wf in &descriptor.workflows {
        let WorkflowAction::ScaleTo { il_id } = &wf.action else { continue };
        let Some(to) = descriptor.il_index(il_id) else { continue };
        let t = &wf.trigger;
        let holds = t.metric == super::LOAD_METRIC && t.comparator.holds(load, t.threshold);
        if !fired(runtime, &wf.id, holds, t.sustain_minutes) {
            continue;
        }
        let rising = matches!(t.comparator, Comparator::Gt | Comparator::Ge);
        if rising && to > cur {
            up = Some(up.map_or(to, |u| u.max(to)));
        } else if !rising && to < cur {
            down = Some(down.map_or(to, |d| d.min(to)));
        }
    }
    let mut events = Vec::new();
    let from_il = runtime.current_il.clone();
    let mut raced = false;
    if let Some(to) = up.or(down) {
        let to_il = descriptor.il_set[to].id.clone();
        match replace(map, &runtime.slice_id, &runtime.il_bookings[&to_il], runtime.mode) {
            Ok(_) => {
                runtime.current_il = to_il.clone();
                runtime.sync_instances();
                events.push(ScalingEvent {
                    slice_id: runtime.slice_id.clone(),
                    hour,
                    kind: ScalingKind::Scaled,
                    from_il,
                    to_il,
                    load,
                    reason: String::new(),
                });
            }
            Err(_) => {
                raced = true;
                events.push(ScalingEvent {
                    slice_id: runtime.slice_id.clone(),
                    hour,
                    kind: ScalingKind::Degraded,
                    from_il,
                    to_il,
                    load,
                    reason: REASON_RACED.into(),
                });
            }
        }
    }
    if !raced && load > descriptor.coverage(&runtime.current_il) {
        events.push(ScalingEvent {
            slice_id: runtime.slice_id.clone(),
            hour,
            kind: ScalingKind::Degraded,
            from_il: runtime.current_il.clone(),
            to_il: runtime.current_il.clone(),
            load,
            reason: REASON_OVERLOAD.into(),
        });
    }
    refresh_readings(runtime, descriptor, load);
    runtime.clock_hour += 1;
    Ok(events)
}

/// Feeds one load value per hour to a single slice.
pub fn step_simulation(
    runtime: &mut SliceRuntime,
    descriptor: &NslDescriptor,
    loads: &[f64],
    map: &mut InfrastructureMap,
) -> Result<SimulationReport, LifecycleError> {
    let mut report = SimulationReport::default();
    for &load in loads {
        let hour = runtime.clock_hour;
        report.events.extend(step_hour(runtime, descriptor, load, map)?);
        report.timeline.push(TimelineEntry { hour, il_id: runtime.current_il.clone(), load });
    }
    Ok(report)
}

/// One slice taking part in a shared simulation.
pub struct SimulatedSlice<'a> {
    pub runtime: &'a mut SliceRuntime,
    pub descriptor: &'a NslDescriptor,
    pub loads: &'a [f64],
}

/// Advances several slices over one map. Within an hour, higher priority goes first and
/// ties are broken by slice id, so contention is resolved in a fixed order.
pub fn simulate_many(
    slices: &mut [SimulatedSlice<'_>],
    map: &mut InfrastructureMap,
) -> Result<Vec<SimulationReport>, LifecycleError> {
    let mut order: Vec<usize> = (0..slices.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&slices[a].runtime, &slices[b].runtime);
        rb.priority.cmp(&ra.priority).then_with(|| ra.slice_id.cmp(&rb.slice_id))
    });
    let hours = slices.iter().map(|s| s.loads.len()).max().unwrap_or(0);
    let mut reports = vec![SimulationReport::default(); slices.len()];
    for h in 0..hours {
        for &i in &order {
            let s = &mut slices[i];
            let Some(&load) = s.loads.get(h) else { continue };
            let hour = s.runtime.clock_hour;
            reports[i].events.extend(step_hour(s.runtime, s.descriptor, load, map)?);
            reports[i].timeline.push(TimelineEntry { hour, il_id: s.runtime.current_il.clone(), load });
        }
    }
    Ok(reports)
}

/// Column-aligned event listing with a header row.
pub fn events_table(events: &[ScalingEvent]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<5} {:<10} {:<12} {:<12} {:>6}  reason", "hour", "kind", "from", "to", "load");
    for e in events {
        let kind = match e.kind {
            ScalingKind::Scaled => "SCALED",
            ScalingKind::Degraded => "DEGRADED",
        };
        let row = format!("{:<5} {:<10} {:<12} {:<12} {:>6.3}  {}", e.hour, kind, e.from_il, e.to_il, e.load, e.reason);
        let _ = writeln!(out, "{}", row.trim_end());
    }
    out
}
