// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::BTreeMap;

use super::*;
use crate::admission::{admit, AdmissionVerdict};
use crate::catalog::fixtures::*;
use crate::catalog::{NetworkReqs, NsDescriptor, PerformanceVector, ServiceTemplate};
use crate::infra::{Pop, ResourceVector};
use crate::placement::{commit, optimize, reserve, Objective, ReservedResource};
use crate::slice_design::{build_design, DesignOptions, TrafficProfile};

const WEEK: u64 = 7 * 1440;

fn unit() -> ResourceVector {
    ResourceVector::new(1, 2, 4)
}

fn leveled_nsd() -> NsDescriptor {
    let levels = [(250, 1), (500, 2), (750, 3), (1000, 4)]
        .iter()
        .enumerate()
        .map(|(i, &(thr, n))| il(&format!("il{}", i + 1), &[("c", plan(n, "unit"))], PerformanceVector::new(thr, thr * 10, 10)))
        .collect();
    simple_nsd("N", &["c"], levels)
}

fn catalog() -> Catalog {
    let template = ServiceTemplate {
        id: "t".into(),
        name: String::new(),
        topology: vec!["cache".into()],
        network_reqs: NetworkReqs { performance: PerformanceVector::new(1000, 10000, 20), functional: Default::default() },
        temporal_reqs: vec![TimeWindow::once(0, WEEK)],
        geo_reqs: BTreeMap::new(),
        operational_reqs: OperationalReqs {
            visible_metrics: ["load_ratio".to_string(), "current_il".to_string()].into_iter().collect(),
            allowed_actions: ["scale".to_string()].into_iter().collect(),
        },
        customizable: BTreeMap::new(),
    };
    Catalog::from_parts(vec![vnf("c", "cache", &[("unit", unit())])], vec![leveled_nsd()], vec![template]).unwrap()
}

fn map(vcpu: u64) -> InfrastructureMap {
    let pop = Pop {
        id: PopId::new("p1"),
        region: "eu".into(),
        capabilities: Default::default(),
        capacity: ResourceVector::new(vcpu, 2 * vcpu, 4 * vcpu),
        owner_domain: "d".into(),
    };
    InfrastructureMap::new(vec![pop], vec![]).unwrap()
}

fn order(id: &str) -> ServiceOrder {
    ServiceOrder {
        id: id.into(),
        tenant_id: "tenant".into(),
        template_id: "t".into(),
        attribute_overrides: BTreeMap::new(),
        status: OrderStatus::Submitted,
        created_at: 0,
        parent_order_id: None,
    }
}

fn profile() -> TrafficProfile {
    let mut loads = vec![0.2; 24];
    loads[8] = 0.45;
    loads[12] = 0.7;
    loads[20] = 1.0;
    TrafficProfile::historical(loads).unwrap()
}

struct Prepared {
    order: ServiceOrder,
    descriptor: NslDescriptor,
    runtime: SliceRuntime,
}

fn prepared(cat: &Catalog, m: &mut InfrastructureMap, id: &str, cfg: &LifecycleConfig, priority: u8) -> Prepared {
    let mut o = order(id);
    let design = build_design(cat, &mut o, &profile(), DesignOptions::default()).unwrap();
    let outcome = admit(cat, &mut o, &design, m, ReservationMode::Hard).unwrap();
    assert!(matches!(outcome.verdict, AdmissionVerdict::Admitted { .. }));
    let req = outcome.request.unwrap();
    let placed = optimize(m, &req, &Objective::default()).unwrap();
    reserve(m, &mut o, &req, &placed.solution).unwrap();
    let (descriptor, runtime) = prepare(cat, &mut o, &design, &req, &placed.solution, cfg, priority).unwrap();
    Prepared { order: o, descriptor, runtime }
}

fn active(cat: &Catalog, m: &mut InfrastructureMap, id: &str, cfg: &LifecycleConfig) -> Prepared {
    let mut p = prepared(cat, m, id, cfg, DEFAULT_PRIORITY);
    activate(&mut p.runtime, &mut p.order, &p.descriptor, 0).unwrap();
    p
}

fn held_vcpu(m: &InfrastructureMap, id: &str) -> u64 {
    m.reservations
        .iter()
        .filter(|r| r.order_id == id)
        .map(|r| match &r.resource {
            ReservedResource::Compute { amount, .. } => amount.vcpu,
            ReservedResource::Bandwidth { .. } => 0,
        })
        .sum()
}

#[test]
fn prepare_builds_descriptor_for_every_level() {
    let cat = catalog();
    let mut m = map(4);
    let p = prepared(&cat, &mut m, "o1", &LifecycleConfig::default(), 5);
    assert_eq!(p.order.status, OrderStatus::Prepared);
    assert_eq!(p.descriptor.il_set.len(), 4);
    assert_eq!(p.descriptor.target_il, "nsl-il-4");
    assert_eq!(p.descriptor.workflows.len(), 6);
    assert_eq!(p.runtime.il_bookings.len(), 4);
    assert!(p.descriptor.monitoring_spec.metrics.contains(LOAD_METRIC));
    let text = p.descriptor.to_text();
    assert_eq!(NslDescriptor::from_text(&text).unwrap().to_text(), text);
}

#[test]
fn prepare_needs_reserved_order_and_sane_priority() {
    let cat = catalog();
    let mut m = map(4);
    let mut o = order("o1");
    let design = build_design(&cat, &mut o, &profile(), DesignOptions::default()).unwrap();
    let outcome = admit(&cat, &mut o, &design, &m, ReservationMode::Hard).unwrap();
    let req = outcome.request.unwrap();
    let AdmissionVerdict::Admitted { solution, .. } = outcome.verdict else { panic!() };
    let cfg = LifecycleConfig::default();
    assert!(matches!(prepare(&cat, &mut o, &design, &req, &solution, &cfg, 5), Err(LifecycleError::Order(_))));
    reserve(&mut m, &mut o, &req, &solution).unwrap();
    assert_eq!(prepare(&cat, &mut o, &design, &req, &solution, &cfg, 12).unwrap_err(), LifecycleError::BadPriority(12));
}

#[test]
fn activation_respects_window_and_starts_at_target() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = prepared(&cat, &mut m, "o1", &LifecycleConfig::default(), 5);
    let err = activate(&mut p.runtime, &mut p.order, &p.descriptor, WEEK + 5).unwrap_err();
    assert_eq!(err, LifecycleError::OutsideActiveWindow { now: WEEK + 5 });
    activate(&mut p.runtime, &mut p.order, &p.descriptor, 10).unwrap();
    assert_eq!(p.order.status, OrderStatus::Active);
    assert_eq!(p.runtime.current_il, "nsl-il-4");
    assert_eq!(p.runtime.instances.len(), 4);
    assert_eq!(p.runtime.mgmt_plane.vnfm_list[0].instances, 4);
}

#[test]
fn daily_profile_follows_design_levels() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    let loads = profile().hourly_load;
    let report = step_simulation(&mut p.runtime, &p.descriptor, &loads, &mut m).unwrap();
    let ils: Vec<&str> = report.timeline.iter().map(|t| t.il_id.as_str()).collect();
    assert_eq!(ils[0], "nsl-il-1");
    assert_eq!(ils[8], "nsl-il-2");
    assert_eq!(ils[12], "nsl-il-3");
    assert_eq!(ils[20], "nsl-il-4");
    assert!(report.events.iter().all(|e| e.kind == ScalingKind::Scaled));
    assert_eq!(held_vcpu(&m, "o1"), 1);
    let table = events_table(&report.events);
    assert_eq!(table.lines().count(), report.events.len() + 1);
}

#[test]
fn hysteresis_suppresses_flapping() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    let report = step_simulation(&mut p.runtime, &p.descriptor, &[0.2, 0.26, 0.24, 0.26, 0.24], &mut m).unwrap();
    let ils: Vec<&str> = report.timeline.iter().map(|t| t.il_id.as_str()).collect();
    assert_eq!(ils, ["nsl-il-1", "nsl-il-2", "nsl-il-2", "nsl-il-2", "nsl-il-2"]);
    assert_eq!(report.events.len(), 2);
}

#[test]
fn down_scaling_waits_for_sustain() {
    let cat = catalog();
    let mut m = map(4);
    let cfg = LifecycleConfig { down_sustain_minutes: 120, ..LifecycleConfig::default() };
    let mut p = active(&cat, &mut m, "o1", &cfg);
    let report = step_simulation(&mut p.runtime, &p.descriptor, &[0.2, 0.2, 0.2, 0.2], &mut m).unwrap();
    let ils: Vec<&str> = report.timeline.iter().map(|t| t.il_id.as_str()).collect();
    assert_eq!(ils, ["nsl-il-4", "nsl-il-4", "nsl-il-1", "nsl-il-1"]);
}

#[test]
fn lost_capacity_degrades_without_moving() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    step_simulation(&mut p.runtime, &p.descriptor, &[0.2], &mut m).unwrap();
    let squatter = crate::placement::BookingRequest {
        resource: ReservedResource::Compute { pop_id: PopId::new("p1"), amount: ResourceVector::new(3, 6, 12) },
        window: TimeWindow::once(0, WEEK),
    };
    commit(&mut m, "other", &[squatter], ReservationMode::Hard).unwrap();
    let before = m.reservations.clone();
    let report = step_simulation(&mut p.runtime, &p.descriptor, &[1.0], &mut m).unwrap();
    assert_eq!(report.events.len(), 1);
    let e = &report.events[0];
    assert_eq!((e.kind, e.reason.as_str(), e.to_il.as_str()), (ScalingKind::Degraded, REASON_RACED, "nsl-il-4"));
    assert_eq!(p.runtime.current_il, "nsl-il-1");
    assert_eq!(m.reservations, before);
}

#[test]
fn metrics_follow_exposure_rules() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    step_simulation(&mut p.runtime, &p.descriptor, &[0.45], &mut m).unwrap();
    let plane = &p.runtime.mgmt_plane;
    assert_eq!(plane.query("load_ratio").unwrap(), 0.45);
    assert_eq!(plane.query("current_il").unwrap(), 2.0);
    assert_eq!(plane.query("vcpu_in_use"), Err(ExposureError::MetricNotExposed("vcpu_in_use".into())));
    assert!(plane.nsl_manager.authorize("scale").is_ok());
    assert!(plane.nsl_manager.authorize("terminate").is_err());
    assert_eq!(plane.nsl_manager.exposed().len(), 2);
    let r = &plane.nsl_manager.readings;
    assert_eq!((r["throughput_mbps"], r["sessions"]), (450.0, 4500.0));
    assert!(r["latency_ms"] > 0.0);
}

#[test]
fn served_traffic_is_capped_by_the_current_level() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    step_simulation(&mut p.runtime, &p.descriptor, &[1.3], &mut m).unwrap();
    let r = &p.runtime.mgmt_plane.nsl_manager.readings;
    assert_eq!(r["load_ratio"], 1.3);
    assert_eq!(r["throughput_mbps"], 1000.0);
}

#[test]
fn termination_releases_everything_once() {
    let cat = catalog();
    let mut m = map(4);
    let mut p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    let released = terminate(&mut p.runtime, &mut p.order, &mut m).unwrap();
    assert!(!released.is_empty());
    assert!(m.reservations.is_empty());
    assert_eq!(p.order.status, OrderStatus::Terminated);
    assert!(matches!(p.runtime.mgmt_plane.query("load_ratio"), Err(ExposureError::TornDown(_))));
    let version = m.version;
    assert!(terminate(&mut p.runtime, &mut p.order, &mut m).unwrap().is_empty());
    assert_eq!(m.version, version);
    assert!(matches!(step_simulation(&mut p.runtime, &p.descriptor, &[0.5], &mut m), Err(LifecycleError::NotActive(_))));
}

#[test]
fn higher_priority_wins_contention() {
    let cat = catalog();
    // Room for both slices at their lowest level plus one of them at the top.
    let mut m = map(5);
    let mut lo = active(&cat, &mut m, "a-low", &LifecycleConfig::default());
    step_simulation(&mut lo.runtime, &lo.descriptor, &[0.2], &mut m).unwrap();
    let mut hi = prepared(&cat, &mut m, "b-high", &LifecycleConfig::default(), 8);
    activate(&mut hi.runtime, &mut hi.order, &hi.descriptor, 0).unwrap();
    step_simulation(&mut hi.runtime, &hi.descriptor, &[0.2], &mut m).unwrap();
    let spike = [1.0];
    let mut slices = [
        SimulatedSlice { runtime: &mut lo.runtime, descriptor: &lo.descriptor, loads: &spike },
        SimulatedSlice { runtime: &mut hi.runtime, descriptor: &hi.descriptor, loads: &spike },
    ];
    let reports = simulate_many(&mut slices, &mut m).unwrap();
    assert_eq!(reports[1].events[0].kind, ScalingKind::Scaled);
    assert_eq!(reports[0].events[0].reason, REASON_RACED);
    assert_eq!(hi.runtime.current_il, "nsl-il-4");
    assert_eq!(lo.runtime.current_il, "nsl-il-1");
}

#[test]
fn every_unexposed_metric_is_refused() {
    let cat = catalog();
    let mut m = map(4);
    let p = active(&cat, &mut m, "o1", &LifecycleConfig::default());
    let plane = &p.runtime.mgmt_plane;
    for metric in METRIC_NAMESPACE {
        let visible = p.runtime.exposure.visible_metrics.contains(metric);
        assert_eq!(plane.query(metric).is_ok(), visible, "{metric}");
        if !visible {
            assert_eq!(plane.query(metric), Err(ExposureError::MetricNotExposed(metric.into())));
        }
    }
    assert_eq!(plane.query("no_such_metric"), Err(ExposureError::MetricNotExposed("no_such_metric".into())));
}
