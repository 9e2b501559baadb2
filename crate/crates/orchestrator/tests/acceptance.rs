// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails. Run with `cargo test -p nslice-orchestrator --test acceptance`.

#[path = "common/mod.rs"]
mod common;
#[path = "acceptance/gen.rs"]
mod gen;
#[path = "acceptance/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use nslice_core::admission::{check_feasibility, compute_candidates, evaluate, AdmissionVerdict};
use nslice_core::catalog::{load_catalog, resolve_nsl, Catalog, ReliabilityReq};
use nslice_core::infra::{abstract_view, InfrastructureMap, PopId, ResourceVector, SharedInfra};
use nslice_core::lifecycle::{NslDescriptor, ScalingKind};
use nslice_core::ordering::{effective_requirements, submit_order, OrderStatus, OverrideValue};
use nslice_core::placement::{
    bookings, commit, optimize_with, release, Objective, ObjectiveKind, PlacementError, ReservationMode,
    ReservedResource, Strategy, TimeWindow,
};
use nslice_core::slice_design::{design, DesignOptions, TrafficProfile};
use nslice_orchestrator::config::Config;
use nslice_orchestrator::engine::{parse_trace, Clock, Engine};
use nslice_orchestrator::events::{read_log, LOG_FILE};
use nslice_orchestrator::state::State;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn edge() -> Catalog {
    load_catalog(&common::fixtures().join("edge")).unwrap()
}

// ---------------------------------------------------------------------------------------

fn admission_oracle() -> Outcome {
    const N: usize = 1000;
    let shape = gen::Shape { pops: (1, 4), wan_links: (0, 6), instances: (1, 4), groups: 3, vlinks: 3, prior_bookings: 4, scale: 1, affinity: 0.2 };
    let started = Instant::now();
    let (mut feasible, mut mismatches) = (0, Vec::new());
    for seed in 0..N as u64 {
        let mut r = rng(seed);
        let map = gen::map(&mut r, &shape);
        let req = gen::request(&mut r, &map, &shape);
        let problem = oracle::Problem::new(&map, &req);
        let expected = problem.feasible();
        let got = check_feasibility(&map, &req);
        if expected {
            feasible += 1;
        }
        match (&got, expected) {
            (Ok(sol), true) => {
                if let Err(e) = problem.check(sol, &Objective::default()) {
                    mismatches.push(format!("seed {seed}: invalid witness ({e})"));
                }
            }
            (Err(_), false) => {}
            (Ok(_), false) => mismatches.push(format!("seed {seed}: admitted, brute force finds nothing")),
            (Err(i), true) => mismatches.push(format!("seed {seed}: rejected ({:?}) but feasible", i.cause)),
        }
    }
    let took = started.elapsed();
    let detail = format!("{N} instances, {feasible} feasible, {} mismatches, {:.2}s", mismatches.len(), took.as_secs_f64());
    if mismatches.is_empty() && took < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(format!("{detail}; first: {:?}", mismatches.first()))
    }
}

// ---------------------------------------------------------------------------------------

fn placement_exactness() -> Outcome {
    const N: usize = 200;
    const SPACE: u128 = 60_000;
    let shape = gen::Shape { pops: (1, 8), wan_links: (0, 8), instances: (1, 10), groups: 4, vlinks: 2, prior_bookings: 3, scale: 3, affinity: 0.03 };
    let (mut cases, mut feasible, mut seed) = (0, 0, 0u64);
    let mut failures = Vec::new();
    let (mut heur_optimal, mut gap_sum, mut gap_max, mut max_n) = (0usize, 0.0f64, 0.0f64, 0usize);
    while cases < N {
        seed += 1;
        let mut r = rng(1_000_000 + seed);
        let map = gen::map(&mut r, &shape);
        let mut req = gen::request(&mut r, &map, &shape);
        // Keep the brute force tractable by trimming candidate sets.
        while oracle::Problem::new(&map, &req).space() > SPACE {
            let key = req.candidates.iter().filter(|(_, c)| c.len() > 1).map(|(k, _)| k.clone()).collect::<Vec<_>>();
            let k = key.choose(&mut r).unwrap().clone();
            let set = req.candidates.get_mut(&k).unwrap();
            let drop = set.iter().nth(r.gen_range(0..set.len())).unwrap().clone();
            set.remove(&drop);
        }
        let pops: Vec<PopId> = map.pops.iter().map(|p| p.id.clone()).collect();
        let obj = Objective {
            kind: if r.gen_bool(0.5) { ObjectiveKind::MinResource } else { ObjectiveKind::MinEnergy },
            weights: ResourceVector::new(r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)),
            preferred_pops: pops.iter().filter(|_| r.gen_bool(0.25)).cloned().collect(),
        };
        cases += 1;
        max_n = max_n.max(req.instances.len());
        let problem = oracle::Problem::new(&map, &req);
        let best = problem.min_cost(&obj);
        let exact = optimize_with(&map, &req, &obj, Strategy::Exact);
        let heur = optimize_with(&map, &req, &obj, Strategy::Heuristic);
        match (best, exact) {
            (None, Err(PlacementError::NoFeasibleSolution)) => {}
            (Some(b), Ok(p)) => {
                feasible += 1;
                match problem.check(&p.solution, &obj) {
                    Ok(c) if c == b && p.cost == b => {}
                    Ok(c) => failures.push(format!("seed {seed}: exact {:?} (claims {:?}), optimum {b:?}", c, p.cost)),
                    Err(e) => failures.push(format!("seed {seed}: exact solution invalid: {e}")),
                }
                match heur.map_err(|e| e.to_string()).and_then(|h| problem.check(&h.solution, &obj)) {
                    Ok(h) => {
                        // Relative excess in the first cost component that differs.
                        let rel = |x: u64, y: u64| (x as f64 - y as f64) / (y.max(1) as f64);
                        let gap = if h == b {
                            heur_optimal += 1;
                            0.0
                        } else if h.pops_used != b.pops_used {
                            rel(h.pops_used, b.pops_used)
                        } else {
                            rel(h.resource, b.resource)
                        };
                        gap_sum += gap;
                        gap_max = gap_max.max(gap);
                    }
                    Err(e) => failures.push(format!("seed {seed}: heuristic infeasible: {e}")),
                }
            }
            (b, e) => failures.push(format!("seed {seed}: optimum {b:?}, exact returned {:?}", e.map(|p| p.cost))),
        }
    }
    let detail = format!(
        "{N} cases ({feasible} feasible, up to {max_n} instances), heuristic optimal in {heur_optimal}/{feasible}, gap mean {:.2}% max {:.2}%",
        100.0 * gap_sum / feasible.max(1) as f64,
        100.0 * gap_max
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {} failures, first: {}", failures.len(), failures[0]))
    }
}

// ---------------------------------------------------------------------------------------

/// HARD compute and bandwidth at every instant stay within capacity; everything booked
/// stays within the overbooking ceiling.
fn conserved(map: &InfrastructureMap) -> Result<(), String> {
    let starts: BTreeSet<u64> = map.reservations.iter().map(|r| r.window.start).collect();
    for r in &map.reservations {
        if r.window != TimeWindow::once(r.window.start, r.window.end) {
            return Err(format!("{} is recurring; the check assumes single windows", r.id));
        }
    }
    for &t in &starts {
        let active = || map.reservations.iter().filter(move |r| r.window.start <= t && t < r.window.end);
        for p in &map.pops {
            let sum = |hard_only: bool| -> ResourceVector {
                active()
                    .filter(|r| !hard_only || r.mode == ReservationMode::Hard)
                    .filter_map(|r| match &r.resource {
                        ReservedResource::Compute { pop_id, amount } if *pop_id == p.id => Some(*amount),
                        _ => None,
                    })
                    .sum()
            };
            let c = p.capacity;
            if !sum(true).fits_within(&c) {
                return Err(format!("t={t}: HARD {} at {} exceeds {}", sum(true), p.id, c));
            }
            let ceiling = ResourceVector::new(c.vcpu + c.vcpu / 2, c.mem_gb + c.mem_gb / 2, c.storage_gb + c.storage_gb / 2);
            if !sum(false).fits_within(&ceiling) {
                return Err(format!("t={t}: {} booked at {} exceeds {}", sum(false), p.id, ceiling));
            }
        }
        for l in &map.wan_links {
            let hard: u64 = active()
                .filter(|r| r.mode == ReservationMode::Hard)
                .filter_map(|r| match &r.resource {
                    ReservedResource::Bandwidth { wan_link_id, bitrate_mbps } if *wan_link_id == l.id => Some(*bitrate_mbps),
                    _ => None,
                })
                .sum();
            if hard > l.capacity_mbps {
                return Err(format!("t={t}: HARD {hard} Mbps on {} exceeds {}", l.id, l.capacity_mbps));
            }
        }
    }
    Ok(())
}

fn residual_snapshot(map: &InfrastructureMap, windows: &[TimeWindow]) -> Vec<(ResourceVector, ResourceVector)> {
    let mut out = Vec::new();
    for w in windows {
        for p in &map.pops {
            out.push((map.residual_for(&p.id, w, ReservationMode::Hard).unwrap(), map.residual_for(&p.id, w, ReservationMode::Soft).unwrap()));
        }
        for l in &map.wan_links {
            let b = |m| map.residual_bitrate(&l.id, w, m).unwrap();
            out.push((ResourceVector::new(b(ReservationMode::Hard), 0, 0), ResourceVector::new(b(ReservationMode::Soft), 0, 0)));
        }
    }
    out
}

fn random_edge_infra(r: &mut impl Rng) -> InfrastructureMap {
    let mut m = common::infra();
    for p in &mut m.pops {
        p.capacity = ResourceVector::new(r.gen_range(3..=16), r.gen_range(6..=64), r.gen_range(20..=500));
    }
    for l in &mut m.wan_links {
        l.capacity_mbps = *[100, 200, 400, 1000].choose(r).unwrap();
    }
    m
}

fn throughput(n: u64) -> BTreeMap<String, OverrideValue> {
    BTreeMap::from([("network_reqs.performance.throughput_mbps".to_string(), OverrideValue::Number(n))])
}

/// One randomized order→…→terminate scenario with several orders interleaved on one engine.
fn lifecycle_scenario(e: &mut Engine, r: &mut impl Rng, check: &mut dyn FnMut(&Engine) -> Result<(), String>) -> Result<(), String> {
    let orders = r.gen_range(1..=5);
    let mut ids: Vec<String> = Vec::new();
    for _ in 0..r.gen_range(8..=25) {
        let status = |e: &Engine, s: OrderStatus| -> Vec<String> {
            e.state().orders.iter().filter(|(_, o)| o.order.status == s).map(|(id, _)| id.clone()).collect()
        };
        let pick = |v: Vec<String>, r: &mut dyn rand::RngCore| v.choose(r).cloned();
        match r.gen_range(0..5) {
            0 if ids.len() < orders => {
                let o = e.submit("t", "edge-embb", throughput(*[250, 500, 750, 1000].choose(r).unwrap()), None).map_err(|x| x.to_string())?;
                ids.push(o.id);
            }
            1 => {
                if let Some(id) = pick(status(e, OrderStatus::Submitted), r) {
                    e.process(None, &id).map_err(|x| x.to_string())?;
                }
            }
            2 => {
                if let Some(id) = pick(status(e, OrderStatus::Reserved), r) {
                    e.activate(None, &id, Some(r.gen_range(0..10_000))).map_err(|x| x.to_string())?;
                }
            }
            3 => {
                if let Some(id) = pick(status(e, OrderStatus::Active), r) {
                    let loads: Vec<f64> = (0..r.gen_range(1..=8)).map(|_| r.gen_range(0.05..1.3)).collect();
                    e.trace(None, &id, &loads).map_err(|x| x.to_string())?;
                }
            }
            _ => {
                if let Some(id) = pick(status(e, OrderStatus::Active), r) {
                    e.terminate(None, &id).map_err(|x| x.to_string())?;
                }
            }
        }
        check(e)?;
    }
    // Wind down: everything still holding resources is activated and terminated.
    for id in ids {
        let st = e.state().orders[&id].order.status;
        if st == OrderStatus::Reserved {
            e.activate(None, &id, Some(0)).map_err(|x| x.to_string())?;
        }
        if matches!(st, OrderStatus::Reserved | OrderStatus::Active) {
            e.terminate(None, &id).map_err(|x| x.to_string())?;
        }
        check(e)?;
    }
    Ok(())
}

fn sequential_conservation(trials: u64) -> Result<(usize, usize), String> {
    let cat = edge();
    let (mut admitted, mut scaled) = (0, 0);
    for seed in 0..trials {
        let mut r = rng(2_000_000 + seed);
        let infra = random_edge_infra(&mut r);
        let mut e = Engine::in_memory(cat.clone(), infra, common::config(""), Clock::Fixed(0));
        let windows = e.catalog().templates["edge-embb"].temporal_reqs.clone();
        let initial = residual_snapshot(&e.state().map, &windows);
        lifecycle_scenario(&mut e, &mut r, &mut |e| conserved(&e.state().map)).map_err(|m| format!("seed {seed}: {m}"))?;
        let m = &e.state().map;
        if !m.reservations.is_empty() {
            return Err(format!("seed {seed}: {} reservations left after termination", m.reservations.len()));
        }
        if residual_snapshot(m, &windows) != initial {
            return Err(format!("seed {seed}: residuals differ from the initial snapshot"));
        }
        admitted += e.state().slices.len();
        scaled += e.state().slices.values().map(|s| s.events.iter().filter(|x| x.kind == ScalingKind::Scaled).count()).sum::<usize>();
    }
    Ok((admitted, scaled))
}

/// Several threads admit on snapshots and commit under the writer lock, as concurrent
/// orders do; releases interleave with commits.
fn concurrent_conservation(trials: u64) -> Result<(u64, u64), String> {
    let shape = gen::Shape { pops: (2, 4), wan_links: (1, 5), instances: (1, 4), groups: 3, vlinks: 2, prior_bookings: 0, scale: 1, affinity: 0.2 };
    let committed = AtomicU64::new(0);
    let raced = AtomicU64::new(0);
    for seed in 0..trials {
        let mut r = rng(3_000_000 + seed);
        let map = gen::map(&mut r, &shape);
        let probe: Vec<TimeWindow> = (0..8).map(|i| TimeWindow::once(i * 100, i * 100 + 150)).collect();
        let initial = residual_snapshot(&map, &probe);
        let shared = SharedInfra::new(map);
        let violation = std::sync::Mutex::new(None::<String>);
        std::thread::scope(|s| {
            for t in 0..4u64 {
                let (shared, shape, committed, raced, violation) = (&shared, &shape, &committed, &raced, &violation);
                s.spawn(move || {
                    let mut r = rng(seed * 31 + t);
                    let mut mine: Vec<String> = Vec::new();
                    for k in 0..6 {
                        let snap = shared.snapshot();
                        let mut req = gen::request(&mut r, &snap, shape);
                        req.order_id = format!("t{t}-{k}");
                        let Ok(sol) = check_feasibility(&snap, &req) else { continue };
                        std::thread::yield_now();
                        let mut live = shared.write();
                        match commit(&mut live, &req.order_id, &bookings(&req, &sol), req.mode) {
                            Ok(_) => {
                                committed.fetch_add(1, Ordering::Relaxed);
                                mine.push(req.order_id.clone());
                            }
                            Err(PlacementError::CapacityRaced(_)) => {
                                raced.fetch_add(1, Ordering::Relaxed);
                            }
                            Err(e) => panic!("{e}"),
                        }
                        if r.gen_bool(0.4) && !mine.is_empty() {
                            let id = mine.remove(r.gen_range(0..mine.len()));
                            release(&mut live, &id);
                        }
                        if let Err(m) = conserved(&live) {
                            violation.lock().unwrap().get_or_insert(m);
                        }
                    }
                    let mut live = shared.write();
                    for id in mine {
                        release(&mut live, &id);
                    }
                });
            }
        });
        if let Some(m) = violation.into_inner().unwrap() {
            return Err(format!("seed {seed}: {m}"));
        }
        let end = shared.snapshot();
        if !end.reservations.is_empty() || residual_snapshot(&end, &probe) != initial {
            return Err(format!("seed {seed}: residuals not restored"));
        }
    }
    Ok((committed.into_inner(), raced.into_inner()))
}

fn reservation_conservation() -> Outcome {
    let (admitted, scaled) = sequential_conservation(500)?;
    let (committed, raced) = concurrent_conservation(100)?;
    Ok(format!(
        "500 lifecycle scenarios ({admitted} slices, {scaled} scale events) + 100 threaded scenarios ({committed} commits, {raced} races)"
    ))
}

// ---------------------------------------------------------------------------------------

fn random_profile(r: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..24).map(|_| r.gen_range(0.05..=1.0)).collect();
    p[r.gen_range(0..24)] = 1.0;
    p
}

fn engine_with_profile(cat: &Catalog, profile: &[f64], dir: &Path, extra: &str) -> Engine {
    let mut text = String::from("hour,load\n");
    for (h, l) in profile.iter().enumerate() {
        text.push_str(&format!("{h},{l}\n"));
    }
    std::fs::write(dir.join("edge-embb.csv"), text).unwrap();
    let mut cfg = common::config(extra);
    cfg.profiles_dir = Some(dir.to_path_buf());
    Engine::in_memory(cat.clone(), common::infra(), cfg, Clock::Fixed(0))
}

fn design_sufficiency() -> Outcome {
    const N: u64 = 100;
    let cat = edge();
    let dir = tempfile::tempdir().unwrap();
    let (mut hours, mut degraded) = (0usize, 0usize);
    for seed in 0..N {
        let mut r = rng(4_000_000 + seed);
        let profile = random_profile(&mut r);
        let extra = format!(
            "[lifecycle]\nhysteresis = {}\ndown_sustain_minutes = {}\n",
            [0.0, 0.05, 0.1, 0.2][r.gen_range(0..4)],
            [0, 60, 120][r.gen_range(0..3)]
        );
        let mut e = engine_with_profile(&cat, &profile, dir.path(), &extra);
        let o = e.submit("t", "edge-embb", throughput(*[500, 750, 1000].choose(&mut r).unwrap()), None).unwrap();
        if !e.process(None, &o.id).map_err(|x| x.to_string())?.is_admitted() {
            return Err(format!("seed {seed}: order not admitted"));
        }
        let d = e.state().orders[&o.id].design.clone().unwrap();
        for (h, &load) in profile.iter().enumerate() {
            if !d.all_ils().iter().any(|il| d.coverage(&il.id) >= load) {
                return Err(format!("seed {seed}: hour {h} load {load} covered by no level"));
            }
            if d.coverage(&d.hourly_il[h]) < load {
                return Err(format!("seed {seed}: hour {h} assigned {} which does not cover {load}", d.hourly_il[h]));
            }
        }
        e.activate(None, &o.id, Some(0)).map_err(|x| x.to_string())?;
        // Two days: the profile, then a noisy day that sometimes overshoots.
        let mut loads = profile.clone();
        loads.extend(profile.iter().map(|l| (l * r.gen_range(0.7..1.3)).min(1.5)));
        let report = e.trace(None, &o.id, &loads).map_err(|x| x.to_string())?;
        let desc = &e.state().slices[&o.id].descriptor;
        for t in &report.timeline {
            hours += 1;
            if t.load > desc.coverage(&t.il_id) {
                let flagged = report.events.iter().any(|ev| ev.hour == t.hour && ev.kind == ScalingKind::Degraded);
                if !flagged {
                    return Err(format!("seed {seed}: hour {} load {} over {} without DEGRADED", t.hour, t.load, t.il_id));
                }
                degraded += 1;
            }
        }
    }

    // The day-shaped trace on the four-level catalog.
    let day = std::fs::read_to_string(common::fixtures().join("day.csv")).unwrap();
    let loads = parse_trace(&day).map_err(|m| m.to_string())?;
    let mut e = engine_with_profile(&cat, &loads, dir.path(), "");
    let o = e.submit("t", "edge-embb", BTreeMap::new(), None).unwrap();
    e.process(None, &o.id).map_err(|x| x.to_string())?;
    e.activate(None, &o.id, Some(0)).map_err(|x| x.to_string())?;
    let report = e.trace(None, &o.id, &loads).map_err(|x| x.to_string())?;
    let desc = e.state().slices[&o.id].descriptor.clone();
    if desc.il_set.len() != 4 {
        return Err(format!("day trace: expected 4 levels, design has {}", desc.il_set.len()));
    }
    let peak = loads.iter().copied().fold(0.0, f64::max);
    for t in report.timeline.iter().filter(|t| t.load == peak) {
        if t.il_id != desc.target_il {
            return Err(format!("day trace: hour {} at peak runs {}, target is {}", t.hour, t.il_id, desc.target_il));
        }
    }
    let visited: BTreeSet<&str> = report.timeline.iter().map(|t| t.il_id.as_str()).collect();
    if visited.len() != 4 {
        return Err(format!("day trace visits {visited:?}"));
    }
    Ok(format!("{N} profiles, {hours} simulated hours, {degraded} overloaded hours all flagged; day trace peaks at {}", desc.target_il))
}

// ---------------------------------------------------------------------------------------

fn abstraction_guarantee() -> Outcome {
    const N: u64 = 100;
    const MUTATIONS: usize = 10;
    let base = edge();
    let shape = gen::Shape { pops: (1, 6), wan_links: (0, 6), instances: (1, 1), groups: 1, vlinks: 0, prior_bookings: 3, scale: 1, affinity: 0.0 };
    let (mut compared, mut rejected) = (0, 0);
    for seed in 0..N {
        let mut r = rng(5_000_000 + seed);
        let mut cat = base.clone();
        // Some levels ask for HA PoPs so both candidate filters are exercised.
        for nsd in cat.nsds.values_mut() {
            for f in &mut nsd.flavors {
                for il in &mut f.instantiation_levels {
                    for v in il.vnf_plans.keys().cloned().collect::<Vec<_>>() {
                        if r.gen_bool(0.3) {
                            il.reliability.insert(v, ReliabilityReq { backup_count: 0, requires_ha_pop: true });
                        }
                    }
                }
            }
        }
        let map = gen::map(&mut r, &shape);
        let regions: Vec<String> = ["eu-west", "eu-south", "ap-east"].iter().filter(|_| r.gen_bool(0.6)).map(|s| s.to_string()).collect();
        let mut ov = throughput(r.gen_range(100..=1000));
        if !regions.is_empty() {
            ov.insert("geo_reqs.inspector".into(), OverrideValue::Set(regions.into_iter().collect()));
        }
        let order = submit_order(&cat, "o", "t", "edge-embb", ov, 0).map_err(|e| e.to_string())?;
        let d = design(&cat, &order, &TrafficProfile::flat(), DesignOptions::default()).map_err(|e| e.to_string())?;
        let reqs = effective_requirements(&cat, &order).unwrap();
        let dep = resolve_nsl(&cat, &d.target_il).map_err(|e| e.to_string())?;
        let reference = compute_candidates(&abstract_view(&map), &dep, &reqs.geo_reqs);
        let step1 = |m: &InfrastructureMap| {
            let out = evaluate(&cat, &order, &d, m, ReservationMode::Hard).unwrap();
            match (out.request, out.verdict) {
                (Some(req), _) => Ok(req.candidates),
                (None, AdmissionVerdict::Rejected(i)) => Err(i),
                (None, _) => unreachable!(),
            }
        };
        let reference_eval = step1(&map);
        if reference_eval.is_err() {
            rejected += 1;
        }
        for _ in 0..MUTATIONS {
            let mut m = map.clone();
            for p in &mut m.pops {
                p.capacity = ResourceVector::new(r.gen_range(0..=256), r.gen_range(0..=1024), r.gen_range(0..=4096));
            }
            // Bookings are resource data too.
            if r.gen_bool(0.5) {
                m.reservations.clear();
            }
            compared += 1;
            if compute_candidates(&abstract_view(&m), &dep, &reqs.geo_reqs) != reference {
                return Err(format!("seed {seed}: candidates moved with capacity or bookings"));
            }
            if step1(&m) != reference_eval {
                return Err(format!("seed {seed}: step-1 outcome moved with capacity or bookings"));
            }
        }
    }
    Ok(format!("{N} trials x {MUTATIONS} capacity and booking mutations, {compared} comparisons, {rejected} trials rejected in step 1"))
}

// ---------------------------------------------------------------------------------------

fn event_log_replay() -> Outcome {
    const N: u64 = 60;
    let cat = edge();
    let mut events_total = 0;
    for seed in 0..N {
        let mut r = rng(6_000_000 + seed);
        let infra = random_edge_infra(&mut r);
        let dir = tempfile::tempdir().unwrap();
        Engine::install_infra(dir.path(), &infra, false).map_err(|e| e.to_string())?;
        let mut cfg: Config = common::config(&format!("snapshot_every = {}", r.gen_range(0..=10)));
        cfg.data_dir = dir.path().to_path_buf();
        let mut e = Engine::open(cfg.clone(), Clock::Fixed(seed)).map_err(|x| x.to_string())?;
        let initial = e.state().clone();
        lifecycle_scenario(&mut e, &mut r, &mut |_| Ok(())).map_err(|m| format!("seed {seed}: {m}"))?;
        let live = e.state().snapshot_bytes();
        drop(e);
        let events = read_log(&dir.path().join(LOG_FILE)).map_err(|x| x.to_string())?;
        events_total += events.len();
        let replayed = State::replay(initial, &events).map_err(|x| x.to_string())?;
        if replayed.snapshot_bytes() != live {
            return Err(format!("seed {seed}: full replay differs"));
        }
        let reopened = Engine::open(cfg, Clock::Fixed(seed)).map_err(|x| x.to_string())?;
        if reopened.state().snapshot_bytes() != live {
            return Err(format!("seed {seed}: snapshot + tail replay differs"));
        }
        let _ = cat;
    }
    Ok(format!("{N} scenarios, {events_total} events, full and snapshot replays bit-identical"))
}

// ---------------------------------------------------------------------------------------

fn descriptor_round_trip() -> Outcome {
    const N: u64 = 200;
    let cat = edge();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = 0;
    for seed in 0..N {
        let mut r = rng(7_000_000 + seed);
        let profile = random_profile(&mut r);
        let extra = format!("[lifecycle]\nhysteresis = {}\nreporting_period_s = {}\n", r.gen_range(0.0..0.5), r.gen_range(1..=600));
        let mut e = engine_with_profile(&cat, &profile, dir.path(), &extra);
        let o = e.submit("t", "edge-embb", throughput(r.gen_range(100..=1000)), None).unwrap();
        e.process(None, &o.id).map_err(|x| x.to_string())?;
        if e.state().orders[&o.id].order.status != OrderStatus::Reserved {
            continue;
        }
        e.activate(None, &o.id, Some(0)).map_err(|x| x.to_string())?;
        let mut d = e.state().slices[&o.id].descriptor.clone();
        // Arbitrary doubles in every float field.
        for w in &mut d.workflows {
            w.trigger.threshold = f64::from_bits(r.gen::<u64>() >> 12 | 0x3FF0_0000_0000_0000) - 1.0;
        }
        for v in d.il_coverage.values_mut() {
            *v = r.gen::<f64>();
        }
        for candidate in [e.state().slices[&o.id].descriptor.clone(), d] {
            let text = candidate.to_text();
            let parsed = NslDescriptor::from_text(&text).map_err(|x| format!("seed {seed}: {x}"))?;
            if parsed != candidate || parsed.to_text() != text {
                return Err(format!("seed {seed}: descriptor changed across a round trip"));
            }
            bytes += text.len();
        }
    }
    Ok(format!("{} descriptors, {bytes} bytes, byte-identical", 2 * N))
}

// ---------------------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("admission oracle equivalence", admission_oracle),
        ("placement exactness", placement_exactness),
        ("reservation conservation", reservation_conservation),
        ("design sufficiency", design_sufficiency),
        ("abstraction guarantee", abstraction_guarantee),
        ("event-log replay", event_log_replay),
        ("descriptor round-trip", descriptor_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
