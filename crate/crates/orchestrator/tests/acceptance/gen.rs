// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Seeded random infrastructures and admission requests.

use std::collections::{BTreeMap, BTreeSet};

use nslice_core::admission::{AdmissionRequest, InstanceKey, InstanceSpec, LinkRequirement, PairConstraint};
use nslice_core::catalog::AffinityKind;
use nslice_core::infra::{Capability, InfrastructureMap, LinkId, Pop, PopId, ResourceVector, WanLink};
use nslice_core::placement::{Reservation, ReservationMode, ReservedResource, TimeWindow};
use rand::seq::SliceRandom;
use rand::Rng;

pub const REGIONS: [&str; 4] = ["eu-west", "eu-south", "ap-east", "us-east"];

pub struct Shape {
    pub pops: (usize, usize),
    pub wan_links: (usize, usize),
    pub instances: (usize, usize),
    pub groups: usize,
    pub vlinks: usize,
    pub prior_bookings: usize,
    /// Multiplies PoP capacities.
    pub scale: u64,
    /// Chance that a pair of instances gets an affinity rule.
    pub affinity: f64,
}

pub fn pop(id: String, region: &str, ha: bool, capacity: ResourceVector) -> Pop {
    Pop {
        id: PopId::new(id),
        region: region.into(),
        capabilities: if ha { BTreeSet::from([Capability::Ha]) } else { BTreeSet::new() },
        capacity,
        owner_domain: "d".into(),
    }
}

pub fn map(rng: &mut impl Rng, s: &Shape) -> InfrastructureMap {
    let n = rng.gen_range(s.pops.0..=s.pops.1);
    let pops: Vec<Pop> = (0..n)
        .map(|i| {
            let cap = ResourceVector::new(rng.gen_range(2..=10), rng.gen_range(2..=16), rng.gen_range(10..=40)).scale(s.scale);
            pop(format!("p{i}"), REGIONS[rng.gen_range(0..REGIONS.len())], rng.gen_bool(0.5), cap)
        })
        .collect();
    let mut links = Vec::new();
    if n > 1 {
        for i in 0..rng.gen_range(s.wan_links.0..=s.wan_links.1) {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            links.push(WanLink {
                id: LinkId::new(format!("w{i}")),
                endpoint_a: PopId::new(format!("p{a}")),
                endpoint_b: PopId::new(format!("p{b}")),
                capacity_mbps: *[50, 100, 200].choose(rng).unwrap(),
                reliability_class: rng.gen_range(1..=3),
            });
        }
    }
    let mut m = InfrastructureMap::new(pops, links).unwrap();
    for k in 0..rng.gen_range(0..=s.prior_bookings) {
        let start = rng.gen_range(0..900);
        let window = TimeWindow::once(start, start + rng.gen_range(1..=300));
        let mode = if rng.gen_bool(0.7) { ReservationMode::Hard } else { ReservationMode::Soft };
        let resource = if m.wan_links.is_empty() || rng.gen_bool(0.7) {
            let p = &m.pops[rng.gen_range(0..n)];
            let c = p.capacity;
            ReservedResource::Compute {
                pop_id: p.id.clone(),
                amount: ResourceVector::new(rng.gen_range(0..=c.vcpu / 2), rng.gen_range(0..=c.mem_gb / 2), rng.gen_range(0..=c.storage_gb / 2)),
            }
        } else {
            let l = &m.wan_links[rng.gen_range(0..m.wan_links.len())];
            ReservedResource::Bandwidth { wan_link_id: l.id.clone(), bitrate_mbps: rng.gen_range(0..=l.capacity_mbps / 2) }
        };
        m.reservations.push(Reservation { id: format!("x{k}"), order_id: format!("prior-{k}"), resource, window, mode });
    }
    m
}

pub fn request(rng: &mut impl Rng, m: &InfrastructureMap, s: &Shape) -> AdmissionRequest {
    let n = rng.gen_range(s.instances.0..=s.instances.1);
    let groups = rng.gen_range(1..=s.groups.min(n));
    // Every group gets at least one instance.
    let mut group_of: Vec<usize> = (0..groups).collect();
    group_of.extend((groups..n).map(|_| rng.gen_range(0..groups)));
    group_of.sort_unstable();
    let mut counts = vec![0u32; groups];
    let mut instances = Vec::new();
    let mut demand_of = BTreeMap::new();
    for &g in &group_of {
        let d = *demand_of.entry(g).or_insert_with(|| {
            ResourceVector::new(rng.gen_range(1..=4), rng.gen_range(1..=6), rng.gen_range(1..=10))
        });
        instances.push(InstanceSpec { key: InstanceKey::new(format!("g{g}"), counts[g]), function_tag: format!("f{g}"), demand: d });
        counts[g] += 1;
    }
    let pop_ids: Vec<PopId> = m.pops.iter().map(|p| p.id.clone()).collect();
    let mut candidates = BTreeMap::new();
    for inst in &instances {
        let set: BTreeSet<PopId> = if rng.gen_bool(0.03) {
            BTreeSet::new()
        } else {
            let k = rng.gen_range(1..=pop_ids.len());
            pop_ids.choose_multiple(rng, k).cloned().collect()
        };
        candidates.insert(inst.key.clone(), set);
    }
    let mut constraints = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(s.affinity) {
                let kind = if rng.gen_bool(0.5) { AffinityKind::SamePop } else { AffinityKind::DifferentPop };
                constraints.push(PairConstraint { kind, a: instances[i].key.clone(), b: instances[j].key.clone() });
            }
        }
    }
    let mut links = Vec::new();
    if groups > 1 {
        for i in 0..rng.gen_range(0..=s.vlinks) {
            let a = rng.gen_range(0..groups);
            let b = (a + rng.gen_range(1..groups)) % groups;
            links.push(LinkRequirement {
                id: format!("v{i}"),
                endpoints: [format!("g{a}"), format!("g{b}")],
                bitrate_mbps: *[10, 50, 100, 150].choose(rng).unwrap(),
                reliability_class: rng.gen_range(1..=3),
            });
        }
    }
    let s1 = rng.gen_range(0..500);
    let e1 = s1 + rng.gen_range(1..=300);
    let mut windows = vec![TimeWindow::once(s1, e1)];
    if rng.gen_bool(0.3) {
        let s2 = e1 + rng.gen_range(0..200);
        windows.push(TimeWindow::once(s2, s2 + rng.gen_range(1..=200)));
    }
    AdmissionRequest {
        order_id: "o".into(),
        il_id: "il".into(),
        instances,
        candidates,
        constraints,
        links,
        windows,
        mode: if rng.gen_bool(0.8) { ReservationMode::Hard } else { ReservationMode::Soft },
    }
}
