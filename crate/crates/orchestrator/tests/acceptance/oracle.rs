// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Brute-force reference for admission and placement. It shares no code with the search:
//! residuals, paths and costs are recomputed here from their definitions.

use std::collections::BTreeSet;

use nslice_core::admission::{AdmissionRequest, FeasibleSolution, InstanceKey};
use nslice_core::catalog::AffinityKind;
use nslice_core::infra::{InfrastructureMap, PopId};
use nslice_core::placement::{Cost, Objective, ObjectiveKind, ReservationMode, ReservedResource, TimeWindow};

const HOPS: usize = 4;

fn ceiling(c: u64) -> u64 {
    // Overbooking factor 1.5.
    c + c / 2
}

/// Peak of `amounts` active over [qs, qe); only single-shot windows are generated.
fn peak(items: &[(TimeWindow, [u64; 3])], q: &TimeWindow) -> [u64; 3] {
    let mut points = vec![q.start];
    points.extend(items.iter().map(|(w, _)| w.start).filter(|&s| s >= q.start && s < q.end));
    let mut best = [0; 3];
    for t in points {
        let mut sum = [0; 3];
        for (w, a) in items {
            if w.start <= t && t < w.end {
                for k in 0..3 {
                    sum[k] += a[k];
                }
            }
        }
        for k in 0..3 {
            best[k] = best[k].max(sum[k]);
        }
    }
    best
}

fn residual(cap: [u64; 3], hard: &[(TimeWindow, [u64; 3])], all: &[(TimeWindow, [u64; 3])], req: &AdmissionRequest) -> [u64; 3] {
    let mut out = [u64::MAX; 3];
    for w in &req.windows {
        let (h, a) = (peak(hard, w), peak(all, w));
        for k in 0..3 {
            let soft_room = ceiling(cap[k]).saturating_sub(a[k]);
            let r = match req.mode {
                ReservationMode::Hard => cap[k].saturating_sub(h[k]).min(soft_room),
                ReservationMode::Soft => soft_room,
            };
            out[k] = out[k].min(r);
        }
    }
    out
}

pub struct Problem {
    pops: Vec<PopId>,
    keys: Vec<InstanceKey>,
    demand: Vec<[u64; 3]>,
    domain: Vec<Vec<usize>>,
    room: Vec<[u64; 3]>,
    same: Vec<(usize, usize)>,
    diff: Vec<(usize, usize)>,
    /// (id, group at end a, group at end b, bitrate, class)
    vlinks: Vec<(String, String, String, u64, u8)>,
    /// WAN links: (a, b, class, residual)
    wan: Vec<(usize, usize, u8, u64)>,
    wan_ids: Vec<String>,
}

impl Problem {
    pub fn new(map: &InfrastructureMap, req: &AdmissionRequest) -> Problem {
        let pops: Vec<PopId> = map.pops.iter().map(|p| p.id.clone()).collect();
        let pidx = |p: &PopId| pops.iter().position(|q| q == p);
        let mut room = Vec::new();
        for p in &map.pops {
            let mut hard = Vec::new();
            let mut all = Vec::new();
            for r in &map.reservations {
                if let ReservedResource::Compute { pop_id, amount } = &r.resource {
                    if *pop_id == p.id {
                        let a = [amount.vcpu, amount.mem_gb, amount.storage_gb];
                        all.push((r.window, a));
                        if r.mode == ReservationMode::Hard {
                            hard.push((r.window, a));
                        }
                    }
                }
            }
            let c = p.capacity;
            room.push(residual([c.vcpu, c.mem_gb, c.storage_gb], &hard, &all, req));
        }
        let mut wan = Vec::new();
        for l in &map.wan_links {
            let mut hard = Vec::new();
            let mut all = Vec::new();
            for r in &map.reservations {
                if let ReservedResource::Bandwidth { wan_link_id, bitrate_mbps } = &r.resource {
                    if *wan_link_id == l.id {
                        all.push((r.window, [*bitrate_mbps, 0, 0]));
                        if r.mode == ReservationMode::Hard {
                            hard.push((r.window, [*bitrate_mbps, 0, 0]));
                        }
                    }
                }
            }
            let res = residual([l.capacity_mbps, 0, 0], &hard, &all, req)[0];
            wan.push((pidx(&l.endpoint_a).unwrap(), pidx(&l.endpoint_b).unwrap(), l.reliability_class, res));
        }
        let keys: Vec<InstanceKey> = req.instances.iter().map(|i| i.key.clone()).collect();
        let kidx = |k: &InstanceKey| keys.iter().position(|q| q == k);
        let domain = keys
            .iter()
            .map(|k| {
                let mut d: Vec<usize> = req.candidates.get(k).into_iter().flatten().filter_map(pidx).collect();
                d.sort_unstable();
                d.dedup();
                d
            })
            .collect();
        let mut same = Vec::new();
        let mut diff = Vec::new();
        for c in &req.constraints {
            if let (Some(a), Some(b)) = (kidx(&c.a), kidx(&c.b)) {
                match c.kind {
                    AffinityKind::SamePop => same.push((a, b)),
                    AffinityKind::DifferentPop => diff.push((a, b)),
                }
            }
        }
        Problem {
            demand: req.instances.iter().map(|i| [i.demand.vcpu, i.demand.mem_gb, i.demand.storage_gb]).collect(),
            vlinks: req
                .links
                .iter()
                .map(|l| (l.id.clone(), l.endpoints[0].clone(), l.endpoints[1].clone(), l.bitrate_mbps, l.reliability_class))
                .collect(),
            wan_ids: map.wan_links.iter().map(|l| l.id.to_string()).collect(),
            pops,
            keys,
            domain,
            room,
            same,
            diff,
            wan,
        }
    }

    /// Every simple path of at most four WAN links between two PoPs.
    fn paths(&self, a: usize, b: usize) -> Vec<Vec<usize>> {
        fn walk(p: &Problem, at: usize, goal: usize, seen: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if at == goal {
                out.push(cur.clone());
                return;
            }
            if cur.len() == HOPS {
                return;
            }
            for (li, &(x, y, _, _)) in p.wan.iter().enumerate() {
                let next = if x == at { y } else if y == at { x } else { continue };
                if seen.contains(&next) {
                    continue;
                }
                seen.push(next);
                cur.push(li);
                walk(p, next, goal, seen, cur, out);
                cur.pop();
                seen.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, a, b, &mut vec![a], &mut Vec::new(), &mut out);
        out
    }

    /// (virtual link, PoP a, PoP b, bitrate, class) for every pair needing a WAN route.
    fn demands(&self, assign: &[usize]) -> Vec<(usize, usize, usize, u64, u8)> {
        let mut out = Vec::new();
        for (li, (_, ga, gb, bitrate, class)) in self.vlinks.iter().enumerate() {
            let hosts = |g: &str| -> BTreeSet<usize> {
                self.keys.iter().zip(assign).filter(|(k, _)| k.group == g).map(|(_, &p)| p).collect()
            };
            let mut pairs = BTreeSet::new();
            for a in hosts(ga) {
                for b in hosts(gb) {
                    if a != b {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
            out.extend(pairs.into_iter().map(|(a, b)| (li, a, b, *bitrate, *class)));
        }
        out
    }

    fn placement_ok(&self, assign: &[usize]) -> bool {
        if self.same.iter().any(|&(a, b)| assign[a] != assign[b]) || self.diff.iter().any(|&(a, b)| assign[a] == assign[b]) {
            return false;
        }
        let mut used = vec![[0u64; 3]; self.pops.len()];
        for (i, &p) in assign.iter().enumerate() {
            for (u, d) in used[p].iter_mut().zip(&self.demand[i]) {
                *u += d;
            }
        }
        used.iter().zip(&self.room).all(|(u, r)| (0..3).all(|k| u[k] <= r[k]))
    }

    /// Calls `f` with the total bitrate×hops of every valid routing of `assign`.
    fn routings(&self, assign: &[usize], f: &mut dyn FnMut(u64)) {
        let demands = self.demands(assign);
        let options: Vec<Vec<Vec<usize>>> = demands
            .iter()
            .map(|&(_, a, b, _, class)| {
                self.paths(a, b).into_iter().filter(|p| p.iter().all(|&l| self.wan[l].2 >= class)).collect()
            })
            .collect();
        let mut load = vec![0u64; self.wan.len()];
        fn rec(p: &Problem, d: &[(usize, usize, usize, u64, u8)], o: &[Vec<Vec<usize>>], k: usize, load: &mut Vec<u64>, cost: u64, f: &mut dyn FnMut(u64)) {
            if k == d.len() {
                if load.iter().zip(&p.wan).all(|(u, w)| *u <= w.3) {
                    f(cost);
                }
                return;
            }
            for path in &o[k] {
                for &l in path {
                    load[l] += d[k].3;
                }
                rec(p, d, o, k + 1, load, cost + d[k].3 * path.len() as u64, f);
                for &l in path {
                    load[l] -= d[k].3;
                }
            }
        }
        rec(self, &demands, &options, 0, &mut load, 0, f);
    }

    fn assignments(&self, f: &mut dyn FnMut(&[usize])) {
        fn rec(p: &Problem, i: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if i == p.keys.len() {
                if p.placement_ok(cur) {
                    f(cur);
                }
                return;
            }
            for &pop in &p.domain[i] {
                cur.push(pop);
                rec(p, i + 1, cur, f);
                cur.pop();
            }
        }
        rec(self, 0, &mut Vec::new(), f);
    }

    /// Number of complete assignments the brute force would look at.
    pub fn space(&self) -> u128 {
        self.domain.iter().map(|d| d.len() as u128).product()
    }

    pub fn feasible(&self) -> bool {
        let mut found = false;
        self.assignments(&mut |a| {
            if !found {
                self.routings(a, &mut |_| found = true);
            }
        });
        found
    }

    /// Minimum cost over every feasible (assignment, routing) pair.
    pub fn min_cost(&self, obj: &Objective) -> Option<Cost> {
        let mut best: Option<Cost> = None;
        self.assignments(&mut |a| {
            let base = self.compute_cost(a, obj);
            let mut route_best: Option<u64> = None;
            self.routings(a, &mut |c| route_best = Some(route_best.map_or(c, |b| b.min(c))));
            if let Some(r) = route_best {
                let c = Cost { pops_used: base.0, resource: base.1 + r };
                if best.is_none_or(|b| c < b) {
                    best = Some(c);
                }
            }
        });
        best
    }

    fn compute_cost(&self, assign: &[usize], obj: &Objective) -> (u64, u64) {
        let w = [obj.weights.vcpu, obj.weights.mem_gb, obj.weights.storage_gb];
        let mut resource = 0;
        for (i, &p) in assign.iter().enumerate() {
            if !obj.preferred_pops.contains(&self.pops[p]) {
                resource += (0..3).map(|k| self.demand[i][k] * w[k]).sum::<u64>();
            }
        }
        let pops = match obj.kind {
            ObjectiveKind::MinResource => 0,
            ObjectiveKind::MinEnergy => assign.iter().collect::<BTreeSet<_>>().len() as u64,
        };
        (pops, resource)
    }

    /// Checks a claimed solution against every constraint; returns its cost on success.
    pub fn check(&self, sol: &FeasibleSolution, obj: &Objective) -> Result<Cost, String> {
        let mut assign = Vec::new();
        for (i, k) in self.keys.iter().enumerate() {
            let p = sol.assignment.get(k).ok_or(format!("{k} unplaced"))?;
            let p = self.pops.iter().position(|q| q == p).ok_or(format!("{k} on unknown {p}"))?;
            if !self.domain[i].contains(&p) {
                return Err(format!("{k} outside its candidates"));
            }
            assign.push(p);
        }
        if sol.assignment.len() != self.keys.len() {
            return Err("extra instances placed".into());
        }
        if !self.placement_ok(&assign) {
            return Err("affinity or capacity violated".into());
        }
        let mut load = vec![0u64; self.wan.len()];
        let mut route_cost = 0;
        for (li, a, b, bitrate, class) in self.demands(&assign) {
            let (pa, pb) = (&self.pops[a], &self.pops[b]);
            let r = sol
                .link_routes
                .iter()
                .filter(|r| r.link_id == self.vlinks[li].0)
                .find(|r| (&r.pops[0] == pa && &r.pops[1] == pb) || (&r.pops[0] == pb && &r.pops[1] == pa))
                .filter(|r| !r.path.is_empty())
                .ok_or(format!("no route {pa}-{pb}"))?;
            let path: Vec<usize> = r
                .path
                .iter()
                .map(|id| self.wan_ids.iter().position(|w| w == id.as_str()).ok_or(format!("unknown WAN link {id}")))
                .collect::<Result<_, _>>()?;
            if path.len() > HOPS {
                return Err(format!("route {pa}-{pb} too long"));
            }
            let mut at = a;
            let mut seen = vec![a];
            for &l in &path {
                let (x, y, c, _) = self.wan[l];
                at = if x == at { y } else if y == at { x } else { return Err(format!("route {pa}-{pb} is broken")) };
                if seen.contains(&at) {
                    return Err(format!("route {pa}-{pb} loops"));
                }
                seen.push(at);
                if c < class {
                    return Err(format!("route {pa}-{pb} below class {class}"));
                }
                load[l] += bitrate;
            }
            if at != b {
                return Err(format!("route {pa}-{pb} ends elsewhere"));
            }
            route_cost += bitrate * path.len() as u64;
        }
        if load.iter().zip(&self.wan).any(|(u, w)| *u > w.3) {
            return Err("WAN link overbooked".into());
        }
        let (pops_used, resource) = self.compute_cost(&assign, obj);
        Ok(Cost { pops_used, resource: resource + route_cost })
    }
}
