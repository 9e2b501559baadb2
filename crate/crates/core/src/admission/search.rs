// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Index-based form of an admission request and the backtracking search over it.

use std::collections::{BTreeMap, BTreeSet};

use super::routing::{route_all, Path, RouteDemand, WanGraph};
use super::{AdmissionRequest, FeasibleSolution, InstanceKey, LinkRoute};
use crate::catalog::AffinityKind;
use crate::infra::{InfrastructureMap, PopId, ResourceVector};

/// Which constraint families a search enforces. Relaxed searches classify failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Checks {
    pub capacity: bool,
    pub links: bool,
}

impl Checks {
    pub const ALL: Checks = Checks { capacity: true, links: true };
}

pub(crate) struct LinkReq {
    pub id: String,
    pub groups: [usize; 2],
    pub bitrate: u64,
    pub class: u8,
}

pub(crate) struct Model {
    pub keys: Vec<InstanceKey>,
    pub demand: Vec<ResourceVector>,
    pub group: Vec<usize>,
    pub pops: Vec<PopId>,
    /// Candidate PoP indices per instance, ascending.
    pub domain: Vec<Vec<usize>>,
    pub same: Vec<Vec<usize>>,
    pub diff: Vec<Vec<usize>>,
    /// Residual compute per PoP, minimum over every requested window.
    pub residual: Vec<ResourceVector>,
    pub links: Vec<LinkReq>,
    pub wan: WanGraph,
}

impl Model {
    pub fn build(map: &InfrastructureMap, req: &AdmissionRequest) -> Model {
        let pops: Vec<PopId> = map.pops.iter().map(|p| p.id.clone()).collect();
        let pop_index: BTreeMap<&PopId, usize> = pops.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let residual = map
            .pops
            .iter()
            .map(|p| {
                req.windows
                    .iter()
                    .map(|w| map.residual_for(&p.id, w, req.mode).expect("pop from this map"))
                    .reduce(|a, b| a.component_min(&b))
                    .unwrap_or(p.capacity)
            })
            .collect();
        let keys: Vec<InstanceKey> = req.instances.iter().map(|i| i.key.clone()).collect();
        let key_index: BTreeMap<&InstanceKey, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut groups: Vec<&str> = Vec::new();
        let group = keys
            .iter()
            .map(|k| match groups.iter().position(|g| *g == k.group) {
                Some(g) => g,
                None => {
                    groups.push(&k.group);
                    groups.len() - 1
                }
            })
            .collect::<Vec<_>>();
        let domain = keys
            .iter()
            .map(|k| {
                let mut d: Vec<usize> = req
                    .candidates
                    .get(k)
                    .into_iter()
                    .flatten()
                    .filter_map(|p| pop_index.get(p).copied())
                    .collect();
                d.sort_unstable();
                d
            })
            .collect();
        let n = keys.len();
        let (mut same, mut diff) = (vec![Vec::new(); n], vec![Vec::new(); n]);
        for c in &req.constraints {
            let (Some(&a), Some(&b)) = (key_index.get(&c.a), key_index.get(&c.b)) else { continue };
            if a == b {
                continue;
            }
            let list = match c.kind {
                AffinityKind::SamePop => &mut same,
                AffinityKind::DifferentPop => &mut diff,
            };
            list[a].push(b);
            list[b].push(a);
        }
        let links = req
            .links
            .iter()
            .map(|l| {
                let g = |name: &str| groups.iter().position(|g| *g == name).unwrap_or(usize::MAX);
                LinkReq {
                    id: l.id.clone(),
                    groups: [g(&l.endpoints[0]), g(&l.endpoints[1])],
                    bitrate: l.bitrate_mbps,
                    class: l.reliability_class,
                }
            })
            .collect();
        let wan = WanGraph::build(map, &pops, &req.windows, req.mode);
        Model {
            keys,
            demand: req.instances.iter().map(|i| i.demand).collect(),
            group,
            pops,
            domain,
            same,
            diff,
            residual,
            links,
            wan,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    /// Routed demands an assignment implies: one per link per distinct unordered pair of
    /// PoPs hosting its two endpoint groups. Co-located pairs need no route.
    pub fn route_demands(&self, assign: &[usize]) -> (Vec<RouteDemand>, Vec<(usize, usize, usize)>) {
        let mut demands = Vec::new();
        let mut local = Vec::new();
        for (li, l) in self.links.iter().enumerate() {
            let hosts = |g: usize| -> BTreeSet<usize> {
                (0..self.len()).filter(|&i| self.group[i] == g).map(|i| assign[i]).collect()
            };
            let (ha, hb) = (hosts(l.groups[0]), hosts(l.groups[1]));
            let mut pairs = BTreeSet::new();
            for &a in &ha {
                for &b in &hb {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            for (a, b) in pairs {
                if a == b {
                    local.push((li, a, b));
                } else {
                    demands.push(RouteDemand { link: li, a, b, bitrate: l.bitrate, class: l.class });
                }
            }
        }
        (demands, local)
    }

    pub fn fits(&self, used: &ResourceVector, i: usize, p: usize) -> bool {
        (*used + self.demand[i]).fits_within(&self.residual[p])
    }

    /// Whether a complete assignment satisfies candidates, affinity and capacity.
    pub fn assignment_ok(&self, assign: &[usize]) -> bool {
        let mut used = vec![ResourceVector::ZERO; self.pops.len()];
        for (i, &p) in assign.iter().enumerate() {
            if !self.domain[i].contains(&p) {
                return false;
            }
            if self.same[i].iter().any(|&j| assign[j] != p) || self.diff[i].iter().any(|&j| assign[j] == p) {
                return false;
            }
            used[p] += self.demand[i];
        }
        used.iter().zip(&self.residual).all(|(u, r)| u.fits_within(r))
    }

    pub fn to_solution(&self, assign: &[usize], paths: &[Path], demands: &[RouteDemand]) -> FeasibleSolution {
        let (_, local) = self.route_demands(assign);
        let mut link_routes: Vec<LinkRoute> = demands
            .iter()
            .zip(paths)
            .map(|(d, p)| LinkRoute {
                link_id: self.links[d.link].id.clone(),
                pops: [self.pops[d.a].clone(), self.pops[d.b].clone()],
                path: p.iter().map(|&l| self.wan.ids[l].clone()).collect(),
            })
            .chain(local.into_iter().map(|(li, a, _)| LinkRoute {
                link_id: self.links[li].id.clone(),
                pops: [self.pops[a].clone(), self.pops[a].clone()],
                path: Vec::new(),
            }))
            .collect();
        link_routes.sort_by(|x, y| (&x.link_id, &x.pops).cmp(&(&y.link_id, &y.pops)));
        FeasibleSolution {
            assignment: self.keys.iter().cloned().zip(assign.iter().map(|&p| self.pops[p].clone())).collect(),
            link_routes,
        }
    }

    pub fn assignment_of(&self, sol: &FeasibleSolution) -> Option<Vec<usize>> {
        self.keys
            .iter()
            .map(|k| sol.assignment.get(k).and_then(|p| self.pops.iter().position(|q| q == p)))
            .collect()
    }
}

/// Search state shared by the feasibility search and the branch-and-bound optimizer.
pub(crate) struct Frame {
    pub assign: Vec<Option<usize>>,
    pub used: Vec<ResourceVector>,
    pub domains: Vec<Vec<usize>>,
}

impl Frame {
    pub fn new(m: &Model, checks: Checks) -> Frame {
        let domains = (0..m.len())
            .map(|i| {
                m.domain[i]
                    .iter()
                    .copied()
                    .filter(|&p| !checks.capacity || m.fits(&ResourceVector::ZERO, i, p))
                    .collect()
            })
            .collect();
        Frame { assign: vec![None; m.len()], used: vec![ResourceVector::ZERO; m.pops.len()], domains }
    }

    /// Unassigned instance with the fewest remaining candidates, lowest index on ties.
    pub fn pick(&self) -> Option<usize> {
        (0..self.assign.len()).filter(|&i| self.assign[i].is_none()).min_by_key(|&i| (self.domains[i].len(), i))
    }

    /// Assigns `i` to `p` and prunes the domains of unassigned instances. Returns the
    /// pruned domains for undo, or `None` on a wipe-out (state already restored).
    pub fn assign(&mut self, m: &Model, checks: Checks, i: usize, p: usize) -> Option<Vec<(usize, Vec<usize>)>> {
        self.assign[i] = Some(p);
        self.used[p] += m.demand[i];
        let mut saved = Vec::new();
        let mut wiped = false;
        for j in 0..m.len() {
            if self.assign[j].is_some() {
                continue;
            }
            let keep = |q: &usize| -> bool {
                if m.same[i].contains(&j) && *q != p {
                    return false;
                }
                if m.diff[i].contains(&j) && *q == p {
                    return false;
                }
                !(checks.capacity && *q == p && !m.fits(&self.used[p], j, p))
            };
            if self.domains[j].iter().all(keep) {
                continue;
            }
            let pruned: Vec<usize> = self.domains[j].iter().copied().filter(keep).collect();
            let old = std::mem::replace(&mut self.domains[j], pruned);
            let empty = self.domains[j].is_empty();
            saved.push((j, old));
            if empty {
                wiped = true;
                break;
            }
        }
        if wiped {
            self.undo(m, i, p, saved);
            return None;
        }
        Some(saved)
    }

    pub fn undo(&mut self, m: &Model, i: usize, p: usize, saved: Vec<(usize, Vec<usize>)>) {
        for (j, old) in saved.into_iter().rev() {
            self.domains[j] = old;
        }
        self.used[p] = self.used[p].saturating_sub(&m.demand[i]);
        self.assign[i] = None;
    }

    pub fn complete(&self) -> Vec<usize> {
        self.assign.iter().map(|a| a.expect("complete assignment")).collect()
    }
}

/// Outcome of a leaf evaluation that failed only on routing, kept for diagnostics.
#[derive(Debug, Clone, Default)]
pub(crate) struct SearchStats {
    pub leaves: u64,
    pub routing_failures: BTreeMap<String, u64>,
}

/// Depth-first search with minimum-remaining-values ordering and forward checking.
pub(crate) fn find_feasible(m: &Model, checks: Checks, stats: &mut SearchStats) -> Option<FeasibleSolution> {
    if m.len() == 0 {
        return Some(m.to_solution(&[], &[], &[]));
    }
    let mut frame = Frame::new(m, checks);
    if frame.domains.iter().any(Vec::is_empty) {
        return None;
    }
    dfs(m, checks, &mut frame, stats)
}

fn dfs(m: &Model, checks: Checks, f: &mut Frame, stats: &mut SearchStats) -> Option<FeasibleSolution> {
    let Some(i) = f.pick() else {
        stats.leaves += 1;
        let assign = f.complete();
        if !checks.links {
            return Some(m.to_solution(&assign, &[], &[]));
        }
        let (demands, _) = m.route_demands(&assign);
        return match route_all(&m.wan, &demands, false) {
            Some((paths, _)) => Some(m.to_solution(&assign, &paths, &demands)),
            None => {
                let culprit = first_unroutable(m, &demands);
                *stats.routing_failures.entry(culprit).or_default() += 1;
                None
            }
        };
    };
    for p in f.domains[i].clone() {
        let Some(saved) = f.assign(m, checks, i, p) else { continue };
        if let Some(sol) = dfs(m, checks, f, stats) {
            return Some(sol);
        }
        f.undo(m, i, p, saved);
    }
    None
}

/// Names the first demand that cannot be routed on its own, or the whole set when only
/// their combination fails.
fn first_unroutable(m: &Model, demands: &[RouteDemand]) -> String {
    for d in demands {
        if route_all(&m.wan, std::slice::from_ref(d), false).is_none() {
            return format!(
                "virtual link {} needs {} Mbps at reliability class >= {} between {} and {}",
                m.links[d.link].id, d.bitrate, d.class, m.pops[d.a], m.pops[d.b]
            );
        }
    }
    let ids: BTreeSet<&str> = demands.iter().map(|d| m.links[d.link].id.as_str()).collect();
    format!("WAN capacity cannot carry virtual links {ids:?} together")
}
