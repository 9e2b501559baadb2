// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::PlacementError;
use crate::admission::search::{find_feasible, Checks, Frame, Model, SearchStats};
use crate::admission::{AdmissionRequest, FeasibleSolution};
use crate::admission::routing::{route_all, Path, RouteDemand};
use crate::infra::{InfrastructureMap, PopId, ResourceVector};

/// Largest problem solved exactly: instances × PoPs.
pub const EXACT_MAX_INSTANCES: usize = 10;
pub const EXACT_MAX_POPS: usize = 8;
const LOCAL_SEARCH_ROUNDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObjectiveKind {
    MinResource,
    MinEnergy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub weights: ResourceVector,
    /// Instances placed here cost nothing in the resource term.
    #[serde(default)]
    pub preferred_pops: BTreeSet<PopId>,
}

impl Default for Objective {
    fn default() -> Self {
        Objective { kind: ObjectiveKind::MinResource, weights: ResourceVector::new(1, 1, 1), preferred_pops: BTreeSet::new() }
    }
}

impl Objective {
    pub fn validate(&self) -> Result<(), PlacementError> {
        let w = self.weights;
        if w.vcpu == 0 || w.mem_gb == 0 || w.storage_gb == 0 {
            return Err(PlacementError::BadObjective("weights must be positive".into()));
        }
        Ok(())
    }
}

/// Compared lexicographically. `pops_used` stays zero under MIN_RESOURCE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub struct Cost {
    pub pops_used: u64,
    pub resource: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    /// Exact within the exact regime, heuristic beyond.
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Placement {
    pub solution: FeasibleSolution,
    pub cost: Cost,
    pub strategy: Strategy,
}

/// Cost of a solution straight from its definition.
pub fn solution_cost(req: &AdmissionRequest, sol: &FeasibleSolution, obj: &Objective) -> Cost {
    let mut resource = 0;
    for inst in &req.instances {
        if let Some(p) = sol.assignment.get(&inst.key) {
            if !obj.preferred_pops.contains(p) {
                resource += inst.demand.dot(&obj.weights);
            }
        }
    }
    for r in &sol.link_routes {
        let bitrate = req.links.iter().find(|l| l.id == r.link_id).map_or(0, |l| l.bitrate_mbps);
        resource += bitrate * r.path.len() as u64;
    }
    let pops_used = match obj.kind {
        ObjectiveKind::MinResource => 0,
        ObjectiveKind::MinEnergy => sol.pops_used().len() as u64,
    };
    Cost { pops_used, resource }
}

pub fn optimize(map: &InfrastructureMap, req: &AdmissionRequest, obj: &Objective) -> Result<Placement, PlacementError> {
    optimize_with(map, req, obj, Strategy::Auto)
}

pub fn optimize_with(
    map: &InfrastructureMap,
    req: &AdmissionRequest,
    obj: &Objective,
    strategy: Strategy,
) -> Result<Placement, PlacementError> {
    obj.validate()?;
    let m = Model::build(map, req);
    let strategy = match strategy {
        Strategy::Auto if m.len() <= EXACT_MAX_INSTANCES && m.pops.len() <= EXACT_MAX_POPS => Strategy::Exact,
        Strategy::Auto => Strategy::Heuristic,
        s => s,
    };
    let ctx = Ctx::new(&m, obj);
    let best = match strategy {
        Strategy::Exact => ctx.exact(),
        _ => ctx.heuristic(),
    };
    let (cost, assign, paths, demands) = best.ok_or(PlacementError::NoFeasibleSolution)?;
    Ok(Placement { solution: m.to_solution(&assign, &paths, &demands), cost, strategy })
}

type Best = (Cost, Vec<usize>, Vec<Path>, Vec<RouteDemand>);

struct Ctx<'a> {
    m: &'a Model,
    energy: bool,
    /// Resource-term cost of instance i on PoP p.
    inst_cost: Vec<Vec<u64>>,
}

impl<'a> Ctx<'a> {
    fn new(m: &'a Model, obj: &Objective) -> Self {
        let inst_cost = (0..m.len())
            .map(|i| {
                m.pops
                    .iter()
                    .map(|p| if obj.preferred_pops.contains(p) { 0 } else { m.demand[i].dot(&obj.weights) })
                    .collect()
            })
            .collect();
        Ctx { m, energy: obj.kind == ObjectiveKind::MinEnergy, inst_cost }
    }

    fn pops_used(&self, assign: &[usize]) -> u64 {
        if self.energy {
            assign.iter().collect::<BTreeSet<_>>().len() as u64
        } else {
            0
        }
    }

    /// Full evaluation of a complete assignment with cheapest routing.
    fn eval(&self, assign: &[usize]) -> Option<Best> {
        if !self.m.assignment_ok(assign) {
            return None;
        }
        let (demands, _) = self.m.route_demands(assign);
        let (paths, route_cost) = route_all(&self.m.wan, &demands, true)?;
        let placed: u64 = assign.iter().enumerate().map(|(i, &p)| self.inst_cost[i][p]).sum();
        Some((Cost { pops_used: self.pops_used(assign), resource: placed + route_cost }, assign.to_vec(), paths, demands))
    }

    fn exact(&self) -> Option<Best> {
        let mut frame = Frame::new(self.m, Checks::ALL);
        if frame.domains.iter().any(Vec::is_empty) {
            return None;
        }
        let mut hosted = vec![0u32; self.m.pops.len()];
        let mut best = None;
        self.branch(&mut frame, 0, &mut hosted, &mut best);
        best
    }

    fn branch(&self, f: &mut Frame, partial: u64, hosted: &mut [u32], best: &mut Option<Best>) {
        let open = if self.energy { hosted.iter().filter(|&&h| h > 0).count() as u64 } else { 0 };
        let rest: u64 = (0..self.m.len())
            .filter(|&j| f.assign[j].is_none())
            .map(|j| f.domains[j].iter().map(|&q| self.inst_cost[j][q]).min().unwrap_or(0))
            .sum();
        if let Some((b, ..)) = best {
            if (Cost { pops_used: open, resource: partial + rest }) >= *b {
                return;
            }
        }
        let Some(i) = f.pick() else {
            let assign = f.complete();
            let (demands, _) = self.m.route_demands(&assign);
            if let Some((paths, rc)) = route_all(&self.m.wan, &demands, true) {
                let cost = Cost { pops_used: open, resource: partial + rc };
                if best.as_ref().is_none_or(|(b, ..)| cost < *b) {
                    *best = Some((cost, assign, paths, demands));
                }
            }
            return;
        };
        let mut order = f.domains[i].clone();
        order.sort_by_key(|&p| (self.inst_cost[i][p], hosted[p] == 0, p));
        for p in order {
            let Some(saved) = f.assign(self.m, Checks::ALL, i, p) else { continue };
            hosted[p] += 1;
            self.branch(f, partial + self.inst_cost[i][p], hosted, best);
            hosted[p] -= 1;
            f.undo(self.m, i, p, saved);
        }
    }

    /// Greedy best-fit decreasing, then relocate and pairwise-swap moves until no move
    /// improves. Falls back to the admission witness when greedy gets stuck.
    fn heuristic(&self) -> Option<Best> {
        let m = self.m;
        let start = self.greedy().and_then(|a| self.eval(&a)).or_else(|| {
            let sol = find_feasible(m, Checks::ALL, &mut SearchStats::default())?;
            self.eval(&m.assignment_of(&sol)?)
        })?;
        let mut best = start;
        for _ in 0..LOCAL_SEARCH_ROUNDS {
            let mut improved = false;
            for i in 0..m.len() {
                for &p in &m.domain[i] {
                    if p == best.1[i] {
                        continue;
                    }
                    let mut cand = best.1.clone();
                    cand[i] = p;
                    if let Some(e) = self.eval(&cand) {
                        if e.0 < best.0 {
                            best = e;
                            improved = true;
                        }
                    }
                }
            }
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    if best.1[i] == best.1[j] {
                        continue;
                    }
                    let mut cand = best.1.clone();
                    cand.swap(i, j);
                    if let Some(e) = self.eval(&cand) {
                        if e.0 < best.0 {
                            best = e;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Some(best)
    }

    fn greedy(&self) -> Option<Vec<usize>> {
        let m = self.m;
        let mut order: Vec<usize> = (0..m.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(m.demand[i].cost_key()), i));
        let mut assign: Vec<Option<usize>> = vec![None; m.len()];
        let mut used = vec![ResourceVector::ZERO; m.pops.len()];
        for i in order {
            let allowed = |p: usize| {
                m.fits(&used[p], i, p)
                    && m.same[i].iter().all(|&j| assign[j].is_none_or(|q| q == p))
                    && m.diff[i].iter().all(|&j| assign[j] != Some(p))
            };
            let p = m.domain[i].iter().copied().filter(|&p| allowed(p)).min_by_key(|&p| {
                let opens = self.energy && used[p].is_zero() && !assign.contains(&Some(p));
                let slack = m.residual[p].saturating_sub(&(used[p] + m.demand[i]));
                (opens, self.inst_cost[i][p], slack.cost_key(), p)
            })?;
            used[p] += m.demand[i];
            assign[i] = Some(p);
        }
        assign.into_iter().collect()
    }
}
