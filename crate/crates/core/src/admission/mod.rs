// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Three-step admission control.
//!
//! Step 1 computes candidate PoPs per VNF instance from the resource-agnostic view only.
//! Step 2 packages the target level, candidates, windows and link needs into an
//! [`AdmissionRequest`]. Step 3 searches the capacity-level map for one feasible
//! assignment.

pub(crate) mod routing;
pub(crate) mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::routing::MAX_HOPS;
use self::search::{find_feasible, Checks, Model, SearchStats};
use crate::catalog::{
    resolve_nsl, AffinityKind, Catalog, CatalogError, PerformanceVector, ReliabilityReq, ResolvedDeployment,
};
use crate::infra::{abstract_view, AbstractPopView, Capability, InfrastructureMap, LinkId, PopId, ResourceVector};
use crate::ordering::{effective_requirements, OrderError, OrderStatus, ServiceOrder};
use crate::placement::ReservationMode;
use crate::slice_design::NslDesign;
use crate::window::{validate_window_list, TimeWindow};

/// One VNF instance: `index` counts from zero within its instance group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(into = "String", try_from = "String")]
pub struct InstanceKey {
    pub group: String,
    pub index: u32,
}

impl InstanceKey {
    pub fn new(group: impl Into<String>, index: u32) -> Self {
        InstanceKey { group: group.into(), index }
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.group, self.index)
    }
}

impl From<InstanceKey> for String {
    fn from(k: InstanceKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for InstanceKey {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let bad = || format!("instance key {s:?} is not of the form group[index]");
        let body = s.strip_suffix(']').ok_or_else(bad)?;
        let (group, index) = body.rsplit_once('[').ok_or_else(bad)?;
        Ok(InstanceKey { group: group.into(), index: index.parse().map_err(|_| bad())? })
    }
}

pub type CandidateSet = BTreeMap<InstanceKey, BTreeSet<PopId>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct InstanceSpec {
    pub key: InstanceKey,
    pub function_tag: String,
    pub demand: ResourceVector,
}

/// Pairwise placement rule between two instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct PairConstraint {
    pub kind: AffinityKind,
    pub a: InstanceKey,
    pub b: InstanceKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct LinkRequirement {
    pub id: String,
    /// Instance group ids at either end.
    pub endpoints: [String; 2],
    pub bitrate_mbps: u64,
    pub reliability_class: u8,
}

/// What the slice side hands to the resource side: no capacity data in here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AdmissionRequest {
    pub order_id: String,
    pub il_id: String,
    pub instances: Vec<InstanceSpec>,
    pub candidates: CandidateSet,
    pub constraints: Vec<PairConstraint>,
    pub links: Vec<LinkRequirement>,
    pub windows: Vec<TimeWindow>,
    pub mode: ReservationMode,
}

/// Routing of one virtual link between two hosting PoPs; `path` is empty when both ends
/// share a PoP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct LinkRoute {
    pub link_id: String,
    pub pops: [PopId; 2],
    pub path: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct FeasibleSolution {
    pub assignment: BTreeMap<InstanceKey, PopId>,
    pub link_routes: Vec<LinkRoute>,
}

impl FeasibleSolution {
    pub fn pops_used(&self) -> BTreeSet<&PopId> {
        self.assignment.values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfeasibleCause {
    Capacity,
    Affinity,
    Connectivity,
    Geolocation,
    Reliability,
    Temporal,
}

impl fmt::Display for InfeasibleCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize, JsonSchema)]
#[error("infeasible ({cause}): {binding_constraint}")]
pub struct Infeasible {
    pub cause: InfeasibleCause,
    pub binding_constraint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CandidateError {
    #[error("no PoP in an allowed region for {instance}")]
    Geolocation { instance: InstanceKey },
    #[error("no PoP satisfying the reliability requirement for {instance}")]
    Reliability { instance: InstanceKey },
}

impl From<CandidateError> for Infeasible {
    fn from(e: CandidateError) -> Self {
        let cause = match e {
            CandidateError::Geolocation { .. } => InfeasibleCause::Geolocation,
            CandidateError::Reliability { .. } => InfeasibleCause::Reliability,
        };
        Infeasible { cause, binding_constraint: e.to_string() }
    }
}

/// Instances a deployment expands to, in group order.
pub fn instances_of(dep: &ResolvedDeployment) -> Vec<InstanceSpec> {
    dep.groups
        .iter()
        .flat_map(|g| {
            (0..g.instance_count).map(move |i| InstanceSpec {
                key: InstanceKey::new(&g.id, i),
                function_tag: g.function_tag.clone(),
                demand: g.demand,
            })
        })
        .collect()
}

/// Step 1. A PoP is a candidate for an instance when its region is allowed for the
/// instance's function (any region when the function has no geo requirement) and, if the
/// instance's group requires it, the PoP offers HA.
pub fn compute_candidates(
    view: &[AbstractPopView],
    dep: &ResolvedDeployment,
    geo_reqs: &BTreeMap<String, BTreeSet<String>>,
) -> Result<CandidateSet, CandidateError> {
    let mut out = CandidateSet::new();
    for g in &dep.groups {
        let regions = geo_reqs.get(&g.function_tag);
        let in_region: Vec<&AbstractPopView> =
            view.iter().filter(|p| regions.is_none_or(|r| r.contains(&p.region))).collect();
        let set: BTreeSet<PopId> = in_region
            .iter()
            .filter(|p| !g.reliability.requires_ha_pop || p.capabilities.contains(&Capability::Ha))
            .map(|p| p.pop_id.clone())
            .collect();
        for i in 0..g.instance_count {
            let instance = InstanceKey::new(&g.id, i);
            if set.is_empty() {
                return Err(if in_region.is_empty() {
                    CandidateError::Geolocation { instance }
                } else {
                    CandidateError::Reliability { instance }
                });
            }
            out.insert(instance, set.clone());
        }
    }
    Ok(out)
}

/// Pairwise rules implied by group affinity and by backups. The last `backup_count`
/// instances of a group are its backups and must sit apart from every primary.
pub fn pair_constraints(dep: &ResolvedDeployment) -> Vec<PairConstraint> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |kind: AffinityKind, a: InstanceKey, b: InstanceKey, out: &mut Vec<PairConstraint>| {
        if a == b {
            return;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if seen.insert((kind, a.clone(), b.clone())) {
            out.push(PairConstraint { kind, a, b });
        }
    };
    for g in &dep.groups {
        for rule in &g.affinity {
            let Some(peer) = dep.group(&rule.peer) else { continue };
            for i in 0..g.instance_count {
                for j in 0..peer.instance_count {
                    push(rule.kind, InstanceKey::new(&g.id, i), InstanceKey::new(&peer.id, j), &mut out);
                }
            }
        }
        let ReliabilityReq { backup_count, .. } = g.reliability;
        let primaries = g.instance_count.saturating_sub(backup_count);
        for b in primaries..g.instance_count {
            for p in 0..primaries {
                push(AffinityKind::DifferentPop, InstanceKey::new(&g.id, b), InstanceKey::new(&g.id, p), &mut out);
            }
        }
    }
    out
}

/// Step 2 from a resolved deployment and the requirements that frame it.
pub fn build_request(
    order_id: &str,
    il_id: &str,
    dep: &ResolvedDeployment,
    candidates: CandidateSet,
    windows: &[TimeWindow],
    mode: ReservationMode,
) -> AdmissionRequest {
    AdmissionRequest {
        order_id: order_id.into(),
        il_id: il_id.into(),
        instances: instances_of(dep),
        candidates,
        constraints: pair_constraints(dep),
        links: dep
            .links
            .iter()
            .map(|l| LinkRequirement {
                id: l.id.clone(),
                endpoints: l.endpoints.clone(),
                bitrate_mbps: l.bitrate_mbps,
                reliability_class: l.reliability_class,
            })
            .collect(),
        windows: windows.to_vec(),
        mode,
    }
}

/// Step 3. Returns a witness or the cause of infeasibility, classified by successive
/// relaxation: with capacity and links ignored only affinity can fail; with links
/// ignored, capacity; otherwise connectivity.
pub fn check_feasibility(map: &InfrastructureMap, req: &AdmissionRequest) -> Result<FeasibleSolution, Infeasible> {
    if req.windows.is_empty() {
        return Err(Infeasible {
            cause: InfeasibleCause::Temporal,
            binding_constraint: "no active time window requested".into(),
        });
    }
    if let Err(e) = validate_window_list(&req.windows) {
        return Err(Infeasible { cause: InfeasibleCause::Temporal, binding_constraint: e.to_string() });
    }
    let model = Model::build(map, req);
    if let Some(k) = model.domain.iter().position(Vec::is_empty) {
        return Err(Infeasible {
            cause: InfeasibleCause::Geolocation,
            binding_constraint: format!("{} has no candidate PoP in this infrastructure", model.keys[k]),
        });
    }
    let mut stats = SearchStats::default();
    if let Some(sol) = find_feasible(&model, Checks::ALL, &mut stats) {
        return Ok(sol);
    }
    let none = Checks { capacity: false, links: false };
    if find_feasible(&model, none, &mut SearchStats::default()).is_none() {
        return Err(Infeasible { cause: InfeasibleCause::Affinity, binding_constraint: affinity_story(req) });
    }
    let cap_only = Checks { capacity: true, links: false };
    if find_feasible(&model, cap_only, &mut SearchStats::default()).is_none() {
        return Err(Infeasible { cause: InfeasibleCause::Capacity, binding_constraint: capacity_story(&model) });
    }
    let culprit = stats
        .routing_failures
        .iter()
        .max_by_key(|(_, n)| **n)
        .map(|(s, _)| s.clone())
        .unwrap_or_else(|| "no WAN routing for the inter-PoP virtual links".into());
    Err(Infeasible { cause: InfeasibleCause::Connectivity, binding_constraint: culprit })
}

fn affinity_story(req: &AdmissionRequest) -> String {
    let kinds: BTreeSet<String> = req
        .constraints
        .iter()
        .map(|c| format!("{:?}", c.kind))
        .collect();
    let sets: BTreeSet<usize> = req.candidates.values().map(BTreeSet::len).collect();
    format!(
        "{} placement rules ({}) cannot hold with candidate sets of size {:?}",
        req.constraints.len(),
        kinds.into_iter().collect::<Vec<_>>().join(", "),
        sets
    )
}

fn capacity_story(m: &Model) -> String {
    let total: ResourceVector = m.demand.iter().copied().sum();
    let candidates: BTreeSet<usize> = m.domain.iter().flatten().copied().collect();
    let room: Vec<String> = candidates.iter().map(|&p| format!("{}={}", m.pops[p], m.residual[p])).collect();
    format!("demand {} over {} instances does not fit residuals {}", total, m.len(), room.join(" "))
}

/// Reasons a claimed solution fails, found without the search code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessViolation {
    #[error("{0} is not assigned")]
    Unassigned(InstanceKey),
    #[error("{instance} assigned to non-candidate {pop}")]
    NotCandidate { instance: InstanceKey, pop: PopId },
    #[error("{kind:?} rule between {a} and {b} broken")]
    Pair { kind: AffinityKind, a: InstanceKey, b: InstanceKey },
    #[error("{pop} over capacity in {window}")]
    Capacity { pop: PopId, window: TimeWindow },
    #[error("route for {link} between {a} and {b} missing")]
    MissingRoute { link: String, a: PopId, b: PopId },
    #[error("route for {link} is broken: {reason}")]
    BadRoute { link: String, reason: String },
    #[error("WAN link {link} over capacity in {window}")]
    Bandwidth { link: LinkId, window: TimeWindow },
}

/// Independent re-validation of a witness against the map, for every requested window.
pub fn check_witness(
    map: &InfrastructureMap,
    req: &AdmissionRequest,
    sol: &FeasibleSolution,
) -> Result<(), WitnessViolation> {
    for inst in &req.instances {
        let pop = sol.assignment.get(&inst.key).ok_or_else(|| WitnessViolation::Unassigned(inst.key.clone()))?;
        if !req.candidates.get(&inst.key).is_some_and(|c| c.contains(pop)) {
            return Err(WitnessViolation::NotCandidate { instance: inst.key.clone(), pop: pop.clone() });
        }
    }
    for c in &req.constraints {
        let (pa, pb) = (&sol.assignment[&c.a], &sol.assignment[&c.b]);
        let ok = match c.kind {
            AffinityKind::SamePop => pa == pb,
            AffinityKind::DifferentPop => pa != pb,
        };
        if !ok {
            return Err(WitnessViolation::Pair { kind: c.kind, a: c.a.clone(), b: c.b.clone() });
        }
    }
    let mut load: BTreeMap<&PopId, ResourceVector> = BTreeMap::new();
    for inst in &req.instances {
        *load.entry(&sol.assignment[&inst.key]).or_insert(ResourceVector::ZERO) += inst.demand;
    }
    for w in &req.windows {
        for (pop, amount) in &load {
            let residual = map.residual_for(pop, w, req.mode).map_err(|_| WitnessViolation::Capacity {
                pop: (*pop).clone(),
                window: *w,
            })?;
            if !amount.fits_within(&residual) {
                return Err(WitnessViolation::Capacity { pop: (*pop).clone(), window: *w });
            }
        }
    }

    let mut bandwidth: BTreeMap<LinkId, u64> = BTreeMap::new();
    for l in &req.links {
        let hosts = |g: &str| -> BTreeSet<&PopId> {
            req.instances.iter().filter(|i| i.key.group == g).map(|i| &sol.assignment[&i.key]).collect()
        };
        let (ha, hb) = (hosts(&l.endpoints[0]), hosts(&l.endpoints[1]));
        for a in &ha {
            for b in &hb {
                let route = sol.link_routes.iter().find(|r| {
                    r.link_id == l.id
                        && ((&r.pops[0] == *a && &r.pops[1] == *b) || (&r.pops[0] == *b && &r.pops[1] == *a))
                });
                let Some(route) = route else {
                    return Err(WitnessViolation::MissingRoute {
                        link: l.id.clone(),
                        a: (*a).clone(),
                        b: (*b).clone(),
                    });
                };
                if a == b {
                    if !route.path.is_empty() {
                        return Err(WitnessViolation::BadRoute { link: l.id.clone(), reason: "co-located ends carry a WAN path".into() });
                    }
                    continue;
                }
                walk(map, route, l.reliability_class)
                    .map_err(|reason| WitnessViolation::BadRoute { link: l.id.clone(), reason })?;
            }
        }
    }
    // Every distinct (link, PoP pair) is charged once.
    let mut charged = BTreeSet::new();
    for r in &sol.link_routes {
        let mut ends = [r.pops[0].clone(), r.pops[1].clone()];
        ends.sort();
        if !charged.insert((r.link_id.clone(), ends)) {
            return Err(WitnessViolation::BadRoute { link: r.link_id.clone(), reason: "routed twice".into() });
        }
        let Some(l) = req.links.iter().find(|l| l.id == r.link_id) else {
            return Err(WitnessViolation::BadRoute { link: r.link_id.clone(), reason: "unknown virtual link".into() });
        };
        for wl in &r.path {
            *bandwidth.entry(wl.clone()).or_default() += l.bitrate_mbps;
        }
    }
    for w in &req.windows {
        for (link, amount) in &bandwidth {
            let residual = map
                .residual_bitrate(link, w, req.mode)
                .map_err(|_| WitnessViolation::Bandwidth { link: link.clone(), window: *w })?;
            if *amount > residual {
                return Err(WitnessViolation::Bandwidth { link: link.clone(), window: *w });
            }
        }
    }
    Ok(())
}

fn walk(map: &InfrastructureMap, route: &LinkRoute, class: u8) -> Result<(), String> {
    if route.path.len() > MAX_HOPS {
        return Err(format!("{} hops exceed the limit of {MAX_HOPS}", route.path.len()));
    }
    let mut at = route.pops[0].clone();
    let mut visited = BTreeSet::from([at.clone()]);
    for id in &route.path {
        let link = map.wan_link(id).map_err(|e| e.to_string())?;
        if link.reliability_class < class {
            return Err(format!("{id} has class {} below {class}", link.reliability_class));
        }
        at = link.other_end(&at).ok_or_else(|| format!("{id} does not touch {at}"))?.clone();
        if !visited.insert(at.clone()) {
            return Err(format!("path revisits {at}"));
        }
    }
    if at != route.pops[1] {
        return Err(format!("path ends at {at}, not {}", route.pops[1]));
    }
    Ok(())
}

/// Placeholder for the agreement the provider and tenant can formalize on admission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SlaRecord {
    pub order_id: String,
    pub tenant_id: String,
    pub il_id: String,
    pub performance: PerformanceVector,
    pub windows: Vec<TimeWindow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdmissionVerdict {
    Admitted { solution: FeasibleSolution, sla: SlaRecord },
    Rejected(Infeasible),
}

impl AdmissionVerdict {
    pub fn is_admitted(&self) -> bool {
        matches!(self, AdmissionVerdict::Admitted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AdmissionOutcome {
    pub verdict: AdmissionVerdict,
    /// Present whenever candidate computation succeeded.
    pub request: Option<AdmissionRequest>,
    /// Map version the verdict was computed against.
    pub map_version: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmissionError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
}

/// Runs all three steps without touching the order.
pub fn evaluate(
    cat: &Catalog,
    order: &ServiceOrder,
    design: &NslDesign,
    map: &InfrastructureMap,
    mode: ReservationMode,
) -> Result<AdmissionOutcome, AdmissionError> {
    let reqs =
        effective_requirements(cat, order).ok_or_else(|| AdmissionError::UnknownTemplate(order.template_id.clone()))?;
    let dep = resolve_nsl(cat, &design.target_il)?;
    let view = abstract_view(map);
    let outcome = |verdict, request| AdmissionOutcome { verdict, request, map_version: map.version };
    let candidates = match compute_candidates(&view, &dep, &reqs.geo_reqs) {
        Ok(c) => c,
        Err(e) => return Ok(outcome(AdmissionVerdict::Rejected(e.into()), None)),
    };
    let req = build_request(&order.id, &design.target_il.id, &dep, candidates, &reqs.temporal_reqs, mode);
    let verdict = match check_feasibility(map, &req) {
        Ok(solution) => AdmissionVerdict::Admitted {
            solution,
            sla: SlaRecord {
                order_id: order.id.clone(),
                tenant_id: order.tenant_id.clone(),
                il_id: design.target_il.id.clone(),
                performance: reqs.network_reqs.performance,
                windows: reqs.temporal_reqs.clone(),
            },
        },
        Err(e) => AdmissionVerdict::Rejected(e),
    };
    Ok(outcome(verdict, Some(req)))
}

/// Admission of a `DESIGNED` order: `ADMITTED` with a witness, or `REJECTED` with a cause.
pub fn admit(
    cat: &Catalog,
    order: &mut ServiceOrder,
    design: &NslDesign,
    map: &InfrastructureMap,
    mode: ReservationMode,
) -> Result<AdmissionOutcome, AdmissionError> {
    if order.status != OrderStatus::Designed {
        return Err(OrderError::IllegalTransition { from: order.status, to: OrderStatus::Admitted }.into());
    }
    let out = evaluate(cat, order, design, map, mode)?;
    order.transition(if out.verdict.is_admitted() { OrderStatus::Admitted } else { OrderStatus::Rejected })?;
    Ok(out)
}
