// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Flattening of triplets into per-VNF instance groups and per-link plans.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{
    AffinityKind, Catalog, CatalogError, NsInstantiationLevel, NslInstantiationLevel, ReliabilityReq, Triplet,
};
use crate::infra::ResourceVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GroupAffinity {
    pub kind: AffinityKind,
    pub peer: String,
}

/// All instances of one VNF inside one NS instance. `id` is the qualified path of the VNF
/// from the root NS, e.g. `outer/inner/dpi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct InstanceGroup {
    pub id: String,
    pub vnf_id: String,
    pub function_tag: String,
    pub instance_count: u32,
    pub resource_level: String,
    /// Per-instance demand.
    pub demand: ResourceVector,
    pub affinity: Vec<GroupAffinity>,
    pub reliability: ReliabilityReq,
}

impl InstanceGroup {
    pub fn total_demand(&self) -> ResourceVector {
        self.demand.scale(self.instance_count as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ResolvedLink {
    pub id: String,
    pub endpoints: [String; 2],
    pub bitrate_mbps: u64,
    pub reliability_class: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ResolvedDeployment {
    pub groups: Vec<InstanceGroup>,
    pub links: Vec<ResolvedLink>,
}

impl ResolvedDeployment {
    pub fn aggregate(&self) -> ResourceVector {
        self.groups.iter().map(InstanceGroup::total_demand).sum()
    }

    pub fn group(&self, id: &str) -> Option<&InstanceGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn instance_count(&self) -> u32 {
        self.groups.iter().map(|g| g.instance_count).sum()
    }
}

/// Resolves one triplet. Group and link ids are prefixed with the NS descriptor id.
pub fn resolve_triplet(cat: &Catalog, t: &Triplet) -> Result<ResolvedDeployment, CatalogError> {
    let mut out = ResolvedDeployment::default();
    let mut stack = Vec::new();
    expand(cat, t, &format!("{}/", t.nsd_id), &mut out, &mut stack)?;
    Ok(out)
}

/// Resolves every triplet of an NSL instantiation level into one deployment.
/// An NS descriptor used more than once gets `#2`, `#3`… appended to its prefix.
pub fn resolve_nsl(cat: &Catalog, il: &NslInstantiationLevel) -> Result<ResolvedDeployment, CatalogError> {
    let mut out = ResolvedDeployment::default();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &il.triplets {
        let n = seen.entry(t.nsd_id.as_str()).or_insert(0);
        *n += 1;
        let prefix = if *n == 1 { format!("{}/", t.nsd_id) } else { format!("{}#{}/", t.nsd_id, n) };
        expand(cat, t, &prefix, &mut out, &mut Vec::new())?;
    }
    Ok(out)
}

fn level<'a>(cat: &'a Catalog, t: &Triplet) -> Result<&'a NsInstantiationLevel, CatalogError> {
    let from = t.to_string();
    let nsd = cat.nsds.get(&t.nsd_id).ok_or_else(|| CatalogError::DanglingRef {
        from: from.clone(),
        kind: "NS descriptor",
        id: t.nsd_id.clone(),
    })?;
    let flavor = nsd.flavor(&t.flavor_id).ok_or_else(|| CatalogError::DanglingRef {
        from: from.clone(),
        kind: "flavor",
        id: t.flavor_id.clone(),
    })?;
    flavor.level(&t.il_id).ok_or_else(|| CatalogError::DanglingRef {
        from,
        kind: "instantiation level",
        id: t.il_id.clone(),
    })
}

fn expand(
    cat: &Catalog,
    t: &Triplet,
    prefix: &str,
    out: &mut ResolvedDeployment,
    stack: &mut Vec<String>,
) -> Result<(), CatalogError> {
    if stack.contains(&t.nsd_id) {
        let mut cycle = stack.clone();
        cycle.push(t.nsd_id.clone());
        return Err(CatalogError::CyclicNesting(cycle));
    }
    let il = level(cat, t)?;
    let nsd = &cat.nsds[&t.nsd_id];
    let flavor = nsd.flavor(&t.flavor_id).expect("level() checked the flavor");
    stack.push(t.nsd_id.clone());

    for vnf_ref in &nsd.vnf_refs {
        let Some(plan) = il.vnf_plans.get(vnf_ref) else { continue };
        let vnf = cat.vnfs.get(vnf_ref).ok_or_else(|| CatalogError::DanglingRef {
            from: nsd.id.clone(),
            kind: "VNF descriptor",
            id: vnf_ref.clone(),
        })?;
        let demand = *vnf.resource_levels.get(&plan.resource_level).ok_or_else(|| CatalogError::DanglingRef {
            from: format!("{}/{}", nsd.id, vnf_ref),
            kind: "resource level",
            id: plan.resource_level.clone(),
        })?;
        out.groups.push(InstanceGroup {
            id: format!("{prefix}{vnf_ref}"),
            vnf_id: vnf.id.clone(),
            function_tag: vnf.function_tag.clone(),
            instance_count: plan.instance_count,
            resource_level: plan.resource_level.clone(),
            demand,
            affinity: plan
                .affinity_rules
                .iter()
                .map(|r| GroupAffinity { kind: r.kind, peer: format!("{prefix}{}", r.vnf) })
                .collect(),
            reliability: il.reliability.get(vnf_ref).copied().unwrap_or_default(),
        });
    }

    for nested in &nsd.nested_ns_refs {
        if !flavor.active_nested.contains(nested) {
            continue;
        }
        let choice = il.nested.get(nested).ok_or_else(|| CatalogError::NestedTripletMissing {
            nsd: nsd.id.clone(),
            il: il.id.clone(),
            nested: nested.clone(),
        })?;
        let inner = Triplet::new(nested.clone(), choice.flavor_id.clone(), choice.il_id.clone());
        expand(cat, &inner, &format!("{prefix}{nested}/"), out, stack)?;
    }

    for vl in &nsd.virtual_links {
        let Some(lp) = il.link_plans.get(&vl.id) else { continue };
        let endpoints = [format!("{prefix}{}", vl.endpoints[0]), format!("{prefix}{}", vl.endpoints[1])];
        for e in &endpoints {
            if out.group(e).is_none() {
                return Err(CatalogError::DanglingRef {
                    from: format!("{prefix}{}", vl.id),
                    kind: "deployed link endpoint",
                    id: e.clone(),
                });
            }
        }
        out.links.push(ResolvedLink {
            id: format!("{prefix}{}", vl.id),
            endpoints,
            bitrate_mbps: lp.bitrate_mbps,
            reliability_class: lp.reliability_class,
        });
    }

    stack.pop();
    Ok(())
}
