// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! VNF and NS descriptors, flavors, instantiation levels and service templates.
//!
//! A [`Triplet`] (NS descriptor, flavor, instantiation level) addresses one complete
//! deployment option of an NS; an [`NslInstantiationLevel`] lists the triplets of every
//! NS making up a slice.

mod load;
mod resolve;
pub(crate) mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::load::load_catalog;
pub(crate) use self::load::{NsdFile, TemplateFile, VnfFile};
pub use self::resolve::{resolve_nsl, resolve_triplet, GroupAffinity, InstanceGroup, ResolvedDeployment, ResolvedLink};
pub use self::template::{AllowedRange, OperationalReqs, NetworkReqs, Requirements, ServiceTemplate};
use crate::infra::ResourceVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSignature {
    pub name: String,
    #[serde(default)]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VnfDescriptor {
    pub id: String,
    pub function_tag: String,
    pub resource_levels: BTreeMap<String, ResourceVector>,
    #[serde(default)]
    pub config_primitives: Vec<PrimitiveSignature>,
}

/// A virtual link between two VNFs of an NS. Endpoints are paths relative to the NS:
/// `vnf` for a constituent VNF, `nested_nsd/vnf` for a VNF of a nested NS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VirtualLinkTemplate {
    pub id: String,
    pub endpoints: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NsDescriptor {
    pub id: String,
    #[serde(default)]
    pub vnf_refs: Vec<String>,
    #[serde(default)]
    pub nested_ns_refs: Vec<String>,
    #[serde(default)]
    pub virtual_links: Vec<VirtualLinkTemplate>,
    pub flavors: Vec<NsFlavor>,
}

impl NsDescriptor {
    pub fn flavor(&self, id: &str) -> Option<&NsFlavor> {
        self.flavors.iter().find(|f| f.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NsFlavor {
    pub id: String,
    #[serde(default)]
    pub active_vnfs: Vec<String>,
    #[serde(default)]
    pub active_links: Vec<String>,
    #[serde(default)]
    pub active_nested: Vec<String>,
    #[serde(default)]
    pub feature_tags: BTreeSet<String>,
    pub instantiation_levels: Vec<NsInstantiationLevel>,
}

impl NsFlavor {
    pub fn level(&self, id: &str) -> Option<&NsInstantiationLevel> {
        self.instantiation_levels.iter().find(|l| l.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AffinityKind {
    SamePop,
    DifferentPop,
}

/// Binary placement constraint from the owning VNF's instances to those of `vnf`
/// (which may be the owning VNF itself).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AffinityRule {
    pub kind: AffinityKind,
    pub vnf: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VnfPlan {
    pub instance_count: u32,
    pub resource_level: String,
    #[serde(default)]
    pub affinity_rules: Vec<AffinityRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LinkPlan {
    pub bitrate_mbps: u64,
    pub reliability_class: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityReq {
    #[serde(default)]
    pub backup_count: u32,
    #[serde(default)]
    pub requires_ha_pop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NestedChoice {
    pub flavor_id: String,
    pub il_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NsInstantiationLevel {
    pub id: String,
    #[serde(default)]
    pub vnf_plans: BTreeMap<String, VnfPlan>,
    #[serde(default)]
    pub link_plans: BTreeMap<String, LinkPlan>,
    /// Flavor and level chosen for each nested NS of a composite NS.
    #[serde(default)]
    pub nested: BTreeMap<String, NestedChoice>,
    /// Reliability extension block, kept beside the standard per-VNF plans.
    #[serde(default)]
    pub reliability: BTreeMap<String, ReliabilityReq>,
    pub declared_capacity: PerformanceVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PerformanceVector {
    pub throughput_mbps: u64,
    pub max_sessions: u64,
    pub max_latency_ms: u64,
}

impl PerformanceVector {
    pub const fn new(throughput_mbps: u64, max_sessions: u64, max_latency_ms: u64) -> Self {
        PerformanceVector { throughput_mbps, max_sessions, max_latency_ms }
    }

    pub fn is_positive(&self) -> bool {
        self.throughput_mbps > 0 && self.max_sessions > 0 && self.max_latency_ms > 0
    }

    /// Whether a capacity of `self` satisfies `required` (latency is an upper bound).
    pub fn meets(&self, required: &PerformanceVector) -> bool {
        self.throughput_mbps >= required.throughput_mbps
            && self.max_sessions >= required.max_sessions
            && self.max_latency_ms <= required.max_latency_ms
    }

    /// Componentwise domination with latency inverted: `self` is no better than `other`.
    pub fn dominated_by(&self, other: &PerformanceVector) -> bool {
        self.throughput_mbps <= other.throughput_mbps
            && self.max_sessions <= other.max_sessions
            && self.max_latency_ms >= other.max_latency_ms
    }

    /// Largest load fraction of `required` this capacity can carry on its volume axes.
    pub fn coverage_ratio(&self, required: &PerformanceVector) -> f64 {
        let thr = self.throughput_mbps as f64 / required.throughput_mbps as f64;
        let sess = self.max_sessions as f64 / required.max_sessions as f64;
        thr.min(sess)
    }

    /// The weakest of two capacities chained in series.
    pub fn series(&self, other: &PerformanceVector) -> PerformanceVector {
        PerformanceVector {
            throughput_mbps: self.throughput_mbps.min(other.throughput_mbps),
            max_sessions: self.max_sessions.min(other.max_sessions),
            max_latency_ms: self.max_latency_ms.max(other.max_latency_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Triplet {
    pub nsd_id: String,
    pub flavor_id: String,
    pub il_id: String,
}

impl Triplet {
    pub fn new(nsd_id: impl Into<String>, flavor_id: impl Into<String>, il_id: impl Into<String>) -> Self {
        Triplet { nsd_id: nsd_id.into(), flavor_id: flavor_id.into(), il_id: il_id.into() }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.nsd_id, self.flavor_id, self.il_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NslInstantiationLevel {
    pub id: String,
    pub triplets: Vec<Triplet>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("cannot parse {file}: {message}")]
    Parse { file: String, message: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{from} references unknown {kind} {id}")]
    DanglingRef { from: String, kind: &'static str, id: String },
    #[error("nested NS cycle: {}", .0.join(" -> "))]
    CyclicNesting(Vec<String>),
    #[error("{id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("instantiation level {il} of {nsd} does not choose a triplet for nested NS {nested}")]
    NestedTripletMissing { nsd: String, il: String, nested: String },
}

pub(crate) fn invalid(id: impl Into<String>, reason: impl Into<String>) -> CatalogError {
    CatalogError::Invalid { id: id.into(), reason: reason.into() }
}

/// Immutable, cross-validated descriptor store. Collections are keyed (and so ordered) by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Catalog {
    pub vnfs: BTreeMap<String, VnfDescriptor>,
    pub nsds: BTreeMap<String, NsDescriptor>,
    pub templates: BTreeMap<String, ServiceTemplate>,
}

impl Catalog {
    /// Builds a catalog from raw descriptor lists and runs every cross-check.
    pub fn from_parts(
        vnfs: Vec<VnfDescriptor>,
        nsds: Vec<NsDescriptor>,
        templates: Vec<ServiceTemplate>,
    ) -> Result<Catalog, CatalogError> {
        let mut cat = Catalog::default();
        for v in vnfs {
            if cat.vnfs.contains_key(&v.id) {
                return Err(CatalogError::DuplicateId { kind: "VNF descriptor", id: v.id });
            }
            cat.vnfs.insert(v.id.clone(), v);
        }
        for n in nsds {
            if cat.nsds.contains_key(&n.id) {
                return Err(CatalogError::DuplicateId { kind: "NS descriptor", id: n.id });
            }
            cat.nsds.insert(n.id.clone(), n);
        }
        for t in templates {
            if cat.templates.contains_key(&t.id) {
                return Err(CatalogError::DuplicateId { kind: "service template", id: t.id });
            }
            cat.templates.insert(t.id.clone(), t);
        }
        load::validate(&cat)?;
        Ok(cat)
    }

    pub fn nsd(&self, id: &str) -> Result<&NsDescriptor, CatalogError> {
        self.nsds.get(id).ok_or_else(|| CatalogError::DanglingRef {
            from: "request".into(),
            kind: "NS descriptor",
            id: id.into(),
        })
    }

    pub fn template(&self, id: &str) -> Option<&ServiceTemplate> {
        self.templates.get(id)
    }

    /// Function tags of an NS after flattening: its own VNFs in declared order,
    /// then each nested NS in declared order, recursively.
    pub fn function_tags(&self, nsd_id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.collect_tags(nsd_id, &mut out, &mut stack);
        out
    }

    fn collect_tags(&self, nsd_id: &str, out: &mut Vec<String>, stack: &mut Vec<String>) {
        if stack.iter().any(|s| s == nsd_id) {
            return;
        }
        let Some(nsd) = self.nsds.get(nsd_id) else { return };
        stack.push(nsd_id.to_string());
        for v in &nsd.vnf_refs {
            if let Some(vnf) = self.vnfs.get(v) {
                out.push(vnf.function_tag.clone());
            }
        }
        for n in &nsd.nested_ns_refs {
            self.collect_tags(n, out, stack);
        }
        stack.pop();
    }
}
