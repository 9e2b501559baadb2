// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Multi-domain infrastructure: PoPs, WAN links and the reservation ledger they carry.
//!
//! Two views are exposed. [`InfrastructureMap`] is the capacity-level picture the
//! resource orchestration role works with. [`AbstractPopView`] is the resource-agnostic
//! projection handed to slice orchestration: location and capabilities only.

mod resources;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::resources::ResourceVector;
use crate::placement::{Reservation, ReservationMode, ReservedResource};
use crate::window::{horizon_for, TimeWindow};

pub const DEFAULT_OVERBOOKING_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct PopId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct LinkId(pub String);

impl PopId {
    pub fn new(id: impl Into<String>) -> Self {
        PopId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl LinkId {
    pub fn new(id: impl Into<String>) -> Self {
        LinkId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Capability {
    /// Set up for high availability and fault resiliency.
    Ha,
    HighIo,
    Gpu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Pop {
    pub id: PopId,
    pub region: String,
    #[serde(default)]
    pub capabilities: BTreeSet<Capability>,
    pub capacity: ResourceVector,
    pub owner_domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WanLink {
    pub id: LinkId,
    pub endpoint_a: PopId,
    pub endpoint_b: PopId,
    pub capacity_mbps: u64,
    /// Ordinal 1..=3; a link satisfies a requirement when its class is ≥ the required one.
    pub reliability_class: u8,
}

impl WanLink {
    /// The far end of this link as seen from `pop`, if `pop` is one of its endpoints.
    pub fn other_end(&self, pop: &PopId) -> Option<&PopId> {
        if &self.endpoint_a == pop {
            Some(&self.endpoint_b)
        } else if &self.endpoint_b == pop {
            Some(&self.endpoint_a)
        } else {
            None
        }
    }
}

/// Location and capabilities of a PoP, nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AbstractPopView {
    pub pop_id: PopId,
    pub region: String,
    pub capabilities: BTreeSet<Capability>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InfraError {
    #[error("cannot parse infrastructure file: {0}")]
    Parse(String),
    #[error("duplicate PoP id {0}")]
    DuplicatePop(PopId),
    #[error("duplicate WAN link id {0}")]
    DuplicateLink(LinkId),
    #[error("PoP {0} has an empty region")]
    EmptyRegion(PopId),
    #[error("WAN link {link} references unknown PoP {pop}")]
    UnknownEndpoint { link: LinkId, pop: PopId },
    #[error("WAN link {0} connects a PoP to itself")]
    SelfLoop(LinkId),
    #[error("WAN link {link} has reliability class {class}, expected 1..=3")]
    BadReliabilityClass { link: LinkId, class: u8 },
    #[error("unknown PoP {0}")]
    UnknownPop(PopId),
    #[error("unknown WAN link {0}")]
    UnknownLink(LinkId),
    #[error("overbooking factor {0} must be ≥ 1")]
    BadOverbookingFactor(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InfrastructureMap {
    pub pops: Vec<Pop>,
    pub wan_links: Vec<WanLink>,
    #[serde(default)]
    pub reservations: Vec<Reservation>,
    /// Soft reservations may book up to this multiple of capacity.
    #[serde(default = "default_overbooking")]
    pub overbooking_factor: f64,
    /// Bumped on every committed change to `reservations`.
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub next_reservation_seq: u64,
}

fn default_overbooking() -> f64 {
    DEFAULT_OVERBOOKING_FACTOR
}

#[derive(Debug, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub(crate) struct InfraFile {
    #[serde(default)]
    pops: Vec<Pop>,
    #[serde(default)]
    wan_links: Vec<WanLink>,
}

impl InfrastructureMap {
    pub fn new(pops: Vec<Pop>, wan_links: Vec<WanLink>) -> Result<Self, InfraError> {
        let map = InfrastructureMap {
            pops,
            wan_links,
            reservations: Vec::new(),
            overbooking_factor: DEFAULT_OVERBOOKING_FACTOR,
            version: 0,
            next_reservation_seq: 0,
        };
        map.validate()?;
        Ok(map)
    }

    /// Parses TOML (or JSON when the text starts with `{`) and validates the result.
    pub fn parse(text: &str) -> Result<Self, InfraError> {
        let file: InfraFile = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| InfraError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| InfraError::Parse(e.to_string()))?
        };
        InfrastructureMap::new(file.pops, file.wan_links)
    }

    pub fn load(path: &Path) -> Result<Self, InfraError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InfraError::Parse(format!("{}: {e}", path.display())))?;
        InfrastructureMap::parse(&text)
    }

    pub fn validate(&self) -> Result<(), InfraError> {
        let mut seen = BTreeSet::new();
        for pop in &self.pops {
            if !seen.insert(&pop.id) {
                return Err(InfraError::DuplicatePop(pop.id.clone()));
            }
            if pop.region.trim().is_empty() {
                return Err(InfraError::EmptyRegion(pop.id.clone()));
            }
        }
        let mut links = BTreeSet::new();
        for link in &self.wan_links {
            if !links.insert(&link.id) {
                return Err(InfraError::DuplicateLink(link.id.clone()));
            }
            for end in [&link.endpoint_a, &link.endpoint_b] {
                if !seen.contains(end) {
                    return Err(InfraError::UnknownEndpoint { link: link.id.clone(), pop: end.clone() });
                }
            }
            if link.endpoint_a == link.endpoint_b {
                return Err(InfraError::SelfLoop(link.id.clone()));
            }
            if !(1..=3).contains(&link.reliability_class) {
                return Err(InfraError::BadReliabilityClass {
                    link: link.id.clone(),
                    class: link.reliability_class,
                });
            }
        }
        if self.overbooking_factor.is_nan() || self.overbooking_factor < 1.0 {
            return Err(InfraError::BadOverbookingFactor(self.overbooking_factor));
        }
        Ok(())
    }

    pub fn pop(&self, id: &PopId) -> Result<&Pop, InfraError> {
        self.pops.iter().find(|p| &p.id == id).ok_or_else(|| InfraError::UnknownPop(id.clone()))
    }

    pub fn wan_link(&self, id: &LinkId) -> Result<&WanLink, InfraError> {
        self.wan_links.iter().find(|l| &l.id == id).ok_or_else(|| InfraError::UnknownLink(id.clone()))
    }

    /// Residual compute capacity available to a new HARD booking at `pop` over `window`.
    ///
    /// This is the capacity minus the peak concurrent HARD usage, further bounded by the
    /// overbooked ceiling minus the peak concurrent HARD+SOFT usage. With no soft
    /// reservations on record it reduces to `capacity - peak(hard)`.
    pub fn residual_capacity(&self, pop: &PopId, window: &TimeWindow) -> Result<ResourceVector, InfraError> {
        self.residual_for(pop, window, ReservationMode::Hard)
    }

    pub fn residual_for(
        &self,
        pop: &PopId,
        window: &TimeWindow,
        mode: ReservationMode,
    ) -> Result<ResourceVector, InfraError> {
        let capacity = self.pop(pop)?.capacity;
        let (hard, all) = self.peaks(window, |r| match &r.resource {
            ReservedResource::Compute { pop_id, amount } if pop_id == pop => Some(amount.to_array()),
            _ => None,
        });
        let ceiling = capacity.to_array().map(|c| overbooked(c, self.overbooking_factor));
        let soft_room = ResourceVector::from_array(ceiling).saturating_sub(&ResourceVector::from_array(all));
        Ok(match mode {
            ReservationMode::Hard => {
                capacity.saturating_sub(&ResourceVector::from_array(hard)).component_min(&soft_room)
            }
            ReservationMode::Soft => soft_room,
        })
    }

    /// Residual bitrate on a WAN link over `window`, same rules as [`Self::residual_for`].
    pub fn residual_bitrate(
        &self,
        link: &LinkId,
        window: &TimeWindow,
        mode: ReservationMode,
    ) -> Result<u64, InfraError> {
        let capacity = self.wan_link(link)?.capacity_mbps;
        let (hard, all) = self.peaks(window, |r| match &r.resource {
            ReservedResource::Bandwidth { wan_link_id, bitrate_mbps } if wan_link_id == link => {
                Some([*bitrate_mbps, 0, 0])
            }
            _ => None,
        });
        let soft_room = overbooked(capacity, self.overbooking_factor).saturating_sub(all[0]);
        Ok(match mode {
            ReservationMode::Hard => capacity.saturating_sub(hard[0]).min(soft_room),
            ReservationMode::Soft => soft_room,
        })
    }

    /// Peak concurrent (HARD, HARD+SOFT) compute booked at `pop` during `window`.
    pub fn peak_compute(&self, pop: &PopId, window: &TimeWindow) -> (ResourceVector, ResourceVector) {
        let (hard, all) = self.peaks(window, |r| match &r.resource {
            ReservedResource::Compute { pop_id, amount } if pop_id == pop => Some(amount.to_array()),
            _ => None,
        });
        (ResourceVector::from_array(hard), ResourceVector::from_array(all))
    }

    /// Componentwise peaks of (HARD, HARD+SOFT) usage over every instant in `window`.
    fn peaks<F>(&self, window: &TimeWindow, select: F) -> ([u64; 3], [u64; 3])
    where
        F: Fn(&Reservation) -> Option<[u64; 3]>,
    {
        let relevant: Vec<(&Reservation, [u64; 3])> =
            self.reservations.iter().filter_map(|r| select(r).map(|a| (r, a))).collect();
        if relevant.is_empty() {
            return ([0; 3], [0; 3]);
        }
        let horizon = horizon_for(relevant.iter().map(|(r, _)| &r.window).chain([window]));
        let query = window.occurrences(horizon);
        let mut hard = Vec::new();
        let mut all = Vec::new();
        for (r, amount) in &relevant {
            for (rs, re) in r.window.occurrences(horizon) {
                for &(qs, qe) in &query {
                    let (s, e) = (rs.max(qs), re.min(qe));
                    if s < e {
                        all.push((s, e, *amount));
                        if r.mode == ReservationMode::Hard {
                            hard.push((s, e, *amount));
                        }
                    }
                }
            }
        }
        (peak_concurrent(hard), peak_concurrent(all))
    }

    /// Total hard compute booked at `pop` at instant `t`.
    pub fn hard_usage_at(&self, pop: &PopId, t: u64) -> ResourceVector {
        self.reservations
            .iter()
            .filter(|r| r.mode == ReservationMode::Hard && r.window.contains(t))
            .filter_map(|r| match &r.resource {
                ReservedResource::Compute { pop_id, amount } if pop_id == pop => Some(*amount),
                _ => None,
            })
            .sum()
    }

    /// Adjacency list of the PoP graph induced by the WAN links.
    pub fn adjacency(&self) -> BTreeMap<&PopId, Vec<&WanLink>> {
        let mut adj: BTreeMap<&PopId, Vec<&WanLink>> = BTreeMap::new();
        for pop in &self.pops {
            adj.entry(&pop.id).or_default();
        }
        for link in &self.wan_links {
            adj.entry(&link.endpoint_a).or_default().push(link);
            adj.entry(&link.endpoint_b).or_default().push(link);
        }
        adj
    }
}

fn overbooked(capacity: u64, factor: f64) -> u64 {
    (capacity as f64 * factor).floor() as u64
}

/// Sweep over interval endpoints; returns the componentwise maximum of the running sum.
fn peak_concurrent(mut intervals: Vec<(u64, u64, [u64; 3])>) -> [u64; 3] {
    let mut events: Vec<(u64, bool, [u64; 3])> = Vec::with_capacity(intervals.len() * 2);
    for (s, e, a) in intervals.drain(..) {
        events.push((s, true, a));
        events.push((e, false, a));
    }
    // Half-open intervals: a release at t happens before an acquisition at t.
    events.sort_by_key(|&(t, start, _)| (t, start));
    let mut cur = [0u64; 3];
    let mut peak = [0u64; 3];
    for (_, start, a) in events {
        for i in 0..3 {
            if start {
                cur[i] += a[i];
                peak[i] = peak[i].max(cur[i]);
            } else {
                cur[i] -= a[i];
            }
        }
    }
    peak
}

/// Projects every PoP onto its location and capabilities, preserving order.
pub fn abstract_view(map: &InfrastructureMap) -> Vec<AbstractPopView> {
    map.pops
        .iter()
        .map(|p| AbstractPopView {
            pop_id: p.id.clone(),
            region: p.region.clone(),
            capabilities: p.capabilities.clone(),
        })
        .collect()
}

/// Residual capacity at `pop` over `window`.
pub fn residual_capacity(
    map: &InfrastructureMap,
    pop: &PopId,
    window: &TimeWindow,
) -> Result<ResourceVector, InfraError> {
    map.residual_capacity(pop, window)
}

/// Read-mostly shared handle; writers (reservation commits) are serialized by the lock.
#[derive(Debug, Clone)]
pub struct SharedInfra(Arc<RwLock<InfrastructureMap>>);

impl SharedInfra {
    pub fn new(map: InfrastructureMap) -> Self {
        SharedInfra(Arc::new(RwLock::new(map)))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, InfrastructureMap> {
        self.0.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, InfrastructureMap> {
        self.0.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> InfrastructureMap {
        self.read().clone()
    }
}
