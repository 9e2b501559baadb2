// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Resource-centric description of an ordered slice.
//!
//! The ordered topology is covered by NS descriptors, one triplet is selected per
//! descriptor, and the target NSL instantiation level is assembled from them. Optional,
//! cheaper levels are then derived from the hourly traffic profile so the slice can scale
//! down when load is low.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::catalog::{
    resolve_triplet, Catalog, CatalogError, NsInstantiationLevel, NslInstantiationLevel, PerformanceVector,
    ResolvedDeployment, Triplet,
};
use crate::infra::ResourceVector;
use crate::ordering::{effective_requirements, OrderError, OrderStatus, ServiceOrder};

pub const HOURS_PER_DAY: usize = 24;
pub const DEFAULT_MAX_OPTIONAL_ILS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileSource {
    HistoricalModel,
    Flat,
}

/// Expected load per hour of day as a fraction of the ordered performance.
/// Throughput and sessions scale with the fraction; the latency bound does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TrafficProfile {
    pub hourly_load: Vec<f64>,
    pub source: ProfileSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("expected {HOURS_PER_DAY} hourly entries, found {0}")]
    WrongLength(usize),
    #[error("hour {hour}: load {load} outside (0, 1]")]
    OutOfRange { hour: usize, load: f64 },
    #[error("peak load is {0}, the target hour must be exactly 1.0")]
    NoTargetHour(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl TrafficProfile {
    pub fn flat() -> Self {
        TrafficProfile { hourly_load: vec![1.0; HOURS_PER_DAY], source: ProfileSource::Flat }
    }

    pub fn historical(hourly_load: Vec<f64>) -> Result<Self, ProfileError> {
        let p = TrafficProfile { hourly_load, source: ProfileSource::HistoricalModel };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.hourly_load.len() != HOURS_PER_DAY {
            return Err(ProfileError::WrongLength(self.hourly_load.len()));
        }
        for (hour, &load) in self.hourly_load.iter().enumerate() {
            if !(load > 0.0 && load <= 1.0) {
                return Err(ProfileError::OutOfRange { hour, load });
            }
        }
        let peak = self.hourly_load.iter().copied().fold(0.0, f64::max);
        if peak != 1.0 {
            return Err(ProfileError::NoTargetHour(peak));
        }
        Ok(())
    }

    /// Parses a 24-row `hour,load` table. Blank lines, `#` comments and a header row are skipped.
    pub fn from_table(text: &str) -> Result<Self, ProfileError> {
        let mut loads = vec![None; HOURS_PER_DAY];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(h), Some(l)) = (cols.next(), cols.next()) else {
                return Err(ProfileError::Parse { line: i + 1, message: "expected `hour,load`".into() });
            };
            let Ok(hour) = h.parse::<usize>() else {
                if i == 0 || loads.iter().all(Option::is_none) {
                    continue;
                }
                return Err(ProfileError::Parse { line: i + 1, message: format!("bad hour {h:?}") });
            };
            let load: f64 =
                l.parse().map_err(|_| ProfileError::Parse { line: i + 1, message: format!("bad load {l:?}") })?;
            if hour >= HOURS_PER_DAY {
                return Err(ProfileError::Parse { line: i + 1, message: format!("hour {hour} out of range") });
            }
            loads[hour] = Some(load);
        }
        let count = loads.iter().filter(|l| l.is_some()).count();
        if count != HOURS_PER_DAY {
            return Err(ProfileError::WrongLength(count));
        }
        TrafficProfile::historical(loads.into_iter().map(|l| l.expect("counted")).collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("no NS descriptor covers topology node {tag:?} at position {position}")]
    UncoverableTopology { tag: String, position: usize },
    #[error("no flavor of {nsd} offers features {missing:?}")]
    NoFlavorMatches { nsd: String, missing: BTreeSet<String> },
    #[error("no instantiation level of {nsd} meets the required performance")]
    NoIlMeetsPerformance { nsd: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyCover {
    pub nsd_ids: Vec<String>,
    pub warnings: Vec<String>,
}

/// Segments the topology greedily by longest match against each descriptor's flattened
/// function tags; equally long matches go to the lowest descriptor id.
pub fn map_topology(cat: &Catalog, topology: &[String]) -> Result<TopologyCover, DesignError> {
    let tags: Vec<(&String, Vec<String>)> =
        cat.nsds.keys().map(|id| (id, cat.function_tags(id))).filter(|(_, t)| !t.is_empty()).collect();
    let mut pos = 0;
    let mut cover = TopologyCover { nsd_ids: Vec::new(), warnings: Vec::new() };
    while pos < topology.len() {
        let rest = &topology[pos..];
        let best_len = tags.iter().filter(|(_, t)| rest.starts_with(t)).map(|(_, t)| t.len()).max();
        let Some(len) = best_len else {
            return Err(DesignError::UncoverableTopology { tag: topology[pos].clone(), position: pos });
        };
        let winners: Vec<&String> =
            tags.iter().filter(|(_, t)| t.len() == len && rest.starts_with(t)).map(|(id, _)| *id).collect();
        if winners.len() > 1 {
            let msg = format!(
                "ambiguous cover at position {pos}: {:?} all match {} nodes, using {}",
                winners, len, winners[0]
            );
            warn!("{msg}");
            cover.warnings.push(msg);
        }
        cover.nsd_ids.push(winners[0].clone());
        pos += len;
    }
    Ok(cover)
}

fn il_cost(cat: &Catalog, t: &Triplet) -> Result<ResourceVector, CatalogError> {
    Ok(resolve_triplet(cat, t)?.aggregate())
}

/// Picks the cheapest (flavor, level) pair whose flavor offers every required feature and
/// whose declared capacity meets the performance requirement. Cost is the aggregate
/// resource vector compared lexicographically; ties go to the lowest (flavor, level) ids.
pub fn select_triplet(
    cat: &Catalog,
    nsd_id: &str,
    features: &BTreeSet<String>,
    performance: &PerformanceVector,
) -> Result<Triplet, DesignError> {
    let nsd = cat.nsd(nsd_id)?;
    let mut any_flavor = false;
    let mut best: Option<((u64, u64, u64), Triplet)> = None;
    for flavor in nsd.flavors.iter().filter(|f| features.is_subset(&f.feature_tags)) {
        any_flavor = true;
        for level in flavor.instantiation_levels.iter().filter(|l| l.declared_capacity.meets(performance)) {
            let t = Triplet::new(nsd_id, flavor.id.clone(), level.id.clone());
            let key = il_cost(cat, &t)?.cost_key();
            let better = match &best {
                None => true,
                Some((k, b)) => (key, &t.flavor_id, &t.il_id) < (*k, &b.flavor_id, &b.il_id),
            };
            if better {
                best = Some((key, t));
            }
        }
    }
    if !any_flavor {
        let offered: BTreeSet<String> = nsd.flavors.iter().flat_map(|f| f.feature_tags.iter().cloned()).collect();
        let missing = features.difference(&offered).cloned().collect::<BTreeSet<_>>();
        return Err(DesignError::NoFlavorMatches { nsd: nsd_id.into(), missing });
    }
    best.map(|(_, t)| t).ok_or_else(|| DesignError::NoIlMeetsPerformance { nsd: nsd_id.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NslDesign {
    pub order_id: String,
    pub required: PerformanceVector,
    pub target_il: NslInstantiationLevel,
    pub optional_ils: Vec<NslInstantiationLevel>,
    pub il_capacity: BTreeMap<String, PerformanceVector>,
    /// Largest load fraction each level carries (see [`PerformanceVector::coverage_ratio`]).
    pub il_coverage: BTreeMap<String, f64>,
    /// Cheapest sufficient level for each hour of the profile.
    pub hourly_il: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl NslDesign {
    /// Every level, ascending by coverage; the target is last.
    pub fn all_ils(&self) -> Vec<&NslInstantiationLevel> {
        self.optional_ils.iter().chain(std::iter::once(&self.target_il)).collect()
    }

    pub fn il(&self, id: &str) -> Option<&NslInstantiationLevel> {
        self.all_ils().into_iter().find(|il| il.id == id)
    }

    pub fn coverage(&self, id: &str) -> f64 {
        self.il_coverage.get(id).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    pub max_optional_ils: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { max_optional_ils: DEFAULT_MAX_OPTIONAL_ILS }
    }
}

/// Whether level `low` can run inside the placement made for `high`: same instance
/// groups or fewer, no more instances, no larger per-instance demand, and no link
/// requirement beyond the one already routed. Reliability settings must match.
pub fn resource_dominated(low: &ResolvedDeployment, high: &ResolvedDeployment) -> bool {
    let groups_ok = low.groups.iter().all(|g| {
        high.group(&g.id).is_some_and(|h| {
            g.instance_count <= h.instance_count
                && g.demand.fits_within(&h.demand)
                && g.affinity == h.affinity
                && g.reliability == h.reliability
                // Backups are the trailing instances, so a shorter group would re-label them.
                && (g.reliability.backup_count == 0 || g.instance_count == h.instance_count)
        })
    });
    let links_ok = low.links.iter().all(|l| {
        high.links.iter().any(|h| {
            h.id == l.id && l.bitrate_mbps <= h.bitrate_mbps && l.reliability_class <= h.reliability_class
        })
    });
    groups_ok && links_ok
}

struct LevelOption<'a> {
    level: &'a NsInstantiationLevel,
    triplet: Triplet,
    cost: ResourceVector,
    coverage: f64,
}

/// Designs the slice for a `SUBMITTED` order; moves it to `DESIGNED`, or to `REJECTED`
/// when no design exists.
pub fn build_design(
    cat: &Catalog,
    order: &mut ServiceOrder,
    profile: &TrafficProfile,
    options: DesignOptions,
) -> Result<NslDesign, DesignError> {
    if order.status != OrderStatus::Submitted {
        return Err(OrderError::IllegalTransition { from: order.status, to: OrderStatus::Designed }.into());
    }
    match design(cat, order, profile, options) {
        Ok(d) => {
            order.transition(OrderStatus::Designed)?;
            Ok(d)
        }
        Err(e) => {
            order.transition(OrderStatus::Rejected)?;
            Err(e)
        }
    }
}

/// The design computation alone, without touching order status.
pub fn design(
    cat: &Catalog,
    order: &ServiceOrder,
    profile: &TrafficProfile,
    options: DesignOptions,
) -> Result<NslDesign, DesignError> {
    profile.validate()?;
    let reqs = effective_requirements(cat, order).ok_or_else(|| DesignError::UnknownTemplate(order.template_id.clone()))?;
    let required = reqs.network_reqs.performance;
    let cover = map_topology(cat, &reqs.topology)?;

    // Each descriptor is asked only for the functional features it can offer at all;
    // a feature no selected descriptor offers fails the design.
    let mut offered_anywhere = BTreeSet::new();
    let mut targets = Vec::new();
    for nsd_id in &cover.nsd_ids {
        let nsd = cat.nsd(nsd_id)?;
        let offered: BTreeSet<String> = nsd.flavors.iter().flat_map(|f| f.feature_tags.iter().cloned()).collect();
        let wanted: BTreeSet<String> = reqs.network_reqs.functional.intersection(&offered).cloned().collect();
        offered_anywhere.extend(wanted.iter().cloned());
        targets.push(select_triplet(cat, nsd_id, &wanted, &required)?);
    }
    let missing: BTreeSet<String> = reqs.network_reqs.functional.difference(&offered_anywhere).cloned().collect();
    if !missing.is_empty() {
        return Err(DesignError::NoFlavorMatches { nsd: cover.nsd_ids.join("+"), missing });
    }

    // Eligible levels per position, cheapest first; the target level is always eligible.
    let mut options_per_ns: Vec<Vec<LevelOption>> = Vec::new();
    for target in &targets {
        let nsd = cat.nsd(&target.nsd_id)?;
        let flavor = nsd.flavor(&target.flavor_id).expect("selected flavor exists");
        let target_level = flavor.level(&target.il_id).expect("selected level exists");
        let target_res = resolve_triplet(cat, target)?;
        let mut opts = Vec::new();
        for level in &flavor.instantiation_levels {
            let t = Triplet::new(&target.nsd_id, &target.flavor_id, &level.id);
            let res = resolve_triplet(cat, &t)?;
            let eligible = level.id == target.il_id
                || (level.declared_capacity.max_latency_ms <= required.max_latency_ms
                    && level.declared_capacity.dominated_by(&target_level.declared_capacity)
                    && resource_dominated(&res, &target_res));
            if eligible {
                opts.push(LevelOption {
                    level,
                    cost: res.aggregate(),
                    coverage: level.declared_capacity.coverage_ratio(&required),
                    triplet: t,
                });
            }
        }
        opts.sort_by(|a, b| (a.cost.cost_key(), &a.level.id).cmp(&(b.cost.cost_key(), &b.level.id)));
        options_per_ns.push(opts);
    }

    let target_combo: Vec<usize> = targets
        .iter()
        .zip(&options_per_ns)
        .map(|(t, opts)| opts.iter().position(|o| o.level.id == t.il_id).expect("target is eligible"))
        .collect();
    let combo_capacity = |combo: &[usize]| -> PerformanceVector {
        combo
            .iter()
            .zip(&options_per_ns)
            .map(|(&i, opts)| opts[i].level.declared_capacity)
            .reduce(|a, b| a.series(&b))
            .expect("topology is non-empty")
    };
    let combo_coverage = |combo: &[usize]| -> f64 {
        combo.iter().zip(&options_per_ns).map(|(&i, opts)| opts[i].coverage).fold(f64::INFINITY, f64::min)
    };
    let combo_cost = |combo: &[usize]| -> ResourceVector {
        combo.iter().zip(&options_per_ns).map(|(&i, opts)| opts[i].cost).sum()
    };
    let target_capacity = combo_capacity(&target_combo);

    // Cheapest sufficient combination for every hour.
    let mut hourly: Vec<Vec<usize>> = profile
        .hourly_load
        .iter()
        .map(|&f| {
            options_per_ns
                .iter()
                .map(|opts| opts.iter().position(|o| o.coverage >= f).expect("target covers every hour"))
                .collect::<Vec<usize>>()
        })
        .map(|combo| if combo_capacity(&combo) == target_capacity { target_combo.clone() } else { combo })
        .collect();

    let mut distinct: Vec<Vec<usize>> = Vec::new();
    for c in &hourly {
        if !distinct.contains(c) {
            distinct.push(c.clone());
        }
    }
    if !distinct.contains(&target_combo) {
        distinct.push(target_combo.clone());
    }

    // Enforce the cap by dropping the optional level serving the fewest hours.
    while distinct.len() > options.max_optional_ils + 1 {
        let victim = distinct
            .iter()
            .filter(|c| **c != target_combo)
            .min_by(|a, b| {
                let ha = hourly.iter().filter(|h| h == a).count();
                let hb = hourly.iter().filter(|h| h == b).count();
                ha.cmp(&hb).then(combo_coverage(a).total_cmp(&combo_coverage(b)))
            })
            .cloned()
            .expect("more than one level");
        distinct.retain(|c| *c != victim);
        for (h, combo) in hourly.iter_mut().enumerate() {
            if *combo == victim {
                let f = profile.hourly_load[h];
                *combo = distinct
                    .iter()
                    .filter(|c| combo_coverage(c) >= f)
                    .min_by(|a, b| {
                        combo_cost(a)
                            .cost_key()
                            .cmp(&combo_cost(b).cost_key())
                            .then(combo_coverage(a).total_cmp(&combo_coverage(b)))
                    })
                    .cloned()
                    .expect("target covers every hour");
            }
        }
    }

    distinct.sort_by(|a, b| {
        combo_coverage(a)
            .total_cmp(&combo_coverage(b))
            .then((*a == target_combo).cmp(&(*b == target_combo)))
    });
    let name = |idx: usize| format!("nsl-il-{}", idx + 1);
    let mut il_capacity = BTreeMap::new();
    let mut il_coverage = BTreeMap::new();
    let mut optional_ils = Vec::new();
    let mut target_il = None;
    for (idx, combo) in distinct.iter().enumerate() {
        let il = NslInstantiationLevel {
            id: name(idx),
            triplets: combo.iter().zip(&options_per_ns).map(|(&i, opts)| opts[i].triplet.clone()).collect(),
        };
        il_capacity.insert(il.id.clone(), combo_capacity(combo));
        il_coverage.insert(il.id.clone(), combo_coverage(combo));
        if *combo == target_combo {
            target_il = Some(il);
        } else {
            optional_ils.push(il);
        }
    }
    let hourly_il = hourly
        .iter()
        .map(|c| name(distinct.iter().position(|d| d == c).expect("hour uses a kept level")))
        .collect();

    Ok(NslDesign {
        order_id: order.id.clone(),
        required,
        target_il: target_il.expect("target kept"),
        optional_ils,
        il_capacity,
        il_coverage,
        hourly_il,
        warnings: cover.warnings,
    })
}
