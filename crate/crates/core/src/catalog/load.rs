// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{invalid, Catalog, CatalogError, NsDescriptor, ServiceTemplate, VnfDescriptor};

#[derive(Default, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub(crate) struct VnfFile {
    #[serde(default)]
    vnfs: Vec<VnfDescriptor>,
}

#[derive(Default, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub(crate) struct NsdFile {
    #[serde(default)]
    nsds: Vec<NsDescriptor>,
}

#[derive(Default, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub(crate) struct TemplateFile {
    #[serde(default)]
    templates: Vec<ServiceTemplate>,
}

/// Finds `<stem>.toml` or `<stem>.json` in `dir`.
fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["toml", "json"].iter().map(|ext| dir.join(format!("{stem}.{ext}"))).find(|p| p.is_file())
}

fn parse_file<T: DeserializeOwned + Default>(dir: &Path, stem: &str) -> Result<T, CatalogError> {
    let Some(path) = find(dir, stem) else { return Ok(T::default()) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CatalogError::Parse { file: path.display().to_string(), message: e.to_string() })?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| CatalogError::Parse { file: path.display().to_string(), message })
}

/// Loads `vnfs.*`, `nsds.*` and `templates.*` from a directory. Missing files count as empty.
pub fn load_catalog(dir: &Path) -> Result<Catalog, CatalogError> {
    let vnfs: VnfFile = parse_file(dir, "vnfs")?;
    let nsds: NsdFile = parse_file(dir, "nsds")?;
    let templates: TemplateFile = parse_file(dir, "templates")?;
    Catalog::from_parts(vnfs.vnfs, nsds.nsds, templates.templates)
}

fn dangling(from: &str, kind: &'static str, id: &str) -> CatalogError {
    CatalogError::DanglingRef { from: from.into(), kind, id: id.into() }
}

pub(super) fn validate(cat: &Catalog) -> Result<(), CatalogError> {
    for vnf in cat.vnfs.values() {
        if vnf.function_tag.trim().is_empty() {
            return Err(invalid(&vnf.id, "function tag is empty"));
        }
        if vnf.resource_levels.is_empty() {
            return Err(invalid(&vnf.id, "no resource levels"));
        }
    }
    for nsd in cat.nsds.values() {
        validate_nsd(cat, nsd)?;
    }
    check_acyclic(cat)?;
    for t in cat.templates.values() {
        t.validate()?;
    }
    Ok(())
}

fn validate_nsd(cat: &Catalog, nsd: &NsDescriptor) -> Result<(), CatalogError> {
    let id = nsd.id.as_str();
    for v in &nsd.vnf_refs {
        if !cat.vnfs.contains_key(v) {
            return Err(dangling(id, "VNF descriptor", v));
        }
    }
    for n in &nsd.nested_ns_refs {
        if !cat.nsds.contains_key(n) {
            return Err(dangling(id, "NS descriptor", n));
        }
    }
    unique(id, "VNF reference", nsd.vnf_refs.iter())?;
    unique(id, "nested NS reference", nsd.nested_ns_refs.iter())?;
    unique(id, "virtual link", nsd.virtual_links.iter().map(|l| &l.id))?;
    for link in &nsd.virtual_links {
        if link.endpoints[0] == link.endpoints[1] {
            return Err(invalid(id, format!("virtual link {} connects a VNF to itself", link.id)));
        }
        for end in &link.endpoints {
            if !endpoint_declared(cat, nsd, end) {
                return Err(dangling(&format!("{id}/{}", link.id), "link endpoint", end));
            }
        }
    }
    if nsd.flavors.is_empty() {
        return Err(invalid(id, "no flavors"));
    }
    unique(id, "flavor", nsd.flavors.iter().map(|f| &f.id))?;

    for flavor in &nsd.flavors {
        let fid = format!("{id}/{}", flavor.id);
        if flavor.active_vnfs.is_empty() && flavor.active_nested.is_empty() {
            return Err(invalid(&fid, "flavor activates nothing"));
        }
        for v in &flavor.active_vnfs {
            if !nsd.vnf_refs.contains(v) {
                return Err(dangling(&fid, "VNF reference", v));
            }
        }
        for l in &flavor.active_links {
            if !nsd.virtual_links.iter().any(|vl| &vl.id == l) {
                return Err(dangling(&fid, "virtual link", l));
            }
        }
        for n in &flavor.active_nested {
            if !nsd.nested_ns_refs.contains(n) {
                return Err(dangling(&fid, "nested NS reference", n));
            }
        }
        if flavor.instantiation_levels.is_empty() {
            return Err(invalid(&fid, "no instantiation levels"));
        }
        unique(&fid, "instantiation level", flavor.instantiation_levels.iter().map(|l| &l.id))?;

        for level in &flavor.instantiation_levels {
            let lid = format!("{fid}/{}", level.id);
            if !level.declared_capacity.is_positive() {
                return Err(invalid(&lid, "declared capacity must be positive"));
            }
            for (vnf_ref, plan) in &level.vnf_plans {
                if !flavor.active_vnfs.contains(vnf_ref) {
                    return Err(dangling(&lid, "active VNF", vnf_ref));
                }
                if plan.instance_count == 0 {
                    return Err(invalid(&lid, format!("{vnf_ref} has zero instances")));
                }
                let vnf = &cat.vnfs[vnf_ref];
                if !vnf.resource_levels.contains_key(&plan.resource_level) {
                    return Err(dangling(&lid, "resource level", &plan.resource_level));
                }
                for rule in &plan.affinity_rules {
                    if !level.vnf_plans.contains_key(&rule.vnf) {
                        return Err(dangling(&lid, "affinity peer", &rule.vnf));
                    }
                }
            }
            for (vnf_ref, rel) in &level.reliability {
                let Some(plan) = level.vnf_plans.get(vnf_ref) else {
                    return Err(dangling(&lid, "planned VNF", vnf_ref));
                };
                if rel.backup_count >= plan.instance_count {
                    return Err(invalid(
                        &lid,
                        format!("{vnf_ref}: backup_count {} must be below instance_count {}", rel.backup_count, plan.instance_count),
                    ));
                }
            }
            for (link_ref, lp) in &level.link_plans {
                if !flavor.active_links.contains(link_ref) {
                    return Err(dangling(&lid, "active virtual link", link_ref));
                }
                if !(1..=3).contains(&lp.reliability_class) {
                    return Err(invalid(&lid, format!("{link_ref}: reliability class must be 1..=3")));
                }
                let link = nsd.virtual_links.iter().find(|l| &l.id == link_ref).expect("checked above");
                for end in &link.endpoints {
                    if !end.contains('/') && !level.vnf_plans.contains_key(end) {
                        return Err(invalid(&lid, format!("link {link_ref} endpoint {end} is not deployed")));
                    }
                }
            }
            for (nested, choice) in &level.nested {
                if !flavor.active_nested.contains(nested) {
                    return Err(dangling(&lid, "active nested NS", nested));
                }
                let inner = &cat.nsds[nested];
                let Some(f) = inner.flavor(&choice.flavor_id) else {
                    return Err(dangling(&lid, "nested flavor", &choice.flavor_id));
                };
                if f.level(&choice.il_id).is_none() {
                    return Err(dangling(&lid, "nested instantiation level", &choice.il_id));
                }
            }
        }
    }
    Ok(())
}

fn endpoint_declared(cat: &Catalog, nsd: &NsDescriptor, path: &str) -> bool {
    match path.split_once('/') {
        None => nsd.vnf_refs.iter().any(|v| v == path),
        Some((nested, rest)) => {
            nsd.nested_ns_refs.iter().any(|n| n == nested)
                && cat.nsds.get(nested).is_some_and(|inner| endpoint_declared(cat, inner, rest))
        }
    }
}

fn unique<'a>(owner: &str, kind: &'static str, ids: impl Iterator<Item = &'a String>) -> Result<(), CatalogError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CatalogError::DuplicateId { kind, id: format!("{owner}/{id}") });
        }
    }
    Ok(())
}

/// Depth-first search over nested references, reporting the first cycle found.
fn check_acyclic(cat: &Catalog) -> Result<(), CatalogError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        cat: &'a Catalog,
        id: &'a str,
        marks: &mut BTreeMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Result<(), CatalogError> {
        match marks.get(id) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => {
                let start = path.iter().position(|p| *p == id).unwrap_or(0);
                let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(id.to_string());
                return Err(CatalogError::CyclicNesting(cycle));
            }
            None => {}
        }
        marks.insert(id, Mark::Active);
        path.push(id);
        for n in &cat.nsds[id].nested_ns_refs {
            visit(cat, n, marks, path)?;
        }
        path.pop();
        marks.insert(id, Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for id in cat.nsds.keys() {
        visit(cat, id, &mut marks, &mut Vec::new())?;
    }
    Ok(())
}
