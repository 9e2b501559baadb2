// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Service orders: a template plus tenant overrides, policed by the template's
//! customizable ranges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::template::{lookup_path, lookup_path_mut};
use crate::catalog::{AllowedRange, Catalog, Requirements, ServiceTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrderStatus {
    Submitted,
    Designed,
    Admitted,
    Rejected,
    Reserved,
    Prepared,
    Active,
    Terminated,
}

impl OrderStatus {
    pub const ALL: [OrderStatus; 8] = [
        OrderStatus::Submitted,
        OrderStatus::Designed,
        OrderStatus::Admitted,
        OrderStatus::Rejected,
        OrderStatus::Reserved,
        OrderStatus::Prepared,
        OrderStatus::Active,
        OrderStatus::Terminated,
    ];

    /// Declared successor relation. `ADMITTED → DESIGNED` is the capacity-race return path.
    pub fn successors(self) -> &'static [OrderStatus] {
        use OrderStatus::*;
        match self {
            Submitted => &[Designed, Rejected],
            Designed => &[Admitted, Rejected],
            Admitted => &[Reserved, Designed],
            Reserved => &[Prepared],
            Prepared => &[Active, Terminated],
            Active => &[Terminated],
            Rejected | Terminated => &[],
        }
    }

    pub fn can_become(self, next: OrderStatus) -> bool {
        self.successors().contains(&next)
    }
}

impl fmt::Display for OrderStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("status serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// A tenant-supplied attribute value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum OverrideValue {
    Number(u64),
    Set(BTreeSet<String>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("attribute {path} is not customizable")]
    ForbiddenAttribute { path: String },
    #[error("value for {path} is outside the allowed range {allowed}")]
    OutOfRange { path: String, allowed: String },
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: OrderStatus, to: OrderStatus },
}

impl OrderError {
    /// Attribute path the error refers to, if any.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            OrderError::ForbiddenAttribute { path } | OrderError::OutOfRange { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ServiceOrder {
    pub id: String,
    pub tenant_id: String,
    pub template_id: String,
    pub attribute_overrides: BTreeMap<String, OverrideValue>,
    pub status: OrderStatus,
    pub created_at: u64,
    /// Set on orders cloned from a rejected one during re-negotiation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_order_id: Option<String>,
}

impl ServiceOrder {
    pub fn transition(&mut self, next: OrderStatus) -> Result<(), OrderError> {
        if !self.status.can_become(next) {
            return Err(OrderError::IllegalTransition { from: self.status, to: next });
        }
        self.status = next;
        Ok(())
    }
}

fn check_override(template: &ServiceTemplate, path: &str, value: &OverrideValue) -> Result<(), OrderError> {
    let Some(range) = template.customizable.get(path) else {
        return Err(OrderError::ForbiddenAttribute { path: path.into() });
    };
    let out_of_range = |allowed: String| OrderError::OutOfRange { path: path.into(), allowed };
    match (range, value) {
        (AllowedRange::Numeric { min, max }, OverrideValue::Number(v)) => {
            if v < min || v > max {
                return Err(out_of_range(format!("[{min}, {max}]")));
            }
        }
        (AllowedRange::Subset { subset_of }, OverrideValue::Set(v)) => {
            if v.is_empty() || !v.is_subset(subset_of) {
                return Err(out_of_range(format!("non-empty subset of {subset_of:?}")));
            }
        }
        (AllowedRange::Numeric { min, max }, _) => return Err(out_of_range(format!("[{min}, {max}]"))),
        (AllowedRange::Subset { subset_of }, _) => {
            return Err(out_of_range(format!("non-empty subset of {subset_of:?}")))
        }
    }
    Ok(())
}

/// Validates overrides against the template's policy and records a `SUBMITTED` order.
pub fn submit_order(
    catalog: &Catalog,
    id: impl Into<String>,
    tenant_id: impl Into<String>,
    template_id: &str,
    overrides: BTreeMap<String, OverrideValue>,
    created_at: u64,
) -> Result<ServiceOrder, OrderError> {
    let template = catalog.template(template_id).ok_or_else(|| OrderError::UnknownTemplate(template_id.into()))?;
    for (path, value) in &overrides {
        check_override(template, path, value)?;
    }
    Ok(ServiceOrder {
        id: id.into(),
        tenant_id: tenant_id.into(),
        template_id: template_id.into(),
        attribute_overrides: overrides,
        status: OrderStatus::Submitted,
        created_at,
        parent_order_id: None,
    })
}

/// Clones a rejected order into a fresh `SUBMITTED` order with amended overrides.
pub fn renegotiate(
    catalog: &Catalog,
    rejected: &ServiceOrder,
    id: impl Into<String>,
    overrides: BTreeMap<String, OverrideValue>,
    created_at: u64,
) -> Result<ServiceOrder, OrderError> {
    if rejected.status != OrderStatus::Rejected {
        return Err(OrderError::IllegalTransition { from: rejected.status, to: OrderStatus::Submitted });
    }
    let mut order = submit_order(catalog, id, rejected.tenant_id.clone(), &rejected.template_id, overrides, created_at)?;
    order.parent_order_id = Some(rejected.id.clone());
    Ok(order)
}

/// Template defaults with the overrides laid on top. Pure in (template, overrides).
pub fn overlay(template: &Requirements, overrides: &BTreeMap<String, OverrideValue>) -> Requirements {
    let mut value = serde_json::to_value(template).expect("requirements serialize");
    for (path, v) in overrides {
        if let Some(slot) = lookup_path_mut(&mut value, path) {
            *slot = serde_json::to_value(v).expect("override serializes");
        }
    }
    serde_json::from_value(value).expect("overrides were type-checked against their ranges")
}

/// Requirements the order resolves to, or `None` when its template is unknown.
pub fn effective_requirements(catalog: &Catalog, order: &ServiceOrder) -> Option<Requirements> {
    let template = catalog.template(&order.template_id)?;
    Some(overlay(&template.requirements(), &order.attribute_overrides))
}

/// Dotted paths whose value differs between two requirement documents (leaf level).
pub fn diff_paths(a: &Requirements, b: &Requirements) -> BTreeSet<String> {
    fn walk(a: &serde_json::Value, b: &serde_json::Value, prefix: String, out: &mut BTreeSet<String>) {
        match (a, b) {
            (serde_json::Value::Object(ma), serde_json::Value::Object(mb)) => {
                let keys: BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
                for k in keys {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    match (ma.get(k), mb.get(k)) {
                        (Some(x), Some(y)) => walk(x, y, p, out),
                        _ => {
                            out.insert(p);
                        }
                    }
                }
            }
            _ if a != b => {
                out.insert(prefix);
            }
            _ => {}
        }
    }
    let va = serde_json::to_value(a).expect("serialize");
    let vb = serde_json::to_value(b).expect("serialize");
    let mut out = BTreeSet::new();
    walk(&va, &vb, String::new(), &mut out);
    out
}

/// Current value at `path` in a requirement document, as JSON.
pub fn attribute(reqs: &Requirements, path: &str) -> Option<serde_json::Value> {
    let v = serde_json::to_value(reqs).ok()?;
    lookup_path(&v, path).cloned()
}
