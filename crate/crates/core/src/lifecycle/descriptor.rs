// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::LifecycleError;
use crate::catalog::NslInstantiationLevel;

/// Metric the default scaling workflows watch: offered load over ordered load.
pub const LOAD_METRIC: &str = "load_ratio";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Comparator {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Le => value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub metric: String,
    pub comparator: Comparator,
    pub threshold: f64,
    pub sustain_minutes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WorkflowAction {
    ScaleTo { il_id: String },
    Reconfigure { primitive: String },
    Alert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PolicyWorkflow {
    pub id: String,
    pub trigger: Trigger,
    pub action: WorkflowAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveInvocation {
    pub primitive: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ChainingRule {
    pub from_vnf: String,
    pub to_vnf: String,
    pub match_spec: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MonitoringSpec {
    pub metrics: BTreeSet<String>,
    pub reporting_period_s: u64,
    pub alarms: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NslDescriptor {
    pub slice_id: String,
    pub target_il: String,
    /// Every level, ascending by load coverage; the target is last.
    pub il_set: Vec<NslInstantiationLevel>,
    /// Load fraction each level carries.
    pub il_coverage: BTreeMap<String, f64>,
    pub workflows: Vec<PolicyWorkflow>,
    /// Keyed by deployed VNF (instance group id).
    pub config_primitives: BTreeMap<String, Vec<PrimitiveInvocation>>,
    pub chaining_rules: Vec<ChainingRule>,
    pub monitoring_spec: MonitoringSpec,
}

impl NslDescriptor {
    pub fn il_ids(&self) -> Vec<&str> {
        self.il_set.iter().map(|il| il.id.as_str()).collect()
    }

    pub fn il_index(&self, id: &str) -> Option<usize> {
        self.il_set.iter().position(|il| il.id == id)
    }

    pub fn coverage(&self, id: &str) -> f64 {
        self.il_coverage.get(id).copied().unwrap_or(0.0)
    }

    /// Pretty JSON with a trailing newline; key order is fixed by the types.
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("descriptor serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, LifecycleError> {
        let d: NslDescriptor =
            serde_json::from_str(text).map_err(|e| LifecycleError::Descriptor(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), LifecycleError> {
        let bad = |m: String| Err(LifecycleError::Descriptor(m));
        if self.il_index(&self.target_il).is_none() {
            return bad(format!("target {} missing from il_set", self.target_il));
        }
        let ids: BTreeSet<&str> = self.il_ids().into_iter().collect();
        if ids.len() != self.il_set.len() {
            return bad("duplicate level ids".into());
        }
        let primitives: BTreeSet<&str> =
            self.config_primitives.values().flatten().map(|p| p.primitive.as_str()).collect();
        for wf in &self.workflows {
            match &wf.action {
                WorkflowAction::ScaleTo { il_id } if !ids.contains(il_id.as_str()) => {
                    return bad(format!("workflow {} scales to unknown level {il_id}", wf.id));
                }
                WorkflowAction::Reconfigure { primitive } if !primitives.contains(primitive.as_str()) => {
                    return bad(format!("workflow {} invokes undeclared primitive {primitive}", wf.id));
                }
                _ => {}
            }
        }
        let deployed: BTreeSet<&str> = self.config_primitives.keys().map(String::as_str).collect();
        validate_chaining(&self.chaining_rules, &deployed).map_err(LifecycleError::Descriptor)
    }
}

/// Rules must only join deployed VNFs, contain no cycle, and connect every deployed VNF.
pub fn validate_chaining(rules: &[ChainingRule], deployed: &BTreeSet<&str>) -> Result<(), String> {
    for r in rules {
        for end in [&r.from_vnf, &r.to_vnf] {
            if !deployed.contains(end.as_str()) {
                return Err(format!("chaining rule references undeployed {end}"));
            }
        }
    }
    // Kahn's algorithm for acyclicity.
    let mut indeg: BTreeMap<&str, usize> = deployed.iter().map(|v| (*v, 0)).collect();
    for r in rules {
        *indeg.get_mut(r.to_vnf.as_str()).expect("checked") += 1;
    }
    let mut ready: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for r in rules.iter().filter(|r| r.from_vnf == v) {
            let d = indeg.get_mut(r.to_vnf.as_str()).expect("checked");
            *d -= 1;
            if *d == 0 {
                ready.push(&r.to_vnf);
            }
        }
    }
    if seen != deployed.len() {
        return Err("chaining rules contain a cycle".into());
    }
    // Weak connectivity.
    if let Some(first) = deployed.iter().next() {
        let mut reached = BTreeSet::from([*first]);
        let mut stack = vec![*first];
        while let Some(v) = stack.pop() {
            for r in rules {
                let next = if r.from_vnf == v {
                    r.to_vnf.as_str()
                } else if r.to_vnf == v {
                    r.from_vnf.as_str()
                } else {
                    continue;
                };
                if reached.insert(next) {
                    stack.push(next);
                }
            }
        }
        if reached.len() != deployed.len() {
            return Err("chaining rules do not connect every deployed VNF".into());
        }
    }
    Ok(())
}

/// One up-trigger and one down-trigger per boundary between consecutive levels. Crossing
/// above coverage `c_k` moves up to level k+1; falling to `c_k * (1 - h)` moves down to k.
pub fn scale_workflows(
    il_set: &[NslInstantiationLevel],
    coverage: &BTreeMap<String, f64>,
    hysteresis: f64,
    down_sustain_minutes: u64,
) -> Vec<PolicyWorkflow> {
    let mut out = Vec::new();
    for k in 0..il_set.len().saturating_sub(1) {
        let c = coverage.get(&il_set[k].id).copied().unwrap_or(0.0);
        out.push(PolicyWorkflow {
            id: format!("scale-up-{}", k + 1),
            trigger: Trigger {
                metric: LOAD_METRIC.into(),
                comparator: Comparator::Gt,
                threshold: c,
                sustain_minutes: 0,
            },
            action: WorkflowAction::ScaleTo { il_id: il_set[k + 1].id.clone() },
        });
        out.push(PolicyWorkflow {
            id: format!("scale-down-{}", k + 1),
            trigger: Trigger {
                metric: LOAD_METRIC.into(),
                comparator: Comparator::Le,
                threshold: c * (1.0 - hysteresis),
                sustain_minutes: down_sustain_minutes,
            },
            action: WorkflowAction::ScaleTo { il_id: il_set[k].id.clone() },
        });
    }
    out
}
