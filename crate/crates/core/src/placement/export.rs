// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::collections::BTreeSet;
use std::fmt::Write;

use super::ReservedResource;
use crate::infra::InfrastructureMap;
use crate::window::TimeWindow;

/// Per-PoP, per-window utilization as whitespace-aligned columns. One row per distinct
/// window booked at the PoP; peaks are concurrent maxima within that window.
pub fn utilization_table(map: &InfrastructureMap) -> String {
    let mut rows = vec![[
        "pop".to_string(),
        "window".into(),
        "hard".into(),
        "hard+soft".into(),
        "capacity".into(),
        "vcpu%".into(),
    ]];
    for pop in &map.pops {
        let windows: BTreeSet<TimeWindow> = map
            .reservations
            .iter()
            .filter(|r| matches!(&r.resource, ReservedResource::Compute { pop_id, .. } if *pop_id == pop.id))
            .map(|r| r.window)
            .collect();
        for w in windows {
            let (hard, all) = map.peak_compute(&pop.id, &w);
            let pct = (hard.vcpu * 100).checked_div(pop.capacity.vcpu).unwrap_or(0);
            rows.push([
                pop.id.to_string(),
                w.to_string(),
                hard.to_string(),
                all.to_string(),
                pop.capacity.to_string(),
                pct.to_string(),
            ]);
        }
    }
    let widths: Vec<usize> = (0..6).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        writeln!(out, "{}", line.join("  ").trim_end()).expect("write to string");
    }
    out
}
