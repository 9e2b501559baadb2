// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! System state as a fold over pipeline events.

use std::collections::BTreeMap;
use std::path::Path;

use nslice_core::admission::Infeasible;
use nslice_core::infra::InfrastructureMap;
use nslice_core::lifecycle::{NslDescriptor, ScalingEvent, SliceRuntime};
use nslice_core::ordering::{OrderStatus, ServiceOrder};
use nslice_core::slice_design::NslDesign;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{AdmittedRecord, PipelineEvent, StageRecord};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const BASE_INFRA_FILE: &str = "infra.json";

#[derive(Debug, Error, PartialEq)]
pub enum ApplyError {
    #[error("event {seq}: unknown order {order_id}")]
    UnknownOrder { seq: u64, order_id: String },
    #[error("event {seq}: order {order_id} has no slice")]
    UnknownSlice { seq: u64, order_id: String },
    #[error("event {seq} does not follow {last}")]
    OutOfOrder { seq: u64, last: u64 },
    #[error("event {seq}: order {order_id} already exists")]
    DuplicateOrder { seq: u64, order_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order: ServiceOrder,
    pub design: Option<NslDesign>,
    pub admitted: Option<AdmittedRecord>,
    pub rejection: Option<RejectionInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionInfo {
    pub during: String,
    pub infeasible: Option<Infeasible>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub descriptor: NslDescriptor,
    pub runtime: SliceRuntime,
    pub events: Vec<ScalingEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub last_seq: u64,
    pub map: InfrastructureMap,
    pub orders: BTreeMap<String, OrderRecord>,
    pub slices: BTreeMap<String, SliceRecord>,
}

impl State {
    pub fn new(map: InfrastructureMap) -> Self {
        State { last_seq: 0, map, orders: BTreeMap::new(), slices: BTreeMap::new() }
    }

    /// Canonical bytes of the whole state; two states are the same iff these are.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serializes")
    }

    pub fn order(&self, id: &str) -> Option<&OrderRecord> {
        self.orders.get(id)
    }

    pub fn apply(&mut self, e: &PipelineEvent) -> Result<(), ApplyError> {
        if e.seq <= self.last_seq {
            return Err(ApplyError::OutOfOrder { seq: e.seq, last: self.last_seq });
        }
        let unknown = || ApplyError::UnknownOrder { seq: e.seq, order_id: e.order_id.clone() };
        let no_slice = || ApplyError::UnknownSlice { seq: e.seq, order_id: e.order_id.clone() };
        match &e.record {
            StageRecord::Ordered { order } => {
                if self.orders.contains_key(&order.id) {
                    return Err(ApplyError::DuplicateOrder { seq: e.seq, order_id: order.id.clone() });
                }
                self.orders.insert(
                    order.id.clone(),
                    OrderRecord { order: order.clone(), design: None, admitted: None, rejection: None },
                );
            }
            StageRecord::Designed { design } => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Designed;
                rec.design = Some(design.clone());
                rec.admitted = None;
            }
            StageRecord::Admitted(a) => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Admitted;
                rec.admitted = Some((**a).clone());
            }
            StageRecord::Rejected(r) => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Rejected;
                rec.rejection = Some(RejectionInfo {
                    during: r.during.clone(),
                    infeasible: r.infeasible.clone(),
                    message: r.message.clone(),
                });
            }
            StageRecord::Reserved { ledger } => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Reserved;
                ledger.apply(&mut self.map);
            }
            StageRecord::Prepared { descriptor, runtime } => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Prepared;
                self.slices.insert(
                    e.order_id.clone(),
                    SliceRecord { descriptor: (**descriptor).clone(), runtime: (**runtime).clone(), events: Vec::new() },
                );
            }
            StageRecord::Active { runtime, .. } => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Active;
                self.slices.get_mut(&e.order_id).ok_or_else(no_slice)?.runtime = (**runtime).clone();
            }
            StageRecord::Scaled { event, ledger } => {
                let slice = self.slices.get_mut(&e.order_id).ok_or_else(no_slice)?;
                ledger.apply(&mut self.map);
                slice.runtime.current_il = event.to_il.clone();
                slice.events.push(event.clone());
            }
            StageRecord::Degraded { event } => {
                self.slices.get_mut(&e.order_id).ok_or_else(no_slice)?.events.push(event.clone());
            }
            StageRecord::Traced { runtime, .. } => {
                self.slices.get_mut(&e.order_id).ok_or_else(no_slice)?.runtime = (**runtime).clone();
            }
            StageRecord::Terminated { ledger, runtime } => {
                let rec = self.orders.get_mut(&e.order_id).ok_or_else(unknown)?;
                rec.order.status = OrderStatus::Terminated;
                ledger.apply(&mut self.map);
                if let Some(slice) = self.slices.get_mut(&e.order_id) {
                    slice.runtime = (**runtime).clone();
                }
            }
        }
        self.last_seq = e.seq;
        Ok(())
    }

    /// Folds `events` over `initial`, skipping those already contained in it.
    pub fn replay(initial: State, events: &[PipelineEvent]) -> Result<State, ApplyError> {
        let mut s = initial;
        let start = s.last_seq;
        for e in events.iter().filter(|e| e.seq > start) {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn save_snapshot(&self, dir: &Path) -> std::io::Result<()> {
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        std::fs::write(&tmp, self.snapshot_bytes())?;
        std::fs::rename(tmp, dir.join(SNAPSHOT_FILE))
    }

    pub fn load_snapshot(dir: &Path) -> std::io::Result<Option<State>> {
        match std::fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(std::io::Error::other),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}
