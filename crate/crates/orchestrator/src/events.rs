// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Pipeline events and the append-only NDJSON log they live in.
//!
//! Events carry facts, not commands: every record holds the data needed to reproduce its
//! effect on [`State`](crate::state::State) without re-running any pipeline stage.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nslice_core::admission::{AdmissionRequest, FeasibleSolution, Infeasible, SlaRecord};
use nslice_core::infra::InfrastructureMap;
use nslice_core::lifecycle::{NslDescriptor, ScalingEvent, SliceRuntime};
use nslice_core::ordering::ServiceOrder;
use nslice_core::placement::{Cost, Reservation, Strategy};
use nslice_core::slice_design::NslDesign;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "events.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Ordered,
    Designed,
    Admitted,
    Rejected,
    Reserved,
    Prepared,
    Active,
    Scaled,
    Degraded,
    Traced,
    Terminated,
}

/// Reservation-ledger change: ids dropped, records appended, and the counters afterwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerDelta {
    pub released: Vec<String>,
    pub added: Vec<Reservation>,
    pub version: u64,
    pub next_reservation_seq: u64,
}

impl LedgerDelta {
    /// Difference between two states of the same map.
    pub fn between(before: &InfrastructureMap, after: &InfrastructureMap) -> Self {
        let released = before
            .reservations
            .iter()
            .filter(|r| !after.reservations.iter().any(|a| a.id == r.id))
            .map(|r| r.id.clone())
            .collect();
        let added = after
            .reservations
            .iter()
            .filter(|a| !before.reservations.iter().any(|r| r.id == a.id))
            .cloned()
            .collect();
        LedgerDelta { released, added, version: after.version, next_reservation_seq: after.next_reservation_seq }
    }

    pub fn apply(&self, map: &mut InfrastructureMap) {
        map.reservations.retain(|r| !self.released.contains(&r.id));
        map.reservations.extend(self.added.iter().cloned());
        map.version = self.version;
        map.next_reservation_seq = self.next_reservation_seq;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittedRecord {
    pub request: AdmissionRequest,
    pub solution: FeasibleSolution,
    pub cost: Cost,
    pub strategy: Strategy,
    pub sla: SlaRecord,
    pub map_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRecord {
    /// Pipeline stage that refused the order: `design` or `admission`.
    pub during: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<Infeasible>,
    pub message: String,
}

/// Stage-specific payload; serialized next to the envelope as `stage` + `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageRecord {
    Ordered { order: ServiceOrder },
    Designed { design: NslDesign },
    Admitted(Box<AdmittedRecord>),
    Rejected(RejectedRecord),
    Reserved { ledger: LedgerDelta },
    Prepared { descriptor: Box<NslDescriptor>, runtime: Box<SliceRuntime> },
    Active { now: u64, runtime: Box<SliceRuntime> },
    Scaled { event: ScalingEvent, ledger: LedgerDelta },
    Degraded { event: ScalingEvent },
    /// Hours fed to a slice and the runtime they left behind.
    Traced { loads: Vec<f64>, runtime: Box<SliceRuntime> },
    Terminated { ledger: LedgerDelta, runtime: Box<SliceRuntime> },
}

impl StageRecord {
    pub fn stage(&self) -> Stage {
        match self {
            StageRecord::Ordered { .. } => Stage::Ordered,
            StageRecord::Designed { .. } => Stage::Designed,
            StageRecord::Admitted(_) => Stage::Admitted,
            StageRecord::Rejected(_) => Stage::Rejected,
            StageRecord::Reserved { .. } => Stage::Reserved,
            StageRecord::Prepared { .. } => Stage::Prepared,
            StageRecord::Active { .. } => Stage::Active,
            StageRecord::Scaled { .. } => Stage::Scaled,
            StageRecord::Degraded { .. } => Stage::Degraded,
            StageRecord::Traced { .. } => Stage::Traced,
            StageRecord::Terminated { .. } => Stage::Terminated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvent {
    pub seq: u64,
    pub order_id: String,
    #[serde(flatten)]
    pub record: StageRecord,
    /// Milliseconds since the Unix epoch.
    pub at: u64,
}

impl PipelineEvent {
    pub fn stage(&self) -> Stage {
        self.record.stage()
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("event log out of order: seq {got} after {prev}")]
    OutOfOrder { prev: u64, got: u64 },
}

/// Where events are appended. The in-memory sink keeps nothing; the caller's state
/// already holds the events it needs.
#[derive(Debug)]
pub enum EventLog {
    Memory,
    File { path: PathBuf, file: File },
}

impl EventLog {
    pub fn open(dir: &Path) -> Result<Self, LogError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(EventLog::File { path, file })
    }

    pub fn append(&mut self, events: &[PipelineEvent]) -> Result<(), LogError> {
        if let EventLog::File { file, .. } = self {
            let mut buf = Vec::new();
            for e in events {
                serde_json::to_writer(&mut buf, e).map_err(std::io::Error::other)?;
                buf.push(b'\n');
            }
            file.write_all(&buf)?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            EventLog::Memory => None,
            EventLog::File { path, .. } => Some(path),
        }
    }
}

/// Reads every event of an NDJSON log, checking that `seq` strictly increases.
pub fn read_log(path: &Path) -> Result<Vec<PipelineEvent>, LogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out: Vec<PipelineEvent> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: PipelineEvent =
            serde_json::from_str(&line).map_err(|err| LogError::Corrupt { line: i + 1, message: err.to_string() })?;
        if let Some(prev) = out.last() {
            if e.seq <= prev.seq {
                return Err(LogError::OutOfOrder { prev: prev.seq, got: e.seq });
            }
        }
        out.push(e);
    }
    Ok(out)
}
