// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Optimal placement among feasible solutions, and the time-windowed reservation ledger.
//!
//! Reservations follow snapshot-validate-commit: optimization runs on a snapshot, and the
//! commit re-checks every booking against the live map under the writer lock, all or none.

mod export;
mod ledger;
mod optimize;

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::export::utilization_table;
pub use self::ledger::*;
pub use self::optimize::{
    optimize, optimize_with, solution_cost, Cost, Objective, ObjectiveKind, Placement, Strategy, EXACT_MAX_INSTANCES,
    EXACT_MAX_POPS,
};
use crate::admission::{AdmissionRequest, FeasibleSolution, LinkRoute};
use crate::infra::{InfrastructureMap, LinkId, PopId, ResourceVector};
use crate::ordering::{OrderError, OrderStatus, ServiceOrder};
pub use crate::window::TimeWindow;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("no feasible solution")]
    NoFeasibleSolution,
    #[error("capacity raced: {0}")]
    CapacityRaced(String),
    #[error("bad objective: {0}")]
    BadObjective(String),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A booking not yet committed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct BookingRequest {
    pub resource: ReservedResource,
    pub window: TimeWindow,
}

/// Bookings a solution needs: per window, one compute booking per hosting PoP and one
/// bandwidth booking per WAN link on any route. Zero amounts are skipped.
pub fn bookings(req: &AdmissionRequest, sol: &FeasibleSolution) -> Vec<BookingRequest> {
    let mut compute: BTreeMap<&PopId, ResourceVector> = BTreeMap::new();
    for inst in &req.instances {
        if let Some(p) = sol.assignment.get(&inst.key) {
            *compute.entry(p).or_insert(ResourceVector::ZERO) += inst.demand;
        }
    }
    let mut bandwidth: BTreeMap<&LinkId, u64> = BTreeMap::new();
    for r in &sol.link_routes {
        let bitrate = req.links.iter().find(|l| l.id == r.link_id).map_or(0, |l| l.bitrate_mbps);
        for wl in &r.path {
            *bandwidth.entry(wl).or_default() += bitrate;
        }
    }
    let mut out = Vec::new();
    for w in &req.windows {
        for (pop, amount) in compute.iter().filter(|(_, a)| !a.is_zero()) {
            out.push(BookingRequest {
                resource: ReservedResource::Compute { pop_id: (*pop).clone(), amount: *amount },
                window: *w,
            });
        }
        for (link, bitrate) in bandwidth.iter().filter(|(_, b)| **b > 0) {
            out.push(BookingRequest {
                resource: ReservedResource::Bandwidth { wan_link_id: (*link).clone(), bitrate_mbps: *bitrate },
                window: *w,
            });
        }
    }
    out
}

/// Validates and appends every booking, or none of them.
pub fn commit(
    map: &mut InfrastructureMap,
    order_id: &str,
    items: &[BookingRequest],
    mode: ReservationMode,
) -> Result<Vec<Reservation>, PlacementError> {
    let (len, seq) = (map.reservations.len(), map.next_reservation_seq);
    for item in items {
        let room_ok = match &item.resource {
            ReservedResource::Compute { pop_id, amount } => map
                .residual_for(pop_id, &item.window, mode)
                .map(|r| amount.fits_within(&r))
                .map_err(|e| e.to_string()),
            ReservedResource::Bandwidth { wan_link_id, bitrate_mbps } => map
                .residual_bitrate(wan_link_id, &item.window, mode)
                .map(|r| *bitrate_mbps <= r)
                .map_err(|e| e.to_string()),
        };
        if room_ok != Ok(true) {
            map.reservations.truncate(len);
            map.next_reservation_seq = seq;
            let what = match &item.resource {
                ReservedResource::Compute { pop_id, amount } => format!("{amount} at {pop_id}"),
                ReservedResource::Bandwidth { wan_link_id, bitrate_mbps } => {
                    format!("{bitrate_mbps} Mbps on {wan_link_id}")
                }
            };
            return Err(PlacementError::CapacityRaced(format!("no room for {what} in {}", item.window)));
        }
        map.next_reservation_seq += 1;
        map.reservations.push(Reservation {
            id: format!("r{}", map.next_reservation_seq),
            order_id: order_id.into(),
            resource: item.resource.clone(),
            window: item.window,
            mode,
        });
    }
    map.version += 1;
    Ok(map.reservations[len..].to_vec())
}

/// Commits the solution's bookings for an `ADMITTED` order, moving it to `RESERVED`. On a
/// race the order goes back to `DESIGNED` for re-admission.
pub fn reserve(
    map: &mut InfrastructureMap,
    order: &mut ServiceOrder,
    req: &AdmissionRequest,
    sol: &FeasibleSolution,
) -> Result<Vec<Reservation>, PlacementError> {
    if order.status != OrderStatus::Admitted {
        return Err(OrderError::IllegalTransition { from: order.status, to: OrderStatus::Reserved }.into());
    }
    match commit(map, &order.id, &bookings(req, sol), req.mode) {
        Ok(r) => {
            order.transition(OrderStatus::Reserved)?;
            Ok(r)
        }
        Err(e) => {
            order.transition(OrderStatus::Designed)?;
            Err(e)
        }
    }
}

/// Drops every reservation held by `order_id`; returns what was released.
pub fn release(map: &mut InfrastructureMap, order_id: &str) -> Vec<Reservation> {
    let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut map.reservations).into_iter().partition(|r| r.order_id == order_id);
    map.reservations = kept;
    if !gone.is_empty() {
        map.version += 1;
    }
    gone
}

/// Atomically swaps the reservations of `order_id` for a new set of bookings. On failure
/// the ledger is left exactly as it was.
pub fn replace(
    map: &mut InfrastructureMap,
    order_id: &str,
    items: &[BookingRequest],
    mode: ReservationMode,
) -> Result<(Vec<Reservation>, Vec<Reservation>), PlacementError> {
    let before = (map.reservations.clone(), map.next_reservation_seq, map.version);
    let released = release(map, order_id);
    match commit(map, order_id, items, mode) {
        Ok(added) => Ok((released, added)),
        Err(e) => {
            (map.reservations, map.next_reservation_seq, map.version) = before;
            Err(e)
        }
    }
}

/// Restricts a solution to the instances and virtual links of a smaller request whose
/// instances all appear in it. PoP assignments are kept; nothing is re-placed.
pub fn project_solution(sol: &FeasibleSolution, req: &AdmissionRequest) -> Option<FeasibleSolution> {
    let mut assignment = BTreeMap::new();
    for inst in &req.instances {
        assignment.insert(inst.key.clone(), sol.assignment.get(&inst.key)?.clone());
    }
    let mut link_routes = Vec::new();
    for l in &req.links {
        let hosts = |g: &str| -> BTreeSet<&PopId> {
            req.instances.iter().filter(|i| i.key.group == g).map(|i| &assignment[&i.key]).collect()
        };
        let mut pairs = BTreeSet::new();
        for a in hosts(&l.endpoints[0]) {
            for b in hosts(&l.endpoints[1]) {
                pairs.insert(if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) });
            }
        }
        for (a, b) in pairs {
            let route = sol.link_routes.iter().find(|r| {
                r.link_id == l.id && ((r.pops[0] == a && r.pops[1] == b) || (r.pops[0] == b && r.pops[1] == a))
            })?;
            link_routes.push(LinkRoute { link_id: l.id.clone(), pops: route.pops.clone(), path: route.path.clone() });
        }
    }
    link_routes.sort_by(|x, y| (&x.link_id, &x.pops).cmp(&(&y.link_id, &y.pops)));
    Some(FeasibleSolution { assignment, link_routes })
}
