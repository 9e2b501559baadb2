// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::infra::{LinkId, PopId, ResourceVector};
use crate::window::TimeWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReservationMode {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ReservedResource {
    Compute { pop_id: PopId, amount: ResourceVector },
    Bandwidth { wan_link_id: LinkId, bitrate_mbps: u64 },
}

/// A time-windowed booking held on behalf of one order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Reservation {
    pub id: String,
    pub order_id: String,
    pub resource: ReservedResource,
    pub window: TimeWindow,
    pub mode: ReservationMode,
}
