// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Pipeline driver for nslice: event-sourced state, the HTTP API and the `nslctl` CLI.

pub mod api;
pub mod cli;
pub mod config;
pub mod engine;
pub mod events;
pub mod state;
pub mod tenants;
