// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Network-slice creation pipeline.
//!
//! A tenant orders a slice from a service template ([`ordering`]); the order is mapped to
//! NS descriptors and instantiation levels ([`slice_design`]), checked for admission
//! against the infrastructure ([`admission`]), optimally placed and reserved
//! ([`placement`]), and finally prepared, activated and scaled at run time ([`lifecycle`]).

pub mod admission;
pub mod catalog;
pub mod infra;
pub mod lifecycle;
pub mod ordering;
pub mod placement;
pub mod schema;
pub mod slice_design;
pub mod window;
