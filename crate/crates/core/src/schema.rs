// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! JSON Schemas of the input files and the slice descriptor, derived from the serde types.

use schemars::{schema_for, Schema};

use crate::catalog::{NsdFile, TemplateFile, VnfFile};
use crate::infra::InfraFile;
use crate::lifecycle::NslDescriptor;

/// `(file name, schema)` for every published format.
pub fn schemas() -> Vec<(&'static str, Schema)> {
    vec![
        ("infra.schema.json", schema_for!(InfraFile)),
        ("vnfs.schema.json", schema_for!(VnfFile)),
        ("nsds.schema.json", schema_for!(NsdFile)),
        ("templates.schema.json", schema_for!(TemplateFile)),
        ("nsld.schema.json", schema_for!(NslDescriptor)),
    ]
}

/// Pretty JSON with a trailing newline, as checked in under `schemas/`.
pub fn render(schema: &Schema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schemas serialize");
    s.push('\n');
    s
}
