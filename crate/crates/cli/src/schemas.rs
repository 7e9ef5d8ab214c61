//! JSON Schemas for every file the tool reads or writes. The copies in
//! `docs/` are checked against these by the test suite.

use gridseg::fleet::SegmentationFile;
use gridseg::grid::GridCaseFile;
use gridseg::FleetModel;
use schemars::schema::RootSchema;
use schemars::schema_for;

use crate::config::RunConfig;
use crate::report::Report;

/// `(file name, schema)` pairs in a fixed order.
pub fn all() -> Vec<(&'static str, RootSchema)> {
    vec![
        ("case.schema.json", schema_for!(GridCaseFile)),
        ("fleet.schema.json", schema_for!(FleetModel)),
        ("config.schema.json", schema_for!(RunConfig)),
        ("segmentation.schema.json", schema_for!(SegmentationFile)),
        ("report.schema.json", schema_for!(Report)),
    ]
}

pub fn render(schema: &RootSchema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schemas serialize");
    s.push('\n');
    s
}
