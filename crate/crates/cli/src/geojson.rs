//! GeoJSON overlay: one point per bus with its attack load change and one
//! line per branch with its loading. Elements without coordinates are skipped.

use gridseg::{AttackOutcome, Instance};
use serde_json::{json, Value};

use crate::report::BranchLoading;

/// GeoJSON positions are (lon, lat).
fn position(c: (f64, f64)) -> Value {
    json!([c.1, c.0])
}

pub fn overlay(instance: &Instance, branches: &[BranchLoading], attack: Option<&AttackOutcome>) -> Value {
    let grid = &instance.grid;
    let mut change = vec![0.0; grid.buses().len()];
    if let Some(a) = attack {
        for (o, op) in instance.fleet.operators().iter().enumerate() {
            for j in 0..op.sites.len() {
                change[instance.site_bus(o, j)] += a.attack.l_pos[o][j] - a.attack.l_neg[o][j];
            }
        }
    }
    let mut features = Vec::new();
    for (bus, dl) in grid.buses().iter().zip(&change) {
        if let Some(c) = bus.coords {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": position(c)},
                "properties": {"id": bus.id, "load_change_mw": dl, "base_load_mw": bus.base_load},
            }));
        }
    }
    for (l, row) in branches.iter().enumerate() {
        let (from, to) = grid.branch_ends(l);
        if let (Some(a), Some(b)) = (grid.buses()[from].coords, grid.buses()[to].coords) {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [position(a), position(b)]},
                "properties": {"id": row.id, "loading_pct": row.loading_pct, "overloaded": row.overloaded},
            }));
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}
