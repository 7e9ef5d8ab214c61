//! Charging-station CSV ingestion.
//!
//! Two layouts are accepted, told apart by the header:
//! `operator_id,bus_id,capacity_mw` (already aggregated per bus) and
//! `operator_id,lat,lon,capacity_kw` (raw station records, mapped to the
//! nearest distribution-connected bus).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fleet::{FleetModel, Operator, Site};
use crate::grid::{natural_id_cmp, GridCase};

const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in km between two (lat, lon) points in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Nearest distribution-connected bus with coordinates; ties go to the
/// lowest bus id in natural order.
pub fn nearest_bus(grid: &GridCase, point: (f64, f64)) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, bus) in grid.buses().iter().enumerate() {
        let (true, Some(c)) = (bus.dist_grid_connected, bus.coords) else {
            continue;
        };
        let d = haversine_km(point, c);
        best = match best {
            Some((j, bd)) if bd < d || (bd == d && natural_id_cmp(&grid.buses()[j].id, &bus.id).is_le()) => {
                Some((j, bd))
            }
            _ => Some((i, d)),
        };
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Aggregated,
    Raw,
}

fn parse_number(field: Option<&str>, what: &str, line: u64) -> Result<f64> {
    let raw = field.ok_or_else(|| Error::Parse(format!("line {line}: missing {what}")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what} '{raw}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: invalid {what} '{raw}'")));
    }
    Ok(v)
}

/// Per-operator capacity in MW per bus id, in the order operators first appear.
pub fn read_capacities(text: &str, grid: &GridCase) -> Result<Vec<(String, BTreeMap<String, f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("line 1: {e}")))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let layout = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["operator_id", "bus_id", "capacity_mw"] => Layout::Aggregated,
        ["operator_id", "lat", "lon", "capacity_kw"] => Layout::Raw,
        other => {
            return Err(Error::Parse(format!(
                "line 1: unrecognized header {other:?}; expected operator_id,bus_id,capacity_mw or operator_id,lat,lon,capacity_kw"
            )))
        }
    };
    let mut order: Vec<String> = Vec::new();
    let mut caps: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let operator = record.get(0).unwrap_or("").to_string();
        if operator.is_empty() {
            return Err(Error::Parse(format!("line {line}: empty operator_id")));
        }
        let (bus, mw) = match layout {
            Layout::Aggregated => {
                let bus = record.get(1).unwrap_or("").to_string();
                if grid.bus_index(&bus).is_none() {
                    return Err(Error::Parse(format!("line {line}: unknown bus '{bus}'")));
                }
                (bus, parse_number(record.get(2), "capacity_mw", line)?)
            }
            Layout::Raw => {
                let lat = parse_number(record.get(1), "lat", line)?;
                let lon = parse_number(record.get(2), "lon", line)?;
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(Error::Parse(format!("line {line}: coordinates out of range")));
                }
                let kw = parse_number(record.get(3), "capacity_kw", line)?;
                let bus = nearest_bus(grid, (lat, lon)).ok_or_else(|| {
                    Error::Parse(format!("line {line}: no distribution-connected bus with coordinates"))
                })?;
                (grid.buses()[bus].id.clone(), kw / 1000.0)
            }
        };
        if mw < 0.0 {
            return Err(Error::Parse(format!("line {line}: negative capacity")));
        }
        if !caps.contains_key(&operator) {
            order.push(operator.clone());
        }
        *caps.entry(operator).or_default().entry(bus).or_default() += mw;
    }
    Ok(order
        .into_iter()
        .map(|o| {
            let c = caps.remove(&o).expect("recorded");
            (o, c)
        })
        .collect())
}

/// Name of the operator that absorbs everything outside the top N.
pub const REST_OPERATOR: &str = "rest";

/// Builds a fleet from CSV text. With `top_n`, only the N largest operators
/// (by total capacity, ties by id) stay hackable and the rest is merged into
/// one non-hackable operator.
pub fn fleet_from_csv(text: &str, grid: &GridCase, discretization: u32, top_n: Option<usize>) -> Result<FleetModel> {
    let mut entries = read_capacities(text, grid)?;
    let to_sites = |caps: BTreeMap<String, f64>| {
        let mut sites: Vec<Site> = caps.into_iter().map(|(bus, capacity)| Site { bus, capacity }).collect();
        sites.sort_by(|a, b| natural_id_cmp(&a.bus, &b.bus));
        sites
    };
    let operators = match top_n {
        Some(n) if n < entries.len() => {
            let total = |c: &BTreeMap<String, f64>| c.values().sum::<f64>();
            entries.sort_by(|a, b| {
                total(&b.1)
                    .total_cmp(&total(&a.1))
                    .then_with(|| natural_id_cmp(&a.0, &b.0))
            });
            let rest_entries = entries.split_off(n);
            let mut ops: Vec<Operator> = entries
                .into_iter()
                .map(|(id, c)| Operator::new(id, true, to_sites(c)))
                .collect();
            if ops.iter().any(|o| o.id == REST_OPERATOR) {
                return Err(Error::InvalidFleet(format!(
                    "operator id '{REST_OPERATOR}' is reserved"
                )));
            }
            let mut rest: BTreeMap<String, f64> = BTreeMap::new();
            for (_, caps) in rest_entries {
                for (bus, mw) in caps {
                    *rest.entry(bus).or_default() += mw;
                }
            }
            ops.push(Operator::new(REST_OPERATOR, false, to_sites(rest)));
            ops
        }
        _ => entries
            .into_iter()
            .map(|(id, c)| Operator::new(id, true, to_sites(c)))
            .collect(),
    };
    let fleet = FleetModel::new(operators, discretization)?;
    fleet.check_against(grid)?;
    Ok(fleet)
}

pub fn fleet_from_csv_file(
    path: impl AsRef<Path>,
    grid: &GridCase,
    discretization: u32,
    top_n: Option<usize>,
) -> Result<FleetModel> {
    let text = std::fs::read_to_string(path)?;
    fleet_from_csv(&text, grid, discretization, top_n)
}
