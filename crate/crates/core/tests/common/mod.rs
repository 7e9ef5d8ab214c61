#![allow(dead_code)]

use gridseg::grid::{Branch, Bus, Generator};
use gridseg::{AdversaryParams, FleetModel, GridCase, Instance, Operator, Site};

pub fn bus(id: &str, load: f64) -> Bus {
    Bus {
        id: id.into(),
        base_load: load,
        coords: None,
        dist_grid_connected: true,
    }
}

pub fn branch(id: &str, from: &str, to: &str, b: f64, rating: f64) -> Branch {
    Branch {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        susceptance: b,
        rating_patl: rating,
        overload_threshold: rating,
    }
}

pub fn generator(id: &str, bus: &str, p_max: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        p_min: 0.0,
        p_max,
        marginal_cost: 1.0,
        availability: 1.0,
        class: None,
    }
}

pub fn site(bus: &str, capacity: f64) -> Site {
    Site {
        bus: bus.into(),
        capacity,
    }
}

/// Feeder 4 - 1 - 2 - 3 with the generator at 1. Operator A has 25 MW at
/// buses 2 and 3; line 1-2 carries 10 MW of expected charging and is rated
/// 40 MW. Hacking both sites adds 40 MW and overloads it, hacking one adds
/// 20 MW and does not.
pub fn feeder(d: u32) -> Instance {
    let grid = GridCase::new(
        100.0,
        None,
        vec![bus("1", 0.0), bus("2", 0.0), bus("3", 0.0), bus("4", 5.0)],
        vec![
            branch("a", "1", "2", 10.0, 40.0),
            branch("b", "2", "3", 10.0, 100.0),
            branch("c", "4", "1", 10.0, 100.0),
        ],
        vec![generator("g", "1", 500.0)],
    )
    .unwrap();
    let fleet = FleetModel::new(
        vec![Operator::new("A", true, vec![site("2", 25.0), site("3", 25.0)])],
        d,
    )
    .unwrap();
    Instance::new(grid, fleet, vec![15.0]).unwrap()
}

pub fn feeder_params(budget: u32) -> AdversaryParams {
    AdversaryParams {
        hack_budget: budget,
        laa_max: 100.0,
        ..AdversaryParams::default()
    }
}
