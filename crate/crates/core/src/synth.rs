//! Seeded random micro-instances small enough for the enumeration oracles.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::AdversaryParams;
use crate::error::Result;
use crate::fleet::{FleetModel, Operator, Site};
use crate::grid::{Branch, Bus, Generator, GridCase};
use crate::instance::Instance;
use crate::milp::SolverOptions;

#[derive(Debug, Clone)]
pub struct MicroInstance {
    pub seed: u64,
    pub instance: Instance,
    pub params: AdversaryParams,
    pub k: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroConfig {
    pub buses: (usize, usize),
    pub operators: usize,
    pub sites_per_operator: usize,
    pub discretization: u32,
    pub max_segments: usize,
    /// Net load change bound passed to the adversary, MW.
    pub laa_max: f64,
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            buses: (4, 6),
            operators: 2,
            sites_per_operator: 2,
            discretization: 1,
            max_segments: 2,
            laa_max: 1000.0,
        }
    }
}

/// Random connected grid with two generators and a charging fleet. Ratings
/// sit a random 2 to 60 MW above the pre-attack flows, on the scale of the
/// site capacities, so some attacks overload and some segmentations help.
/// The overload threshold is 1.05 times the PATL.
pub fn micro_instance(seed: u64, cfg: &MicroConfig, opts: &SolverOptions) -> Result<MicroInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(cfg.buses.0..=cfg.buses.1);
    let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let buses: Vec<Bus> = ids
        .iter()
        .map(|id| Bus {
            id: id.clone(),
            base_load: rng.gen_range(10.0..60.0),
            coords: None,
            dist_grid_connected: true,
        })
        .collect();

    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..rng.gen_range(1..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let loose: Vec<Branch> = edges
        .iter()
        .enumerate()
        .map(|(l, &(a, b))| Branch {
            id: format!("l{}", l + 1),
            from_bus: ids[a].clone(),
            to_bus: ids[b].clone(),
            susceptance: rng.gen_range(5.0..20.0),
            rating_patl: 1e4,
            overload_threshold: 1e4,
        })
        .collect();

    let mut gen_buses: Vec<usize> = (0..n).collect();
    gen_buses.shuffle(&mut rng);
    let generators: Vec<Generator> = gen_buses[..2]
        .iter()
        .enumerate()
        .map(|(g, &b)| Generator {
            id: format!("g{}", g + 1),
            bus: ids[b].clone(),
            p_min: 0.0,
            p_max: 1000.0,
            marginal_cost: 10.0 + 10.0 * g as f64,
            availability: 1.0,
            class: None,
        })
        .collect();

    let mut operators = Vec::new();
    for o in 0..cfg.operators {
        let mut at: Vec<usize> = (0..n).collect();
        at.shuffle(&mut rng);
        let sites = at[..cfg.sites_per_operator.min(n)]
            .iter()
            .map(|&b| Site {
                bus: ids[b].clone(),
                capacity: rng.gen_range(20.0..80.0),
            })
            .collect();
        let mut op = Operator::new(format!("op{}", o + 1), true, sites);
        op.max_segments = Some(cfg.max_segments);
        operators.push(op);
    }
    let fleet = FleetModel::new(operators, cfg.discretization)?;

    let params = AdversaryParams {
        hack_budget: rng.gen_range(1..=2),
        laa_max: cfg.laa_max,
        ..AdversaryParams::default()
    };
    let k = rng.gen_range(0..=1);

    let grid = GridCase::new(100.0, None, buses.clone(), loose, generators.clone())?;
    let (loose_instance, _) = Instance::with_economic_dispatch(grid, fleet.clone(), params.coincidence, opts)?;
    let flows = loose_instance.base_flows(params.coincidence)?;
    let mut branches = loose_instance.grid.branches().to_vec();
    for (br, f) in branches.iter_mut().zip(&flows) {
        br.rating_patl = f.abs() + rng.gen_range(2.0..60.0);
        br.overload_threshold = 1.05 * br.rating_patl;
    }
    let grid = GridCase::new(100.0, None, buses, branches, generators)?;
    let instance = Instance::new(grid, fleet, loose_instance.dispatch.clone())?;
    Ok(MicroInstance {
        seed,
        instance,
        params,
        k,
    })
}
