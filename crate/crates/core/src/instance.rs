use crate::error::{Error, Result};
use crate::fleet::FleetModel;
use crate::grid::{
    build_network_matrices, economic_dispatch, fcr_gains_from_dispatch, Dispatch, GridCase, NetworkMatrices,
    BALANCE_TOL_PU,
};
use crate::milp::SolverOptions;

/// A grid at a fixed operating point together with the charging fleet: the
/// shared input of the attack, defense and oracle routines.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: GridCase,
    pub matrices: NetworkMatrices,
    pub fleet: FleetModel,
    /// Scheduled generation P^G in MW, per generator.
    pub dispatch: Vec<f64>,
    /// K^G per generator (MW per unit frequency deviation).
    pub fcr_gains: Vec<f64>,
    site_bus: Vec<Vec<usize>>,
}

impl Instance {
    pub fn new(grid: GridCase, fleet: FleetModel, dispatch: Vec<f64>) -> Result<Self> {
        if dispatch.len() != grid.generators().len() {
            return Err(Error::InvalidGrid(format!(
                "{} dispatch values for {} generators",
                dispatch.len(),
                grid.generators().len()
            )));
        }
        fleet.check_against(&grid)?;
        let matrices = build_network_matrices(&grid)?;
        let fcr_gains = fcr_gains_from_dispatch(&dispatch)?;
        let site_bus = fleet
            .operators()
            .iter()
            .map(|op| {
                op.sites
                    .iter()
                    .map(|s| grid.bus_index(&s.bus).expect("checked against grid"))
                    .collect()
            })
            .collect();
        Ok(Instance {
            grid,
            matrices,
            fleet,
            dispatch,
            fcr_gains,
            site_bus,
        })
    }

    /// Runs the economic dispatch for base load plus expected charging C·L and
    /// wraps the result.
    pub fn with_economic_dispatch(
        grid: GridCase,
        fleet: FleetModel,
        coincidence: f64,
        opts: &SolverOptions,
    ) -> Result<(Self, Dispatch)> {
        fleet.check_against(&grid)?;
        let load: Vec<f64> = grid
            .buses()
            .iter()
            .zip(fleet.expected_load(&grid, coincidence))
            .map(|(b, ev)| b.base_load + ev)
            .collect();
        let dispatch = economic_dispatch(&grid, &load, opts)?;
        let instance = Instance::new(grid, fleet, dispatch.generation.clone())?;
        Ok((instance, dispatch))
    }

    pub fn base_mva(&self) -> f64 {
        self.grid.base_mva()
    }

    /// Bus index of site `site` of operator `operator`.
    pub fn site_bus(&self, operator: usize, site: usize) -> usize {
        self.site_bus[operator][site]
    }

    pub fn total_fcr_pu(&self) -> f64 {
        self.fcr_gains.iter().sum::<f64>() / self.base_mva()
    }

    /// Pre-attack nodal injections Σ P^G - C·L - P^D in p.u. Solver round-off in
    /// the dispatch is absorbed at the reference bus.
    pub fn base_injections_pu(&self, coincidence: f64) -> Result<Vec<f64>> {
        let base = self.base_mva();
        let mut inj: Vec<f64> = self.grid.buses().iter().map(|b| -b.base_load / base).collect();
        for (g, p) in self.dispatch.iter().enumerate() {
            inj[self.grid.generator_bus(g)] += p / base;
        }
        for (o, op) in self.fleet.operators().iter().enumerate() {
            for (j, site) in op.sites.iter().enumerate() {
                inj[self.site_bus(o, j)] -= coincidence * site.capacity / base;
            }
        }
        let net: f64 = inj.iter().sum();
        if net.abs() > BALANCE_TOL_PU {
            return Err(Error::UnbalancedInjections { net });
        }
        inj[self.grid.reference_bus()] -= net;
        Ok(inj)
    }

    /// Pre-attack branch flows in MW.
    pub fn base_flows(&self, coincidence: f64) -> Result<Vec<f64>> {
        let inj = self.base_injections_pu(coincidence)?;
        Ok(self
            .matrices
            .solve_pu(&inj)
            .1
            .into_iter()
            .map(|f| f * self.base_mva())
            .collect())
    }

    /// Replaces the fleet (e.g. with another discretization), keeping the operating point.
    pub fn with_fleet(&self, fleet: FleetModel) -> Result<Self> {
        Instance::new(self.grid.clone(), fleet, self.dispatch.clone())
    }
}
