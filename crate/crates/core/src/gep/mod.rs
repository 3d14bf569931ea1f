//! Multi-stage generation expansion as an MDP.
//!
//! Each stage invests exactly the capacity needed to cover that stage's peak
//! block; the action splits it across technologies. Operating cost comes from
//! merit-order dispatch of one representative year, scaled by the epoch
//! weight. Gas and carbon prices are the only stochastic inputs.

mod dataset;
mod dispatch;

use std::path::Path;

use rand::Rng;

pub use dataset::{BlockRecord, Dataset, Fuel, StageBoundsRecord, TechnologyRecord, BUNDLED};
pub use dispatch::{dispatch, merit_order, BlockDemand, DispatchResult, DEMAND_TOL};

use crate::error::{Error, Result};
use crate::mdp::{make_state, ActionShares, ExogenousDraw, Problem, StageIndex, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Technology {
    pub name: String,
    /// $/MW
    pub capital_cost: f64,
    /// MMBtu/MWh
    pub heat_rate: f64,
    pub fuel: Fuel,
    /// $/MMBtu, used for non-gas fuels
    pub fuel_price_fixed: f64,
    /// tCO2/MWh
    pub emission_rate: f64,
    /// $/MWh
    pub variable_om: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadBlock {
    pub hours: f64,
    pub base_net_demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBounds {
    pub gas: (f64, f64),
    pub carbon: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GepInstance {
    technologies: Vec<Technology>,
    blocks: Vec<LoadBlock>,
    initial_capacity: Vec<f64>,
    stage_bounds: Vec<PriceBounds>,
    years_per_stage: f64,
    demand_growth: f64,
    epoch_weight: f64,
    /// Block demands per stage, precomputed.
    stage_demands: Vec<Vec<BlockDemand>>,
}

pub fn marginal_cost(tech: &Technology, draw: &ExogenousDraw) -> f64 {
    let fuel_price = match tech.fuel {
        Fuel::Gas => draw.gas_price,
        Fuel::Coal | Fuel::Uranium => tech.fuel_price_fixed,
    };
    tech.heat_rate * fuel_price + tech.emission_rate * draw.carbon_price + tech.variable_om
}

impl GepInstance {
    pub fn new(
        technologies: Vec<Technology>,
        blocks: Vec<LoadBlock>,
        initial_capacity: Vec<f64>,
        stage_bounds: Vec<PriceBounds>,
        years_per_stage: f64,
        demand_growth: f64,
        epoch_weight: f64,
    ) -> Result<Self> {
        if technologies.len() < 2 {
            return Err(Error::contract("need at least two technologies"));
        }
        if initial_capacity.len() != technologies.len() {
            return Err(Error::contract("one initial capacity per technology"));
        }
        if blocks.is_empty() || stage_bounds.is_empty() {
            return Err(Error::contract("need load blocks and at least one stage"));
        }
        for b in &stage_bounds {
            if b.gas.0 > b.gas.1 || b.carbon.0 > b.carbon.1 {
                return Err(Error::contract("price bounds with lo > hi"));
            }
        }
        let mut inst = GepInstance {
            technologies,
            blocks,
            initial_capacity,
            stage_bounds,
            years_per_stage,
            demand_growth,
            epoch_weight,
            stage_demands: Vec::new(),
        };
        inst.stage_demands = (1..=inst.horizon())
            .map(|t| {
                let t = StageIndex::unchecked(t);
                (0..inst.blocks.len())
                    .map(|l| BlockDemand {
                        hours: inst.blocks[l].hours,
                        demand_mw: inst.demand_at(l, t),
                    })
                    .collect()
            })
            .collect();
        Ok(inst)
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let technologies = ds
            .technologies
            .iter()
            .map(|t| Technology {
                name: t.name.clone(),
                capital_cost: t.capital_cost_per_mw,
                heat_rate: t.heat_rate,
                fuel: t.fuel,
                fuel_price_fixed: t.fuel_price,
                emission_rate: t.emission_rate,
                variable_om: t.variable_om,
            })
            .collect();
        let blocks = ds
            .blocks
            .iter()
            .map(|b| LoadBlock {
                hours: b.hours,
                base_net_demand: b.net_demand_mw,
            })
            .collect();
        let bounds = ds
            .stage_bounds
            .iter()
            .map(|b| PriceBounds {
                gas: (b.gas[0], b.gas[1]),
                carbon: (b.carbon[0], b.carbon[1]),
            })
            .collect();
        Self::new(
            technologies,
            blocks,
            ds.initial_capacity_mw.clone(),
            bounds,
            ds.years_per_stage,
            ds.growth_rate,
            ds.epoch_weight,
        )
    }

    pub fn bundled() -> Self {
        Self::from_dataset(&Dataset::bundled()).expect("bundled dataset is consistent")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_dataset(&Dataset::load(path)?)
    }

    /// Same instance restricted to its first `stages` stages.
    pub fn truncated(&self, stages: usize) -> Result<Self> {
        if stages == 0 || stages > self.horizon() {
            return Err(Error::contract(format!("cannot keep {stages} of {} stages", self.horizon())));
        }
        Self::new(
            self.technologies.clone(),
            self.blocks.clone(),
            self.initial_capacity.clone(),
            self.stage_bounds[..stages].to_vec(),
            self.years_per_stage,
            self.demand_growth,
            self.epoch_weight,
        )
    }

    pub fn with_epoch_weight(&self, epoch_weight: f64) -> Self {
        let mut out = self.clone();
        out.epoch_weight = epoch_weight;
        out
    }

    pub fn technologies(&self) -> &[Technology] {
        &self.technologies
    }

    pub fn blocks(&self) -> &[LoadBlock] {
        &self.blocks
    }

    pub fn initial_capacity(&self) -> &[f64] {
        &self.initial_capacity
    }

    pub fn stage_bounds(&self, stage: StageIndex) -> PriceBounds {
        self.stage_bounds[stage.index()]
    }

    pub fn epoch_weight(&self) -> f64 {
        self.epoch_weight
    }

    pub fn num_technologies(&self) -> usize {
        self.technologies.len()
    }

    /// Net demand of `block` at `stage`, grown at the annual rate from the
    /// base year (stage 1).
    pub fn demand_at(&self, block: usize, stage: StageIndex) -> f64 {
        let years = self.years_per_stage * (stage.get() - 1) as f64;
        self.blocks[block].base_net_demand * (1.0 + self.demand_growth).powf(years)
    }

    pub fn stage_demands(&self, stage: StageIndex) -> &[BlockDemand] {
        &self.stage_demands[stage.index()]
    }

    pub fn peak_demand(&self, stage: StageIndex) -> f64 {
        self.stage_demands(stage)
            .iter()
            .map(|b| b.demand_mw)
            .fold(0.0, f64::max)
    }

    pub fn marginal_costs(&self, draw: &ExogenousDraw) -> Vec<f64> {
        self.technologies.iter().map(|t| marginal_cost(t, draw)).collect()
    }

    /// Capacity deficit against the stage's peak block.
    pub fn required_new_capacity(&self, stage: StageIndex, capacities: &[f64]) -> f64 {
        let installed: f64 = capacities.iter().sum();
        (self.peak_demand(stage) - installed).max(0.0)
    }

    fn split_state<'a>(&self, state: &'a StateVector) -> Result<(&'a [f64], ExogenousDraw)> {
        let g = self.num_technologies();
        if state.len() != g + 2 {
            return Err(Error::contract(format!(
                "GEP state has {} entries, expected {}",
                state.len(),
                g + 2
            )));
        }
        let v = state.values();
        Ok((&v[..g], ExogenousDraw::new(v[g], v[g + 1])))
    }

    /// Megawatts to build per technology.
    pub fn shares_to_build(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
    ) -> Result<Vec<f64>> {
        let (caps, _) = self.split_state(state)?;
        if action.len() != caps.len() {
            return Err(Error::contract("one share per technology"));
        }
        let required = self.required_new_capacity(stage, caps);
        Ok(action.shares().iter().map(|s| s * required).collect())
    }

    fn post_investment(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
    ) -> Result<(Vec<f64>, Vec<f64>, ExogenousDraw)> {
        let (caps, draw) = self.split_state(state)?;
        let build = self.shares_to_build(stage, state, action)?;
        let after = caps.iter().zip(&build).map(|(z, y)| z + y).collect();
        Ok((after, build, draw))
    }

    /// Merit-order dispatch of `capacities` at `stage` demand and `draw` prices.
    pub fn dispatch_at(
        &self,
        stage: StageIndex,
        capacities: &[f64],
        draw: &ExogenousDraw,
    ) -> Result<DispatchResult> {
        dispatch(capacities, &self.marginal_costs(draw), self.stage_demands(stage))
    }

    /// Investment cost plus epoch-weighted operating cost.
    pub fn stage_cost(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
    ) -> Result<f64> {
        let (after, build, draw) = self.post_investment(stage, state, action)?;
        let mcs = self.marginal_costs(&draw);
        let order = merit_order(&mcs);
        self.cost_with_order(stage, &after, &build, &mcs, &order)
    }

    /// Stage cost with marginal costs and merit order supplied by the caller.
    pub(crate) fn cost_with_order(
        &self,
        stage: StageIndex,
        capacities_after: &[f64],
        build: &[f64],
        marginal_costs: &[f64],
        order: &[usize],
    ) -> Result<f64> {
        let investment: f64 = self
            .technologies
            .iter()
            .zip(build)
            .map(|(t, y)| t.capital_cost * y)
            .sum();
        let operating = dispatch::operating_cost(
            capacities_after,
            marginal_costs,
            order,
            self.stage_demands(stage),
        )?;
        Ok(investment + self.epoch_weight * operating)
    }

    /// Stage-1 prices (the degenerate lower bounds).
    pub fn first_stage_draw(&self) -> ExogenousDraw {
        let b = self.stage_bounds[0];
        ExogenousDraw::new(b.gas.0, b.carbon.0)
    }
}

impl Problem for GepInstance {
    fn horizon(&self) -> usize {
        self.stage_bounds.len()
    }

    fn num_actions(&self) -> usize {
        self.technologies.len()
    }

    fn initial_state(&self) -> StateVector {
        make_state(
            &self.initial_capacity,
            &self.first_stage_draw(),
            self.num_technologies(),
        )
        .expect("initial capacities match technologies")
    }

    fn sample_exogenous<R: Rng + ?Sized>(&self, stage: StageIndex, rng: &mut R) -> ExogenousDraw {
        let b = self.stage_bounds[stage.index()];
        let draw = |(lo, hi): (f64, f64), rng: &mut R| {
            if hi > lo {
                lo + (hi - lo) * rng.random::<f64>()
            } else {
                lo
            }
        };
        let gas = draw(b.gas, rng);
        let carbon = draw(b.carbon, rng);
        ExogenousDraw::new(gas, carbon)
    }

    fn transition(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
        draw: &ExogenousDraw,
    ) -> Result<StateVector> {
        let (after, _, _) = self.post_investment(stage, state, action)?;
        make_state(&after, draw, self.num_technologies())
    }

    fn stage_cost(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
    ) -> Result<f64> {
        GepInstance::stage_cost(self, stage, state, action)
    }

    /// Capacities over `[0, 4 x initial total]`, prices over the last stage's
    /// bounds, shares over `[0, 1]`.
    fn feature_bounds(&self) -> Vec<(f64, f64)> {
        let g = self.num_technologies();
        let installed: f64 = self.initial_capacity.iter().sum();
        let horizon = StageIndex::unchecked(self.horizon());
        let max_new = (self.peak_demand(horizon) - installed).max(1.0);
        let last = self.stage_bounds[self.stage_bounds.len() - 1];
        // Capacity only grows, by at most the final peak deficit in total.
        let mut b: Vec<(f64, f64)> = self.initial_capacity.iter().map(|&z| (z, z + max_new)).collect();
        b.push(last.gas);
        b.push(last.carbon);
        b.extend(std::iter::repeat_n((0.0, 1.0), g));
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(t: usize) -> StageIndex {
        StageIndex::new(t, 3).unwrap()
    }

    fn tech(fuel: Fuel, heat: f64, fixed: f64, em: f64, vom: f64, capex: f64) -> Technology {
        Technology {
            name: "t".into(),
            capital_cost: capex,
            heat_rate: heat,
            fuel,
            fuel_price_fixed: fixed,
            emission_rate: em,
            variable_om: vom,
        }
    }

    fn one_block_instance(base: f64) -> GepInstance {
        GepInstance::new(
            vec![tech(Fuel::Gas, 7.0, 0.0, 0.4, 3.0, 10.0), tech(Fuel::Coal, 9.0, 2.0, 1.0, 4.0, 20.0)],
            vec![LoadBlock {
                hours: 8760.0,
                base_net_demand: base,
            }],
            vec![0.0, 0.0],
            vec![
                PriceBounds { gas: (3.2, 3.2), carbon: (50.0, 50.0) },
                PriceBounds { gas: (3.0, 7.0), carbon: (0.0, 100.0) },
                PriceBounds { gas: (3.0, 11.0), carbon: (100.0, 300.0) },
            ],
            20.0,
            0.02,
            20.0,
        )
        .unwrap()
    }

    #[test]
    fn demand_growth_by_stage() {
        let inst = one_block_instance(1000.0);
        assert_eq!(inst.demand_at(0, st(1)), 1000.0);
        assert!((inst.demand_at(0, st(2)) - 1485.947).abs() < 1e-3);
        assert!((inst.demand_at(0, st(3)) - 2208.040).abs() < 1e-3);
    }

    #[test]
    fn marginal_cost_cases() {
        let d = ExogenousDraw::new(3.2, 50.0);
        assert_eq!(marginal_cost(&tech(Fuel::Coal, 0.0, 5.0, 0.0, 7.0, 0.0), &d), 7.0);
        let gas = tech(Fuel::Gas, 7.0, 0.0, 0.4, 3.0, 0.0);
        assert!((marginal_cost(&gas, &d) - 45.4).abs() < 1e-12);
        let coal = tech(Fuel::Coal, 9.0, 2.0, 1.0, 4.0, 0.0);
        assert_eq!(
            marginal_cost(&coal, &ExogenousDraw::new(3.0, 50.0)),
            marginal_cost(&coal, &ExogenousDraw::new(11.0, 50.0))
        );
    }

    #[test]
    fn required_capacity_cases() {
        let inst = one_block_instance(30000.0);
        assert_eq!(inst.required_new_capacity(st(1), &[9760.0, 12260.0 + 9260.0 + 8260.0]), 0.0);
        let inst = one_block_instance(500.0);
        assert_eq!(inst.required_new_capacity(st(1), &[0.0, 0.0]), 500.0);
    }

    #[test]
    fn bundled_table_values() {
        let inst = GepInstance::bundled();
        assert_eq!(inst.horizon(), 3);
        let s0 = inst.initial_state();
        assert_eq!(s0.values(), &[9760.0, 12260.0, 9260.0, 8260.0, 3.2, 50.0]);
        assert!(inst.required_new_capacity(st(1), inst.initial_capacity()) > 0.0);
    }

    #[test]
    fn shares_to_build_and_transition() {
        let inst = GepInstance::bundled();
        let g4 = |v: [f64; 4]| ActionShares::new(v.to_vec()).unwrap();
        // Deficit 3000 MW at stage 1.
        let caps = [0.0, 0.0, 0.0, inst.peak_demand(st(1)) - 3000.0];
        let s = make_state(&caps, &ExogenousDraw::new(3.2, 50.0), 4).unwrap();
        let third = 1.0 / 3.0;
        let y = inst
            .shares_to_build(st(1), &s, &ActionShares::new(vec![third, 0.0, third, 1.0 - 2.0 * third]).unwrap())
            .unwrap();
        for (got, want) in y.iter().zip([1000.0, 0.0, 1000.0, 1000.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        let y = inst.shares_to_build(st(1), &s, &g4([0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(y[..3], [0.0, 0.0, 0.0]);
        assert!((y[3] - 3000.0).abs() < 1e-9);

        let big = make_state(&[1e6, 0.0, 0.0, 0.0], &ExogenousDraw::new(3.2, 50.0), 4).unwrap();
        let y = inst.shares_to_build(st(1), &big, &g4([0.25; 4])).unwrap();
        assert_eq!(y, vec![0.0; 4]);
        let next = inst
            .transition(st(1), &big, &g4([0.25; 4]), &ExogenousDraw::new(5.0, 70.0))
            .unwrap();
        assert_eq!(next.values(), &[1e6, 0.0, 0.0, 0.0, 5.0, 70.0]);
    }

    #[test]
    fn transition_adds_build() {
        let inst = one_block_instance(1000.0 + 10.0);
        // Peak 1010 at stage 1, installed 10: deficit 1000 split as 1/4 each.
        let s = make_state(&[1.0, 9.0], &ExogenousDraw::new(3.2, 50.0), 2).unwrap();
        let next = inst
            .transition(st(1), &s, &ActionShares::new(vec![0.5, 0.5]).unwrap(), &ExogenousDraw::new(4.0, 10.0))
            .unwrap();
        assert_eq!(next.values(), &[501.0, 509.0, 4.0, 10.0]);
    }

    #[test]
    fn stage_cost_two_tech_two_block_by_hand() {
        // Gas: capex 100/MW, mc = 2*3 + 0.5*10 + 1 = 12.
        // Coal: capex 300/MW, mc = 1*4 + 1*10 + 0 = 14.
        let inst = GepInstance::new(
            vec![tech(Fuel::Gas, 2.0, 0.0, 0.5, 1.0, 100.0), tech(Fuel::Coal, 1.0, 4.0, 1.0, 0.0, 300.0)],
            vec![
                LoadBlock { hours: 10.0, base_net_demand: 150.0 },
                LoadBlock { hours: 20.0, base_net_demand: 60.0 },
            ],
            vec![50.0, 50.0],
            vec![PriceBounds { gas: (3.0, 3.0), carbon: (10.0, 10.0) }],
            20.0,
            0.02,
            2.0,
        )
        .unwrap();
        let s = make_state(&[50.0, 50.0], &ExogenousDraw::new(3.0, 10.0), 2).unwrap();
        // Deficit 50 MW; shares (0.4, 0.6) -> build (20, 30); capacities (70, 80).
        let a = ActionShares::new(vec![0.4, 0.6]).unwrap();
        let invest = 100.0 * 20.0 + 300.0 * 30.0;
        // Block 1 (150 MW, 10 h): gas 70 @ 12, coal 80 @ 14.
        // Block 2 (60 MW, 20 h): gas 60 @ 12.
        let op = (70.0 * 12.0 + 80.0 * 14.0) * 10.0 + 60.0 * 12.0 * 20.0;
        let got = inst.stage_cost(st(1), &s, &a).unwrap();
        assert!((got - (invest + 2.0 * op)).abs() < 1e-6, "{got}");
    }

    #[test]
    fn stage_cost_null_and_no_investment() {
        let inst = GepInstance::bundled();
        let caps = [1e6, 0.0, 0.0, 0.0];
        let s = make_state(&caps, &ExogenousDraw::new(3.2, 50.0), 4).unwrap();
        let a = ActionShares::new(vec![0.25; 4]).unwrap();
        let op = inst.dispatch_at(st(1), &caps, &ExogenousDraw::new(3.2, 50.0)).unwrap().operating_cost;
        let c = inst.stage_cost(st(1), &s, &a).unwrap();
        assert!((c - inst.epoch_weight() * op).abs() <= 1e-6 * c);

        let zero = GepInstance::new(
            vec![tech(Fuel::Gas, 1.0, 0.0, 1.0, 1.0, 5.0), tech(Fuel::Coal, 1.0, 1.0, 1.0, 1.0, 5.0)],
            vec![LoadBlock { hours: 8760.0, base_net_demand: 1e-300 }],
            vec![1.0, 1.0],
            vec![PriceBounds { gas: (1.0, 1.0), carbon: (1.0, 1.0) }],
            20.0,
            0.0,
            20.0,
        )
        .unwrap();
        let s = make_state(&[1.0, 1.0], &ExogenousDraw::new(1.0, 1.0), 2).unwrap();
        let c = zero.stage_cost(st(1), &s, &ActionShares::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert!(c < 1e-290);
    }

    #[test]
    fn sampled_prices_within_bounds() {
        use rand::SeedableRng;
        let inst = GepInstance::bundled();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for t in 1..=3 {
            let b = inst.stage_bounds(st(t));
            for _ in 0..500 {
                let d = inst.sample_exogenous(st(t), &mut rng);
                assert!(b.gas.0 <= d.gas_price && d.gas_price <= b.gas.1);
                assert!(b.carbon.0 <= d.carbon_price && d.carbon_price <= b.carbon.1);
            }
        }
        let d = inst.sample_exogenous(st(1), &mut rng);
        assert_eq!((d.gas_price, d.carbon_price), (3.2, 50.0));
    }
}
