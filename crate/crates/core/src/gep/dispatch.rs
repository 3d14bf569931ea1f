//! Merit-order economic dispatch over load blocks.

use crate::error::{Error, Result};

/// Relative slack allowed when total capacity covers a block only up to
/// rounding.
pub const DEMAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDemand {
    pub hours: f64,
    pub demand_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    /// MW by block, then technology.
    pub generation: Vec<Vec<f64>>,
    /// $ per year.
    pub operating_cost: f64,
}

/// Technology indices in ascending marginal cost, ties by index.
pub fn merit_order(marginal_costs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..marginal_costs.len()).collect();
    order.sort_by(|&a, &b| marginal_costs[a].total_cmp(&marginal_costs[b]).then(a.cmp(&b)));
    order
}

fn check_cover(block: usize, demand: f64, total: f64) -> Result<()> {
    if total < demand * (1.0 - DEMAND_TOL) {
        return Err(Error::Infeasible {
            block,
            demand,
            capacity: total,
        });
    }
    Ok(())
}

/// Fills every block's demand from the cheapest technologies first.
pub fn dispatch(
    capacities: &[f64],
    marginal_costs: &[f64],
    blocks: &[BlockDemand],
) -> Result<DispatchResult> {
    if capacities.len() != marginal_costs.len() {
        return Err(Error::contract("capacity and marginal-cost vectors differ in length"));
    }
    let order = merit_order(marginal_costs);
    let total: f64 = capacities.iter().sum();
    let mut generation = Vec::with_capacity(blocks.len());
    let mut cost = 0.0;
    for (l, b) in blocks.iter().enumerate() {
        check_cover(l, b.demand_mw, total)?;
        let mut x = vec![0.0; capacities.len()];
        let mut remaining = b.demand_mw;
        for &g in &order {
            if remaining <= 0.0 {
                break;
            }
            let out = capacities[g].min(remaining);
            x[g] = out;
            remaining -= out;
            cost += marginal_costs[g] * out * b.hours;
        }
        generation.push(x);
    }
    Ok(DispatchResult {
        generation,
        operating_cost: cost,
    })
}

/// Operating cost only, without materializing the generation table.
pub(crate) fn operating_cost(
    capacities: &[f64],
    marginal_costs: &[f64],
    order: &[usize],
    blocks: &[BlockDemand],
) -> Result<f64> {
    let total: f64 = capacities.iter().sum();
    let mut cost = 0.0;
    for (l, b) in blocks.iter().enumerate() {
        check_cover(l, b.demand_mw, total)?;
        let mut remaining = b.demand_mw;
        let mut block_cost = 0.0;
        for &g in order {
            if remaining <= 0.0 {
                break;
            }
            let out = capacities[g].min(remaining);
            remaining -= out;
            block_cost += marginal_costs[g] * out;
        }
        cost += block_cost * b.hours;
    }
    Ok(cost)
}
