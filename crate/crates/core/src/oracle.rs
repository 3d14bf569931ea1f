//! Exact benchmark on a discretized scenario tree.
//!
//! Prices are independent across stages, so every node of stage `t` has the
//! same children. Installed capacity depends only on the sequence of share
//! decisions (the required new capacity does not depend on prices), which
//! lets the backward induction recurse over decision histories and average
//! over each stage's nodes.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gep::{merit_order, GepInstance};
use crate::lattice::{divisions_for_step, SimplexLattice};
use crate::mdp::{make_state, ActionShares, ExogenousDraw, Policy, Problem, StageIndex, StateVector};

/// Largest policy table the oracle will build.
pub const TABLE_BUDGET: u128 = 20_000_000;
/// Largest number of stage-cost evaluations the oracle will attempt.
pub const EVAL_BUDGET: u128 = 5_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub draw: ExogenousDraw,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub grid_step: f64,
    /// Nodes per stage; stage `t + 1`'s nodes are the children of every node
    /// at stage `t`.
    pub stages: Vec<Vec<TreeNode>>,
}

impl ScenarioTree {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn nodes(&self, stage: StageIndex) -> &[TreeNode] {
        &self.stages[stage.index()]
    }

    pub fn path_count(&self) -> u128 {
        self.stages.iter().map(|s| s.len() as u128).product()
    }
}

fn grid_points((lo, hi): (f64, f64), n: u32) -> Vec<f64> {
    if hi > lo {
        (0..=n).map(|i| lo + (hi - lo) * (i as f64 / n as f64)).collect()
    } else {
        vec![lo]
    }
}

/// Discretizes each stage's price box on a normalized grid of `grid_step`,
/// with equal weight on every node of a stage.
pub fn build_tree(instance: &GepInstance, grid_step: f64) -> Result<ScenarioTree> {
    let n = divisions_for_step(grid_step)?;
    let stages = (1..=instance.horizon())
        .map(|t| {
            let b = instance.stage_bounds(StageIndex::unchecked(t));
            let gas = grid_points(b.gas, n);
            let carbon = grid_points(b.carbon, n);
            let p = 1.0 / (gas.len() * carbon.len()) as f64;
            gas.iter()
                .flat_map(|&g| {
                    carbon.iter().map(move |&c| TreeNode {
                        draw: ExogenousDraw::new(g, c),
                        probability: p,
                    })
                })
                .collect()
        })
        .collect();
    Ok(ScenarioTree { grid_step, stages })
}

type StateKey = (usize, Vec<u64>);

fn state_key(stage: StageIndex, state: &StateVector) -> StateKey {
    (stage.get(), state.values().iter().map(|v| v.to_bits()).collect())
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub expected_cost: f64,
    pub first_stage_shares: ActionShares,
    pub shares_step: f64,
    /// Expected cost of each first-stage lattice action at the root node,
    /// acting optimally afterwards.
    pub first_stage_values: Vec<(ActionShares, f64)>,
    /// Optimal lattice action for every reachable (stage, state).
    policy: HashMap<StateKey, ActionShares>,
}

impl OracleSolution {
    pub fn policy_len(&self) -> usize {
        self.policy.len()
    }
}

impl Policy for OracleSolution {
    fn act(&self, stage: StageIndex, state: &StateVector) -> Result<ActionShares> {
        self.policy
            .get(&state_key(stage, state))
            .cloned()
            .ok_or_else(|| Error::contract(format!("state not in the oracle policy at stage {stage}")))
    }
}

struct Solver<'a> {
    instance: &'a GepInstance,
    tree: &'a ScenarioTree,
    lattice: Vec<ActionShares>,
    /// Per stage, per node: marginal costs and merit order.
    prices: Vec<Vec<(Vec<f64>, Vec<usize>)>>,
}

type Entries = Vec<(StateKey, usize)>;

impl Solver<'_> {
    /// Expected optimal cost-to-go from stage `ti` (zero-based) with
    /// `caps` installed before that stage's investment.
    fn solve(&self, ti: usize, caps: &[f64], sink: &mut Entries) -> Result<f64> {
        let stage = StageIndex::unchecked(ti + 1);
        let horizon = self.tree.horizon();
        let required = self.instance.required_new_capacity(stage, caps);

        let mut after = Vec::with_capacity(self.lattice.len());
        let mut builds = Vec::with_capacity(self.lattice.len());
        let mut future = Vec::with_capacity(self.lattice.len());
        for a in &self.lattice {
            let y: Vec<f64> = a.shares().iter().map(|s| s * required).collect();
            let z: Vec<f64> = caps.iter().zip(&y).map(|(z, y)| z + y).collect();
            let w = if ti + 1 < horizon {
                self.solve(ti + 1, &z, sink)?
            } else {
                0.0
            };
            after.push(z);
            builds.push(y);
            future.push(w);
        }

        let g = self.instance.num_technologies();
        let mut expected = 0.0;
        for (node, (mcs, order)) in self.tree.stages[ti].iter().zip(&self.prices[ti]) {
            let mut best = f64::INFINITY;
            let mut best_idx = 0;
            for i in 0..self.lattice.len() {
                let c = self
                    .instance
                    .cost_with_order(stage, &after[i], &builds[i], mcs, order)?
                    + future[i];
                if c < best {
                    best = c;
                    best_idx = i;
                }
            }
            let state = make_state(caps, &node.draw, g)?;
            sink.push((state_key(stage, &state), best_idx));
            expected += node.probability * best;
        }
        Ok(expected)
    }
}

/// Exact optimum over policies whose every decision lies on the shares
/// lattice of step `shares_step`.
pub fn backward_induction(
    instance: &GepInstance,
    tree: &ScenarioTree,
    shares_step: f64,
) -> Result<OracleSolution> {
    if tree.horizon() != instance.horizon() {
        return Err(Error::contract("tree and instance horizons differ"));
    }
    let lat = SimplexLattice::with_step(instance.num_technologies(), shares_step)?;
    let l = lat.len();
    let mut histories: u128 = 1;
    let mut table: u128 = 0;
    let mut evals: u128 = 0;
    for stage in &tree.stages {
        let n = stage.len() as u128;
        table = table.saturating_add(histories.saturating_mul(n));
        histories = histories.saturating_mul(l);
        evals = evals.saturating_add(histories.saturating_mul(n));
    }
    if table > TABLE_BUDGET {
        return Err(Error::Budget {
            what: "policy-table entries",
            required: table,
            budget: TABLE_BUDGET,
        });
    }
    if evals > EVAL_BUDGET {
        return Err(Error::Budget {
            what: "stage-cost evaluations",
            required: evals,
            budget: EVAL_BUDGET,
        });
    }

    let lattice: Vec<ActionShares> = lat
        .compositions()
        .map(|c| ActionShares::from_simplex_unchecked(lat.to_shares(&c)))
        .collect();
    let prices = tree
        .stages
        .iter()
        .map(|nodes| {
            nodes
                .iter()
                .map(|n| {
                    let mcs = instance.marginal_costs(&n.draw);
                    let order = merit_order(&mcs);
                    (mcs, order)
                })
                .collect()
        })
        .collect();
    let solver = Solver {
        instance,
        tree,
        lattice,
        prices,
    };

    let caps0 = instance.initial_capacity().to_vec();
    let mut sink = Entries::new();
    let mut root_values = Vec::new();
    let expected_cost = if tree.horizon() > 1 {
        // Fan the first decision's subtrees out across threads, then finish
        // stage 1 with the precomputed continuation values.
        let stage1 = StageIndex::unchecked(1);
        let required = instance.required_new_capacity(stage1, &caps0);
        let subtrees: Vec<(f64, Entries)> = solver
            .lattice
            .par_iter()
            .map(|a| {
                let z: Vec<f64> = caps0
                    .iter()
                    .zip(a.shares())
                    .map(|(z, s)| z + s * required)
                    .collect();
                let mut local = Entries::new();
                let w = solver.solve(1, &z, &mut local)?;
                Ok((w, local))
            })
            .collect::<Result<_>>()?;
        let mut future = Vec::with_capacity(subtrees.len());
        for (w, local) in subtrees {
            future.push(w);
            sink.extend(local);
        }
        let mut expected = 0.0;
        for (ni, (node, (mcs, order))) in tree.stages[0].iter().zip(&solver.prices[0]).enumerate() {
            let mut best = f64::INFINITY;
            let mut best_idx = 0;
            for (i, a) in solver.lattice.iter().enumerate() {
                let y: Vec<f64> = a.shares().iter().map(|s| s * required).collect();
                let z: Vec<f64> = caps0.iter().zip(&y).map(|(z, y)| z + y).collect();
                let c = instance.cost_with_order(stage1, &z, &y, mcs, order)? + future[i];
                if ni == 0 {
                    root_values.push((a.clone(), c));
                }
                if c < best {
                    best = c;
                    best_idx = i;
                }
            }
            let state = make_state(&caps0, &node.draw, instance.num_technologies())?;
            sink.push((state_key(stage1, &state), best_idx));
            expected += node.probability * best;
        }
        expected
    } else {
        let stage1 = StageIndex::unchecked(1);
        let required = instance.required_new_capacity(stage1, &caps0);
        let (mcs, order) = &solver.prices[0][0];
        for a in &solver.lattice {
            let y: Vec<f64> = a.shares().iter().map(|s| s * required).collect();
            let z: Vec<f64> = caps0.iter().zip(&y).map(|(z, y)| z + y).collect();
            root_values.push((a.clone(), instance.cost_with_order(stage1, &z, &y, mcs, order)?));
        }
        solver.solve(0, &caps0, &mut sink)?
    };

    let s0 = make_state(&caps0, &tree.stages[0][0].draw, instance.num_technologies())?;
    let mut policy = HashMap::with_capacity(sink.len());
    for (key, idx) in sink {
        policy.insert(key, solver.lattice[idx].clone());
    }
    let first_stage_shares = policy
        .get(&state_key(StageIndex::unchecked(1), &s0))
        .cloned()
        .ok_or_else(|| Error::contract("missing first-stage decision"))?;
    Ok(OracleSolution {
        expected_cost,
        first_stage_shares,
        shares_step,
        first_stage_values: root_values,
        policy,
    })
}

/// Expected total cost of `policy` over every root-to-leaf path of `tree`.
pub fn simulate_policy<P: Policy + ?Sized>(
    instance: &GepInstance,
    tree: &ScenarioTree,
    policy: &P,
) -> Result<f64> {
    if tree.horizon() != instance.horizon() {
        return Err(Error::contract("tree and instance horizons differ"));
    }
    simulate_from(instance, tree, policy, 0, instance.initial_capacity())
}

fn simulate_from<P: Policy + ?Sized>(
    instance: &GepInstance,
    tree: &ScenarioTree,
    policy: &P,
    ti: usize,
    caps: &[f64],
) -> Result<f64> {
    let stage = StageIndex::unchecked(ti + 1);
    let g = instance.num_technologies();
    let mut expected = 0.0;
    for node in &tree.stages[ti] {
        let state = make_state(caps, &node.draw, g)?;
        let action = policy.act(stage, &state)?;
        let cost = instance.stage_cost(stage, &state, &action)?;
        let future = if ti + 1 < tree.horizon() {
            let next = instance.transition(stage, &state, &action, &node.draw)?;
            simulate_from(instance, tree, policy, ti + 1, next.capacities(g))?
        } else {
            0.0
        };
        expected += node.probability * (cost + future);
    }
    Ok(expected)
}

/// `100 * (policy_cost - oracle_cost) / oracle_cost`.
pub fn percent_gap(policy_cost: f64, oracle_cost: f64) -> Result<f64> {
    if !(oracle_cost > 0.0) {
        return Err(Error::contract(format!("oracle cost {oracle_cost} must be positive")));
    }
    Ok(100.0 * (policy_cost - oracle_cost) / oracle_cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sizes() {
        let inst = GepInstance::bundled();
        let tree = build_tree(&inst, 0.1).unwrap();
        assert_eq!(tree.stages[0].len(), 1);
        assert_eq!(tree.stages[1].len(), 121);
        assert_eq!(tree.stages[2].len(), 121);
        let tree = build_tree(&inst, 0.5).unwrap();
        assert_eq!(tree.stages[1].len(), 9);
        assert_eq!(tree.stages[2].len(), 9);
        let root = tree.stages[0][0];
        assert_eq!((root.draw.gas_price, root.draw.carbon_price, root.probability), (3.2, 50.0, 1.0));
    }

    #[test]
    fn grid_nodes_stay_in_bounds() {
        let inst = GepInstance::bundled();
        let tree = build_tree(&inst, 0.1).unwrap();
        for (ti, nodes) in tree.stages.iter().enumerate() {
            let b = inst.stage_bounds(StageIndex::unchecked(ti + 1));
            let p: f64 = nodes.iter().map(|n| n.probability).sum();
            assert!((p - 1.0).abs() < 1e-12);
            for n in nodes {
                assert!(b.gas.0 <= n.draw.gas_price && n.draw.gas_price <= b.gas.1);
                assert!(b.carbon.0 <= n.draw.carbon_price && n.draw.carbon_price <= b.carbon.1);
            }
        }
    }

    #[test]
    fn percent_gap_values() {
        assert_eq!(percent_gap(5.0, 5.0).unwrap(), 0.0);
        let g = percent_gap(2.565e11, 2.564e11).unwrap();
        assert!((g - 0.0390016).abs() < 1e-6, "{g}");
        assert!(percent_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn budget_guard_trips_on_fine_lattices() {
        let inst = GepInstance::bundled();
        let tree = build_tree(&inst, 0.1).unwrap();
        match backward_induction(&inst, &tree, 0.05) {
            Err(Error::Budget { .. }) => {}
            other => panic!("expected budget error, got {:?}", other.map(|s| s.expected_cost)),
        }
    }

    #[test]
    fn single_stage_equals_direct_minimization() {
        let inst = GepInstance::bundled().truncated(1).unwrap();
        let tree = build_tree(&inst, 0.5).unwrap();
        let sol = backward_induction(&inst, &tree, 0.25).unwrap();
        let s0 = inst.initial_state();
        let lat = SimplexLattice::with_step(4, 0.25).unwrap();
        let direct = lat
            .points()
            .into_iter()
            .map(|p| {
                inst.stage_cost(StageIndex::unchecked(1), &s0, &ActionShares::new(p).unwrap())
                    .unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sol.expected_cost, direct);
    }
}
