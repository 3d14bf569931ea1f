use adpqis_core::gep::{Fuel, LoadBlock, PriceBounds, Technology};
use adpqis_core::{
    backward_induction, build_tree, percent_gap, simulate_policy, ActionShares, ExogenousDraw, GepInstance, Policy,
    Problem, Result, StageIndex, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every share vector of `g` parts in multiples of `1 / n`.
fn lattice(g: usize, n: u32) -> Vec<ActionShares> {
    fn go(g: usize, left: u32, n: u32, prefix: &mut Vec<u32>, out: &mut Vec<ActionShares>) {
        if prefix.len() == g - 1 {
            prefix.push(left);
            out.push(ActionShares::new(prefix.iter().map(|&k| k as f64 / n as f64).collect()).unwrap());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            go(g, left - k, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(g, n, n, &mut Vec::new(), &mut out);
    out
}

fn grid(lo: f64, hi: f64, n: u32) -> Vec<f64> {
    if hi > lo {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else {
        vec![lo]
    }
}

fn stage_draws(inst: &GepInstance, t: usize, n: u32) -> Vec<ExogenousDraw> {
    let b = inst.stage_bounds(StageIndex::new(t, inst.horizon()).unwrap());
    let mut out = Vec::new();
    for g in grid(b.gas.0, b.gas.1, n) {
        for c in grid(b.carbon.0, b.carbon.1, n) {
            out.push(ExogenousDraw::new(g, c));
        }
    }
    out
}

fn two_stage() -> GepInstance {
    GepInstance::bundled().truncated(2).unwrap()
}

/// Expected cost of a two-stage plan: `first` then `second[node]`.
fn plan_cost(inst: &GepInstance, draws: &[ExogenousDraw], first: &ActionShares, second: &[&ActionShares]) -> f64 {
    let (s1, s2) = (StageIndex::new(1, 2).unwrap(), StageIndex::new(2, 2).unwrap());
    let x1 = inst.initial_state();
    let mut total = inst.stage_cost(s1, &x1, first).unwrap();
    for (d, a2) in draws.iter().zip(second) {
        let x2 = inst.transition(s1, &x1, first, d).unwrap();
        total += inst.stage_cost(s2, &x2, a2).unwrap() / draws.len() as f64;
    }
    total
}

#[test]
fn dp_equals_enumeration_on_bundled_two_stage() {
    let inst = two_stage();
    let tree = build_tree(&inst, 0.5).unwrap();
    assert_eq!(tree.stages[1].len(), 9);
    let sol = backward_induction(&inst, &tree, 0.5).unwrap();
    let acts = lattice(4, 2);
    assert_eq!(acts.len(), 10);
    let draws = stage_draws(&inst, 2, 2);
    let s1 = StageIndex::new(1, 2).unwrap();
    let s2 = StageIndex::new(2, 2).unwrap();
    let x1 = inst.initial_state();
    let mut best = f64::INFINITY;
    for a1 in &acts {
        let replies: Vec<&ActionShares> = draws
            .iter()
            .map(|d| {
                let x2 = inst.transition(s1, &x1, a1, d).unwrap();
                acts.iter()
                    .min_by(|a, b| {
                        let ca = inst.stage_cost(s2, &x2, a).unwrap();
                        let cb = inst.stage_cost(s2, &x2, b).unwrap();
                        ca.total_cmp(&cb)
                    })
                    .unwrap()
            })
            .collect();
        best = best.min(plan_cost(&inst, &draws, a1, &replies));
    }
    assert!(
        (sol.expected_cost - best).abs() <= 1e-12 * best,
        "dp {} vs enumeration {best}",
        sol.expected_cost
    );
}

fn tiny() -> GepInstance {
    let tech = |name: &str, fuel, heat, fixed, em, vom, capex| Technology {
        name: name.into(),
        capital_cost: capex,
        heat_rate: heat,
        fuel,
        fuel_price_fixed: fixed,
        emission_rate: em,
        variable_om: vom,
    };
    GepInstance::new(
        vec![
            tech("peaker", Fuel::Gas, 10.0, 0.0, 0.55, 5.0, 1.0e5),
            tech("base", Fuel::Coal, 9.5, 2.0, 0.95, 4.0, 2.5e5),
            tech("clean", Fuel::Uranium, 10.4, 0.7, 0.0, 2.0, 6.0e5),
        ],
        vec![
            LoadBlock { hours: 760.0, base_net_demand: 120.0 },
            LoadBlock { hours: 8000.0, base_net_demand: 70.0 },
        ],
        vec![30.0, 30.0, 20.0],
        vec![
            PriceBounds { gas: (4.0, 4.0), carbon: (20.0, 20.0) },
            PriceBounds { gas: (2.0, 12.0), carbon: (60.0, 60.0) },
        ],
        10.0,
        0.03,
        10.0,
    )
    .unwrap()
}

#[test]
fn dp_equals_every_policy_on_tiny_instance() {
    let inst = tiny();
    let tree = build_tree(&inst, 0.5).unwrap();
    assert_eq!(tree.stages[1].len(), 3);
    let sol = backward_induction(&inst, &tree, 0.5).unwrap();
    let acts = lattice(3, 2);
    let draws = stage_draws(&inst, 2, 2);
    let mut best = f64::INFINITY;
    let mut count = 0;
    for a1 in &acts {
        for i in &acts {
            for j in &acts {
                for k in &acts {
                    best = best.min(plan_cost(&inst, &draws, a1, &[i, j, k]));
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 6 * 6 * 6 * 6);
    assert!((sol.expected_cost - best).abs() <= 1e-12 * best);
}

#[test]
fn simulating_dp_policy_reproduces_value() {
    let inst = GepInstance::bundled();
    let tree = build_tree(&inst, 0.5).unwrap();
    let sol = backward_induction(&inst, &tree, 0.5).unwrap();
    let sim = simulate_policy(&inst, &tree, &sol).unwrap();
    assert!((sim - sol.expected_cost).abs() <= 1e-9 * sol.expected_cost);
}

#[test]
fn tree_probabilities_sum_to_one() {
    let tree = build_tree(&GepInstance::bundled(), 0.1).unwrap();
    for stage in &tree.stages {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for n in stage {
            let y = n.probability - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        assert!((sum - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn refinement_properties() {
    let inst = two_stage();
    let coarse_tree = build_tree(&inst, 0.5).unwrap();
    let fine_tree = build_tree(&inst, 0.25).unwrap();
    assert_eq!(coarse_tree.stages[0], fine_tree.stages[0]);

    let coarse = backward_induction(&inst, &coarse_tree, 0.5).unwrap();
    let fine = backward_induction(&inst, &coarse_tree, 0.25).unwrap();
    assert!(fine.expected_cost <= coarse.expected_cost);
    let finer = backward_induction(&inst, &coarse_tree, 0.125).unwrap();
    assert!(finer.expected_cost <= coarse.expected_cost);
}

/// Lattice policy that picks a random action per (stage, state) visit,
/// fixed by hashing the state.
struct RandomLattice {
    acts: Vec<ActionShares>,
    salt: u64,
}

impl Policy for RandomLattice {
    fn act(&self, stage: StageIndex, state: &StateVector) -> Result<ActionShares> {
        let mut h = self.salt ^ stage.get() as u64;
        for v in state.values() {
            h = h.rotate_left(7) ^ v.to_bits();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        Ok(self.acts[rng.random_range(0..self.acts.len())].clone())
    }
}

#[test]
fn lattice_policies_never_beat_oracle() {
    let inst = GepInstance::bundled();
    let tree = build_tree(&inst, 0.5).unwrap();
    let sol = backward_induction(&inst, &tree, 0.25).unwrap();
    let acts = lattice(4, 4);
    for salt in 0..20 {
        let p = RandomLattice { acts: acts.clone(), salt };
        let cost = simulate_policy(&inst, &tree, &p).unwrap();
        assert!(percent_gap(cost, sol.expected_cost).unwrap() >= -1e-9);
    }
}
