//! Sweep cells, replications and their evaluation against the oracle.

use adpqis_core::qlearn::Timing;
use adpqis_core::{
    backward_induction, build_tree, percent_gap, run, simulate_policy, GepInstance, OracleSolution,
    Policy, Problem, RunConfig, SamplerKind, ScenarioTree, StageIndex,
};
use rayon::prelude::*;

use crate::config::ExperimentSpec;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algorithm: SamplerKind,
    /// `key=value` pairs joined with `;`, or `base`.
    pub parameters: String,
    pub config: RunConfig,
}

fn cell(config: RunConfig, parameters: String) -> Cell {
    Cell {
        algorithm: config.sampler,
        parameters,
        config,
    }
}

/// Cells in a fixed order: samplers, epsilons, decay grid (initial major),
/// iterations, samples, reevaluation periods. The base run alone when no
/// axis is given.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let base = &spec.run;
    let s = &spec.sweep;
    if s.is_empty() {
        return vec![cell(base.clone(), "base".into())];
    }
    let mut out = Vec::new();
    for &sampler in &s.samplers {
        out.push(cell(RunConfig { sampler, ..base.clone() }, "base".into()));
    }
    for &epsilon in &s.epsilons {
        let c = RunConfig {
            sampler: SamplerKind::EpsGreedy,
            epsilon,
            ..base.clone()
        };
        out.push(cell(c, format!("epsilon={epsilon}")));
    }
    for &epsilon_initial in &s.decay_initial {
        for &epsilon_final in &s.decay_final {
            let c = RunConfig {
                sampler: SamplerKind::EpsDecay,
                epsilon_initial,
                epsilon_final,
                ..base.clone()
            };
            out.push(cell(c, format!("epsilon_initial={epsilon_initial};epsilon_final={epsilon_final}")));
        }
    }
    for &iterations in &s.iterations {
        out.push(cell(RunConfig { iterations, ..base.clone() }, format!("iterations={iterations}")));
    }
    for &samples in &s.samples {
        out.push(cell(RunConfig { samples, ..base.clone() }, format!("samples={samples}")));
    }
    for &reeval_every in &s.reeval_every {
        out.push(cell(
            RunConfig { reeval_every, ..base.clone() },
            format!("reeval_every={reeval_every}"),
        ));
    }
    out
}

pub struct Benchmark {
    pub tree: ScenarioTree,
    pub solution: OracleSolution,
}

pub fn solve_oracle(instance: &GepInstance, spec: &ExperimentSpec) -> CliResult<Benchmark> {
    let tree = build_tree(instance, spec.oracle.grid_step)?;
    let solution = backward_induction(instance, &tree, spec.oracle.shares_step)?;
    Ok(Benchmark { tree, solution })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub policy_cost: f64,
    pub percent_gap: f64,
    pub stage1_shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: usize,
    pub algorithm: SamplerKind,
    pub parameters: String,
    pub replication: usize,
    pub seed: u64,
    pub oracle_cost: f64,
    /// Error message when the replication failed.
    pub outcome: Result<Evaluation, String>,
    pub timing: Timing,
}

/// Trains `config` and scores its greedy policy on the benchmark tree.
pub fn evaluate_one(
    instance: &GepInstance,
    bench: &Benchmark,
    config: &RunConfig,
) -> (Result<Evaluation, String>, Timing) {
    let out = match run(instance, config) {
        Ok(out) => out,
        Err(e) => return (Err(e.to_string()), Timing::default()),
    };
    let policy = out.policy(config.argmin);
    let scored = (|| {
        let cost = simulate_policy(instance, &bench.tree, &policy)?;
        let stage1 = policy.act(StageIndex::new(1, instance.horizon())?, &instance.initial_state())?;
        Ok::<_, adpqis_core::Error>(Evaluation {
            policy_cost: cost,
            percent_gap: percent_gap(cost, bench.solution.expected_cost)?,
            stage1_shares: stage1.shares().to_vec(),
        })
    })();
    (scored.map_err(|e| e.to_string()), out.report.timing)
}

/// Every cell times every replication, seeds `base_seed + replication`
/// shared across cells. Rows come back sorted by (cell, replication).
pub fn execute(instance: &GepInstance, bench: &Benchmark, spec: &ExperimentSpec, jobs: Option<usize>) -> CliResult<Vec<SummaryRow>> {
    let cells = cells(spec);
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.replications).map(move |r| (c, r)))
        .collect();
    let base_seed = spec.run.seed;
    let work = || {
        tasks
            .par_iter()
            .map(|&(c, r)| {
                let seed = base_seed.wrapping_add(r as u64);
                let config = RunConfig {
                    seed,
                    ..cells[c].config.clone()
                };
                log::info!("cell {c} ({} {}) replication {r}", cells[c].algorithm, cells[c].parameters);
                let (outcome, timing) = evaluate_one(instance, bench, &config);
                SummaryRow {
                    cell: c,
                    algorithm: cells[c].algorithm,
                    parameters: cells[c].parameters.clone(),
                    replication: r,
                    seed,
                    oracle_cost: bench.solution.expected_cost,
                    outcome,
                    timing,
                }
            })
            .collect::<Vec<_>>()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Invalid(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_axis_cell_count() {
        let mut spec = ExperimentSpec::default();
        spec.sweep.epsilons = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(cells(&spec).len(), 11);
        assert!(cells(&spec).iter().all(|c| c.algorithm == SamplerKind::EpsGreedy));
    }

    #[test]
    fn decay_grid_is_cross_product() {
        let mut spec = ExperimentSpec::default();
        spec.sweep.decay_final = vec![0.0, 0.1, 0.2, 0.3];
        spec.sweep.decay_initial = vec![0.7, 0.8, 0.9, 1.0];
        let cs = cells(&spec);
        assert_eq!(cs.len(), 16);
        assert_eq!(cs[1].parameters, "epsilon_initial=0.7;epsilon_final=0.1");
        assert_eq!(cs[15].config.epsilon_initial, 1.0);
    }

    #[test]
    fn empty_sweep_is_base() {
        let cs = cells(&ExperimentSpec::default());
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].parameters, "base");
        assert_eq!(cs[0].config, RunConfig::default());
    }

    #[test]
    fn mixed_axes_keep_order() {
        let mut spec = ExperimentSpec::default();
        spec.sweep.samplers = vec![SamplerKind::Qis, SamplerKind::QisRe];
        spec.sweep.samples = vec![1, 2];
        spec.sweep.reeval_every = vec![5];
        let p: Vec<String> = cells(&spec).into_iter().map(|c| c.parameters).collect();
        assert_eq!(p, ["base", "base", "samples=1", "samples=2", "reeval_every=5"]);
    }
}
