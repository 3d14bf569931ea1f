//! Forward/backward Q-learning driver with pluggable action samplers.
//!
//! Every iteration runs a forward pass that draws `M` state-action samples per
//! stage, then a backward pass from the last stage to the first that applies a
//! temporal-difference batch update. The bootstrap term for stage `t` uses the
//! approximation of stage `t + 1` that was just updated in the same pass, at
//! the successor state built from the forward pass's own price draw.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{argmin_action, ArgminParams, FeatureSpec, QApprox};
use crate::error::{Error, Result};
use crate::mdp::{ActionShares, Policy, Problem, SampleRecord, StageIndex, StateVector};
use crate::samplers::{
    epsilon_at, epsilon_greedy_action, qis_sample_action, EpsilonSchedule, FeatureCache, QisBounds,
    SampleArchive,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerKind {
    #[serde(rename = "qis")]
    Qis,
    #[serde(rename = "qis-re")]
    QisRe,
    #[serde(rename = "eps-greedy")]
    EpsGreedy,
    #[serde(rename = "eps-decay")]
    EpsDecay,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Qis => "qis",
            SamplerKind::QisRe => "qis-re",
            SamplerKind::EpsGreedy => "eps-greedy",
            SamplerKind::EpsDecay => "eps-decay",
        }
    }

    fn keeps_bounds(self) -> bool {
        matches!(self, SamplerKind::Qis | SamplerKind::QisRe)
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "qis" => Ok(SamplerKind::Qis),
            "qis-re" => Ok(SamplerKind::QisRe),
            "eps-greedy" => Ok(SamplerKind::EpsGreedy),
            "eps-decay" => Ok(SamplerKind::EpsDecay),
            other => Err(format!(
                "unknown sampler {other:?}; expected qis, qis-re, eps-greedy or eps-decay"
            )),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sampler: SamplerKind,
    /// Exploration probability for `eps-greedy`.
    pub epsilon: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Bounds reevaluation period for `qis-re`.
    pub reeval_every: usize,
    pub iterations: usize,
    pub samples: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub seed: u64,
    pub argmin: ArgminParams,
    /// Starting `(q_min, q_max)` for every stage.
    pub initial_bounds: (f64, f64),
    /// Verify after each backward pass that the bounds bracket the archive.
    pub check_invariants: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sampler: SamplerKind::Qis,
            epsilon: 0.5,
            epsilon_initial: 0.7,
            epsilon_final: 0.2,
            reeval_every: 20,
            iterations: 900,
            samples: 10,
            lambda: 0.1,
            gamma: 1.0,
            seed: 1,
            argmin: ArgminParams::default(),
            initial_bounds: (0.0, 1.0),
            check_invariants: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contract(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.reeval_every == 0 {
            return bad("reeval_every must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda {} outside (0, 1]", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.initial_bounds.0 > self.initial_bounds.1 {
            return bad("initial q_min above q_max".into());
        }
        if self.sampler == SamplerKind::EpsDecay {
            self.schedule()?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        EpsilonSchedule::new(self.epsilon_initial, self.epsilon_final, self.iterations)
    }
}

/// Wall-clock split of a run: action sampling, bounds reevaluation, rest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub sampling_secs: f64,
    pub evaluation_secs: f64,
    pub other_secs: f64,
}

impl Timing {
    pub fn total(&self) -> f64 {
        self.sampling_secs + self.evaluation_secs + self.other_secs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Minimum of the stage-1 approximation at the initial state, after the
    /// backward pass.
    pub stage1_optimal_q: f64,
    pub q_min_1: f64,
    pub q_max_1: f64,
    pub cumulative_proposals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sampler: SamplerKind,
    pub iterations: Vec<IterationRecord>,
    pub final_bounds: Vec<QisBounds>,
    /// Proposals drawn per stage over the whole run.
    pub proposals_per_stage: Vec<u64>,
    pub timing: Timing,
}

impl RunReport {
    /// Stage-1 optimal values min-max scaled to `[0, 1]` over the run.
    pub fn normalized_stage1_trace(&self) -> Vec<f64> {
        let raw: Vec<f64> = self.iterations.iter().map(|r| r.stage1_optimal_q).collect();
        normalize_trace(&raw)
    }
}

pub fn normalize_trace(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Mean of `|x[k] - x[k-1]|`; 0 for traces shorter than two.
pub fn mean_abs_successive_diff(trace: &[f64]) -> f64 {
    if trace.len() < 2 {
        return 0.0;
    }
    let total: f64 = trace.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    total / (trace.len() - 1) as f64
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub approximations: Vec<QApprox>,
    pub archive: SampleArchive,
    pub report: RunReport,
}

impl RunOutcome {
    pub fn policy(&self, argmin: ArgminParams) -> GreedyPolicy {
        extract_policy(self.approximations.clone(), argmin)
    }
}

/// Trains one approximation per stage on `problem`.
pub fn run<P: Problem>(problem: &P, config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let horizon = problem.horizon();
    if horizon == 0 {
        return Err(Error::contract("problem horizon must be at least 1"));
    }
    let g = problem.num_actions();
    let s0 = problem.initial_state();
    let spec = FeatureSpec::new(s0.len(), g, problem.feature_bounds())?;
    let stages: Vec<StageIndex> = (1..=horizon).map(StageIndex::unchecked).collect();
    let mut qs: Vec<QApprox> = stages.iter().map(|&t| QApprox::zero(t, spec.clone())).collect();
    let (b_lo, b_hi) = config.initial_bounds;
    let mut bounds: Vec<QisBounds> = stages
        .iter()
        .map(|&t| QisBounds::new(t, b_lo, b_hi))
        .collect::<Result<_>>()?;
    let schedule = match config.sampler {
        SamplerKind::EpsDecay => Some(config.schedule()?),
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut archive = SampleArchive::new(horizon);
    let mut cache = FeatureCache::new(horizon, spec.feature_count());
    let keeps_bounds = config.sampler.keeps_bounds();
    let m_count = config.samples;
    let mut sampling = Duration::ZERO;
    let mut evaluation = Duration::ZERO;
    let started = Instant::now();
    let mut proposals = vec![0u64; horizon];
    let mut records = Vec::with_capacity(config.iterations);

    let mut states: Vec<Vec<StateVector>> = vec![Vec::with_capacity(m_count); horizon];
    let mut actions: Vec<Vec<ActionShares>> = vec![Vec::with_capacity(m_count); horizon];
    let mut costs: Vec<Vec<f64>> = vec![Vec::with_capacity(m_count); horizon];

    for k in 1..=config.iterations {
        let epsilon = match schedule {
            Some(ref s) => epsilon_at(s, k - 1),
            None => config.epsilon,
        };

        // Forward pass.
        for ti in 0..horizon {
            let t = stages[ti];
            states[ti].clear();
            actions[ti].clear();
            costs[ti].clear();
            if ti == 0 {
                states[0].extend(std::iter::repeat_n(s0.clone(), m_count));
            } else {
                for m in 0..m_count {
                    let draw = problem.sample_exogenous(t, &mut rng);
                    let next = problem
                        .transition(stages[ti - 1], &states[ti - 1][m], &actions[ti - 1][m], &draw)
                        .map_err(|e| e.at_iteration(k))?;
                    states[ti].push(next);
                }
            }

            let t0 = Instant::now();
            for m in 0..m_count {
                let state = &states[ti][m];
                let action = match config.sampler {
                    SamplerKind::Qis | SamplerKind::QisRe => {
                        let (a, b, tried) = qis_sample_action(&qs[ti], state, &bounds[ti], &mut rng)
                            .map_err(|e| e.at_iteration(k))?;
                        bounds[ti] = b;
                        proposals[ti] += tried as u64;
                        a
                    }
                    SamplerKind::EpsGreedy | SamplerKind::EpsDecay => {
                        let (a, _) =
                            epsilon_greedy_action(&qs[ti], state, epsilon, &config.argmin, &mut rng)
                                .map_err(|e| e.at_iteration(k))?;
                        proposals[ti] += 1;
                        a
                    }
                };
                actions[ti].push(action);
            }
            sampling += t0.elapsed();

            for m in 0..m_count {
                let r = problem
                    .stage_cost(t, &states[ti][m], &actions[ti][m])
                    .map_err(|e| e.at_iteration(k))?;
                if !r.is_finite() {
                    return Err(Error::NonFiniteTarget {
                        iteration: k,
                        stage: t.get(),
                    });
                }
                costs[ti].push(r);
                if keeps_bounds {
                    cache.push(t, &spec.features(&states[ti][m], &actions[ti][m])?)?;
                }
                archive.push(SampleRecord {
                    stage: t,
                    state: states[ti][m].clone(),
                    action: actions[ti][m].clone(),
                    reward: r,
                    iteration: k,
                });
            }
        }

        // Backward pass.
        for ti in (0..horizon).rev() {
            let t = stages[ti];
            let mut targets = Vec::with_capacity(m_count);
            for m in 0..m_count {
                let mut target = costs[ti][m];
                if ti + 1 < horizon {
                    let (_, next_min) = argmin_action(&qs[ti + 1], &states[ti + 1][m], &config.argmin)
                        .map_err(|e| e.at_iteration(k))?;
                    target += config.gamma * next_min;
                }
                if !target.is_finite() {
                    return Err(Error::NonFiniteTarget {
                        iteration: k,
                        stage: t.get(),
                    });
                }
                targets.push(target);
            }
            let batch: Vec<(&StateVector, &ActionShares, f64)> = (0..m_count)
                .map(|m| (&states[ti][m], &actions[ti][m], targets[m]))
                .collect();
            qs[ti] = qs[ti]
                .td_batch_update(&batch, config.lambda)
                .map_err(|e| e.at_iteration(k))?;

            let reevaluate = match config.sampler {
                SamplerKind::Qis => true,
                SamplerKind::QisRe => k % config.reeval_every == 0,
                _ => false,
            };
            if reevaluate {
                let t0 = Instant::now();
                bounds[ti] = cache.bounds(&qs[ti], t, &bounds[ti]).map_err(|e| e.at_iteration(k))?;
                evaluation += t0.elapsed();
            }
            if config.check_invariants && keeps_bounds && reevaluate {
                for r in archive.stage(t) {
                    let v = qs[ti].evaluate(&r.state, &r.action)?;
                    if !bounds[ti].contains(v) {
                        return Err(Error::contract(format!(
                            "iteration {k}, stage {t}: archived value {v} outside bounds [{}, {}]",
                            bounds[ti].q_min, bounds[ti].q_max
                        )));
                    }
                }
            }
        }

        let (_, v1) = argmin_action(&qs[0], &s0, &config.argmin).map_err(|e| e.at_iteration(k))?;
        records.push(IterationRecord {
            iteration: k,
            stage1_optimal_q: v1,
            q_min_1: bounds[0].q_min,
            q_max_1: bounds[0].q_max,
            cumulative_proposals: proposals.iter().sum(),
        });
    }

    let total = started.elapsed();
    let other = total.saturating_sub(sampling + evaluation);
    let report = RunReport {
        sampler: config.sampler,
        iterations: records,
        final_bounds: bounds,
        proposals_per_stage: proposals,
        timing: Timing {
            sampling_secs: sampling.as_secs_f64(),
            evaluation_secs: evaluation.as_secs_f64(),
            other_secs: other.as_secs_f64(),
        },
    };
    Ok(RunOutcome {
        approximations: qs,
        archive,
        report,
    })
}

/// Greedy decision rule on trained approximations.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    approximations: Vec<QApprox>,
    argmin: ArgminParams,
}

impl GreedyPolicy {
    pub fn approximations(&self) -> &[QApprox] {
        &self.approximations
    }
}

impl Policy for GreedyPolicy {
    fn act(&self, stage: StageIndex, state: &StateVector) -> Result<ActionShares> {
        let q = self.approximations.get(stage.index()).ok_or_else(|| {
            Error::contract(format!("no approximation for stage {stage}"))
        })?;
        Ok(argmin_action(q, state, &self.argmin)?.0)
    }
}

pub fn extract_policy(approximations: Vec<QApprox>, argmin: ArgminParams) -> GreedyPolicy {
    GreedyPolicy {
        approximations,
        argmin,
    }
}
