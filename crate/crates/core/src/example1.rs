//! One-dimensional accept-reject demonstration.
//!
//! Minimizes a scalar function on an interval by sampling it with QIS. The
//! scalar `x` is carried as a two-part share vector `(u, 1 - u)` with
//! `x = lo + u (hi - lo)`, so uniform simplex proposals are uniform in `x`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{FeatureSpec, QApprox};
use crate::error::{Error, Result};
use crate::mdp::{ActionShares, SampleRecord, StageIndex, StateVector};
use crate::samplers::{accept_reject, reevaluate_bounds, QisBounds, SampleArchive};

/// `25 + (x - 5)^2`, minimized at `x = 5` with value 25.
pub fn reference_objective(x: f64) -> f64 {
    25.0 + (x - 5.0) * (x - 5.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValueSource {
    /// Sample against the objective itself.
    TrueFunction,
    /// Sample against a quadratic approximation trained between iterations.
    Learned { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Config {
    pub samples: usize,
    pub iterations: usize,
    pub seed: u64,
    pub domain: (f64, f64),
    pub initial_bounds: (f64, f64),
    pub source: ValueSource,
}

impl Default for Example1Config {
    fn default() -> Self {
        Example1Config {
            samples: 1000,
            iterations: 5,
            seed: 1,
            domain: (0.0, 10.0),
            initial_bounds: (35.0, 40.0),
            source: ValueSource::TrueFunction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example1Result {
    /// Accepted `x` values, one vector per iteration.
    pub accepted: Vec<Vec<f64>>,
    pub proposals: Vec<usize>,
}

impl Example1Result {
    pub fn first(&self) -> &[f64] {
        &self.accepted[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.accepted[self.accepted.len() - 1]
    }
}

/// Runs the demonstration against `objective`.
pub fn run_example1<F: Fn(f64) -> f64>(config: &Example1Config, objective: F) -> Result<Example1Result> {
    if config.samples == 0 || config.iterations == 0 {
        return Err(Error::contract("need at least one sample and one iteration"));
    }
    let (lo, hi) = config.domain;
    if !(hi > lo) {
        return Err(Error::contract("empty domain"));
    }
    let to_x = |a: &ActionShares| lo + a.shares()[0] * (hi - lo);
    let stage = StageIndex::unchecked(1);
    let empty = StateVector::new(Vec::new())?;
    let spec = FeatureSpec::new(0, 2, vec![(0.0, 1.0); 2])?;
    let mut q = QApprox::zero(stage, spec);
    let mut bounds = QisBounds::new(stage, config.initial_bounds.0, config.initial_bounds.1)?;
    let mut archive = SampleArchive::new(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut accepted = Vec::with_capacity(config.iterations);
    let mut proposals = Vec::with_capacity(config.iterations);

    for k in 1..=config.iterations {
        let mut xs = Vec::with_capacity(config.samples);
        let mut actions = Vec::with_capacity(config.samples);
        let mut tried_total = 0;
        let surface = q.restrict(&empty)?;
        for _ in 0..config.samples {
            let (a, tried) = match config.source {
                ValueSource::TrueFunction => accept_reject(2, &mut bounds, &mut rng, |xi| objective(to_x(xi)))?,
                ValueSource::Learned { .. } => {
                    accept_reject(2, &mut bounds, &mut rng, |xi| surface.value(xi.shares()))?
                }
            };
            tried_total += tried;
            xs.push(to_x(&a));
            actions.push(a);
        }
        for (a, &x) in actions.iter().zip(&xs) {
            archive.push(SampleRecord {
                stage,
                state: empty.clone(),
                action: a.clone(),
                reward: objective(x),
                iteration: k,
            });
        }
        match config.source {
            ValueSource::Learned { lambda } => {
                let batch: Vec<(&StateVector, &ActionShares, f64)> =
                    actions.iter().zip(&xs).map(|(a, &x)| (&empty, a, objective(x))).collect();
                q = q.td_batch_update(&batch, lambda)?;
                bounds = reevaluate_bounds(&q, &archive, stage, &bounds)?;
            }
            ValueSource::TrueFunction => {
                let values = archive.stage(stage).iter().map(|r| r.reward);
                let q_min = values.clone().fold(f64::INFINITY, f64::min);
                let q_max = values.fold(f64::NEG_INFINITY, f64::max);
                bounds = QisBounds::new(stage, q_min, q_max)?;
            }
        }
        accepted.push(xs);
        proposals.push(tried_total);
    }
    Ok(Example1Result { accepted, proposals })
}

/// Counts of `xs` in `bins` equal-width bins over `[lo, hi]`; the top edge
/// falls in the last bin.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 || !(hi > lo) {
        return counts;
    }
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        if x < lo || x > hi {
            continue;
        }
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Fraction of `xs` within `radius` of `center`.
pub fn mass_near(xs: &[f64], center: f64, radius: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().filter(|x| (*x - center).abs() <= radius).count() as f64 / xs.len() as f64
}
