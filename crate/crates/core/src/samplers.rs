//! Action sampling strategies: importance-sampled accept-reject (QIS), its
//! bounds reevaluation, and the epsilon-greedy baselines.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::approx::{argmin_surface, ArgminParams, QApprox};
use crate::error::{Error, Result};
use crate::mdp::{clamp_to_simplex, ActionShares, SampleRecord, StageIndex, StateVector};

/// Proposals tried before `qis_sample_action` gives up on a stage.
pub const PROPOSAL_BUDGET: usize = 1_000_000;

/// Running extremes of the approximate value at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QisBounds {
    pub stage: StageIndex,
    pub q_min: f64,
    pub q_max: f64,
}

impl QisBounds {
    pub fn new(stage: StageIndex, q_min: f64, q_max: f64) -> Result<Self> {
        if !(q_min <= q_max) {
            return Err(Error::contract(format!("q_min {q_min} above q_max {q_max}")));
        }
        Ok(QisBounds { stage, q_min, q_max })
    }

    /// Widens the bounds to include `value`.
    pub fn extend(&mut self, value: f64) {
        if value > self.q_max {
            self.q_max = value;
        }
        if value < self.q_min {
            self.q_min = value;
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.q_min <= value && value <= self.q_max
    }
}

/// Append-only store of accepted samples, one list per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleArchive {
    stages: Vec<Vec<SampleRecord>>,
}

impl SampleArchive {
    pub fn new(horizon: usize) -> Self {
        SampleArchive {
            stages: vec![Vec::new(); horizon],
        }
    }

    pub fn push(&mut self, record: SampleRecord) {
        let i = record.stage.index();
        if i >= self.stages.len() {
            self.stages.resize_with(i + 1, Vec::new);
        }
        self.stages[i].push(record);
    }

    pub fn stage(&self, stage: StageIndex) -> &[SampleRecord] {
        self.stages.get(stage.index()).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &SampleRecord> {
        self.stages.iter().flatten()
    }
}

/// Feature vectors of archived samples, one flat table per stage, so bounds
/// reevaluation needs only dot products.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureCache {
    width: usize,
    stages: Vec<Vec<f64>>,
}

impl FeatureCache {
    pub fn new(horizon: usize, width: usize) -> Self {
        FeatureCache {
            width,
            stages: vec![Vec::new(); horizon],
        }
    }

    pub fn push(&mut self, stage: StageIndex, phi: &[f64]) -> Result<()> {
        if phi.len() != self.width {
            return Err(Error::contract(format!("{} features, cache holds {}", phi.len(), self.width)));
        }
        let table = self
            .stages
            .get_mut(stage.index())
            .ok_or_else(|| Error::contract(format!("stage {stage} beyond the cache horizon")))?;
        table.extend_from_slice(phi);
        Ok(())
    }

    pub fn len(&self, stage: StageIndex) -> usize {
        self.stages.get(stage.index()).map_or(0, |t| t.len() / self.width.max(1))
    }

    /// Same result as [`reevaluate_bounds`] over the samples whose features
    /// were pushed.
    pub fn bounds(&self, q: &QApprox, stage: StageIndex, prior: &QisBounds) -> Result<QisBounds> {
        let table = self.stages.get(stage.index()).map_or(&[][..], |t| t.as_slice());
        if table.is_empty() {
            return Ok(*prior);
        }
        let mut q_min = f64::INFINITY;
        let mut q_max = f64::NEG_INFINITY;
        for phi in table.chunks_exact(self.width) {
            let v = q.evaluate_features(phi)?;
            q_min = q_min.min(v);
            q_max = q_max.max(v);
        }
        if !(q_min.is_finite() && q_max.is_finite()) {
            return Err(Error::contract(format!("stage {stage}: non-finite approximate value")));
        }
        QisBounds::new(stage, q_min, q_max)
    }
}

/// Uniform draw from the `(g - 1)`-simplex via normalized unit exponentials.
pub fn propose_uniform_shares<R: Rng + ?Sized>(g: usize, rng: &mut R) -> Result<ActionShares> {
    if g < 2 {
        return Err(Error::contract(format!("need at least 2 shares, got {g}")));
    }
    let mut w: Vec<f64> = (0..g).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    clamp_to_simplex(&mut w);
    Ok(ActionShares::from_simplex_unchecked(w))
}

/// Acceptance probability `(q_max - q) / (q_max - q_min)`; 1 when the bounds
/// coincide.
pub fn qratio(q_value: f64, bounds: &QisBounds) -> f64 {
    let span = bounds.q_max - bounds.q_min;
    if span <= 0.0 {
        return 1.0;
    }
    ((bounds.q_max - q_value) / span).clamp(0.0, 1.0)
}

/// Accept-reject loop against an arbitrary value function.
///
/// Each proposal first widens `bounds` (accepted or not), then is accepted
/// when `qratio > U`, `U ~ Uniform(0, 1)`.
pub fn accept_reject<R, F>(
    g: usize,
    bounds: &mut QisBounds,
    rng: &mut R,
    mut value: F,
) -> Result<(ActionShares, usize)>
where
    R: Rng + ?Sized,
    F: FnMut(&ActionShares) -> f64,
{
    for tried in 1..=PROPOSAL_BUDGET {
        let xi = propose_uniform_shares(g, rng)?;
        let v = value(&xi);
        if !v.is_finite() {
            return Err(Error::contract(format!(
                "stage {}: non-finite approximate value",
                bounds.stage
            )));
        }
        bounds.extend(v);
        let u: f64 = rng.random();
        if qratio(v, bounds) > u {
            return Ok((xi, tried));
        }
    }
    Err(Error::ProposalBudget {
        stage: bounds.stage.get(),
        proposals: PROPOSAL_BUDGET,
    })
}

/// Draws one action for `state` by importance-sampled accept-reject against
/// the approximation `q`. Returns the action, the widened bounds and the
/// number of proposals consumed.
pub fn qis_sample_action<R: Rng + ?Sized>(
    q: &QApprox,
    state: &StateVector,
    bounds: &QisBounds,
    rng: &mut R,
) -> Result<(ActionShares, QisBounds, usize)> {
    let surface = q.restrict(state)?;
    let mut b = *bounds;
    let (a, tried) = accept_reject(surface.dim(), &mut b, rng, |xi| surface.value(xi.shares()))?;
    Ok((a, b, tried))
}

/// Recomputes the bounds from every archived sample of `stage` under the
/// current coefficients. Keeps `prior` when the stage has no samples yet.
pub fn reevaluate_bounds(
    q: &QApprox,
    archive: &SampleArchive,
    stage: StageIndex,
    prior: &QisBounds,
) -> Result<QisBounds> {
    let records = archive.stage(stage);
    if records.is_empty() {
        return Ok(*prior);
    }
    let mut q_min = f64::INFINITY;
    let mut q_max = f64::NEG_INFINITY;
    for r in records {
        let v = q.evaluate(&r.state, &r.action)?;
        q_min = q_min.min(v);
        q_max = q_max.max(v);
    }
    QisBounds::new(stage, q_min, q_max)
}

/// Which branch an epsilon-greedy draw took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Explore,
    Exploit,
}

/// Uniform exploration with probability `epsilon`, otherwise the minimizer of
/// the approximation.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(
    q: &QApprox,
    state: &StateVector,
    epsilon: f64,
    argmin: &ArgminParams,
    rng: &mut R,
) -> Result<(ActionShares, Choice)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::contract(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let u: f64 = rng.random();
    if u < epsilon {
        Ok((propose_uniform_shares(q.spec().action_dim(), rng)?, Choice::Explore))
    } else {
        let surface = q.restrict(state)?;
        let (a, _) = argmin_surface(&surface, argmin)?;
        Ok((a, Choice::Exploit))
    }
}

/// Geometric decay from `initial` to `final_value` over `iterations` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub iterations: usize,
}

impl EpsilonSchedule {
    pub fn new(initial: f64, final_value: f64, iterations: usize) -> Result<Self> {
        if !(initial > 0.0 && initial <= 1.0) {
            return Err(Error::contract(format!("initial epsilon {initial} outside (0, 1]")));
        }
        if !(final_value >= 0.0 && final_value <= initial) {
            return Err(Error::contract(format!(
                "final epsilon {final_value} outside [0, {initial}]"
            )));
        }
        if iterations == 0 {
            return Err(Error::contract("epsilon schedule needs at least one iteration"));
        }
        Ok(EpsilonSchedule {
            initial,
            final_value,
            iterations,
        })
    }

    /// Per-iteration decay factor `(final / initial)^(1 / K)`.
    pub fn delta(&self) -> f64 {
        (self.final_value / self.initial).powf(1.0 / self.iterations as f64)
    }
}

/// `initial * delta^k`, evaluated in closed form.
pub fn epsilon_at(schedule: &EpsilonSchedule, k: usize) -> f64 {
    let k = k.min(schedule.iterations);
    if k == schedule.iterations {
        return schedule.final_value;
    }
    let ratio = schedule.final_value / schedule.initial;
    schedule.initial * ratio.powf(k as f64 / schedule.iterations as f64)
}
