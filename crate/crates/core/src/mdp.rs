//! Finite-horizon MDP contract with continuous simplex actions.
//!
//! States are position-based: the first block of entries holds installed
//! capacities, followed by the exogenous prices. Actions are shares of the
//! stage's required new capacity; the mapping to megawatts belongs to the
//! concrete problem.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the simplex sum of an action.
pub const SHARE_SUM_TOL: f64 = 1e-9;

/// One-based stage index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StageIndex(usize);

impl StageIndex {
    pub fn new(t: usize, horizon: usize) -> Result<Self> {
        if horizon == 0 || t == 0 || t > horizon {
            return Err(Error::contract(format!(
                "stage {t} outside 1..={horizon}"
            )));
        }
        Ok(StageIndex(t))
    }

    /// Stage `t` without a horizon check. Callers iterate `1..=T` themselves.
    pub(crate) fn unchecked(t: usize) -> Self {
        debug_assert!(t >= 1);
        StageIndex(t)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, for indexing per-stage vectors.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl std::fmt::Display for StageIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("state entry {i} is not finite")));
        }
        Ok(StateVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The leading `n` entries (installed capacities for GEP states).
    pub fn capacities(&self, n: usize) -> &[f64] {
        &self.0[..n]
    }
}

/// Shares of required new capacity, one per technology, on the unit simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionShares(Vec<f64>);

impl ActionShares {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::contract("action has no shares"));
        }
        for (i, &s) in shares.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::contract(format!("share {i} = {s} outside [0, 1]")));
            }
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOL {
            return Err(Error::contract(format!("shares sum to {sum}, not 1")));
        }
        Ok(ActionShares(shares))
    }

    /// Builds shares from a non-negative vector by normalizing its sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::contract("weights must be non-negative with a positive sum"));
        }
        let mut shares: Vec<f64> = weights.iter().map(|w| w / total).collect();
        clamp_to_simplex(&mut shares);
        Ok(ActionShares(shares))
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest coordinate-wise distance to another action.
    pub fn max_abs_diff(&self, other: &ActionShares) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Trusted constructor for values produced by lattice or transfer moves.
    pub(crate) fn from_simplex_unchecked(shares: Vec<f64>) -> Self {
        ActionShares(shares)
    }
}

/// Pushes rounding residue from normalization into the largest share so the
/// sum is 1 to within one ulp.
pub(crate) fn clamp_to_simplex(shares: &mut [f64]) {
    for s in shares.iter_mut() {
        *s = s.clamp(0.0, 1.0);
    }
    let sum: f64 = shares.iter().sum();
    if let Some((imax, _)) = shares
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    {
        shares[imax] = (shares[imax] + (1.0 - sum)).clamp(0.0, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExogenousDraw {
    pub gas_price: f64,
    pub carbon_price: f64,
}

impl ExogenousDraw {
    pub fn new(gas_price: f64, carbon_price: f64) -> Self {
        ExogenousDraw {
            gas_price,
            carbon_price,
        }
    }
}

/// One accepted state-action sample from a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub stage: StageIndex,
    pub state: StateVector,
    pub action: ActionShares,
    pub reward: f64,
    pub iteration: usize,
}

/// Concatenates installed capacities and the exogenous prices into a state,
/// capacities first.
pub fn make_state(
    capacities: &[f64],
    draw: &ExogenousDraw,
    num_technologies: usize,
) -> Result<StateVector> {
    if capacities.len() != num_technologies {
        return Err(Error::contract(format!(
            "expected {num_technologies} capacities, got {}",
            capacities.len()
        )));
    }
    let mut values = Vec::with_capacity(num_technologies + 2);
    values.extend_from_slice(capacities);
    values.push(draw.gas_price);
    values.push(draw.carbon_price);
    StateVector::new(values)
}

/// Finite-horizon problem with a deterministic transition driven by
/// exogenous draws.
///
/// Implementations are read-only after construction so that stage costs of
/// independent samples can be evaluated from several threads.
pub trait Problem: Sync {
    /// Number of stages `T`.
    fn horizon(&self) -> usize;

    /// Number of action shares `G`.
    fn num_actions(&self) -> usize;

    fn initial_state(&self) -> StateVector;

    fn sample_exogenous<R: Rng + ?Sized>(&self, stage: StageIndex, rng: &mut R) -> ExogenousDraw;

    /// State at `stage + 1` after taking `action` at `stage` and observing
    /// `draw` for the next stage.
    fn transition(
        &self,
        stage: StageIndex,
        state: &StateVector,
        action: &ActionShares,
        draw: &ExogenousDraw,
    ) -> Result<StateVector>;

    fn stage_cost(&self, stage: StageIndex, state: &StateVector, action: &ActionShares)
        -> Result<f64>;

    /// Normalization bounds for the concatenated (state, action) inputs.
    fn feature_bounds(&self) -> Vec<(f64, f64)>;
}

/// Decision rule mapping a stage and state to an action.
pub trait Policy: Sync {
    fn act(&self, stage: StageIndex, state: &StateVector) -> Result<ActionShares>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_state_concatenates_capacities_then_prices() {
        let s = make_state(
            &[9760.0, 12260.0, 9260.0, 8260.0],
            &ExogenousDraw::new(3.2, 50.0),
            4,
        )
        .unwrap();
        assert_eq!(s.values(), &[9760.0, 12260.0, 9260.0, 8260.0, 3.2, 50.0]);

        let s = make_state(&[0.0; 4], &ExogenousDraw::new(3.0, 0.0), 4).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 0.0, 0.0, 3.0, 0.0]);

        let s = make_state(&[1.0, 2.0, 3.0, 4.0], &ExogenousDraw::new(7.0, 100.0), 4).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0, 7.0, 100.0]);
    }

    #[test]
    fn make_state_rejects_dimension_mismatch() {
        let err = make_state(&[1.0, 2.0], &ExogenousDraw::new(3.0, 0.0), 4).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn state_rejects_non_finite() {
        assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn action_shares_validation() {
        assert!(ActionShares::new(vec![0.5, 0.5]).is_ok());
        assert!(ActionShares::new(vec![0.6, 0.5]).is_err());
        assert!(ActionShares::new(vec![-0.1, 1.1]).is_err());
        assert!(ActionShares::new(vec![]).is_err());
        let a = ActionShares::from_weights(&[1.0, 1.0, 1.0]).unwrap();
        let sum: f64 = a.shares().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn stage_index_bounds() {
        assert!(StageIndex::new(0, 3).is_err());
        assert!(StageIndex::new(4, 3).is_err());
        assert!(StageIndex::new(1, 0).is_err());
        let t = StageIndex::new(3, 3).unwrap();
        assert_eq!((t.get(), t.index()), (3, 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn make_state_is_injective(
                a in proptest::collection::vec(0.0f64..1e5, 4),
                b in proptest::collection::vec(0.0f64..1e5, 4),
                pa in (0.0f64..20.0, 0.0f64..400.0),
                pb in (0.0f64..20.0, 0.0f64..400.0),
            ) {
                let sa = make_state(&a, &ExogenousDraw::new(pa.0, pa.1), 4).unwrap();
                let sb = make_state(&b, &ExogenousDraw::new(pb.0, pb.1), 4).unwrap();
                let same_inputs = a == b && pa == pb;
                prop_assert_eq!(sa == sb, same_inputs);
            }
        }
    }
}
