//! Per-stage quadratic-feature linear approximation of the state-action
//! value function.
//!
//! Inputs are the state followed by the action. Each input is normalized to
//! `(x - lower) / (upper - lower)` and clipped to `[-2, 2]`; the feature vector
//! is `[1, x_1..x_d, x_1^2..x_d^2, x_1 x_2, x_1 x_3, ..., x_{d-1} x_d]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{divisions_for_step, SimplexLattice};
use crate::mdp::{clamp_to_simplex, ActionShares, StageIndex, StateVector};

const CLIP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    state_dim: usize,
    action_dim: usize,
    bounds: Vec<(f64, f64)>,
}

impl FeatureSpec {
    /// `bounds` covers the state inputs followed by the action inputs.
    /// An input with `lower == upper` is degenerate and always maps to 0.
    pub fn new(state_dim: usize, action_dim: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != state_dim + action_dim {
            return Err(Error::contract(format!(
                "{} normalization bounds for {} inputs",
                bounds.len(),
                state_dim + action_dim
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::contract(format!("bad bounds ({lo}, {hi}) for input {i}")));
            }
        }
        Ok(FeatureSpec {
            state_dim,
            action_dim,
            bounds,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.action_dim
    }

    pub fn feature_count(&self) -> usize {
        let d = self.input_dim();
        1 + 2 * d + d * (d - 1) / 2
    }

    #[inline]
    fn normalize(&self, i: usize, x: f64) -> f64 {
        let (lo, hi) = self.bounds[i];
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(-CLIP, CLIP)
        } else {
            0.0
        }
    }

    fn check_dims(&self, state: &StateVector, action: &ActionShares) -> Result<()> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(Error::contract(format!(
                "feature spec expects state/action dims {}/{}, got {}/{}",
                self.state_dim,
                self.action_dim,
                state.len(),
                action.len()
            )));
        }
        Ok(())
    }

    fn normalized_inputs(&self, state: &StateVector, action: &ActionShares) -> Vec<f64> {
        state
            .values()
            .iter()
            .chain(action.shares())
            .enumerate()
            .map(|(i, &x)| self.normalize(i, x))
            .collect()
    }

    pub fn features(&self, state: &StateVector, action: &ActionShares) -> Result<Vec<f64>> {
        self.check_dims(state, action)?;
        let x = self.normalized_inputs(state, action);
        Ok(expand(&x))
    }
}

fn expand(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut phi = Vec::with_capacity(1 + 2 * d + d * (d.saturating_sub(1)) / 2);
    phi.push(1.0);
    phi.extend_from_slice(x);
    phi.extend(x.iter().map(|v| v * v));
    for i in 0..d {
        for j in i + 1..d {
            phi.push(x[i] * x[j]);
        }
    }
    phi
}

/// Quadratic basis vector for `(state, action)` under `spec`.
pub fn features(spec: &FeatureSpec, state: &StateVector, action: &ActionShares) -> Result<Vec<f64>> {
    spec.features(state, action)
}

/// Linear approximation `theta . features(s, a)` for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QApprox {
    stage: StageIndex,
    spec: FeatureSpec,
    theta: Vec<f64>,
}

impl QApprox {
    pub fn zero(stage: StageIndex, spec: FeatureSpec) -> Self {
        let theta = vec![0.0; spec.feature_count()];
        QApprox { stage, spec, theta }
    }

    pub fn with_theta(stage: StageIndex, spec: FeatureSpec, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != spec.feature_count() {
            return Err(Error::contract(format!(
                "{} coefficients for {} features",
                theta.len(),
                spec.feature_count()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite coefficient"));
        }
        Ok(QApprox { stage, spec, theta })
    }

    pub fn stage(&self) -> StageIndex {
        self.stage
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn evaluate(&self, state: &StateVector, action: &ActionShares) -> Result<f64> {
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite coefficient"));
        }
        let phi = self.spec.features(state, action)?;
        Ok(dot(&self.theta, &phi))
    }

    /// Value at a precomputed feature vector.
    pub fn evaluate_features(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.theta.len() {
            return Err(Error::contract(format!(
                "{} features for {} coefficients",
                phi.len(),
                self.theta.len()
            )));
        }
        Ok(dot(&self.theta, phi))
    }

    /// Semi-gradient batch step toward `targets`.
    ///
    /// Each sample contributes `(target - q(s, a)) * phi / |phi|^2`; the batch
    /// mean is scaled by `lambda`. A single-sample update therefore moves the
    /// value at that sample to `(1 - lambda) q + lambda target`.
    pub fn td_batch_update(
        &self,
        batch: &[(&StateVector, &ActionShares, f64)],
        lambda: f64,
    ) -> Result<QApprox> {
        if batch.is_empty() {
            return Err(Error::contract("empty update batch"));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::contract(format!("learning rate {lambda} outside (0, 1]")));
        }
        let mut step = vec![0.0; self.theta.len()];
        for &(state, action, target) in batch {
            if !target.is_finite() {
                return Err(Error::contract("non-finite update target"));
            }
            let phi = self.spec.features(state, action)?;
            let norm2 = dot(&phi, &phi);
            if norm2 <= 0.0 {
                return Err(Error::contract("zero feature vector"));
            }
            let scale = (target - dot(&self.theta, &phi)) / norm2;
            for (s, p) in step.iter_mut().zip(&phi) {
                *s += scale * p;
            }
        }
        let w = lambda / batch.len() as f64;
        let theta: Vec<f64> = self
            .theta
            .iter()
            .zip(&step)
            .map(|(t, s)| t + w * s)
            .collect();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("update produced non-finite coefficients"));
        }
        Ok(QApprox {
            stage: self.stage,
            spec: self.spec.clone(),
            theta,
        })
    }

    /// The approximation with the state held fixed: a quadratic in the action.
    pub fn restrict(&self, state: &StateVector) -> Result<ActionSurface> {
        let spec = &self.spec;
        if state.len() != spec.state_dim {
            return Err(Error::contract(format!(
                "state has {} entries, spec expects {}",
                state.len(),
                spec.state_dim
            )));
        }
        let ds = spec.state_dim;
        let g = spec.action_dim;
        let d = ds + g;
        let th = &self.theta;
        let lin = |i: usize| th[1 + i];
        let sq = |i: usize| th[1 + d + i];
        let pair = |i: usize, j: usize| th[1 + 2 * d + pair_offset(d, i) + (j - i - 1)];

        let s: Vec<f64> = state
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| spec.normalize(i, x))
            .collect();

        let mut constant = th[0];
        for i in 0..ds {
            constant += lin(i) * s[i] + sq(i) * s[i] * s[i];
            for j in i + 1..ds {
                constant += pair(i, j) * s[i] * s[j];
            }
        }
        let mut linear = vec![0.0; g];
        let mut quad = vec![0.0; g * g];
        for a in 0..g {
            let ia = ds + a;
            linear[a] = lin(ia) + (0..ds).map(|i| pair(i, ia) * s[i]).sum::<f64>();
            quad[a * g + a] = sq(ia);
            for b in a + 1..g {
                quad[a * g + b] = pair(ia, ds + b);
            }
        }

        let mut scale = Vec::with_capacity(g);
        let mut offset = Vec::with_capacity(g);
        for a in 0..g {
            let (lo, hi) = spec.bounds[ds + a];
            if hi > lo {
                let w = 1.0 / (hi - lo);
                // Shares live in [0, 1]; the affine map is exact only if neither
                // end is clipped.
                let (y0, y1) = (-lo * w, (1.0 - lo) * w);
                if y0.abs() > CLIP || y1.abs() > CLIP {
                    return Err(Error::contract("action bounds clip the unit interval"));
                }
                scale.push(w);
                offset.push(-lo * w);
            } else {
                scale.push(0.0);
                offset.push(0.0);
            }
        }

        Ok(ActionSurface {
            constant,
            linear,
            quad,
            scale,
            offset,
        })
    }
}

/// Start of the pair block for first index `i` among `d` inputs.
fn pair_offset(d: usize, i: usize) -> usize {
    i * (2 * d - i - 1) / 2
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic in the action block of an approximation whose state is fixed.
#[derive(Debug, Clone)]
pub struct ActionSurface {
    constant: f64,
    linear: Vec<f64>,
    /// Row-major upper triangle including the diagonal.
    quad: Vec<f64>,
    scale: Vec<f64>,
    offset: Vec<f64>,
}

impl ActionSurface {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, shares: &[f64]) -> f64 {
        let g = self.linear.len();
        let mut v = self.constant;
        for a in 0..g {
            let xa = shares[a] * self.scale[a] + self.offset[a];
            let mut row = self.linear[a];
            for b in a..g {
                let xb = shares[b] * self.scale[b] + self.offset[b];
                row += self.quad[a * g + b] * xb;
            }
            v += row * xa;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgminParams {
    pub resolution: f64,
    pub refine_steps: usize,
}

impl Default for ArgminParams {
    fn default() -> Self {
        ArgminParams {
            resolution: 0.05,
            refine_steps: 20,
        }
    }
}

/// Minimizes the approximation over the action simplex for a fixed state.
///
/// Scans the full lattice of the given resolution, then runs `refine_steps`
/// rounds of pairwise mass transfers whose size halves every round. Ties keep
/// the earliest point in canonical lattice order.
pub fn argmin_action(
    q: &QApprox,
    state: &StateVector,
    params: &ArgminParams,
) -> Result<(ActionShares, f64)> {
    let surface = q.restrict(state)?;
    argmin_surface(&surface, params)
}

pub fn argmin_surface(surface: &ActionSurface, params: &ArgminParams) -> Result<(ActionShares, f64)> {
    let n = divisions_for_step(params.resolution)?;
    if n < 2 {
        return Err(Error::contract(format!(
            "argmin resolution {} must be 1/n with n >= 2",
            params.resolution
        )));
    }
    let g = surface.dim();
    let lattice = SimplexLattice::new(g, n)?;
    let inv = 1.0 / n as f64;

    let mut best = vec![0.0; g];
    let mut best_value = f64::INFINITY;
    let mut point = vec![0.0; g];
    for comp in lattice.compositions() {
        for (p, &c) in point.iter_mut().zip(&comp) {
            *p = c as f64 * inv;
        }
        let v = surface.value(&point);
        if v < best_value {
            best_value = v;
            best.copy_from_slice(&point);
        }
    }

    let mut delta = params.resolution / 2.0;
    let mut trial = best.clone();
    for _ in 0..params.refine_steps {
        for i in 0..g {
            for j in 0..g {
                if i == j || best[i] <= 0.0 {
                    continue;
                }
                let step = delta.min(best[i]);
                trial.copy_from_slice(&best);
                trial[i] -= step;
                trial[j] = (trial[j] + step).min(1.0);
                let v = surface.value(&trial);
                if v < best_value {
                    best_value = v;
                    best.copy_from_slice(&trial);
                }
            }
        }
        delta /= 2.0;
    }
    clamp_to_simplex(&mut best);
    Ok((ActionShares::from_simplex_unchecked(best), best_value))
}
