//! Regular lattices on the unit simplex.
//!
//! A lattice of resolution `1/n` over `G` parts holds every composition of
//! `n` into `G` non-negative integer parts. Compositions are visited in
//! descending lexicographic order, starting from `(n, 0, ..., 0)`; this is the
//! canonical tie-breaking order used by the minimizers.

use crate::error::{Error, Result};

/// Converts a step such as `0.25` into its number of divisions, rejecting
/// steps that are not the reciprocal of an integer.
pub fn divisions_for_step(step: f64) -> Result<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::contract(format!("lattice step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "lattice step {step} is not 1/n for an integer n"
        )));
    }
    Ok(n as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexLattice {
    parts: usize,
    divisions: u32,
}

impl SimplexLattice {
    pub fn new(parts: usize, divisions: u32) -> Result<Self> {
        if parts == 0 || divisions == 0 {
            return Err(Error::contract("lattice needs at least one part and one division"));
        }
        Ok(SimplexLattice { parts, divisions })
    }

    pub fn with_step(parts: usize, step: f64) -> Result<Self> {
        Self::new(parts, divisions_for_step(step)?)
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn divisions(&self) -> u32 {
        self.divisions
    }

    /// Number of lattice points, `C(n + G - 1, G - 1)`.
    pub fn len(&self) -> u128 {
        let n = self.divisions as u128;
        let k = self.parts as u128 - 1;
        (1..=k).fold(1u128, |acc, i| acc * (n + i) / i)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn compositions(&self) -> Compositions {
        let mut first = vec![0u32; self.parts];
        first[0] = self.divisions;
        Compositions {
            next: Some(first),
        }
    }

    /// Lattice points as share vectors, in canonical order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.compositions().map(|c| self.to_shares(&c)).collect()
    }

    pub fn to_shares(&self, composition: &[u32]) -> Vec<f64> {
        let n = self.divisions as f64;
        composition.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Iterator over compositions in descending lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    next: Option<Vec<u32>>,
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let g = current.len();
        if g > 1 {
            let mut c = current.clone();
            let last = c[g - 1];
            c[g - 1] = 0;
            if let Some(i) = (0..g - 1).rev().find(|&i| c[i] > 0) {
                c[i] -= 1;
                c[i + 1] = last + 1;
                self.next = Some(c);
            }
        }
        Some(current)
    }
}
