//! JSON dataset schema for generation-expansion instances.
//!
//! Field-level checks run inside deserialization so that serde_json reports
//! the line and column of the offending value.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// The bundled synthetic dataset.
pub const BUNDLED: &str = include_str!("../../data/gep_default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Gas,
    Coal,
    Uranium,
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(serde::de::Error::custom(format!(
            "expected a finite non-negative number, got {v}"
        )));
    }
    Ok(v)
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(serde::de::Error::custom(format!(
            "expected a finite positive number, got {v}"
        )));
    }
    Ok(v)
}

fn non_negative_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v = Vec::<f64>::deserialize(d)?;
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(serde::de::Error::custom(format!(
            "capacities must be finite and non-negative, got {x}"
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyRecord {
    pub name: String,
    #[serde(deserialize_with = "non_negative")]
    pub capital_cost_per_mw: f64,
    #[serde(deserialize_with = "non_negative")]
    pub heat_rate: f64,
    pub fuel: Fuel,
    /// $/MMBtu for coal and uranium; ignored for gas, whose price is exogenous.
    #[serde(default, deserialize_with = "non_negative")]
    pub fuel_price: f64,
    #[serde(deserialize_with = "non_negative")]
    pub emission_rate: f64,
    #[serde(deserialize_with = "non_negative")]
    pub variable_om: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    #[serde(deserialize_with = "positive")]
    pub hours: f64,
    #[serde(deserialize_with = "positive")]
    pub net_demand_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct StageBoundsRecord {
    pub gas: [f64; 2],
    pub carbon: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    gas: [f64; 2],
    carbon: [f64; 2],
}

impl TryFrom<RawBounds> for StageBoundsRecord {
    type Error = String;

    fn try_from(raw: RawBounds) -> std::result::Result<Self, String> {
        for (name, [lo, hi]) in [("gas", raw.gas), ("carbon", raw.carbon)] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(format!("{name} bounds [{lo}, {hi}] must satisfy 0 <= lo <= hi"));
            }
        }
        Ok(StageBoundsRecord {
            gas: raw.gas,
            carbon: raw.carbon,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub technologies: Vec<TechnologyRecord>,
    pub blocks: Vec<BlockRecord>,
    #[serde(deserialize_with = "non_negative_vec")]
    pub initial_capacity_mw: Vec<f64>,
    pub stage_bounds: Vec<StageBoundsRecord>,
    #[serde(deserialize_with = "non_negative")]
    pub years_per_stage: f64,
    #[serde(deserialize_with = "non_negative")]
    pub growth_rate: f64,
    #[serde(deserialize_with = "non_negative")]
    pub epoch_weight: f64,
}

impl Dataset {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text).map_err(|e| Error::Dataset {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        ds.check_shape(text, origin)?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED, "<bundled>").expect("bundled dataset is valid")
    }

    /// Cross-field checks. Errors point at the line of the key involved.
    fn check_shape(&self, text: &str, origin: &str) -> Result<()> {
        let fail = |key: &str, message: String| {
            let (line, column) = locate_key(text, key);
            Err(Error::Dataset {
                path: origin.to_string(),
                line,
                column,
                message,
            })
        };
        if self.technologies.is_empty() {
            return fail("technologies", "at least one technology is required".into());
        }
        if self.initial_capacity_mw.len() != self.technologies.len() {
            return fail(
                "initial_capacity_mw",
                format!(
                    "{} capacities for {} technologies",
                    self.initial_capacity_mw.len(),
                    self.technologies.len()
                ),
            );
        }
        if self.blocks.is_empty() {
            return fail("blocks", "at least one load block is required".into());
        }
        let hours: f64 = self.blocks.iter().map(|b| b.hours).sum();
        if (hours - 8760.0).abs() > 1e-6 {
            return fail("blocks", format!("block hours sum to {hours}, expected 8760"));
        }
        if self.stage_bounds.is_empty() {
            return fail("stage_bounds", "at least one stage is required".into());
        }
        let first = &self.stage_bounds[0];
        if first.gas[0] != first.gas[1] || first.carbon[0] != first.carbon[1] {
            return fail(
                "stage_bounds",
                "first-stage price bounds must be degenerate (lo == hi)".into(),
            );
        }
        Ok(())
    }
}

/// One-based (line, column) of the first `"key"` occurrence, or (1, 1).
fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(pos) => {
            let before = &text[..pos];
            let line = before.matches('\n').count() + 1;
            let column = pos - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (1, 1),
    }
}
