//! Scenario configs customized by a JSON tree merged onto a preset.

use anyhow::{Context, Result};
use leyes_core::scenario::{resolve, ScenarioConfig, ScenarioId, Stage};
use serde_json::Value;

/// Recursively overlays `patch` onto `base`: objects merge key by key,
/// everything else is replaced.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// The preset for `(id, stage)` with `patch` merged on top, validated.
pub fn resolve_with_patch(id: ScenarioId, stage: Stage, patch: Option<Value>) -> Result<ScenarioConfig> {
    let cfg = resolve(id, stage)?;
    let Some(patch) = patch else {
        return Ok(cfg);
    };
    let mut tree = serde_json::to_value(&cfg)?;
    merge_json(&mut tree, patch);
    let merged: ScenarioConfig = serde_json::from_value(tree).context("config override does not fit the preset")?;
    merged.validate()?;
    Ok(merged)
}
