//! Effective run configuration: defaults, then `--config`, then `--params`,
//! then inline flags.

use std::path::Path;

use anyhow::{anyhow, Context};
use foodchain::scenarios::ExperimentConfig;
use foodchain::{ParamName, ParameterSet};
use serde::{Deserialize, Serialize};

/// Model parameters, any of which may still be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
}

impl PartialParams {
    fn slot(&mut self, name: ParamName) -> &mut Option<f64> {
        match name {
            ParamName::A1 => &mut self.a1,
            ParamName::A2 => &mut self.a2,
            ParamName::D1 => &mut self.d1,
            ParamName::D2 => &mut self.d2,
            ParamName::M1 => &mut self.m1,
            ParamName::M2 => &mut self.m2,
        }
    }

    pub fn get(&self, name: ParamName) -> Option<f64> {
        match name {
            ParamName::A1 => self.a1,
            ParamName::A2 => self.a2,
            ParamName::D1 => self.d1,
            ParamName::D2 => self.d2,
            ParamName::M1 => self.m1,
            ParamName::M2 => self.m2,
        }
    }

    pub fn overlay(&mut self, other: &PartialParams) {
        for name in ParamName::ALL {
            if let Some(v) = other.get(name) {
                *self.slot(name) = Some(v);
            }
        }
    }

    pub fn set_default(&mut self, name: ParamName, value: f64) {
        self.slot(name).get_or_insert(value);
    }

    pub fn resolve(&self) -> anyhow::Result<ParameterSet> {
        let missing: Vec<&str> =
            ParamName::ALL.into_iter().filter(|n| self.get(*n).is_none()).map(|n| n.as_str()).collect();
        if let Some(first) = missing.first() {
            return Err(anyhow!(foodchain::Error::usage(format!(
                "missing parameter(s): {} (pass --{first} or --params FILE)",
                missing.join(", ")
            ))));
        }
        let v = |n| self.get(n).unwrap_or_default();
        let p = ParameterSet::new(
            v(ParamName::A1),
            v(ParamName::A2),
            v(ParamName::D1),
            v(ParamName::D2),
            v(ParamName::M1),
            v(ParamName::M2),
        )
        .map_err(foodchain::Error::from)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: ParamName,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

/// Everything that determines a command's output. Emitted with every
/// artifact and accepted back through `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: PartialParams,
    pub experiment: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Points per axis of the basin grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Random starts of the global stability probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_starts: Option<usize>,
}

fn read_json(path: &Path) -> anyhow::Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads a config file; a full report is accepted too, in which case its
/// embedded `config` is used.
pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let mut v = read_json(path)?;
    if let Some(inner) = v.get_mut("config") {
        v = inner.take();
    }
    serde_json::from_value(v).with_context(|| format!("invalid config in {}", path.display()))
}

pub fn load_params(path: &Path) -> anyhow::Result<PartialParams> {
    serde_json::from_value(read_json(path)?).with_context(|| format!("invalid parameters in {}", path.display()))
}
