//! Run and sweep configuration: strict JSON documents with unknown keys
//! rejected, so typos in hyperparameter names fail loudly instead of
//! silently falling back to defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use odl_core::classify;
use odl_core::models::{ModelSpec, Preset, Scheduler};
use odl_core::space::AttitudeSpace;
use odl_core::topology::TopologyKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("swept name `{name}` does not resolve to a numeric config field")]
    BadSweepName { name: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Initial attitude distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Uniform over `[lo, hi]`; both default to the space bounds.
    Uniform {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    /// Normal, clamped into the attitude space.
    Normal { mean: f64, sd: f64 },
    /// One attitude per agent, in agent order.
    Explicit { values: Vec<f64> },
}

/// Attitude-distribution classifier settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Extremity threshold as a fraction of the classification half-width.
    #[serde(default = "default_extremity_fraction")]
    pub extremity_fraction: f64,
    /// Half-width override; needed when the attitude space is unbounded and
    /// the data-driven range is not wanted.
    #[serde(default)]
    pub bound: Option<f64>,
}

fn default_bins() -> usize {
    classify::DEFAULT_BINS
}

fn default_extremity_fraction() -> f64 {
    classify::DEFAULT_EXTREMITY_FRACTION
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            bins: default_bins(),
            extremity_fraction: default_extremity_fraction(),
            bound: None,
        }
    }
}

fn default_record_every() -> usize {
    1
}

/// One simulation run: model, population, schedule, and output knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Preset,
    pub space: AttitudeSpace,
    /// Defaults to the preset's conventional scheduler.
    #[serde(default)]
    pub scheduler: Option<Scheduler>,
    pub agents: usize,
    pub init: InitSpec,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub topology: Option<TopologyKind>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Trajectory sampling stride; step 0 and the final step always record.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Where `simulate` writes its artifacts; `--out` overrides.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The model spec this run executes.
    pub fn model_spec(&self) -> ModelSpec {
        let spec = ModelSpec::new(self.model.clone(), self.space);
        match self.scheduler {
            Some(s) => spec.with_scheduler(s),
            None => spec,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agents < 2 {
            return Err(invalid("agents", format!("need at least 2, got {}", self.agents)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        match &self.init {
            InitSpec::Uniform { lo, hi } => {
                let bound = self.space.bound();
                let lo = lo.or(bound.map(|m| -m));
                let hi = hi.or(bound);
                match (lo, hi) {
                    (Some(lo), Some(hi)) => {
                        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                            return Err(invalid(
                                "init.uniform",
                                format!("need finite lo < hi, got [{lo}, {hi}]"),
                            ));
                        }
                        if !self.space.contains(lo) || !self.space.contains(hi) {
                            return Err(invalid(
                                "init.uniform",
                                format!("[{lo}, {hi}] leaves the attitude space"),
                            ));
                        }
                    }
                    _ => {
                        return Err(invalid(
                            "init.uniform",
                            "lo and hi are required when the space is unbounded",
                        ));
                    }
                }
            }
            InitSpec::Normal { sd, mean } => {
                if !(*sd > 0.0) || !sd.is_finite() {
                    return Err(invalid("init.normal.sd", format!("must be positive, got {sd}")));
                }
                if !mean.is_finite() {
                    return Err(invalid("init.normal.mean", format!("must be finite, got {mean}")));
                }
            }
            InitSpec::Explicit { values } => {
                if values.len() != self.agents {
                    return Err(invalid(
                        "init.explicit.values",
                        format!("got {} values for {} agents", values.len(), self.agents),
                    ));
                }
                for (i, v) in values.iter().enumerate() {
                    if !self.space.contains(*v) {
                        return Err(invalid(
                            &format!("init.explicit.values[{i}]"),
                            format!("{v} lies outside the attitude space"),
                        ));
                    }
                }
            }
        }
        if self.classifier.bins < 3 {
            return Err(invalid(
                "classifier.bins",
                format!("need at least 3, got {}", self.classifier.bins),
            ));
        }
        let frac = self.classifier.extremity_fraction;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(invalid(
                "classifier.extremity_fraction",
                format!("must lie strictly inside (0, 1), got {frac}"),
            ));
        }
        if let Some(b) = self.classifier.bound {
            if !(b > 0.0) || !b.is_finite() {
                return Err(invalid("classifier.bound", format!("must be positive, got {b}")));
            }
        }
        self.model_spec()
            .validate(self.agents)
            .map_err(|e| invalid("model", e.to_string()))?;
        Ok(())
    }
}

/// One swept parameter: an evenly spaced grid of `steps` values from `lo`
/// to `hi` inclusive.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into [`RunConfig`], e.g. `model.confidence_bound`.
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.lo + h * k as f64).collect()
    }
}

/// A grid of runs: the cartesian product of the axes, `replicas` seeds per
/// cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub sweep: Vec<SweepAxis>,
    pub replicas: usize,
    /// Worker count; `--jobs` overrides.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base.validate()?;
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(invalid("jobs", "must be at least 1"));
            }
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            if axis.steps == 0 {
                return Err(invalid(&format!("sweep[{i}].steps"), "must be at least 1"));
            }
            if !axis.lo.is_finite() || !axis.hi.is_finite() {
                return Err(invalid(
                    &format!("sweep[{i}]"),
                    format!("endpoints must be finite, got [{}, {}]", axis.lo, axis.hi),
                ));
            }
        }
        // Prove every swept name resolves before any worker starts; a run
        // built from the resolved values may still fail its own validation
        // per cell (that lands in the row's error column, not here).
        let names: Vec<&str> = self.sweep.iter().map(|a| a.name.as_str()).collect();
        let probe: Vec<f64> = self.sweep.iter().map(|a| a.lo).collect();
        apply_params_unchecked(&self.base, &names, &probe)?;
        Ok(())
    }

    /// Total number of parameter cells.
    pub fn cells(&self) -> usize {
        self.sweep.iter().map(|a| a.steps).product::<usize>().max(1)
    }

    /// Values for one cell; the first axis varies slowest.
    pub fn cell_values(&self, cell: usize) -> Vec<f64> {
        let mut values = vec![0.0; self.sweep.len()];
        let mut rest = cell;
        for (slot, axis) in self.sweep.iter().enumerate().rev() {
            let grid = axis.values();
            values[slot] = grid[rest % axis.steps];
            rest /= axis.steps;
        }
        values
    }
}

/// `base` with each named field replaced by the paired value, then
/// revalidated.
pub fn apply_params(
    base: &RunConfig,
    names: &[&str],
    values: &[f64],
) -> Result<RunConfig, ConfigError> {
    let cfg = apply_params_unchecked(base, names, values)?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_params_unchecked(
    base: &RunConfig,
    names: &[&str],
    values: &[f64],
) -> Result<RunConfig, ConfigError> {
    assert_eq!(names.len(), values.len(), "one value per swept name");
    let mut doc = serde_json::to_value(base).expect("config serializes");
    for (name, value) in names.iter().zip(values) {
        set_numeric_path(&mut doc, name, *value)?;
    }
    Ok(serde_json::from_value(doc)?)
}

/// Replace the number at a dotted path. The slot must already hold a number,
/// which is what keeps sweeps honest: only real hyperparameters can be swept.
fn set_numeric_path(
    doc: &mut serde_json::Value,
    path: &str,
    value: f64,
) -> Result<(), ConfigError> {
    let bad = || ConfigError::BadSweepName {
        name: path.to_string(),
    };
    let mut node = doc;
    for key in path.split('.') {
        node = node.get_mut(key).ok_or_else(bad)?;
    }
    let old = node.as_number().ok_or_else(bad)?;
    // Integer slots (agent counts, step counts) stay integers so they
    // deserialize back into usize fields.
    let replacement = if old.is_u64() || old.is_i64() {
        if value.fract() != 0.0 || !value.is_finite() {
            return Err(ConfigError::Invalid {
                field: path.to_string(),
                reason: format!("field is integral but the swept value is {value}"),
            });
        }
        serde_json::Number::from(value as i64)
    } else {
        serde_json::Number::from_f64(value).ok_or_else(|| ConfigError::Invalid {
            field: path.to_string(),
            reason: format!("{value} is not a representable number"),
        })?
    };
    *node = serde_json::Value::Number(replacement);
    Ok(())
}
