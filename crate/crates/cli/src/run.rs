//! Single-run execution: build the population, run the engine, classify the
//! final distribution, and write the artifacts.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde_json::json;
use thiserror::Error;

use odl_core::classify::{self, DistributionLabel, DistributionSummary};
use odl_core::engine::{self, EngineError, Trajectory};
use odl_core::population::{Population, PopulationError};
use odl_core::rng::SimRng;
use odl_core::topology::{Topology, TopologyError};

use crate::config::{InitSpec, RunConfig};

// Distinct deterministic streams per seed: one for the initial attitudes,
// one for network generation, while the engine consumes the bare seed.
const INIT_SALT: u64 = u64::from_be_bytes(*b"initdist");
const TOPO_SALT: u64 = u64::from_be_bytes(*b"topology");

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("population: {0}")]
    Population(#[from] PopulationError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("classification: {0}")]
    Classify(#[from] classify::ClassifyError),
}

/// Everything a finished run produces, before any files are written.
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub summary: DistributionSummary,
    pub label: DistributionLabel,
    /// Absolute extremity threshold the labels used.
    pub extremity: f64,
}

/// Deterministic initial population for a config, topology included.
pub fn build_population(cfg: &RunConfig) -> Result<Population, RunError> {
    let n = cfg.agents;
    let mut rng = SimRng::seed_from_u64(cfg.seed ^ INIT_SALT);
    let attitudes: Vec<f64> = match &cfg.init {
        InitSpec::Uniform { lo, hi } => {
            let bound = cfg.space.bound();
            let lo = lo.or(bound.map(|m| -m)).expect("validated");
            let hi = hi.or(bound).expect("validated");
            (0..n).map(|_| rng.random_range(lo..=hi)).collect()
        }
        InitSpec::Normal { mean, sd } => {
            let normal = Normal::new(*mean, *sd).expect("validated");
            (0..n)
                .map(|_| cfg.space.clamp(normal.sample(&mut rng)))
                .collect()
        }
        InitSpec::Explicit { values } => values.clone(),
    };
    let topology = match &cfg.topology {
        Some(kind) => {
            let mut topo_rng = SimRng::seed_from_u64(cfg.seed ^ TOPO_SALT);
            Some(Topology::generate(kind.clone(), n, &mut topo_rng)?)
        }
        None => None,
    };
    // Susceptibility placeholder; engine initialization overwrites it for
    // presets that prescribe their own.
    Ok(Population::from_attitudes(&attitudes, 1.0, cfg.space, topology)?)
}

/// Run the config end to end in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let spec = cfg.model_spec();
    let pop = build_population(cfg)?;
    log::info!(
        "simulating {} for {} steps, {} agents, seed {}",
        spec.preset.name(),
        cfg.steps,
        cfg.agents,
        cfg.seed
    );
    let trajectory = engine::simulate_sampled(&spec, &pop, cfg.steps, cfg.seed, cfg.record_every)?;
    let (summary, label, extremity) = classify_final(cfg, trajectory.last_row())?;
    Ok(RunOutcome {
        trajectory,
        summary,
        label,
        extremity,
    })
}

/// Classify a final attitude vector under the config's classifier settings.
pub fn classify_final(
    cfg: &RunConfig,
    attitudes: &[f64],
) -> Result<(DistributionSummary, DistributionLabel, f64), RunError> {
    let bound = cfg.classifier.bound.or(cfg.space.bound());
    let summary = classify::summarize(attitudes, bound, cfg.classifier.bins)?;
    let extremity = cfg.classifier.extremity_fraction * summary.half_width;
    let label = classify::classify(&summary, extremity)?;
    Ok((summary, label, extremity))
}

/// The classification artifact: label plus the evidence behind it.
pub fn classification_json(outcome: &RunOutcome) -> serde_json::Value {
    classification_doc(&outcome.summary, outcome.label, outcome.extremity)
}

pub fn classification_doc(
    summary: &DistributionSummary,
    label: DistributionLabel,
    extremity: f64,
) -> serde_json::Value {
    json!({
        "label": label,
        "modes": summary.modes,
        "median": summary.median,
        "variance": summary.variance,
        "params": {
            "bins": summary.bins,
            "half_width": summary.half_width,
            "extremity": extremity,
            "n": summary.n,
        },
    })
}

pub struct RunPaths {
    pub trajectory: PathBuf,
    pub classification: PathBuf,
}

/// Write `trajectory.csv` and `classification.json` under `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> io::Result<RunPaths> {
    fs::create_dir_all(dir)?;
    let trajectory = dir.join("trajectory.csv");
    write_trajectory(&outcome.trajectory, &trajectory)?;
    let classification = dir.join("classification.json");
    let doc = serde_json::to_string_pretty(&classification_json(outcome))?;
    fs::write(&classification, doc + "\n")?;
    Ok(RunPaths {
        trajectory,
        classification,
    })
}

fn write_trajectory(traj: &Trajectory, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "step,agent,attitude")?;
    for (step, row) in traj.iter_rows() {
        for (agent, attitude) in row.iter().enumerate() {
            writeln!(w, "{step},{agent},{attitude}")?;
        }
    }
    w.flush()
}
