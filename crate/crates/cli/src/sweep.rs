//! Parallel parameter sweeps. Replicas are fully independent: each gets its
//! own config, seed, and engine, so the worker count changes wall-clock time
//! and nothing else.

use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use odl_core::classify::DistributionLabel;
use odl_core::rng::replica_seed;

use crate::config::{self, SweepConfig};
use crate::run;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("write sweep table: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Outcome of one successful replica.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub label: DistributionLabel,
    pub median: f64,
    pub variance: f64,
    pub modes: Vec<f64>,
}

/// One row of the phase table.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub cell: usize,
    pub replica: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub result: Result<CellResult, String>,
}

/// Run every (cell, replica) pair on `jobs` workers. Row order is by
/// (cell, replica) no matter how the workers are scheduled; a failed replica
/// becomes an error row instead of aborting the sweep.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    let names: Vec<&str> = cfg.sweep.iter().map(|a| a.name.as_str()).collect();
    let replicas = cfg.replicas;
    let tasks: Vec<(usize, usize)> = (0..cfg.cells())
        .flat_map(|cell| (0..replicas).map(move |replica| (cell, replica)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, replica)| run_replica(cfg, &names, cell, replica))
            .collect()
    });
    // Collect already preserves task order; sorting is belt and braces.
    rows.sort_by_key(|r| (r.cell, r.replica));
    Ok(rows)
}

fn run_replica(cfg: &SweepConfig, names: &[&str], cell: usize, replica: usize) -> SweepRow {
    let values = cfg.cell_values(cell);
    let seed = replica_seed(cfg.base.seed, cell, cfg.replicas, replica);
    let result = config::apply_params(&cfg.base, names, &values)
        .map_err(|e| e.to_string())
        .and_then(|mut run_cfg| {
            run_cfg.seed = seed;
            run::execute(&run_cfg).map_err(|e| e.to_string())
        })
        .map(|outcome| CellResult {
            label: outcome.label,
            median: outcome.summary.median,
            variance: outcome.summary.variance,
            modes: outcome.summary.modes,
        });
    if let Err(msg) = &result {
        log::warn!("cell {cell} replica {replica}: {msg}");
    }
    SweepRow {
        cell,
        replica,
        values,
        seed,
        result,
    }
}

pub fn label_name(label: DistributionLabel) -> &'static str {
    match label {
        DistributionLabel::Consensus => "consensus",
        DistributionLabel::Extremization => "extremization",
        DistributionLabel::Bipolarization => "bipolarization",
        DistributionLabel::Fragmentation => "fragmentation",
        DistributionLabel::Other => "other",
    }
}

/// Write the phase table: one row per (cell, replica), swept values in their
/// own columns, modes joined with `;`, and an error column for failed rows.
pub fn write_table(cfg: &SweepConfig, rows: &[SweepRow], path: &Path) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cell".to_string(), "replica".to_string()];
    header.extend(cfg.sweep.iter().map(|a| a.name.clone()));
    header.extend(
        ["seed", "label", "median", "variance", "modes", "error"]
            .map(str::to_string),
    );
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.cell.to_string(), row.replica.to_string()];
        record.extend(row.values.iter().map(f64::to_string));
        record.push(row.seed.to_string());
        match &row.result {
            Ok(cell) => {
                record.push(label_name(cell.label).to_string());
                record.push(cell.median.to_string());
                record.push(cell.variance.to_string());
                record.push(
                    cell.modes
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                );
                record.push(String::new());
            }
            Err(msg) => {
                record.extend(std::iter::repeat_n(String::new(), 4));
                record.push(msg.clone());
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
