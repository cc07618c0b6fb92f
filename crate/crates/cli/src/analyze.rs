//! Offline analysis commands: classify an attitude file, or fit the
//! susceptibility and two-source trust estimators to trial tables.

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use odl_core::classify::{self, DistributionLabel, DistributionSummary};
use odl_core::estimate::{
    classify_responder, estimate_alpha, estimate_hew_weight, fit_hew_curve, ResponderKind,
    RESPONDER_TOL,
};

use crate::run;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("line {line}: expected a number, got `{text}`")]
    BadNumber { line: usize, text: String },
    #[error("trajectory line {line}: expected `step,agent,attitude` fields, got `{text}`")]
    BadTrajectoryRow { line: usize, text: String },
    #[error("final step lists agents {got:?}, expected 0..{expected}")]
    IncompleteFinalStep { got: Vec<usize>, expected: usize },
    #[error("input has no attitude rows")]
    Empty,
    #[error("header is `{got}`, expected `{expected}`")]
    WrongHeader { got: String, expected: String },
    #[error("row {row}: {source}")]
    BadRow {
        row: usize,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Estimate(#[from] odl_core::estimate::EstimateError),
}

/// Attitudes from either a trajectory file (the final step is taken) or a
/// plain list, one number per line, with an optional `attitude` header.
pub fn read_attitudes(text: &str) -> Result<Vec<f64>, AnalyzeError> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.peek() {
        Some((_, first)) if first.trim() == "step,agent,attitude" => {
            lines.next();
            final_step_attitudes(lines)
        }
        Some((_, first)) if first.trim() == "attitude" => {
            lines.next();
            plain_attitudes(lines)
        }
        _ => plain_attitudes(lines),
    }
}

fn plain_attitudes<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<f64>, AnalyzeError> {
    let mut out = Vec::new();
    for (idx, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| AnalyzeError::BadNumber {
            line: idx + 1,
            text: t.to_string(),
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(AnalyzeError::Empty);
    }
    Ok(out)
}

fn final_step_attitudes<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<f64>, AnalyzeError> {
    let mut last_step = 0usize;
    let mut current: Vec<(usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let bad = || AnalyzeError::BadTrajectoryRow {
            line: idx + 1,
            text: t.to_string(),
        };
        let mut parts = t.split(',');
        let step: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let agent: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let attitude: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        if step > last_step {
            last_step = step;
            current.clear();
        }
        if step == last_step {
            current.push((agent, attitude));
        }
    }
    if current.is_empty() {
        return Err(AnalyzeError::Empty);
    }
    current.sort_by_key(|&(agent, _)| agent);
    let agents: Vec<usize> = current.iter().map(|&(a, _)| a).collect();
    if agents.iter().enumerate().any(|(i, &a)| i != a) {
        return Err(AnalyzeError::IncompleteFinalStep {
            got: agents,
            expected: current.len(),
        });
    }
    Ok(current.into_iter().map(|(_, v)| v).collect())
}

/// Classification report for a bare attitude vector.
pub fn classify_attitudes(
    attitudes: &[f64],
    bound: f64,
    eps_ext: Option<f64>,
) -> Result<serde_json::Value, AnalyzeError> {
    let summary: DistributionSummary =
        classify::summarize(attitudes, Some(bound), classify::DEFAULT_BINS)?;
    let extremity = eps_ext.unwrap_or(classify::DEFAULT_EXTREMITY_FRACTION * bound);
    let label: DistributionLabel = classify::classify(&summary, extremity)?;
    Ok(run::classification_doc(&summary, label, extremity))
}

#[derive(Debug, Deserialize)]
struct AlphaTrialRow {
    subject: String,
    a_initial: f64,
    m_avg: f64,
    a_updated: f64,
}

#[derive(Debug, Deserialize)]
struct HewTrialRow {
    subject: String,
    a_initial: f64,
    m_m: f64,
    m_n: f64,
    a_final: f64,
}

const ALPHA_HEADER: &str = "subject,a_initial,m_avg,a_updated";
const HEW_HEADER: &str = "subject,a_initial,m_m,m_n,a_final";

fn read_rows<T: for<'de> Deserialize<'de>>(
    text: &str,
    expected_header: &str,
) -> Result<Vec<T>, AnalyzeError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let got = reader
        .headers()
        .map_err(|e| AnalyzeError::BadRow {
            row: 1,
            source: Box::new(e),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if got != expected_header {
        return Err(AnalyzeError::WrongHeader {
            got,
            expected: expected_header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.deserialize().enumerate() {
        let row: T = record.map_err(|e| AnalyzeError::BadRow {
            row: idx + 2,
            source: Box::new(e),
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(AnalyzeError::Empty);
    }
    Ok(rows)
}

/// Per-subject susceptibility estimates from averaged-message trials.
///
/// Rows whose denominator vanishes (message mean equal to the initial
/// attitude) are reported with an error instead of killing the whole fit.
pub fn fit_alpha(text: &str) -> Result<serde_json::Value, AnalyzeError> {
    let rows: Vec<AlphaTrialRow> = read_rows(text, ALPHA_HEADER)?;
    let mut subjects = Vec::new();
    let mut alphas = Vec::new();
    let mut counts = std::collections::BTreeMap::new();
    for row in &rows {
        match estimate_alpha(row.a_initial, row.m_avg, row.a_updated)
            .and_then(|a| Ok((a, classify_responder(a, RESPONDER_TOL)?)))
        {
            Ok((alpha_hat, responder)) => {
                alphas.push(alpha_hat);
                *counts.entry(responder_name(responder)).or_insert(0u64) += 1;
                subjects.push(json!({
                    "subject": row.subject,
                    "alpha_hat": alpha_hat,
                    "responder": responder,
                }));
            }
            Err(e) => {
                subjects.push(json!({
                    "subject": row.subject,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let mean_alpha = if alphas.is_empty() {
        serde_json::Value::Null
    } else {
        json!(alphas.iter().sum::<f64>() / alphas.len() as f64)
    };
    Ok(json!({
        "estimator": "alpha",
        "responder_tolerance": RESPONDER_TOL,
        "subjects": subjects,
        "summary": {
            "n": rows.len(),
            "estimated": alphas.len(),
            "mean_alpha": mean_alpha,
            "responders": counts,
        },
    }))
}

fn responder_name(kind: ResponderKind) -> &'static str {
    match kind {
        ResponderKind::Repulsed => "repulsed",
        ResponderKind::Keeper => "keeper",
        ResponderKind::Compromiser => "compromiser",
        ResponderKind::Adopter => "adopter",
        ResponderKind::Overreactor => "overreactor",
    }
}

/// Trust-curve fit from two-source trials: each row yields one
/// (distance to the varied source, estimated weight) point, and the curve
/// `w(d) = 1 - excess/(excess + decay)` is least-squares fitted to them.
pub fn fit_hew(text: &str) -> Result<serde_json::Value, AnalyzeError> {
    let rows: Vec<HewTrialRow> = read_rows(text, HEW_HEADER)?;
    let mut subjects = Vec::new();
    let mut points = Vec::new();
    for row in &rows {
        let distance = (row.m_m - row.a_initial).abs();
        match estimate_hew_weight(row.a_final, row.m_m, row.m_n) {
            Ok(weight) => {
                points.push((distance, weight));
                subjects.push(json!({
                    "subject": row.subject,
                    "distance": distance,
                    "weight": weight,
                }));
            }
            Err(e) => {
                subjects.push(json!({
                    "subject": row.subject,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let fit = fit_hew_curve(&points)?;
    Ok(json!({
        "estimator": "hew",
        "subjects": subjects,
        "fit": {
            "dead_band": fit.dead_band,
            "decay": fit.decay,
            "rss": fit.rss,
        },
        "summary": {"n": rows.len(), "points": points.len()},
    }))
}
