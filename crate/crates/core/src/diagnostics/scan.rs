//! Risk and effective noise across a grid of flip probabilities.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::renorm::repetition_seed;
use crate::stats::{mean_se, Estimate};

/// One grid point of a threshold scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub p: f64,
    pub reps: usize,
    pub risk: Estimate,
    pub p_hat: Estimate,
}

/// Run the pipeline `reps` times at every `p` of the grid, reusing the
/// repetition seeds across grid points.
pub fn threshold_scan(base: &PipelineConfig, p_grid: &[f64], reps: usize) -> Result<Vec<ScanRow>> {
    if p_grid.is_empty() {
        return Err(Error::param("p_grid", "grid must be non-empty"));
    }
    if reps == 0 {
        return Err(Error::param("reps", "need at least one repetition"));
    }
    p_grid.iter().map(|&p| scan_point(base, p, reps)).collect()
}

/// A single grid point.
pub fn scan_point(base: &PipelineConfig, p: f64, reps: usize) -> Result<ScanRow> {
    let m = &base.model;
    let model = ModelParams::new(m.d, m.n, p, m.eta, m.range_l, m.seed)?;
    let outcomes: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = PipelineConfig {
                model: model.with_seed(repetition_seed(m.seed, r)),
                ..base.clone()
            };
            let run = run_pipeline(&cfg)?;
            Ok((run.outcome.risk.value, run.outcome.p_hat))
        })
        .collect::<Result<_>>()?;
    let risks: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let p_hats: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    Ok(ScanRow {
        p,
        reps,
        risk: mean_se(&risks),
        p_hat: mean_se(&p_hats),
    })
}

/// Number of adjacent grid points where the risk increases by more than
/// `sigmas` combined standard errors.
pub fn monotonicity_violations(rows: &[ScanRow], sigmas: f64) -> usize {
    rows.windows(2)
        .filter(|w| {
            let d = w[1].risk.minus(&w[0].risk);
            d.value > sigmas * d.se
        })
        .count()
}
