//! End-to-end run: instance, partition, side information, renormalization,
//! multiscale synchronization and risk.

use serde::Serialize;

use crate::diagnostics::risk::{risk, FactorizedEstimate};
use crate::error::{Error, Result};
use crate::geometry::{build_partition, BlockPartition};
use crate::model::{generate_instance, LatticeInstance, ModelParams};
use crate::multiscale::{build_hierarchy, honest_good_audit, synchronize, AuditRow, Hierarchy, LevelStats, MultiscaleState};
use crate::renorm::{RenormInstance, RenormOptions};
use crate::sideinfo::{build_block_side_info, BlockSideInfo};
use crate::stats::Estimate;

/// Controls of one pipeline run. The Gaussian range of `model` is replaced
/// by twice the block scale.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    pub model: ModelParams,
    pub scale: i64,
    pub kappa: u32,
    pub t: f64,
    pub renorm: RenormOptions,
    /// Pair samples for the risk when exact summation is too large.
    pub risk_pairs: usize,
}

/// Scalar summary of a run.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineOutcome {
    pub risk: Estimate,
    /// Risk of the factorized estimate summed exactly over covered vertices.
    pub risk_exact: f64,
    pub p_hat: f64,
    pub delta_hat: f64,
    pub disagreements: usize,
    pub edges: usize,
    pub blocks: usize,
    pub covered: usize,
    pub levels: Vec<LevelStats>,
    pub audit: Vec<AuditRow>,
}

/// Everything produced by a run.
pub struct PipelineRun {
    pub instance: LatticeInstance,
    pub partition: BlockPartition,
    pub side: BlockSideInfo,
    pub renorm: RenormInstance,
    pub hierarchy: Hierarchy,
    pub state: MultiscaleState,
    pub estimate: FactorizedEstimate,
    pub outcome: PipelineOutcome,
}

/// Vertex sign estimates `sigma_B theta^B_x` using each covered vertex's
/// canonical parent block.
pub fn vertex_estimates(part: &BlockPartition, r: &RenormInstance, state: &MultiscaleState) -> FactorizedEstimate {
    let vertices = part.covered();
    let signs = vertices
        .iter()
        .map(|&v| {
            let b = part.parent(v).expect("covered vertex has a parent");
            state.sigma[b] * r.samples[b].spin_at(v).expect("vertex in parent sample")
        })
        .collect();
    FactorizedEstimate { vertices, signs }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    if cfg.scale < 6 {
        return Err(Error::param("scale", "must be a positive multiple of 6"));
    }
    let model = cfg.model.with_range(2 * cfg.scale as usize);
    let instance = generate_instance(&model)?;
    let partition = build_partition(model.n, model.d, cfg.scale)?;
    let side = build_block_side_info(&instance, &partition, cfg.t)?;
    let renorm = crate::renorm::renormalize(&instance, &partition, &side, cfg.renorm)?;
    let hierarchy = build_hierarchy(&partition, cfg.kappa)?;
    let edge_signs = renorm.edge_signs(model.d);
    let state = synchronize(&edge_signs, &hierarchy)?;
    let audit = honest_good_audit(&state, &hierarchy, &edge_signs, &renorm.tilde_theta, renorm.delta_hat);
    let estimate = vertex_estimates(&partition, &renorm, &state);
    let risk_est = risk(&instance, &estimate.vertices, |u, v| estimate.t(u, v), cfg.risk_pairs, model.seed)?;
    let outcome = PipelineOutcome {
        risk: risk_est,
        risk_exact: estimate.exact_risk(&instance),
        p_hat: renorm.p_hat,
        delta_hat: renorm.delta_hat,
        disagreements: renorm.disagreements,
        edges: renorm.edges.len(),
        blocks: partition.num_blocks(),
        covered: estimate.vertices.len(),
        levels: state.stats.clone(),
        audit,
    };
    Ok(PipelineRun {
        instance,
        partition,
        side,
        renorm,
        hierarchy,
        state,
        estimate,
        outcome,
    })
}
