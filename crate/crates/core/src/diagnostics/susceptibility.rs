//! Empirical susceptibility matrix of two-block posterior samples.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BlockPartition;
use crate::gibbs::{sample_two_block_posterior, PosteriorOptions, SamplerOptions};
use crate::model::LatticeInstance;
use crate::sideinfo::BlockSideInfo;

/// Tolerance used for the norm sandwich.
pub const SANDWICH_TOL: f64 = 1e-9;

/// Norms of `chi = (m N)^{-1} sum_r theta^r theta^r^T`.
#[derive(Clone, Debug, Serialize)]
pub struct SusceptibilityReport {
    pub n: usize,
    pub replicas: usize,
    #[serde(skip)]
    pub chi: DMatrix<f64>,
    pub op_norm: f64,
    /// `tr(chi^3)^{1/3}`.
    pub tr3_root: f64,
    /// `tr(chi^2)^{1/2}`.
    pub tr2_root: f64,
    /// `op_norm <= tr3_root <= tr2_root` up to [`SANDWICH_TOL`].
    pub sandwich: bool,
}

/// Build the report from replica samples of equal length.
pub fn susceptibility_from_samples(samples: &[Vec<i8>]) -> Result<SusceptibilityReport> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::param("replicas", "need at least one sample"));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) || n == 0 {
        return Err(Error::param("samples", "samples must share a non-zero length"));
    }
    let s = DMatrix::from_fn(n, m, |i, r| f64::from(samples[r][i]));
    let chi = (&s * s.transpose()) / (m * n) as f64;
    let chi2 = &chi * &chi;
    let tr2: f64 = chi.iter().map(|x| x * x).sum();
    let tr3: f64 = chi2.component_mul(&chi.transpose()).sum();
    let eig = SymmetricEigen::new(chi.clone());
    let op = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tr3_root = tr3.max(0.0).cbrt();
    let tr2_root = tr2.sqrt();
    Ok(SusceptibilityReport {
        n,
        replicas: m,
        sandwich: op <= tr3_root + SANDWICH_TOL && tr3_root <= tr2_root + SANDWICH_TOL,
        chi,
        op_norm: op,
        tr3_root,
        tr2_root,
    })
}

/// Susceptibility of the two-block posterior of `(first, second)` from
/// `replicas` independent chains.
pub fn susceptibility(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    first: usize,
    second: usize,
    replicas: usize,
    opts: SamplerOptions,
) -> Result<SusceptibilityReport> {
    let samples = (0..replicas)
        .map(|r| {
            sample_two_block_posterior(inst, part, side, first, second, opts, PosteriorOptions::default(), 1000 + r as u64)
                .map(|s| s.spins)
        })
        .collect::<Result<Vec<_>>>()?;
    susceptibility_from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_has_unit_norms() {
        let r = susceptibility_from_samples(&[vec![1, -1, 1, 1, -1]]).unwrap();
        assert!((r.op_norm - 1.0).abs() < 1e-12);
        assert!((r.tr2_root - 1.0).abs() < 1e-12);
        assert!((r.tr3_root - 1.0).abs() < 1e-12);
        assert!(r.sandwich);
    }

    #[test]
    fn orthogonal_samples_split_the_spectrum() {
        // Two orthogonal sign vectors: chi has eigenvalues 1/2, 1/2.
        let r = susceptibility_from_samples(&[vec![1, 1, 1, 1], vec![1, -1, 1, -1]]).unwrap();
        assert!((r.op_norm - 0.5).abs() < 1e-12);
        assert!((r.tr2_root - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((r.tr3_root - 0.25f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_rejected() {
        assert!(susceptibility_from_samples(&[]).is_err());
    }

    #[test]
    fn posterior_samples_satisfy_sandwich() {
        use crate::geometry::build_partition;
        use crate::model::{generate_instance, ModelParams};
        use crate::sideinfo::build_block_side_info;
        let inst = generate_instance(&ModelParams::new(2, 12, 0.1, 0.3, 12, 8).unwrap()).unwrap();
        let part = build_partition(12, 2, 6).unwrap();
        let side = build_block_side_info(&inst, &part, 0.5).unwrap();
        let (b, c, _) = part.adjacent_pairs()[0];
        let r = susceptibility(&inst, &part, &side, b, c, 6, SamplerOptions { burn_in: 50, sweeps: 100 }).unwrap();
        assert_eq!(r.n, 99);
        assert!(r.sandwich, "{} {} {}", r.op_norm, r.tr3_root, r.tr2_root);
        assert!(r.op_norm <= 1.0 + 1e-9);
    }
}
