//! Block renormalization: block posterior samples become block spins and
//! block-level parity observations.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{build_partition, BlockPartition, Direction};
use crate::gibbs::{sample_block_posterior, BlockSample, PosteriorOptions, SamplerOptions};
use crate::model::{generate_instance, LatticeInstance, ModelParams};
use crate::rng::{derive_seed, Purpose};
use crate::sideinfo::build_block_side_info;
use crate::stats::{bootstrap_se, mean, pooled_ratio, Estimate};

/// `sign` with the convention `sign(0) = +1`.
#[inline]
pub fn sign(x: i64) -> i8 {
    if x >= 0 {
        1
    } else {
        -1
    }
}

/// Sampling controls of the renormalization step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenormOptions {
    pub sampler: SamplerOptions,
    pub posterior: PosteriorOptions,
    /// Chain identifier; different values draw independent block samples.
    pub replica: u64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        Self {
            sampler: SamplerOptions::default(),
            posterior: PosteriorOptions::default(),
            replica: 0,
        }
    }
}

/// Block-level edge `(first, first + e_axis)` of the renormalized instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RenormEdge {
    pub first: usize,
    pub second: usize,
    pub axis: usize,
    /// `sum over the joint of theta^B theta^B'`.
    pub joint_sum: i64,
    /// Renormalized observation `sign(joint_sum)`.
    pub y: i8,
    /// Whether `y` equals the product of the two block spins.
    pub agrees: bool,
}

/// Renormalized instance on the interior block grid.
#[derive(Clone, Debug)]
pub struct RenormInstance {
    pub samples: Vec<BlockSample>,
    /// Block spins `sign(sum_B theta^B theta)`.
    pub tilde_theta: Vec<i8>,
    pub edges: Vec<RenormEdge>,
    pub disagreements: usize,
    pub p_hat: f64,
    pub delta_hat: f64,
}

impl RenormInstance {
    /// Build from one posterior sample per interior block.
    pub fn from_samples(inst: &LatticeInstance, part: &BlockPartition, samples: Vec<BlockSample>) -> Result<Self> {
        if samples.len() != part.num_blocks() {
            return Err(Error::param("samples", "need exactly one sample per interior block"));
        }
        for (b, s) in samples.iter().enumerate() {
            if s.region != part.block(b).vertices || s.spins.len() != s.region.len() {
                return Err(Error::param("samples", format!("sample {b} does not cover its block")));
            }
        }
        let tilde_theta: Vec<i8> = samples
            .iter()
            .map(|s| sign(s.region.iter().zip(&s.spins).map(|(&v, &x)| i64::from(x * inst.theta(v))).sum()))
            .collect();
        let mut edges = Vec::new();
        for (first, second, axis) in part.adjacent_pairs() {
            let dir = Direction { axis, positive: true };
            let blk = part.block(first);
            let other = part.block(second);
            let joint_sum: i64 = blk
                .joint_local(dir)
                .into_iter()
                .map(|i| {
                    let v = blk.vertices[i];
                    let j = other.local(v).expect("joint shared by both blocks");
                    i64::from(samples[first].spins[i] * samples[second].spins[j])
                })
                .sum();
            let y = sign(joint_sum);
            edges.push(RenormEdge {
                first,
                second,
                axis,
                joint_sum,
                y,
                agrees: y == tilde_theta[first] * tilde_theta[second],
            });
        }
        let disagreements = edges.iter().filter(|e| !e.agrees).count();
        let p_hat = if edges.is_empty() {
            0.0
        } else {
            disagreements as f64 / edges.len() as f64
        };
        Ok(Self {
            samples,
            tilde_theta,
            edges,
            disagreements,
            p_hat,
            delta_hat: 1.0 - 2.0 * p_hat,
        })
    }

    /// Edge observations flattened as `block * d + axis`; 0 where the
    /// neighbour in `+e_axis` is not interior.
    pub fn edge_signs(&self, d: usize) -> Vec<i8> {
        let mut out = vec![0i8; self.samples.len() * d];
        for e in &self.edges {
            out[e.first * d + e.axis] = e.y;
        }
        out
    }
}

/// Sample every block posterior once and form the renormalized instance.
pub fn renormalize(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &crate::sideinfo::BlockSideInfo,
    opts: RenormOptions,
) -> Result<RenormInstance> {
    let samples = (0..part.num_blocks())
        .into_par_iter()
        .map(|b| sample_block_posterior(inst, part, side, b, opts.sampler, opts.posterior, opts.replica))
        .collect::<Result<Vec<_>>>()?;
    RenormInstance::from_samples(inst, part, samples)
}

/// Overlaps of block samples with the planted signs and with each other.
#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    /// `M_B = |B|^{-1} sum_B theta^B theta`.
    pub m_block: Vec<f64>,
    /// Same average over the core `B minus all joints`.
    pub m_core: Vec<f64>,
    /// `W_BB' = |B cap B'|^{-1} sum_{B cap B'} theta^B theta^B'`, per edge.
    pub w_edge: Vec<f64>,
    pub mean_m_sq: Estimate,
    pub var_m_sq: Estimate,
    pub mean_w_sq: Estimate,
    pub var_w_sq: Estimate,
    pub mean_w_m_m: Estimate,
}

fn var_of(xs: &[&f64]) -> f64 {
    let v: Vec<f64> = xs.iter().map(|x| **x).collect();
    crate::stats::variance(&v)
}

/// Overlap statistics with bootstrap standard errors (over blocks or edges).
pub fn overlap_report(r: &RenormInstance, part: &BlockPartition, inst: &LatticeInstance, seed: u64) -> OverlapReport {
    let mut m_block = Vec::with_capacity(part.num_blocks());
    let mut m_core = Vec::with_capacity(part.num_blocks());
    for (b, s) in r.samples.iter().enumerate() {
        let prod: Vec<f64> = s.region.iter().zip(&s.spins).map(|(&v, &x)| f64::from(x * inst.theta(v))).collect();
        m_block.push(mean(&prod));
        let core = part.block(b).core_local();
        m_core.push(core.iter().map(|&i| prod[i]).sum::<f64>() / core.len() as f64);
    }
    let w_edge: Vec<f64> = r
        .edges
        .iter()
        .map(|e| {
            let j = part.block(e.first).joint_local(Direction { axis: e.axis, positive: true }).len();
            e.joint_sum as f64 / j as f64
        })
        .collect();
    let m_sq: Vec<f64> = m_block.iter().map(|m| m * m).collect();
    let w_sq: Vec<f64> = w_edge.iter().map(|w| w * w).collect();
    let wmm: Vec<f64> = r
        .edges
        .iter()
        .zip(&w_edge)
        .map(|(e, w)| w * m_block[e.first] * m_block[e.second])
        .collect();
    let mean_stat = |xs: &[&f64]| xs.iter().map(|x| **x).sum::<f64>() / xs.len() as f64;
    let est = |xs: &[f64], f: &dyn Fn(&[&f64]) -> f64, tag: u64| {
        let all: Vec<&f64> = xs.iter().collect();
        Estimate::new(f(&all), bootstrap_se(xs, 200, seed ^ tag, f))
    };
    OverlapReport {
        mean_m_sq: est(&m_sq, &mean_stat, 1),
        var_m_sq: est(&m_sq, &var_of, 2),
        mean_w_sq: est(&w_sq, &mean_stat, 3),
        var_w_sq: est(&w_sq, &var_of, 4),
        mean_w_m_m: est(&wmm, &mean_stat, 5),
        m_block,
        m_core,
        w_edge,
    }
}

/// Pooled effective noise at one scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NoiseRow {
    pub scale: i64,
    pub p_hat: Estimate,
    pub disagreements: usize,
    pub edges: usize,
    pub reps: usize,
}

/// Per-repetition seed shared by every scale, so scales see the same planted
/// signs and lattice observations.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, Purpose::Repetition, &[rep as i64])
}

/// Pooled `p_hat` at each scale over `reps` independent instances. The
/// Gaussian range is set to twice the scale.
pub fn effective_noise_curve(
    base: &ModelParams,
    scales: &[i64],
    reps: usize,
    t: f64,
    opts: RenormOptions,
) -> Result<Vec<NoiseRow>> {
    if reps == 0 {
        return Err(Error::param("reps", "must be positive"));
    }
    scales
        .iter()
        .map(|&scale| {
            let part = build_partition(base.n, base.d, scale)?;
            let counts = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let params = base.with_seed(repetition_seed(base.seed, rep)).with_range(2 * scale as usize);
                    let inst = generate_instance(&params)?;
                    let side = build_block_side_info(&inst, &part, t)?;
                    let r = renormalize(&inst, &part, &side, opts)?;
                    Ok((r.disagreements as f64, r.edges.len() as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let p_hat = pooled_ratio(&counts, 400, base.seed ^ scale as u64);
            Ok(NoiseRow {
                scale,
                p_hat,
                disagreements: counts.iter().map(|c| c.0 as usize).sum(),
                edges: counts.iter().map(|c| c.1 as usize).sum(),
                reps,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::BlockSample;

    fn setup(p: f64, eta: f64) -> (LatticeInstance, BlockPartition) {
        let pr = ModelParams::new_closed(2, 16, p, eta, 12, 21).unwrap();
        (generate_instance(&pr).unwrap(), build_partition(16, 2, 6).unwrap())
    }

    fn planted_samples(inst: &LatticeInstance, part: &BlockPartition) -> Vec<BlockSample> {
        part.blocks()
            .iter()
            .map(|b| BlockSample {
                region: b.vertices.clone(),
                spins: b.vertices.iter().map(|&v| inst.theta(v)).collect(),
            })
            .collect()
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(0), 1);
        assert_eq!(sign(-3), -1);
        assert_eq!(sign(5), 1);
    }

    #[test]
    fn planted_samples_give_clean_instance() {
        let (inst, part) = setup(0.1, 0.0);
        let r = RenormInstance::from_samples(&inst, &part, planted_samples(&inst, &part)).unwrap();
        assert!(r.tilde_theta.iter().all(|&s| s == 1));
        assert!(r.edges.iter().all(|e| e.y == 1 && e.agrees));
        assert_eq!(r.p_hat, 0.0);
        assert_eq!(r.edges.len(), 2 * 5 * 4);
    }

    #[test]
    fn global_flip_of_one_block() {
        let (inst, part) = setup(0.1, 0.0);
        let base = RenormInstance::from_samples(&inst, &part, planted_samples(&inst, &part)).unwrap();
        let mut samples = planted_samples(&inst, &part);
        let target = 4;
        samples[target].spins.iter_mut().for_each(|s| *s = -*s);
        let flipped = RenormInstance::from_samples(&inst, &part, samples).unwrap();
        assert_eq!(flipped.tilde_theta[target], -1);
        assert_eq!(flipped.p_hat, 0.0);
        let ra = overlap_report(&base, &part, &inst, 0);
        let rb = overlap_report(&flipped, &part, &inst, 0);
        assert_eq!(rb.m_block[target], -ra.m_block[target]);
        for (i, e) in flipped.edges.iter().enumerate() {
            let touches = e.first == target || e.second == target;
            assert_eq!(rb.w_edge[i], if touches { -ra.w_edge[i] } else { ra.w_edge[i] });
            let prod_a = ra.w_edge[i] * ra.m_block[e.first] * ra.m_block[e.second];
            let prod_b = rb.w_edge[i] * rb.m_block[e.first] * rb.m_block[e.second];
            assert_eq!(prod_a, prod_b);
        }
    }

    #[test]
    fn sample_count_mismatch_rejected() {
        let (inst, part) = setup(0.1, 0.0);
        let mut s = planted_samples(&inst, &part);
        s.pop();
        assert!(RenormInstance::from_samples(&inst, &part, s).is_err());
    }

    #[test]
    fn null_model_block_overlap_is_one_over_size() {
        let (inst, part) = setup(0.5, 0.0);
        let side = build_block_side_info(&inst, &part, 0.5).unwrap();
        let mut m_sq = Vec::new();
        for replica in 0..30 {
            let opts = RenormOptions {
                sampler: SamplerOptions { burn_in: 2, sweeps: 2 },
                replica,
                ..Default::default()
            };
            let r = renormalize(&inst, &part, &side, opts).unwrap();
            let rep = overlap_report(&r, &part, &inst, 0);
            m_sq.extend(rep.m_block.iter().map(|m| m * m));
        }
        let e = crate::stats::mean_se(&m_sq);
        assert!(e.z_to(1.0 / 54.0) < 3.0, "{e}");
    }

    #[test]
    fn edge_signs_layout() {
        let (inst, part) = setup(0.1, 0.0);
        let r = RenormInstance::from_samples(&inst, &part, planted_samples(&inst, &part)).unwrap();
        let s = r.edge_signs(2);
        assert_eq!(s.iter().filter(|&&x| x != 0).count(), r.edges.len());
        // The last block has no + neighbours.
        assert_eq!(&s[s.len() - 2..], &[0, 0]);
    }
}
