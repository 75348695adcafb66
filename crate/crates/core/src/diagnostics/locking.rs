//! Overlap locking between a block, its joints and its remainder.

use serde::Serialize;

use super::correlation::{overlap, run_replicas, BATCHES};
use crate::error::Result;
use crate::geometry::{BlockPartition, Direction};
use crate::gibbs::{block_hamiltonian, two_block_hamiltonian, PosteriorOptions, SamplerOptions};
use crate::model::LatticeInstance;
use crate::sideinfo::BlockSideInfo;
use crate::stats::{batch_means, Estimate};

/// Positions (within the sampled region) of `B`, `B cap B''` and `B minus B''`.
#[derive(Clone, Debug)]
pub struct LockingSets {
    pub block: Vec<usize>,
    pub cap: Vec<usize>,
    pub minus: Vec<usize>,
}

impl LockingSets {
    /// `|B cap B''| / |B|` from exact counts.
    pub fn alpha(&self) -> f64 {
        self.cap.len() as f64 / self.block.len() as f64
    }
}

fn restricted(a: &[i8], b: &[i8], idx: &[usize]) -> f64 {
    let x: Vec<i8> = idx.iter().map(|&i| a[i]).collect();
    let y: Vec<i8> = idx.iter().map(|&i| b[i]).collect();
    overlap(&x, &y)
}

/// `alpha (R(B cap B'') - R(B))^2 + (1 - alpha) (R(B minus B'') - R(B))^2`
/// for one pair of replica states.
pub fn locking_from_samples(a: &[i8], b: &[i8], sets: &LockingSets) -> f64 {
    let alpha = sets.alpha();
    let rb = restricted(a, b, &sets.block);
    let rc = restricted(a, b, &sets.cap);
    let rm = restricted(a, b, &sets.minus);
    alpha * (rc - rb).powi(2) + (1.0 - alpha) * (rm - rb).powi(2)
}

/// Deficits on the one-block and two-block posteriors.
#[derive(Clone, Debug, Serialize)]
pub struct LockingReport {
    pub alpha: f64,
    /// `V_B(B; B')` under the one-block posterior of `B`.
    pub one_block: Estimate,
    /// `V_{B cup B'}(B; B'')` for each direction `B'' = B + dir`.
    pub two_block: Vec<(Direction, Estimate)>,
}

fn sets_in(region: &[usize], part: &BlockPartition, block: usize, dir: Direction) -> LockingSets {
    let blk = part.block(block);
    let pos = |locals: Vec<usize>| -> Vec<usize> {
        locals
            .into_iter()
            .map(|i| region.binary_search(&blk.vertices[i]).expect("block inside region"))
            .collect()
    };
    LockingSets {
        block: pos((0..blk.len()).collect()),
        cap: pos(blk.joint_local(dir)),
        minus: pos(blk.minus_local(dir)),
    }
}

/// Locking deficits of `block` towards its neighbour `second` in direction `dir`.
pub fn locking_deficit(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    block: usize,
    dir: Direction,
    opts: SamplerOptions,
) -> Result<LockingReport> {
    let second = part
        .neighbor(block, dir)
        .ok_or_else(|| crate::Error::NotFound(format!("no interior neighbour of block {block} towards {}", dir.label())))?;
    let seed = inst.params.seed;
    let one = block_hamiltonian(inst, part, side, block, PosteriorOptions::default())?;
    let region = &part.block(block).vertices;
    let sets = sets_in(region, part, block, dir);
    let mut series = Vec::with_capacity(opts.measured());
    run_replicas(&one, 2, opts, seed, &[4, block as i64], |s| series.push(locking_from_samples(s[0], s[1], &sets)))?;
    let one_block = batch_means(&series, BATCHES);

    let two = two_block_hamiltonian(inst, part, side, block, second, PosteriorOptions::default())?;
    let union = part.union(block, second);
    let all: Vec<(Direction, LockingSets)> = Direction::all(part.dim())
        .into_iter()
        .map(|d| (d, sets_in(&union, part, block, d)))
        .collect();
    let mut two_series: Vec<Vec<f64>> = vec![Vec::with_capacity(opts.measured()); all.len()];
    run_replicas(&two, 2, opts, seed, &[5, block as i64, second as i64], |s| {
        for (k, (_, st)) in all.iter().enumerate() {
            two_series[k].push(locking_from_samples(s[0], s[1], st));
        }
    })?;
    Ok(LockingReport {
        alpha: sets.alpha(),
        one_block,
        two_block: all.iter().zip(&two_series).map(|((d, _), s)| (*d, batch_means(s, BATCHES))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_partition;
    use crate::model::{generate_instance, ModelParams};
    use crate::sideinfo::build_block_side_info;
    use crate::stats::mean_se;

    fn deficit_at(scale: i64, seed: u64) -> LockingReport {
        let n = 2 * scale;
        let params = ModelParams::new(2, n, 0.05, 0.2, 2 * scale as usize, seed).unwrap();
        let inst = generate_instance(&params).unwrap();
        let part = build_partition(n, 2, scale).unwrap();
        let side = build_block_side_info(&inst, &part, 0.5).unwrap();
        let origin = part.grid().index(&[0, 0]).unwrap();
        let dir = Direction { axis: 0, positive: true };
        locking_deficit(&inst, &part, &side, origin, dir, SamplerOptions { burn_in: 300, sweeps: 1500 }).unwrap()
    }

    #[test]
    fn constant_samples_have_zero_deficit() {
        let sets = LockingSets {
            block: (0..10).collect(),
            cap: vec![0, 1],
            minus: (2..10).collect(),
        };
        let a = vec![1i8; 10];
        assert_eq!(locking_from_samples(&a, &a, &sets), 0.0);
        let flipped: Vec<i8> = a.iter().map(|x| -x).collect();
        assert_eq!(locking_from_samples(&a, &flipped, &sets), 0.0);
    }

    #[test]
    fn hand_computed_deficit() {
        // Replicas disagree only on the cap: R(B) = 0.6, R(cap) = -1, R(minus) = 1.
        let sets = LockingSets {
            block: (0..10).collect(),
            cap: vec![0, 1],
            minus: (2..10).collect(),
        };
        let a = vec![1i8; 10];
        let mut b = a.clone();
        b[0] = -1;
        b[1] = -1;
        let v = locking_from_samples(&a, &b, &sets);
        let expected = 0.2 * 1.6f64.powi(2) + 0.8 * 0.4f64.powi(2);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn deficits_are_non_negative_and_shrink_with_scale() {
        // Instance averages: single instances occasionally carry a domain wall.
        let mut means = Vec::new();
        for scale in [6, 12] {
            let reports: Vec<LockingReport> = (1..=6).map(|seed| deficit_at(scale, seed)).collect();
            for r in &reports {
                assert!(r.one_block.value >= -3.0 * r.one_block.se);
                assert!(r.two_block.iter().all(|(_, e)| e.value >= -3.0 * e.se));
                assert_eq!(r.two_block.len(), 4);
            }
            means.push(mean_se(&reports.iter().map(|r| r.one_block.value).collect::<Vec<_>>()));
        }
        let d = means[1].minus(&means[0]);
        assert!(d.value <= 2.0 * d.se, "{} vs {}", means[0], means[1]);
    }
}
