//! Per-block Gaussian side information.
//!
//! For each interior block `B` and each direction `a` (neighbour `B' = B + a`)
//! three independent families of Gaussian pair observations are drawn:
//!
//! * `Bullet`: all unordered pairs of `B`, SNR `t eta / |B|`;
//! * `Cap`: pairs of the joint `B cap B'`, SNR `(1 - t) eta / |B cap B'|`;
//! * `Minus`: pairs of `B \ B'`, SNR `(1 - t) eta / |B \ B'|`.
//!
//! Families are drawn directly from the planted signs with fresh noise.
//! [`split_gaussian`] shows the equivalent construction from a single
//! observation stream.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BlockPartition, Direction};
use crate::model::LatticeInstance;
use crate::rng::{stream, Purpose};

/// Split a unit-variance Gaussian observation into two independent halves,
/// each carrying half the signal-to-noise ratio.
pub fn split_gaussian<R: Rng + ?Sized>(obs: f64, rng: &mut R) -> (f64, f64) {
    let w: f64 = rng.sample(StandardNormal);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ((obs + w) * r, (obs - w) * r)
}

/// Family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    Bullet,
    Cap,
    Minus,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Bullet, Family::Cap, Family::Minus];

    pub fn label(&self) -> &'static str {
        match self {
            Family::Bullet => "bullet",
            Family::Cap => "cap",
            Family::Minus => "minus",
        }
    }
}

/// Number of unordered pairs of `k` items.
pub fn num_pairs(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// One family of pair observations on a subset of a block.
#[derive(Clone, Debug)]
pub struct FamilyTable {
    pub family: Family,
    pub direction: Direction,
    pub snr: f64,
    /// Local positions (within the block) of the subset, ascending.
    pub locals: Vec<usize>,
    /// Observations on pairs `(locals[i], locals[j])`, `i < j`, in row-major order.
    pub values: Vec<f32>,
}

impl FamilyTable {
    /// Iterate `(local_i, local_j, y)` over all stored pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.locals.len();
        let mut it = self.values.iter();
        (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j))).map(move |(i, j)| {
            let y = *it.next().expect("table length matches subset");
            (self.locals[i], self.locals[j], f64::from(y))
        })
    }
}

/// Side information for every interior block.
#[derive(Clone, Debug)]
pub struct BlockSideInfo {
    pub t: f64,
    pub eta: f64,
    pub scale: i64,
    /// `tables[b]` holds `2d * 3` families ordered by direction then family.
    tables: Vec<Vec<FamilyTable>>,
}

impl BlockSideInfo {
    pub fn tables(&self, b: usize) -> &[FamilyTable] {
        &self.tables[b]
    }

    pub fn table(&self, b: usize, dir: Direction, family: Family) -> &FamilyTable {
        let f = Family::ALL.iter().position(|x| *x == family).unwrap_or(0);
        &self.tables[b][3 * dir.index() + f]
    }

    pub fn num_blocks(&self) -> usize {
        self.tables.len()
    }

    /// Total number of stored pair observations.
    pub fn total_pairs(&self) -> usize {
        self.tables.iter().flatten().map(|t| t.values.len()).sum()
    }
}

/// Draw all three families for every interior block and direction.
///
/// Requires `0 <= t <= 1` and a Gaussian range of at least twice the scale.
pub fn build_block_side_info(inst: &LatticeInstance, part: &BlockPartition, t: f64) -> Result<BlockSideInfo> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("must lie in [0, 1], got {t}")));
    }
    if (inst.params.range_l as i64) < 2 * part.scale {
        return Err(Error::param(
            "range_l",
            format!("must be at least twice the block scale ({}), got {}", 2 * part.scale, inst.params.range_l),
        ));
    }
    let eta = inst.params.eta;
    let seed = inst.params.seed;
    let d = part.dim();
    let tables = (0..part.num_blocks())
        .into_par_iter()
        .map(|b| {
            let block = part.block(b);
            let theta: Vec<f64> = block.vertices.iter().map(|&v| f64::from(inst.theta(v))).collect();
            let mut out = Vec::with_capacity(6 * d);
            for dir in Direction::all(d) {
                for (fi, family) in Family::ALL.into_iter().enumerate() {
                    let locals: Vec<usize> = match family {
                        Family::Bullet => (0..block.len()).collect(),
                        Family::Cap => block.joint_local(dir),
                        Family::Minus => block.minus_local(dir),
                    };
                    let share = if family == Family::Bullet { t } else { 1.0 - t };
                    let snr = share * eta / locals.len() as f64;
                    let amp = snr.sqrt();
                    let mut key: Vec<i64> = block.coord.to_vec();
                    key.extend([dir.index() as i64, fi as i64]);
                    let mut rng = stream(seed, Purpose::SideInfo, &key);
                    let mut values = Vec::with_capacity(num_pairs(locals.len()));
                    for i in 0..locals.len() {
                        for j in (i + 1)..locals.len() {
                            let z: f64 = rng.sample(StandardNormal);
                            values.push((amp * theta[locals[i]] * theta[locals[j]] + z) as f32);
                        }
                    }
                    out.push(FamilyTable {
                        family,
                        direction: dir,
                        snr,
                        locals,
                        values,
                    });
                }
            }
            out
        })
        .collect();
    Ok(BlockSideInfo {
        t,
        eta,
        scale: part.scale,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_partition;
    use crate::model::{generate_instance, ModelParams};
    use crate::stats::mean;

    fn setup(eta: f64) -> (LatticeInstance, BlockPartition) {
        let inst = generate_instance(&ModelParams::new(2, 16, 0.1, eta, 12, 4).unwrap()).unwrap();
        let part = build_partition(16, 2, 6).unwrap();
        (inst, part)
    }

    #[test]
    fn pair_counts() {
        let (inst, part) = setup(0.3);
        let side = build_block_side_info(&inst, &part, 0.5).unwrap();
        // Per block and direction: C(54,2) + C(9,2) + C(45,2).
        let per = 1431 + 36 + 990;
        assert_eq!(side.total_pairs(), part.num_blocks() * 4 * per);
    }

    #[test]
    fn snr_split_follows_t() {
        let (inst, part) = setup(0.3);
        let side = build_block_side_info(&inst, &part, 0.25).unwrap();
        let dir = Direction { axis: 1, positive: true };
        assert!((side.table(0, dir, Family::Bullet).snr - 0.25 * 0.3 / 54.0).abs() < 1e-15);
        assert!((side.table(0, dir, Family::Cap).snr - 0.75 * 0.3 / 9.0).abs() < 1e-15);
        assert!((side.table(0, dir, Family::Minus).snr - 0.75 * 0.3 / 45.0).abs() < 1e-15);
    }

    #[test]
    fn t_extremes_zero_a_family() {
        let (inst, part) = setup(0.3);
        let dir = Direction { axis: 0, positive: false };
        let s1 = build_block_side_info(&inst, &part, 1.0).unwrap();
        assert_eq!(s1.table(0, dir, Family::Cap).snr, 0.0);
        let s0 = build_block_side_info(&inst, &part, 0.0).unwrap();
        assert_eq!(s0.table(0, dir, Family::Bullet).snr, 0.0);
    }

    #[test]
    fn range_too_short_is_rejected() {
        let inst = generate_instance(&ModelParams::new(2, 16, 0.1, 0.3, 11, 4).unwrap()).unwrap();
        let part = build_partition(16, 2, 6).unwrap();
        let e = build_block_side_info(&inst, &part, 0.5).unwrap_err();
        assert_eq!(e.parameter(), Some("range_l"));
    }

    #[test]
    fn null_side_info_is_standard_normal() {
        let (inst, part) = setup(0.0);
        let side = build_block_side_info(&inst, &part, 0.5).unwrap();
        let ys: Vec<f64> = side.tables(0).iter().flat_map(|t| t.values.iter().map(|v| f64::from(*v))).collect();
        let m = mean(&ys);
        let v = mean(&ys.iter().map(|y| y * y).collect::<Vec<_>>());
        assert!(m.abs() < 4.0 / (ys.len() as f64).sqrt());
        assert!((v - 1.0).abs() < 0.05);
    }

    #[test]
    fn split_halves_are_independent_with_half_snr() {
        let mut rng = stream(1, Purpose::SideSplit, &[]);
        let snr: f64 = 2.0;
        let n = 200_000;
        let (mut m1, mut m2, mut c) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let (a, b) = split_gaussian(snr.sqrt() + z, &mut rng);
            m1 += a;
            m2 += b;
            c += (a - (snr / 2.0).sqrt()) * (b - (snr / 2.0).sqrt());
        }
        let nf = n as f64;
        let tol = 4.0 / nf.sqrt();
        assert!((m1 / nf - 1.0).abs() < tol);
        assert!((m2 / nf - 1.0).abs() < tol);
        assert!((c / nf).abs() < tol);
    }
}
