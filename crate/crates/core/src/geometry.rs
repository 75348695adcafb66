//! Block partition of the box into dilated tiles plus joints.
//!
//! Work is done in integer coordinates. For a scale `L` (a multiple of 6)
//! with `s = L / 6`, the block at block coordinate `a` consists of
//!
//! * the tile `{x : -3s <= x_i - L a_i < 3s for all i}`, and
//! * 2d joints, one per direction `+-e_i`: the closed cube of side `2s`
//!   centred at the dilated edge midpoint, i.e. `2s <= +-(x_i - L a_i) <= 4s`
//!   and `|x_j - L a_j| <= s` for `j != i`.
//!
//! Adjacent blocks share exactly their common joint; other blocks are
//! disjoint. Only blocks that fit entirely inside `[-n, n]^d` are kept.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Coord, IntBox};

/// Direction `+e_axis` (`positive`) or `-e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    /// All 2d directions in the fixed order `-e_0, +e_0, -e_1, ...`.
    pub fn all(d: usize) -> Vec<Direction> {
        (0..d)
            .flat_map(|axis| [false, true].map(|positive| Direction { axis, positive }))
            .collect()
    }

    pub fn index(&self) -> usize {
        2 * self.axis + usize::from(self.positive)
    }

    pub fn sign(&self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }

    pub fn opposite(&self) -> Direction {
        Direction {
            axis: self.axis,
            positive: !self.positive,
        }
    }

    pub fn label(&self) -> String {
        format!("{}e{}", if self.positive { '+' } else { '-' }, self.axis)
    }
}

/// Which part of a block a vertex belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    Core,
    Joint(Direction),
}

/// Classify the offset `r = x - L a` relative to a block anchor, or `None`
/// when `x` is outside the block.
pub fn classify(scale: i64, r: &[i64]) -> Option<Part> {
    let s = scale / 6;
    for axis in 0..r.len() {
        let others_small = r.iter().enumerate().all(|(j, v)| j == axis || v.abs() <= s);
        if !others_small {
            continue;
        }
        if (2 * s..=4 * s).contains(&r[axis]) {
            return Some(Part::Joint(Direction { axis, positive: true }));
        }
        if (-4 * s..=-2 * s).contains(&r[axis]) {
            return Some(Part::Joint(Direction { axis, positive: false }));
        }
    }
    r.iter().all(|v| (-3 * s..3 * s).contains(v)).then_some(Part::Core)
}

/// Offsets of all points of a block relative to its anchor `L a`, in
/// lexicographic order, with their parts.
pub fn block_offsets(scale: i64, d: usize) -> Result<Vec<(Coord, Part)>> {
    check_scale(scale)?;
    let reach = 4 * (scale / 6);
    let cube = IntBox::centered(d, reach)?;
    Ok(cube.iter().filter_map(|r| classify(scale, &r).map(|p| (r, p))).collect())
}

fn check_scale(scale: i64) -> Result<()> {
    if scale < 6 || scale % 6 != 0 {
        return Err(Error::param("scale", format!("must be a positive multiple of 6, got {scale}")));
    }
    Ok(())
}

/// One interior block.
#[derive(Clone, Debug)]
pub struct Block {
    pub coord: Coord,
    /// Vertex indices of the box lattice, ascending.
    pub vertices: Vec<usize>,
    /// Part of each vertex, aligned with `vertices`.
    pub parts: Vec<Part>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Local position of a box vertex in this block.
    pub fn local(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Local positions of the joint towards `dir`, ascending.
    pub fn joint_local(&self, dir: Direction) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parts[i] == Part::Joint(dir)).collect()
    }

    /// Local positions outside the joint towards `dir`, ascending.
    pub fn minus_local(&self, dir: Direction) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parts[i] != Part::Joint(dir)).collect()
    }

    /// Local positions of the core (outside every joint), ascending.
    pub fn core_local(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parts[i] == Part::Core).collect()
    }
}

/// Partition of `[-n, n]^d` into interior blocks at one scale.
#[derive(Clone, Debug)]
pub struct BlockPartition {
    pub scale: i64,
    lattice: IntBox,
    grid: IntBox,
    blocks: Vec<Block>,
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

/// Build the interior block partition. Requires `scale` to be a positive
/// multiple of 6 and `2n + 1 >= 3 scale`.
pub fn build_partition(n: i64, d: usize, scale: i64) -> Result<BlockPartition> {
    check_scale(scale)?;
    if d < 2 {
        return Err(Error::param("d", "must be at least 2"));
    }
    if 2 * n + 1 < 3 * scale {
        return Err(Error::Geometry(format!(
            "box side {} is smaller than three block scales ({})",
            2 * n + 1,
            3 * scale
        )));
    }
    let reach = 4 * (scale / 6);
    let m = (n - reach).div_euclid(scale);
    let lattice = IntBox::centered(d, n)?;
    let grid = IntBox::centered(d, m)?;
    let offsets = block_offsets(scale, d)?;
    let mut parent = vec![NO_PARENT; lattice.len()];
    let mut blocks = Vec::with_capacity(grid.len());
    for (b, a) in grid.iter().enumerate() {
        let mut vertices = Vec::with_capacity(offsets.len());
        let mut parts = Vec::with_capacity(offsets.len());
        for (r, part) in &offsets {
            let x: Coord = a.iter().zip(r).map(|(ai, ri)| scale * ai + ri).collect();
            let v = lattice
                .index(&x)
                .ok_or_else(|| Error::Geometry("interior block leaves the box".into()))?;
            vertices.push(v);
            parts.push(*part);
            if parent[v] == NO_PARENT {
                parent[v] = b as u32;
            }
        }
        blocks.push(Block { coord: a, vertices, parts });
    }
    Ok(BlockPartition {
        scale,
        lattice,
        grid,
        blocks,
        parent,
    })
}

impl BlockPartition {
    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice(&self) -> &IntBox {
        &self.lattice
    }

    /// Box of interior block coordinates.
    pub fn grid(&self) -> &IntBox {
        &self.grid
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, b: usize) -> &Block {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Neighbour of block `b` in direction `dir`, if it is interior.
    pub fn neighbor(&self, b: usize, dir: Direction) -> Option<usize> {
        self.grid.step(b, dir.axis, dir.sign())
    }

    /// Interior adjacent pairs `(b, b + e_axis)` in lexicographic order.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for b in 0..self.num_blocks() {
            for axis in 0..self.dim() {
                if let Some(c) = self.grid.step(b, axis, 1) {
                    out.push((b, c, axis));
                }
            }
        }
        out
    }

    /// Canonical parent block of a vertex: the lexicographically smallest
    /// interior block containing it.
    pub fn parent(&self, v: usize) -> Option<usize> {
        let p = self.parent[v];
        (p != NO_PARENT).then_some(p as usize)
    }

    /// Vertices covered by some interior block, ascending.
    pub fn covered(&self) -> Vec<usize> {
        (0..self.lattice.len()).filter(|&v| self.parent[v] != NO_PARENT).collect()
    }

    /// Vertices of the union of two blocks, ascending.
    pub fn union(&self, b: usize, c: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks[b].vertices.iter().chain(&self.blocks[c].vertices).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Write `vertex, block, part` rows (one per block membership).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "block", "part"])?;
        let join = |c: &[i64]| c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        for block in &self.blocks {
            for (v, part) in block.vertices.iter().zip(&block.parts) {
                let label = match part {
                    Part::Core => "core".to_string(),
                    Part::Joint(dir) => format!("joint{}", dir.label()),
                };
                w.write_record([join(&self.lattice.coord(*v)), join(&block.coord), label])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Joint-to-block size ratio at one scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaReport {
    pub scale: i64,
    pub d: usize,
    pub block_size: usize,
    pub joint_size: usize,
    /// `|B cap B'| / |B|` from exact lattice counts.
    pub exact: f64,
    /// Continuum limit `1 / (3^d + d)`: joints straddle the tile face.
    pub limit: f64,
    /// `1 / (3^d + 2d)`, the value obtained if joints sat entirely outside the tile.
    pub outside_joint_candidate: f64,
}

/// Exact `|B cap B'| / |B|` at the given scale with both limiting candidates.
pub fn alpha_ratio(scale: i64, d: usize) -> Result<AlphaReport> {
    let offsets = block_offsets(scale, d)?;
    let probe = Direction { axis: 0, positive: true };
    let joint = offsets.iter().filter(|(_, p)| *p == Part::Joint(probe)).count();
    let pow3 = 3f64.powi(d as i32);
    Ok(AlphaReport {
        scale,
        d,
        block_size: offsets.len(),
        joint_size: joint,
        exact: joint as f64 / offsets.len() as f64,
        limit: 1.0 / (pow3 + d as f64),
        outside_joint_candidate: 1.0 / (pow3 + 2.0 * d as f64),
    })
}
