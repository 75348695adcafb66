use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BlockPartition;
use crate::lattice::IntBox;

/// Side `l_k = 2 kappa (k + 1)^2 + 1` of a level-(k+1) block in level-k units.
pub fn ell(k: usize, kappa: u32) -> i64 {
    2 * i64::from(kappa) * ((k as i64) + 1).pow(2) + 1
}

fn half(k: usize, kappa: u32) -> i64 {
    i64::from(kappa) * ((k as i64) + 1).pow(2)
}

/// One level of the hierarchy.
#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub k: usize,
    #[serde(skip)]
    pub grid: IntBox,
    /// Index of the parent block at level `k + 1` (empty at the top level).
    pub parent: Vec<u32>,
    /// Per axis, per coordinate value (offset from `grid.lo`), the inclusive
    /// range of level-0 coordinates it covers.
    #[serde(skip)]
    pub range0: Vec<Vec<(i64, i64)>>,
    /// Per axis, per coordinate value, the inclusive range of child
    /// coordinates at level `k - 1` (empty at level 0).
    #[serde(skip)]
    pub children: Vec<Vec<(i64, i64)>>,
}

impl Level {
    pub fn num_blocks(&self) -> usize {
        self.grid.len()
    }

    /// Inclusive level-0 range of a coordinate value along an axis.
    pub fn range0(&self, axis: usize, c: i64) -> (i64, i64) {
        self.range0[axis][(c - self.grid.lo()[axis]) as usize]
    }

    /// Inclusive child-coordinate range (level `k - 1`) of a coordinate value.
    pub fn child_range(&self, axis: usize, c: i64) -> (i64, i64) {
        self.children[axis][(c - self.grid.lo()[axis]) as usize]
    }
}

/// Nested block hierarchy over a box of level-0 blocks.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub kappa: u32,
    pub levels: Vec<Level>,
    /// `ancestors[k][b0]`: index at level `k` of the level-k block containing `b0`.
    ancestors: Vec<Vec<u32>>,
}

impl Hierarchy {
    /// Top level `K`: the first level with a single block.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.levels[0].grid.dim()
    }

    pub fn base(&self) -> &IntBox {
        &self.levels[0].grid
    }

    /// Level-k block containing level-0 block `b0`.
    pub fn ancestor(&self, k: usize, b0: usize) -> usize {
        self.ancestors[k][b0] as usize
    }

    /// Lowest level at which two level-0 blocks share an ancestor.
    pub fn lca_level(&self, a: usize, b: usize) -> usize {
        (0..self.levels.len())
            .find(|&k| self.ancestor(k, a) == self.ancestor(k, b))
            .unwrap_or(self.top())
    }
}

/// Hierarchy over the interior blocks of a partition.
pub fn build_hierarchy(part: &BlockPartition, kappa: u32) -> Result<Hierarchy> {
    build_hierarchy_on(part.grid(), kappa)
}

/// Hierarchy over an arbitrary box of level-0 block coordinates.
pub fn build_hierarchy_on(base: &IntBox, kappa: u32) -> Result<Hierarchy> {
    if kappa < 1 {
        return Err(Error::param("kappa", "must be at least 1"));
    }
    let d = base.dim();
    let mut levels = vec![Level {
        k: 0,
        grid: base.clone(),
        parent: Vec::new(),
        range0: (0..d).map(|a| (base.lo()[a]..=base.hi()[a]).map(|c| (c, c)).collect()).collect(),
        children: vec![Vec::new(); d],
    }];
    while levels.last().unwrap().grid.len() > 1 {
        let k = levels.len() - 1;
        let (l, h) = (ell(k, kappa), half(k, kappa));
        let cur = levels.last().unwrap();
        let lo: Vec<i64> = cur.grid.lo().iter().map(|x| (x + h).div_euclid(l)).collect();
        let hi: Vec<i64> = cur.grid.hi().iter().map(|x| (x + h).div_euclid(l)).collect();
        let grid = IntBox::new(&lo, &hi)?;
        let mut children = Vec::with_capacity(d);
        let mut range0 = Vec::with_capacity(d);
        for a in 0..d {
            let (clo, chi) = (cur.grid.lo()[a], cur.grid.hi()[a]);
            let ch: Vec<(i64, i64)> = (lo[a]..=hi[a]).map(|c| ((c * l - h).max(clo), (c * l + h).min(chi))).collect();
            range0.push(ch.iter().map(|&(f, t)| (cur.range0(a, f).0, cur.range0(a, t).1)).collect());
            children.push(ch);
        }
        let parent: Vec<u32> = (0..cur.grid.len())
            .map(|i| {
                let c: Vec<i64> = cur.grid.coord(i).iter().map(|x| (x + h).div_euclid(l)).collect();
                grid.index(&c).expect("parent inside next level") as u32
            })
            .collect();
        levels.last_mut().unwrap().parent = parent;
        levels.push(Level {
            k: k + 1,
            grid,
            parent: Vec::new(),
            range0,
            children,
        });
    }
    let mut ancestors = vec![(0..base.len() as u32).collect::<Vec<u32>>()];
    for k in 0..levels.len() - 1 {
        let next: Vec<u32> = ancestors[k].iter().map(|&i| levels[k].parent[i as usize]).collect();
        ancestors.push(next);
    }
    Ok(Hierarchy {
        kappa,
        levels,
        ancestors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(m: i64) -> IntBox {
        IntBox::centered(2, m).unwrap()
    }

    #[test]
    fn ell_values() {
        assert_eq!((ell(0, 1), ell(1, 1), ell(2, 1)), (3, 9, 19));
        assert_eq!(ell(0, 2), 5);
    }

    #[test]
    fn side_three_has_one_level() {
        let h = build_hierarchy_on(&square(1), 1).unwrap();
        assert_eq!(h.top(), 1);
        assert_eq!(h.levels[1].num_blocks(), 1);
    }

    #[test]
    fn side_27_kappa_1() {
        let h = build_hierarchy_on(&square(13), 1).unwrap();
        assert_eq!(h.top(), 2);
        assert_eq!(h.levels[1].grid.side(0), 9);
        // Every level-1 block is a full 3 x 3 cube.
        for c in -4..=4 {
            let (a, b) = h.levels[1].child_range(0, c);
            assert_eq!(b - a + 1, 3);
        }
        assert_eq!(h.levels[2].range0(0, 0), (-13, 13));
    }

    #[test]
    fn single_block_has_no_levels_above() {
        let h = build_hierarchy_on(&square(0), 1).unwrap();
        assert_eq!(h.top(), 0);
    }

    #[test]
    fn nesting_and_lca() {
        let h = build_hierarchy_on(&square(6), 2).unwrap();
        let base = h.base();
        for b in 0..base.len() {
            for k in 0..=h.top() {
                let lvl = &h.levels[k];
                let c = lvl.grid.coord(h.ancestor(k, b));
                let x = base.coord(b);
                for a in 0..2 {
                    let (lo, hi) = lvl.range0(a, c[a]);
                    assert!(lo <= x[a] && x[a] <= hi);
                }
            }
        }
        let a = base.index(&[0, 0]).unwrap();
        let b = base.index(&[0, 1]).unwrap();
        let c = base.index(&[0, 3]).unwrap();
        assert_eq!(h.lca_level(a, b), 1);
        assert_eq!(h.lca_level(a, c), 2);
        assert_eq!(h.lca_level(a, a), 0);
    }

    #[test]
    fn kappa_zero_rejected() {
        assert!(build_hierarchy_on(&square(2), 0).is_err());
    }
}
