use std::collections::VecDeque;

use serde::Serialize;

use super::hierarchy::Hierarchy;
use crate::error::{Error, Result};
use crate::lattice::IntBox;
use crate::renorm::sign;

/// Level-0 edges `(B, B + e_axis)` of `Xi(b, b + e_axis)` at level `k`: the
/// blocks `B` on the `+e_axis` face of `b` whose checkerboard colour (parity
/// of the face coordinates relative to the face's lowest corner) is even.
/// Returns the level-0 indices of the lower endpoints.
pub fn xi_edges(h: &Hierarchy, k: usize, b: usize, axis: usize) -> Vec<usize> {
    let lvl = &h.levels[k];
    let c = lvl.grid.coord(b);
    let d = h.dim();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for a in 0..d {
        let (l, u) = lvl.range0(a, c[a]);
        if a == axis {
            lo.push(u);
            hi.push(u);
        } else {
            lo.push(l);
            hi.push(u);
        }
    }
    let face = IntBox::new(&lo, &hi).expect("non-empty face");
    let base = h.base();
    face.iter()
        .filter(|x| (x.iter().zip(&lo).map(|(v, l)| v - l).sum::<i64>()) % 2 == 0)
        .map(|x| base.index(&x).expect("face inside base"))
        .collect()
}

/// Level-k synchronization variables on every adjacent level-k pair,
/// flattened as `block * d + axis` (0 where `block + e_axis` is absent).
///
/// At level 0 these are the renormalized observations themselves; above,
/// each is the sign of the sum over `Xi` of `Y W W'` with the running
/// products `W~^(k-1)` of the level below.
pub fn level_sync_vars(h: &Hierarchy, k: usize, edge_signs: &[i8], w_tilde_prev: Option<&[i8]>) -> Vec<i8> {
    let d = h.dim();
    let grid = &h.levels[k].grid;
    let base = h.base();
    let mut out = vec![0i8; grid.len() * d];
    for b in 0..grid.len() {
        for axis in 0..d {
            if grid.step(b, axis, 1).is_none() {
                continue;
            }
            if k == 0 {
                out[b * d + axis] = edge_signs[b * d + axis];
                continue;
            }
            let wt = w_tilde_prev.expect("running products below level k");
            let total: i64 = xi_edges(h, k, b, axis)
                .into_iter()
                .map(|b0| {
                    let b1 = base.step(b0, axis, 1).expect("edge crosses into neighbour");
                    i64::from(edge_signs[b0 * d + axis] * wt[b0] * wt[b1])
                })
                .sum();
            out[b * d + axis] = sign(total);
        }
    }
    out
}

/// Per-level bookkeeping of the synchronization.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LevelStats {
    pub k: usize,
    pub quartets: usize,
    pub incoherent_quartets: usize,
    pub agreeable: usize,
    pub in_largest: usize,
    /// Parents whose spanning-tree assignment failed verification.
    pub reset_parents: usize,
}

/// Block variables `W^(k)` for every level-k block, given the level-k
/// synchronization variables `y`.
pub fn quartets_and_block_vars(h: &Hierarchy, k: usize, y: &[i8]) -> Result<(Vec<i8>, LevelStats)> {
    let d = h.dim();
    let lvl = &h.levels[k];
    if y.len() != lvl.num_blocks() * d {
        return Err(Error::param("y", "length must be blocks * d"));
    }
    let mut w = vec![1i8; lvl.num_blocks()];
    let mut stats = LevelStats { k, ..Default::default() };
    if k >= h.top() {
        return Ok((w, stats));
    }
    let up = &h.levels[k + 1];
    for p in 0..up.num_blocks() {
        let pc = up.grid.coord(p);
        let (lo, hi): (Vec<i64>, Vec<i64>) = (0..d).map(|a| up.child_range(a, pc[a])).unzip();
        let sub = IntBox::new(&lo, &hi)?;
        let global: Vec<usize> = sub.iter().map(|c| lvl.grid.index(&c).expect("child inside level")).collect();
        let yv = |local: usize, axis: usize| y[global[local] * d + axis];

        let mut bad = vec![false; sub.len()];
        for c in 0..sub.len() {
            for i in 0..d {
                let Some(ci) = sub.step(c, i, 1) else { continue };
                for j in (i + 1)..d {
                    let Some(cj) = sub.step(c, j, 1) else { continue };
                    stats.quartets += 1;
                    let prod = yv(c, i) * yv(ci, j) * yv(cj, i) * yv(c, j);
                    if prod < 0 {
                        stats.incoherent_quartets += 1;
                        let cij = sub.step(ci, j, 1).expect("plaquette corner");
                        for q in [c, ci, cj, cij] {
                            bad[q] = true;
                        }
                    }
                }
            }
        }
        stats.agreeable += bad.iter().filter(|b| !**b).count();

        // Components of agreeable children, discovered in lexicographic order;
        // each BFS starts at its component's smallest member.
        let mut comp = vec![usize::MAX; sub.len()];
        let mut tentative = vec![0i8; sub.len()];
        let mut best: Option<(usize, usize)> = None;
        let mut n_comp = 0usize;
        for start in 0..sub.len() {
            if bad[start] || comp[start] != usize::MAX {
                continue;
            }
            let mut size = 0;
            let mut queue = VecDeque::from([start]);
            comp[start] = n_comp;
            tentative[start] = 1;
            while let Some(c) = queue.pop_front() {
                size += 1;
                for axis in 0..d {
                    for s in [-1i64, 1] {
                        let Some(nb) = sub.step(c, axis, s) else { continue };
                        if bad[nb] || comp[nb] != usize::MAX {
                            continue;
                        }
                        let edge = if s > 0 { yv(c, axis) } else { yv(nb, axis) };
                        comp[nb] = n_comp;
                        tentative[nb] = tentative[c] * edge;
                        queue.push_back(nb);
                    }
                }
            }
            if best.is_none_or(|(_, s)| size > s) {
                best = Some((n_comp, size));
            }
            n_comp += 1;
        }
        let Some((chosen, size)) = best else { continue };
        let consistent = (0..sub.len()).all(|c| {
            comp[c] != chosen
                || (0..d).all(|axis| match sub.step(c, axis, 1) {
                    Some(nb) if comp[nb] == chosen => yv(c, axis) == tentative[c] * tentative[nb],
                    _ => true,
                })
        });
        if consistent {
            stats.in_largest += size;
            for c in 0..sub.len() {
                if comp[c] == chosen {
                    w[global[c]] = tentative[c];
                }
            }
        } else {
            stats.reset_parents += 1;
        }
    }
    Ok((w, stats))
}

/// Complete multiscale state.
#[derive(Clone, Debug)]
pub struct MultiscaleState {
    /// `y[k]`: level-k synchronization variables (`block * d + axis`).
    pub y: Vec<Vec<i8>>,
    /// `w[k]`: level-k block variables.
    pub w: Vec<Vec<i8>>,
    /// `w_tilde[k][b0]`: product of `W^(j)` over the ancestors of `b0` at levels `0..=k`.
    pub w_tilde: Vec<Vec<i8>>,
    pub stats: Vec<LevelStats>,
    /// Final relative sign of each level-0 block.
    pub sigma: Vec<i8>,
}

impl MultiscaleState {
    /// Pairwise block-sign estimate `T~_{B1,B2}`.
    pub fn t_tilde(&self, a: usize, b: usize) -> i8 {
        self.sigma[a] * self.sigma[b]
    }

    /// `T~` computed from the running products at the lowest common
    /// ancestor level, as in its definition.
    pub fn t_tilde_at_lca(&self, h: &Hierarchy, a: usize, b: usize) -> i8 {
        let k = h.lca_level(a, b);
        if k == 0 || self.w_tilde.is_empty() {
            return 1;
        }
        let k = k.min(self.w_tilde.len()) - 1;
        self.w_tilde[k][a] * self.w_tilde[k][b]
    }
}

/// Run every level bottom-up on the level-0 edge observations
/// (`block * d + axis`, as produced by [`crate::renorm::RenormInstance::edge_signs`]).
pub fn synchronize(edge_signs: &[i8], h: &Hierarchy) -> Result<MultiscaleState> {
    let d = h.dim();
    let n0 = h.base().len();
    if edge_signs.len() != n0 * d {
        return Err(Error::param("edge_signs", "length must be blocks * d"));
    }
    let mut state = MultiscaleState {
        y: Vec::new(),
        w: Vec::new(),
        w_tilde: Vec::new(),
        stats: Vec::new(),
        sigma: vec![1; n0],
    };
    for k in 0..h.top() {
        let prev = state.w_tilde.last().map(|v| v.as_slice());
        let y = level_sync_vars(h, k, edge_signs, prev);
        let (w, stats) = quartets_and_block_vars(h, k, &y)?;
        let wt: Vec<i8> = (0..n0)
            .map(|b0| prev.map_or(1, |p| p[b0]) * w[h.ancestor(k, b0)])
            .collect();
        state.y.push(y);
        state.w.push(w);
        state.w_tilde.push(wt);
        state.stats.push(stats);
    }
    if let Some(last) = state.w_tilde.last() {
        state.sigma = last.clone();
    }
    Ok(state)
}

/// Honest-edge and good-block frequencies per level.
#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub k: usize,
    pub blocks: usize,
    pub bad_blocks: usize,
    pub bad_fraction: f64,
    /// Reference bound `k^{2d} (2 kappa)^{-(d-1)(k+6)}`.
    pub bound: f64,
    pub sibling_edges: usize,
    pub honest_edges: usize,
}

/// Audit against the block spins: an edge at level k is honest when
/// `sum_Xi Y theta~ theta~' >= (9/10) delta_hat |Xi|`; level-0 blocks are good,
/// and a block above is good when every sibling edge among its children is
/// honest and at most one child is bad.
pub fn honest_good_audit(
    state: &MultiscaleState,
    h: &Hierarchy,
    edge_signs: &[i8],
    tilde_theta: &[i8],
    delta_hat: f64,
) -> Vec<AuditRow> {
    let d = h.dim();
    let base = h.base();
    let kappa = f64::from(h.kappa);
    let mut good_prev = vec![true; base.len()];
    let mut rows = Vec::new();
    for k in 0..=h.top() {
        let lvl = &h.levels[k];
        let good: Vec<bool> = if k == 0 {
            vec![true; lvl.num_blocks()]
        } else {
            let below = &h.levels[k - 1];
            let mut honest_all = vec![true; lvl.num_blocks()];
            let mut bad_children = vec![0usize; lvl.num_blocks()];
            for c in 0..below.num_blocks() {
                let p = below.parent[c] as usize;
                if !good_prev[c] {
                    bad_children[p] += 1;
                }
                for axis in 0..d {
                    if let Some(nb) = below.grid.step(c, axis, 1) {
                        if below.parent[nb] as usize == p && !is_honest(h, k - 1, c, axis, edge_signs, tilde_theta, delta_hat) {
                            honest_all[p] = false;
                        }
                    }
                }
            }
            (0..lvl.num_blocks()).map(|p| honest_all[p] && bad_children[p] <= 1).collect()
        };
        let (mut sib, mut honest) = (0usize, 0usize);
        if k < h.top() {
            for c in 0..lvl.num_blocks() {
                for axis in 0..d {
                    if let Some(nb) = lvl.grid.step(c, axis, 1) {
                        if lvl.parent[nb] == lvl.parent[c] {
                            sib += 1;
                            honest += usize::from(is_honest(h, k, c, axis, edge_signs, tilde_theta, delta_hat));
                        }
                    }
                }
            }
        }
        let bad = good.iter().filter(|g| !**g).count();
        let kf = k as f64;
        rows.push(AuditRow {
            k,
            blocks: lvl.num_blocks(),
            bad_blocks: bad,
            bad_fraction: bad as f64 / lvl.num_blocks() as f64,
            bound: kf.powi(2 * d as i32) * (2.0 * kappa).powf(-((d - 1) as f64) * (kf + 6.0)),
            sibling_edges: sib,
            honest_edges: honest,
        });
        good_prev = good;
    }
    let _ = state;
    rows
}

fn is_honest(h: &Hierarchy, k: usize, b: usize, axis: usize, edge_signs: &[i8], tt: &[i8], delta_hat: f64) -> bool {
    let d = h.dim();
    let base = h.base();
    let xi = xi_edges(h, k, b, axis);
    let total: i64 = xi
        .iter()
        .map(|&b0| {
            let b1 = base.step(b0, axis, 1).expect("edge crosses into neighbour");
            i64::from(edge_signs[b0 * d + axis] * tt[b0] * tt[b1])
        })
        .sum();
    total as f64 >= 0.9 * delta_hat * xi.len() as f64
}
