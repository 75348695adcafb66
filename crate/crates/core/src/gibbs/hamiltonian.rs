use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BlockPartition;
use crate::model::LatticeInstance;
use crate::rng::{stream, Purpose};
use crate::sideinfo::BlockSideInfo;

/// Energy function `H(theta)` of a posterior `prop exp(H)` on `n` spins.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n: usize,
    lattice: Vec<(usize, usize, f64)>,
    pairs: Vec<f64>,
    field: Vec<f64>,
    constant: f64,
    couplings: Vec<f64>,
}

/// Incremental construction of a [`Hamiltonian`].
#[derive(Clone, Debug)]
pub struct HamiltonianBuilder {
    n: usize,
    lattice: Vec<(usize, usize, f64)>,
    pairs: Vec<f64>,
    field: Vec<f64>,
    constant: f64,
}

impl HamiltonianBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            lattice: Vec::new(),
            pairs: vec![0.0; n * n],
            field: vec![0.0; n],
            constant: 0.0,
        }
    }

    /// Lattice coupling `coef * theta_u theta_v`.
    pub fn lattice(&mut self, u: usize, v: usize, coef: f64) -> &mut Self {
        debug_assert!(u != v && u < self.n && v < self.n);
        self.lattice.push((u.min(v), u.max(v), coef));
        self
    }

    /// Gaussian pair coupling `coef * theta_u theta_v`; accumulates.
    pub fn pair(&mut self, u: usize, v: usize, coef: f64) -> &mut Self {
        debug_assert!(u != v);
        self.pairs[u * self.n + v] += coef;
        self.pairs[v * self.n + u] += coef;
        self
    }

    /// External field `h * theta_u`; accumulates.
    pub fn field(&mut self, u: usize, h: f64) -> &mut Self {
        self.field[u] += h;
        self
    }

    pub fn constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn build(self) -> Hamiltonian {
        let mut couplings = self.pairs.clone();
        for &(u, v, c) in &self.lattice {
            couplings[u * self.n + v] += c;
            couplings[v * self.n + u] += c;
        }
        Hamiltonian {
            n: self.n,
            lattice: self.lattice,
            pairs: self.pairs,
            field: self.field,
            constant: self.constant,
            couplings,
        }
    }
}

impl Hamiltonian {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Combined coupling matrix row `x` (zero on the diagonal).
    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.couplings[x * self.n..(x + 1) * self.n]
    }

    pub fn coupling(&self, x: usize, y: usize) -> f64 {
        self.couplings[x * self.n + y]
    }

    pub fn field_at(&self, x: usize) -> f64 {
        self.field[x]
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    /// Lattice couplings `(u, v, coef)` with `u < v`.
    pub fn lattice_terms(&self) -> &[(usize, usize, f64)] {
        &self.lattice
    }

    /// `H(theta)`, constants included.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let n = self.n;
        let mut e = self.constant;
        for &(u, v, c) in &self.lattice {
            e += c * f64::from(spins[u] * spins[v]);
        }
        for u in 0..n {
            let su = f64::from(spins[u]);
            e += self.field[u] * su;
            let row = &self.pairs[u * n..(u + 1) * n];
            for v in (u + 1)..n {
                e += row[v] * su * f64::from(spins[v]);
            }
        }
        e
    }

    /// Local field `h_x` with `H(theta^x) - H(theta) = -2 theta_x h_x`, where
    /// `theta^x` flips spin `x`.
    pub fn local_field(&self, spins: &[i8], x: usize) -> Result<f64> {
        if x >= self.n || spins.len() != self.n {
            return Err(Error::NotFound(format!("site {x} in a region of {} sites", self.n)));
        }
        Ok(self.field_of(spins, x))
    }

    #[inline]
    pub(crate) fn field_of(&self, spins: &[i8], x: usize) -> f64 {
        self.row(x).iter().zip(spins).map(|(j, s)| j * f64::from(*s)).sum::<f64>() + self.field[x]
    }
}

/// Modifiers of block posteriors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorOptions {
    /// Multiplies the lattice inverse temperature (1 is Bayes-optimal).
    pub beta_scale: f64,
    /// Extra scalar side information `y_u = sqrt(lambda) theta_u + z_u`.
    pub lambda: f64,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        Self {
            beta_scale: 1.0,
            lambda: 0.0,
        }
    }
}

/// Which observation families enter a region posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionTerms {
    /// Include the instance's finite-range Gaussian pairs inside the region.
    pub goe: bool,
    /// Scalar channel strength (0 disables it).
    pub lambda: f64,
    pub beta_scale: f64,
}

impl Default for RegionTerms {
    fn default() -> Self {
        Self {
            goe: true,
            lambda: 0.0,
            beta_scale: 1.0,
        }
    }
}

fn lattice_beta(inst: &LatticeInstance, scale: f64) -> Result<f64> {
    let b = inst.params.beta * scale;
    if !b.is_finite() {
        return Err(Error::Domain("posterior is undefined for the noiseless channel (p = 0)".into()));
    }
    Ok(b)
}

/// Add lattice edges with both ends in `region` (sorted vertex list).
fn add_lattice_edges(b: &mut HamiltonianBuilder, inst: &LatticeInstance, region: &[usize], beta: f64) {
    let lat = inst.lattice();
    for (i, &u) in region.iter().enumerate() {
        for axis in 0..lat.dim() {
            if let Some(v) = lat.step(u, axis, 1) {
                if let Ok(j) = region.binary_search(&v) {
                    let y = inst.edge(u, axis).expect("edge inside box");
                    if beta != 0.0 {
                        b.lattice(i, j, beta * f64::from(y));
                    }
                }
            }
        }
    }
}

/// Add the scalar channel on `region`. Noise is keyed by vertex so that all
/// values of `lambda` share it.
fn add_scalar(b: &mut HamiltonianBuilder, inst: &LatticeInstance, region: &[usize], lambda: f64) {
    if lambda <= 0.0 {
        return;
    }
    let amp = lambda.sqrt();
    for (i, &u) in region.iter().enumerate() {
        let mut rng = stream(inst.params.seed, Purpose::Scalar, &inst.lattice().coord(u));
        let z: f64 = rng.sample(StandardNormal);
        let y = amp * f64::from(inst.theta(u)) + z;
        b.field(i, amp * y);
        b.constant(-lambda / 2.0);
    }
}

fn add_block_families(
    b: &mut HamiltonianBuilder,
    part: &BlockPartition,
    side: &BlockSideInfo,
    block: usize,
    region: &[usize],
) {
    let blk = part.block(block);
    let to_region: Vec<usize> = blk
        .vertices
        .iter()
        .map(|v| region.binary_search(v).expect("block inside region"))
        .collect();
    for table in side.tables(block) {
        if table.snr == 0.0 {
            continue;
        }
        let amp = table.snr.sqrt();
        for (i, j, y) in table.pairs() {
            b.pair(to_region[i], to_region[j], amp * y);
            b.constant(-table.snr / 2.0);
        }
    }
}

/// One-block posterior: lattice edges inside `B` plus every side-information
/// family of `B`. Spins are indexed by the block's local positions.
pub fn block_hamiltonian(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    block: usize,
    opts: PosteriorOptions,
) -> Result<Hamiltonian> {
    let region = &part.block(block).vertices;
    let mut b = HamiltonianBuilder::new(region.len());
    add_lattice_edges(&mut b, inst, region, lattice_beta(inst, opts.beta_scale)?);
    add_block_families(&mut b, part, side, block, region);
    add_scalar(&mut b, inst, region, opts.lambda);
    Ok(b.build())
}

/// Two-block posterior on `B cup B'`: lattice edges inside the union plus the
/// side information of both blocks. Spins are indexed by the ascending union
/// returned by [`BlockPartition::union`].
pub fn two_block_hamiltonian(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    first: usize,
    second: usize,
    opts: PosteriorOptions,
) -> Result<Hamiltonian> {
    let region = part.union(first, second);
    let mut b = HamiltonianBuilder::new(region.len());
    add_lattice_edges(&mut b, inst, &region, lattice_beta(inst, opts.beta_scale)?);
    add_block_families(&mut b, part, side, first, &region);
    add_block_families(&mut b, part, side, second, &region);
    add_scalar(&mut b, inst, &region, opts.lambda);
    Ok(b.build())
}

/// Posterior of the signs on an arbitrary region (sorted vertex list) given
/// the lattice observations inside it, optionally the instance's Gaussian
/// pairs inside it (SNR `eta / L^d`), and optionally a scalar channel.
pub fn region_hamiltonian(inst: &LatticeInstance, region: &[usize], terms: RegionTerms) -> Result<Hamiltonian> {
    if region.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("region", "vertex list must be strictly ascending"));
    }
    if region.last().is_some_and(|&v| v >= inst.num_vertices()) {
        return Err(Error::NotFound("region vertex outside the box".into()));
    }
    let mut b = HamiltonianBuilder::new(region.len());
    add_lattice_edges(&mut b, inst, region, lattice_beta(inst, terms.beta_scale)?);
    let snr = inst.params.goe_snr();
    if terms.goe && snr > 0.0 {
        let amp = snr.sqrt();
        for i in 0..region.len() {
            for j in (i + 1)..region.len() {
                if let Some(y) = inst.goe(region[i], region[j]) {
                    b.pair(i, j, amp * f64::from(y));
                    b.constant(-snr / 2.0);
                }
            }
        }
    }
    add_scalar(&mut b, inst, region, terms.lambda);
    Ok(b.build())
}
