//! Observation model: planted signs on `[-n, n]^d`, noisy nearest-neighbour
//! parities and finite-range Gaussian side information.

use bitvec::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Coord, IntBox};
use crate::rng::{stream, Purpose};

/// Inverse temperature matched to flip probability `p`, for `0 < p < 1/2`.
pub fn beta_of(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Domain(format!("beta_of needs 0 < p < 1/2, got {p}")));
    }
    Ok(0.5 * ((1.0 - p) / p).ln())
}

/// Parameters of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub n: i64,
    pub p: f64,
    pub delta: f64,
    pub eta: f64,
    pub range_l: usize,
    pub beta: f64,
    pub seed: u64,
}

impl ModelParams {
    /// Validated parameters with `0 < p < 1/2`.
    pub fn new(d: usize, n: i64, p: f64, eta: f64, range_l: usize, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::param("p", format!("must lie in (0, 1/2), got {p}")));
        }
        Self::build(d, n, p, eta, range_l, seed)
    }

    /// Like [`ModelParams::new`] but also admits the degenerate channels
    /// `p = 0` (noiseless, `beta = inf`) and `p = 1/2` (pure noise, `beta = 0`).
    pub fn new_closed(d: usize, n: i64, p: f64, eta: f64, range_l: usize, seed: u64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::param("p", format!("must lie in [0, 1/2], got {p}")));
        }
        Self::build(d, n, p, eta, range_l, seed)
    }

    fn build(d: usize, n: i64, p: f64, eta: f64, range_l: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("must be at least 2, got {d}")));
        }
        if n < 1 {
            return Err(Error::param("n", format!("must be at least 1, got {n}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be finite and >= 0, got {eta}")));
        }
        if range_l < 1 {
            return Err(Error::param("range_l", "must be at least 1"));
        }
        let beta = if p == 0.0 {
            f64::INFINITY
        } else if p == 0.5 {
            0.0
        } else {
            beta_of(p)?
        };
        Ok(Self {
            d,
            n,
            p,
            delta: 1.0 - 2.0 * p,
            eta,
            range_l,
            beta,
            seed,
        })
    }

    /// Same parameters with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Same parameters with a different Gaussian range.
    pub fn with_range(&self, range_l: usize) -> Self {
        Self { range_l, ..self.clone() }
    }

    /// Signal-to-noise ratio per Gaussian pair, `eta / L^d`.
    pub fn goe_snr(&self) -> f64 {
        self.eta / (self.range_l as f64).powi(self.d as i32)
    }
}

/// Offsets `o` with `|o|_inf <= L` and `o` lexicographically positive: one
/// representative per unordered pair `{u, u + o}`.
#[derive(Clone, Debug)]
pub struct HalfStencil {
    range: i64,
    offsets: Vec<Coord>,
    lookup: Vec<i32>,
    cube: IntBox,
}

impl HalfStencil {
    pub fn new(d: usize, range: usize) -> Result<Self> {
        let r = range as i64;
        let cube = IntBox::centered(d, r)?;
        let mut lookup = vec![-1i32; cube.len()];
        let mut offsets = Vec::new();
        for (i, o) in cube.iter().enumerate() {
            if o.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                lookup[i] = offsets.len() as i32;
                offsets.push(o);
            }
        }
        Ok(Self {
            range: r,
            offsets,
            lookup,
            cube,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Coord] {
        &self.offsets
    }

    pub fn range(&self) -> i64 {
        self.range
    }

    /// Position of offset `o` in the stencil, if `o` is a stored representative.
    pub fn position(&self, o: &[i64]) -> Option<usize> {
        let i = self.cube.index(o)?;
        let k = self.lookup[i];
        (k >= 0).then_some(k as usize)
    }
}

/// Gaussian side information `Y_uv = sqrt(eta / L^d) theta_u theta_v + Z_uv`
/// on unordered pairs `u != v` with `|u - v|_inf <= L`.
#[derive(Clone, Debug)]
pub struct GoeTable {
    stencil: HalfStencil,
    values: Vec<f32>,
}

impl GoeTable {
    pub fn stencil(&self) -> &HalfStencil {
        &self.stencil
    }

    /// Raw table: row `u` holds the stencil entries of vertex `u`; pairs that
    /// leave the box are NaN.
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// One realization of the planted model.
#[derive(Clone, Debug)]
pub struct LatticeInstance {
    pub params: ModelParams,
    lattice: IntBox,
    theta: BitVec<u64, Lsb0>,
    edges: BitVec<u64, Lsb0>,
    goe: GoeTable,
}

impl LatticeInstance {
    pub fn lattice(&self) -> &IntBox {
        &self.lattice
    }

    pub fn num_vertices(&self) -> usize {
        self.lattice.len()
    }

    /// Planted sign at vertex index `u`.
    #[inline]
    pub fn theta(&self, u: usize) -> i8 {
        if self.theta[u] {
            1
        } else {
            -1
        }
    }

    pub fn theta_vec(&self) -> Vec<i8> {
        (0..self.num_vertices()).map(|u| self.theta(u)).collect()
    }

    /// Observation on the edge `{u, u + e_axis}`, if that edge lies in the box.
    #[inline]
    pub fn edge(&self, u: usize, axis: usize) -> Option<i8> {
        self.lattice.step(u, axis, 1)?;
        Some(if self.edges[u * self.params.d + axis] { 1 } else { -1 })
    }

    /// Observation on `{u, v}` when the two are nearest neighbours.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<i8> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        (0..self.params.d).find_map(|axis| match self.lattice.step(a, axis, 1) {
            Some(w) if w == b => self.edge(a, axis),
            _ => None,
        })
    }

    /// Gaussian observation on `{u, v}`, if `u != v` and both are in range.
    pub fn goe(&self, u: usize, v: usize) -> Option<f32> {
        if u == v {
            return None;
        }
        let cu = self.lattice.coord(u);
        let cv = self.lattice.coord(v);
        let o: Coord = cv.iter().zip(&cu).map(|(a, b)| a - b).collect();
        let (row, k) = match self.goe.stencil.position(&o) {
            Some(k) => (u, k),
            None => {
                let neg: Coord = o.iter().map(|x| -x).collect();
                (v, self.goe.stencil.position(&neg)?)
            }
        };
        let y = self.goe.values[row * self.goe.stencil.len() + k];
        (!y.is_nan()).then_some(y)
    }

    pub fn goe_table(&self) -> &GoeTable {
        &self.goe
    }

    /// Assemble an instance from raw parts (used by deserialization).
    pub fn from_parts(params: ModelParams, theta: Vec<i8>, edges: Vec<i8>, goe_values: Vec<f32>) -> Result<Self> {
        let lattice = IntBox::centered(params.d, params.n)?;
        let stencil = HalfStencil::new(params.d, params.range_l)?;
        if theta.len() != lattice.len()
            || edges.len() != lattice.len() * params.d
            || goe_values.len() != lattice.len() * stencil.len()
        {
            return Err(Error::Format("instance section lengths do not match parameters".into()));
        }
        Ok(Self {
            theta: theta.iter().map(|&s| s > 0).collect(),
            edges: edges.iter().map(|&s| s > 0).collect(),
            goe: GoeTable {
                stencil,
                values: goe_values,
            },
            lattice,
            params,
        })
    }

    /// Edge observations flattened as `u * d + axis` (absent edges read +1).
    pub fn edge_vec(&self) -> Vec<i8> {
        self.edges.iter().map(|b| if *b { 1 } else { -1 }).collect()
    }
}

/// Draw a planted instance. Every random quantity comes from a stream keyed
/// by the seed and its lattice coordinate, so the result is independent of
/// the rayon thread count.
pub fn generate_instance(params: &ModelParams) -> Result<LatticeInstance> {
    let lattice = IntBox::centered(params.d, params.n)?;
    let theta: Vec<i8> = (0..lattice.len())
        .into_par_iter()
        .map(|u| {
            let mut rng = stream(params.seed, Purpose::Theta, &lattice.coord(u));
            if rng.random::<bool>() {
                1
            } else {
                -1
            }
        })
        .collect();
    observe(params, &lattice, &theta)
}

/// Generate the observations of a fixed planted configuration.
pub fn observe(params: &ModelParams, lattice: &IntBox, theta: &[i8]) -> Result<LatticeInstance> {
    let d = params.d;
    let edges: Vec<i8> = (0..lattice.len())
        .into_par_iter()
        .flat_map_iter(|u| {
            let mut rng = stream(params.seed, Purpose::Edge, &lattice.coord(u));
            (0..d)
                .map(|axis| {
                    let flip = rng.random::<f64>() < params.p;
                    match lattice.step(u, axis, 1) {
                        Some(v) => {
                            let s = theta[u] * theta[v];
                            if flip {
                                -s
                            } else {
                                s
                            }
                        }
                        None => 1,
                    }
                })
                .collect::<Vec<i8>>()
        })
        .collect();

    let stencil = HalfStencil::new(d, params.range_l)?;
    let amp = params.goe_snr().sqrt();
    let goe_values: Vec<f32> = (0..lattice.len())
        .into_par_iter()
        .flat_map_iter(|u| {
            let cu = lattice.coord(u);
            let mut rng = stream(params.seed, Purpose::Goe, &cu);
            stencil
                .offsets()
                .iter()
                .map(|o| {
                    let z: f64 = rng.sample(StandardNormal);
                    let cv: Coord = cu.iter().zip(o).map(|(a, b)| a + b).collect();
                    match lattice.index(&cv) {
                        Some(v) => (amp * f64::from(theta[u] * theta[v]) + z) as f32,
                        None => f32::NAN,
                    }
                })
                .collect::<Vec<f32>>()
        })
        .collect();

    LatticeInstance::from_parts(params.clone(), theta.to_vec(), edges, goe_values)
}
