use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{block_hamiltonian, two_block_hamiltonian, Hamiltonian, PosteriorOptions};
use crate::error::{Error, Result};
use crate::geometry::BlockPartition;
use crate::model::LatticeInstance;
use crate::rng::{stream, Purpose};
use crate::sideinfo::BlockSideInfo;

/// Sweep counts for heat-bath chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Sweeps discarded before any measurement.
    pub burn_in: usize,
    /// Total sweeps per chain, burn-in included.
    pub sweeps: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            burn_in: 500,
            sweeps: 500,
        }
    }
}

impl SamplerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < self.burn_in {
            return Err(Error::param(
                "sweeps",
                format!("total sweeps {} are fewer than burn-in {}", self.sweeps, self.burn_in),
            ));
        }
        if self.sweeps == 0 {
            return Err(Error::param("sweeps", "must be positive"));
        }
        Ok(())
    }

    /// Measurement sweeps after burn-in.
    pub fn measured(&self) -> usize {
        self.sweeps - self.burn_in
    }
}

#[inline]
fn heat_bath_spin(h: f64, u: f64) -> i8 {
    // P(+1) = e^h / (e^h + e^-h) = 1 / (1 + e^{-2h}).
    if u * (1.0 + (-2.0 * h).exp()) < 1.0 {
        1
    } else {
        -1
    }
}

/// Heat-bath chain with cached local fields.
pub struct Chain<'a> {
    ham: &'a Hamiltonian,
    spins: Vec<i8>,
    fields: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Chain<'a> {
    /// Chain started from uniformly random spins drawn from `rng`.
    pub fn new(ham: &'a Hamiltonian, mut rng: ChaCha8Rng) -> Self {
        let spins: Vec<i8> = (0..ham.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::from_spins(ham, spins, rng)
    }

    pub fn from_spins(ham: &'a Hamiltonian, spins: Vec<i8>, rng: ChaCha8Rng) -> Self {
        let fields = (0..ham.len()).map(|x| ham.field_of(&spins, x)).collect();
        Self { ham, spins, fields, rng }
    }

    /// One systematic scan over all sites.
    pub fn sweep(&mut self) {
        let n = self.ham.len();
        for x in 0..n {
            let new = heat_bath_spin(self.fields[x], self.rng.random::<f64>());
            if new != self.spins[x] {
                self.spins[x] = new;
                let delta = 2.0 * f64::from(new);
                for (f, j) in self.fields.iter_mut().zip(self.ham.row(x)) {
                    *f += delta * j;
                }
            }
        }
    }

    pub fn run(&mut self, sweeps: usize) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn into_spins(self) -> Vec<i8> {
        self.spins
    }
}

/// One systematic heat-bath scan starting from `spins`.
pub fn glauber_sweep(ham: &Hamiltonian, spins: &[i8], rng: &mut ChaCha8Rng) -> Vec<i8> {
    let mut s = spins.to_vec();
    for x in 0..ham.len() {
        let h = ham.field_of(&s, x);
        s[x] = heat_bath_spin(h, rng.random::<f64>());
    }
    s
}

/// An approximate posterior draw on one or two blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSample {
    /// Box vertex indices, ascending.
    pub region: Vec<usize>,
    pub spins: Vec<i8>,
}

impl BlockSample {
    /// Spin at box vertex `v`, if `v` is in the region.
    pub fn spin_at(&self, v: usize) -> Option<i8> {
        self.region.binary_search(&v).ok().map(|i| self.spins[i])
    }
}

fn sampler_key(tag: i64, coords: &[&[i64]], replica: u64) -> Vec<i64> {
    let mut key = vec![tag];
    for c in coords {
        key.extend_from_slice(c);
    }
    key.push(replica as i64);
    key
}

/// Final state of a heat-bath chain on the one-block posterior of `block`.
/// Distinct `replica` values give independent chains; equal ones reproduce.
pub fn sample_block_posterior(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    block: usize,
    opts: SamplerOptions,
    post: PosteriorOptions,
    replica: u64,
) -> Result<BlockSample> {
    opts.validate()?;
    let ham = block_hamiltonian(inst, part, side, block, post)?;
    let key = sampler_key(1, &[&part.block(block).coord], replica);
    let mut chain = Chain::new(&ham, stream(inst.params.seed, Purpose::Sampler, &key));
    chain.run(opts.sweeps);
    Ok(BlockSample {
        region: part.block(block).vertices.clone(),
        spins: chain.into_spins(),
    })
}

/// Final state of a heat-bath chain on the two-block posterior of `B cup B'`.
pub fn sample_two_block_posterior(
    inst: &LatticeInstance,
    part: &BlockPartition,
    side: &BlockSideInfo,
    first: usize,
    second: usize,
    opts: SamplerOptions,
    post: PosteriorOptions,
    replica: u64,
) -> Result<BlockSample> {
    opts.validate()?;
    let ham = two_block_hamiltonian(inst, part, side, first, second, post)?;
    let key = sampler_key(2, &[&part.block(first).coord, &part.block(second).coord], replica);
    let mut chain = Chain::new(&ham, stream(inst.params.seed, Purpose::Sampler, &key));
    chain.run(opts.sweeps);
    Ok(BlockSample {
        region: part.union(first, second),
        spins: chain.into_spins(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::HamiltonianBuilder;

    #[test]
    fn heat_bath_probability() {
        // With field h the +1 probability is 1 / (1 + e^{-2h}).
        let mut b = HamiltonianBuilder::new(1);
        b.field(0, 0.7);
        let h = b.build();
        let mut chain = Chain::new(&h, stream(5, Purpose::Sampler, &[]));
        let n = 200_000;
        let mut plus = 0usize;
        for _ in 0..n {
            chain.sweep();
            plus += usize::from(chain.spins()[0] == 1);
        }
        let p = 1.0 / (1.0 + (-1.4f64).exp());
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((plus as f64 / n as f64) - p).abs() < 4.0 * se);
    }

    #[test]
    fn cached_fields_match_recomputation() {
        let mut b = HamiltonianBuilder::new(6);
        let mut rng = stream(1, Purpose::Synthetic, &[]);
        for u in 0..6 {
            for v in (u + 1)..6 {
                b.pair(u, v, rng.random::<f64>() - 0.5);
            }
            b.field(u, rng.random::<f64>() - 0.5);
        }
        b.lattice(0, 1, 0.8);
        let h = b.build();
        let mut chain = Chain::new(&h, stream(2, Purpose::Sampler, &[]));
        chain.run(50);
        for x in 0..6 {
            assert!((chain.fields[x] - h.field_of(chain.spins(), x)).abs() < 1e-9);
        }
    }

    #[test]
    fn stateless_sweep_matches_chain() {
        let mut b = HamiltonianBuilder::new(4);
        b.lattice(0, 1, 1.0).lattice(1, 2, -0.5).pair(0, 3, 0.3).field(2, 0.2);
        let h = b.build();
        let start = vec![1, -1, 1, -1];
        let mut r1 = stream(3, Purpose::Sampler, &[]);
        let a = glauber_sweep(&h, &start, &mut r1);
        let mut chain = Chain::from_spins(&h, start, stream(3, Purpose::Sampler, &[]));
        chain.sweep();
        assert_eq!(a, chain.spins());
    }

    #[test]
    fn sweeps_below_burn_in_rejected() {
        let opts = SamplerOptions { burn_in: 10, sweeps: 5 };
        assert_eq!(opts.validate().unwrap_err().parameter(), Some("sweeps"));
    }
}
