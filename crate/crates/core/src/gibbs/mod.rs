//! Posterior measures on finite regions and their samplers.
//!
//! A [`Hamiltonian`] collects the lattice term `beta * sum Y_uv theta_u theta_v`,
//! Gaussian pair terms `sqrt(snr) Y_uv theta_u theta_v - snr / 2` and scalar
//! terms `sqrt(lambda) y_u theta_u - lambda / 2`. Constants do not affect
//! sampling but enter the log partition function.

mod exact;
mod hamiltonian;
mod sampler;

pub use exact::{exact_posterior, ExactPosterior, MAX_EXACT_SITES};
pub use hamiltonian::{
    block_hamiltonian, region_hamiltonian, two_block_hamiltonian, Hamiltonian, HamiltonianBuilder, PosteriorOptions,
    RegionTerms,
};
pub use sampler::{
    glauber_sweep, sample_block_posterior, sample_two_block_posterior, BlockSample, Chain, SamplerOptions,
};
