use super::hamiltonian::Hamiltonian;
use crate::error::{Error, Result};

/// Largest region handled by exhaustive enumeration.
pub const MAX_EXACT_SITES: usize = 22;

/// Exact marginals of a posterior on a small region.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    pub n: usize,
    /// `<theta_x>`.
    pub site_means: Vec<f64>,
    /// `<theta_x theta_y>`, row-major `n x n`, ones on the diagonal.
    pub pair_means: Vec<f64>,
    /// `ln sum_theta 2^{-n} exp(H(theta))`.
    pub log_z: f64,
}

impl ExactPosterior {
    pub fn pair(&self, x: usize, y: usize) -> f64 {
        self.pair_means[x * self.n + y]
    }
}

/// Visit every configuration in Gray-code order, calling `visit(spins, H)`.
fn gray_walk<F: FnMut(&[i8], f64)>(ham: &Hamiltonian, mut visit: F) {
    let n = ham.len();
    let mut spins = vec![1i8; n];
    let mut fields: Vec<f64> = (0..n).map(|x| ham.field_of(&spins, x)).collect();
    let mut energy = ham.energy(&spins);
    visit(&spins, energy);
    for k in 1u64..(1u64 << n) {
        let x = k.trailing_zeros() as usize;
        energy -= 2.0 * f64::from(spins[x]) * fields[x];
        spins[x] = -spins[x];
        let delta = 2.0 * f64::from(spins[x]);
        for (f, j) in fields.iter_mut().zip(ham.row(x)) {
            *f += delta * j;
        }
        visit(&spins, energy);
    }
}

/// Exhaustive enumeration of the posterior `prop exp(H)`.
pub fn exact_posterior(ham: &Hamiltonian) -> Result<ExactPosterior> {
    let n = ham.len();
    if n > MAX_EXACT_SITES {
        return Err(Error::TooLarge(format!("exact enumeration limited to {MAX_EXACT_SITES} sites, got {n}")));
    }
    let mut h_max = f64::NEG_INFINITY;
    gray_walk(ham, |_, e| h_max = h_max.max(e));
    let mut z = 0.0;
    let mut site = vec![0.0; n];
    let mut pair = vec![0.0; n * n];
    gray_walk(ham, |s, e| {
        let w = (e - h_max).exp();
        z += w;
        for x in 0..n {
            let wx = w * f64::from(s[x]);
            site[x] += wx;
            let row = &mut pair[x * n..(x + 1) * n];
            for y in (x + 1)..n {
                row[y] += wx * f64::from(s[y]);
            }
        }
    });
    for x in 0..n {
        site[x] /= z;
        pair[x * n + x] = 1.0;
        for y in (x + 1)..n {
            let v = pair[x * n + y] / z;
            pair[x * n + y] = v;
            pair[y * n + x] = v;
        }
    }
    Ok(ExactPosterior {
        n,
        site_means: site,
        pair_means: pair,
        log_z: h_max + z.ln() - n as f64 * std::f64::consts::LN_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::HamiltonianBuilder;

    #[test]
    fn two_spin_closed_form() {
        // H = J s0 s1 + h s0: Z/4 = (e^{J+h} + e^{-J-h} + e^{-J+h} + e^{J-h}) / 4.
        let (j, h) = (0.8, -0.3);
        let mut b = HamiltonianBuilder::new(2);
        b.lattice(0, 1, j).field(0, h);
        let ex = exact_posterior(&b.build()).unwrap();
        let z = (j + h).exp() + (-j - h).exp() + (-j + h).exp() + (j - h).exp();
        assert!((ex.log_z - (z / 4.0).ln()).abs() < 1e-12);
        let m0 = ((j + h).exp() - (-j - h).exp() + (-j + h).exp() - (j - h).exp()) / z;
        assert!((ex.site_means[0] - m0).abs() < 1e-12);
        let c = ((j + h).exp() + (j - h).exp() - (-j + h).exp() - (-j - h).exp()) / z;
        assert!((ex.pair(0, 1) - c).abs() < 1e-12);
    }

    #[test]
    fn empty_hamiltonian_is_uniform() {
        let h = HamiltonianBuilder::new(5).build();
        let ex = exact_posterior(&h).unwrap();
        assert!(ex.log_z.abs() < 1e-12);
        assert!(ex.site_means.iter().all(|m| m.abs() < 1e-12));
        assert!((ex.pair(1, 3)).abs() < 1e-12);
    }

    #[test]
    fn constant_shifts_log_z() {
        let mut b = HamiltonianBuilder::new(3);
        b.lattice(0, 2, 0.4).constant(-1.25);
        let ex = exact_posterior(&b.build()).unwrap();
        assert!((ex.log_z - ((0.4f64).cosh().ln() - 1.25)).abs() < 1e-12);
    }

    #[test]
    fn too_many_sites_rejected() {
        let h = HamiltonianBuilder::new(MAX_EXACT_SITES + 1).build();
        assert!(matches!(exact_posterior(&h), Err(Error::TooLarge(_))));
    }
}
