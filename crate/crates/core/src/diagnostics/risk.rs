//! Pairwise-sign risk `|V|^{-2} sum_{u,v} T_uv theta_u theta_v`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::LatticeInstance;
use crate::rng::{stream, Purpose};
use crate::stats::Estimate;

/// Exact summation is used when `|V|^2` is at most this.
pub const RISK_EXACT_LIMIT: usize = 1_000_000;

/// Rank-one estimate `T_uv = s_u s_v` on a vertex set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorizedEstimate {
    /// Box vertex indices, ascending.
    pub vertices: Vec<usize>,
    pub signs: Vec<i8>,
}

impl FactorizedEstimate {
    /// `T_uv` for box vertices `u`, `v` of the set.
    pub fn t(&self, u: usize, v: usize) -> i8 {
        let a = self.vertices.binary_search(&u).expect("vertex in estimate");
        let b = self.vertices.binary_search(&v).expect("vertex in estimate");
        self.signs[a] * self.signs[b]
    }

    /// Exact risk via `(|V|^{-1} sum_u s_u theta_u)^2`.
    pub fn exact_risk(&self, inst: &LatticeInstance) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let s: i64 = self.vertices.iter().zip(&self.signs).map(|(&v, &x)| i64::from(x * inst.theta(v))).sum();
        let m = s as f64 / self.vertices.len() as f64;
        m * m
    }
}

/// Risk of a pairwise estimate on `vertices`: exact when `|V|^2 <=`
/// [`RISK_EXACT_LIMIT`], otherwise the mean over `sample_pairs` uniform
/// ordered pairs (diagonal included) with its standard error.
pub fn risk<F>(inst: &LatticeInstance, vertices: &[usize], t: F, sample_pairs: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(usize, usize) -> i8,
{
    let n = vertices.len();
    if n == 0 {
        return Err(Error::param("vertices", "risk needs a non-empty vertex set"));
    }
    let term = |u: usize, v: usize| f64::from(t(u, v) * inst.theta(u) * inst.theta(v));
    if n.saturating_mul(n) <= RISK_EXACT_LIMIT {
        let mut s = 0.0;
        for &u in vertices {
            for &v in vertices {
                s += term(u, v);
            }
        }
        return Ok(Estimate::exact(s / (n * n) as f64));
    }
    if sample_pairs < 2 {
        return Err(Error::param("risk_pairs", "need at least two sampled pairs"));
    }
    let mut rng = stream(seed, Purpose::RiskPairs, &[n as i64]);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..sample_pairs {
        let x = term(vertices[rng.random_range(0..n)], vertices[rng.random_range(0..n)]);
        s += x;
        s2 += x * x;
    }
    let m = sample_pairs as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean) * m / (m - 1.0);
    Ok(Estimate::new(mean, (var / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, ModelParams};
    use crate::stats::mean_se;

    fn inst(n: i64) -> LatticeInstance {
        generate_instance(&ModelParams::new(2, n, 0.1, 0.0, 1, 3).unwrap()).unwrap()
    }

    #[test]
    fn perfect_estimate_has_unit_risk() {
        let inst = inst(5);
        let vs: Vec<usize> = (0..inst.num_vertices()).collect();
        let r = risk(&inst, &vs, |u, v| inst.theta(u) * inst.theta(v), 10, 0).unwrap();
        assert_eq!(r, Estimate::exact(1.0));
        let big = self::inst(20);
        let vs: Vec<usize> = (0..big.num_vertices()).collect();
        let r = risk(&big, &vs, |u, v| big.theta(u) * big.theta(v), 1000, 0).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn global_sign_flip_invariance() {
        let inst = inst(5);
        let vs: Vec<usize> = (0..inst.num_vertices()).collect();
        let signs: Vec<i8> = vs.iter().map(|&v| if v % 3 == 0 { 1 } else { inst.theta(v) }).collect();
        let a = FactorizedEstimate { vertices: vs.clone(), signs: signs.clone() };
        let b = FactorizedEstimate { vertices: vs.clone(), signs: signs.iter().map(|s| -s).collect() };
        let ra = risk(&inst, &vs, |u, v| a.t(u, v), 10, 0).unwrap();
        let rb = risk(&inst, &vs, |u, v| b.t(u, v), 10, 0).unwrap();
        assert_eq!(ra, rb);
        assert!((ra.value - a.exact_risk(&inst)).abs() < 1e-12);
    }

    #[test]
    fn uniform_random_estimate_is_near_zero() {
        let inst = inst(20);
        let vs: Vec<usize> = (0..inst.num_vertices()).collect();
        let hash = |u: usize, v: usize| {
            let (a, b) = (u.min(v), u.max(v));
            if crate::rng::mix64((a as u64) << 32 | b as u64) & 1 == 0 {
                1
            } else {
                -1
            }
        };
        let r = risk(&inst, &vs, hash, 200_000, 4).unwrap();
        assert!(r.z_to(0.0) < 3.0, "{r}");
    }

    #[test]
    fn subsampled_matches_exact_in_law() {
        let inst = inst(20);
        let vs: Vec<usize> = (0..inst.num_vertices()).collect();
        let signs: Vec<i8> = vs.iter().map(|&v| if v % 4 == 0 { -inst.theta(v) } else { inst.theta(v) }).collect();
        let est = FactorizedEstimate { vertices: vs.clone(), signs };
        let exact = est.exact_risk(&inst);
        let draws: Vec<f64> = (0..20)
            .map(|s| risk(&inst, &vs, |u, v| est.t(u, v), 20_000, s).unwrap().value)
            .collect();
        assert!(mean_se(&draws).z_to(exact) < 3.5);
    }
}
