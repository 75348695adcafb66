//! Replica overlaps: pair correlations, Monte Carlo marginals and the
//! Nishimori identity between replica-replica and replica-truth overlaps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::build_partition;
use crate::gibbs::{block_hamiltonian, region_hamiltonian, Chain, Hamiltonian, PosteriorOptions, RegionTerms, SamplerOptions};
use crate::model::{generate_instance, LatticeInstance, ModelParams};
use crate::renorm::repetition_seed;
use crate::rng::{stream, Purpose};
use crate::sideinfo::build_block_side_info;
use crate::stats::{batch_means, ks_statistic, mean, mean_se, Estimate};

/// Batches used for batch-means errors.
pub const BATCHES: usize = 40;

/// Run `replicas` independent chains in lockstep; after burn-in call
/// `observe` with all states once per sweep.
pub fn run_replicas<F>(ham: &Hamiltonian, replicas: usize, opts: SamplerOptions, seed: u64, key: &[i64], mut observe: F) -> Result<()>
where
    F: FnMut(&[&[i8]]),
{
    opts.validate()?;
    let mut chains: Vec<Chain> = (0..replicas)
        .map(|r| {
            let mut k = key.to_vec();
            k.push(r as i64);
            Chain::new(ham, stream(seed, Purpose::Sampler, &k))
        })
        .collect();
    for c in chains.iter_mut() {
        c.run(opts.burn_in);
    }
    for _ in 0..opts.measured() {
        for c in chains.iter_mut() {
            c.sweep();
        }
        let states: Vec<&[i8]> = chains.iter().map(|c| c.spins()).collect();
        observe(&states);
    }
    Ok(())
}

/// `|S|^{-1} sum_{x in S} a_x b_x`.
pub fn overlap(a: &[i8], b: &[i8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| i64::from(x * y)).sum::<i64>() as f64 / a.len() as f64
}

/// Replica estimates of the edge and vertex correlation functionals.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorrelationEstimate {
    /// `|A|^{-2} sum_{x,y} <theta_x theta_y>^2 = <R_12^2>`.
    pub phi_e: Estimate,
    /// `|A|^{-1} sum_x <theta_x>^2 = <R_12>`.
    pub phi_v: Estimate,
}

/// Correlation functionals of the region posterior (see
/// [`region_hamiltonian`]) estimated from independent replicas.
pub fn pair_correlation(
    inst: &LatticeInstance,
    region: &[usize],
    terms: RegionTerms,
    replicas: usize,
    opts: SamplerOptions,
) -> Result<CorrelationEstimate> {
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least two replicas"));
    }
    let ham = region_hamiltonian(inst, region, terms)?;
    correlation_of(&ham, replicas, opts, inst.params.seed, &[region.len() as i64, 1])
}

/// Correlation functionals of any posterior.
pub fn correlation_of(ham: &Hamiltonian, replicas: usize, opts: SamplerOptions, seed: u64, key: &[i64]) -> Result<CorrelationEstimate> {
    let mut e_series = Vec::with_capacity(opts.measured());
    let mut v_series = Vec::with_capacity(opts.measured());
    let npairs = (replicas * (replicas - 1) / 2) as f64;
    run_replicas(ham, replicas, opts, seed, key, |s| {
        let (mut e, mut v) = (0.0, 0.0);
        for a in 0..s.len() {
            for b in (a + 1)..s.len() {
                let r = overlap(s[a], s[b]);
                e += r * r;
                v += r;
            }
        }
        e_series.push(e / npairs);
        v_series.push(v / npairs);
    })?;
    Ok(CorrelationEstimate {
        phi_e: batch_means(&e_series, BATCHES),
        phi_v: batch_means(&v_series, BATCHES),
    })
}

/// Monte Carlo marginals with batch-means errors.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub n: usize,
    pub site: Vec<Estimate>,
    /// `<theta_x theta_y>` for `x < y`, row-major over the upper triangle.
    pub pair: Vec<Estimate>,
}

/// Single-chain estimates of `<theta_x>` and `<theta_x theta_y>`.
pub fn estimate_marginals(ham: &Hamiltonian, opts: SamplerOptions, seed: u64, key: &[i64], batches: usize) -> Result<Marginals> {
    let n = ham.len();
    let per = opts.measured() / batches.max(1);
    if per == 0 {
        return Err(Error::param("sweeps", "fewer measured sweeps than batches"));
    }
    let np = n * n.saturating_sub(1) / 2;
    let mut site_b = vec![vec![0.0; batches]; n];
    let mut pair_b = vec![vec![0.0; batches]; np];
    let mut t = 0usize;
    run_replicas(ham, 1, opts, seed, key, |s| {
        let b = t / per;
        t += 1;
        if b >= batches {
            return;
        }
        let x = s[0];
        let mut k = 0;
        for i in 0..n {
            site_b[i][b] += f64::from(x[i]);
            for j in (i + 1)..n {
                pair_b[k][b] += f64::from(x[i] * x[j]);
                k += 1;
            }
        }
    })?;
    let fin = |v: &Vec<f64>| {
        let means: Vec<f64> = v.iter().map(|s| s / per as f64).collect();
        mean_se(&means)
    };
    Ok(Marginals {
        n,
        site: site_b.iter().map(fin).collect(),
        pair: pair_b.iter().map(fin).collect(),
    })
}

/// Per-instance overlap moments.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OverlapMoments {
    pub r12: f64,
    pub r12_sq: f64,
    pub r12_abs: f64,
    pub r10: f64,
    pub r10_sq: f64,
    pub r10_abs: f64,
}

/// Two replicas on the one-block posterior of `block`; `R_10` pools both
/// replicas' overlaps with the planted signs.
pub fn nishimori_moments(
    inst: &LatticeInstance,
    ham: &Hamiltonian,
    region: &[usize],
    opts: SamplerOptions,
    key: &[i64],
    samples: Option<(&mut Vec<f64>, &mut Vec<f64>)>,
) -> Result<OverlapMoments> {
    let truth: Vec<i8> = region.iter().map(|&v| inst.theta(v)).collect();
    let (mut s12, mut s10) = (Vec::new(), Vec::new());
    run_replicas(ham, 2, opts, inst.params.seed, key, |s| {
        s12.push(overlap(s[0], s[1]));
        s10.push(overlap(s[0], &truth));
        s10.push(overlap(s[1], &truth));
    })?;
    let m = |xs: &[f64], f: fn(f64) -> f64| mean(&xs.iter().map(|x| f(*x)).collect::<Vec<_>>());
    let out = OverlapMoments {
        r12: mean(&s12),
        r12_sq: m(&s12, |x| x * x),
        r12_abs: m(&s12, f64::abs),
        r10: mean(&s10),
        r10_sq: m(&s10, |x| x * x),
        r10_abs: m(&s10, f64::abs),
    };
    if let Some((a, b)) = samples {
        a.extend(s12);
        b.extend(s10);
    }
    Ok(out)
}

/// Outcome of the Nishimori comparison over several instances.
#[derive(Clone, Debug, Serialize)]
pub struct NishimoriReport {
    pub instances: usize,
    pub r12: Estimate,
    pub r10: Estimate,
    pub r12_sq: Estimate,
    pub r10_sq: Estimate,
    /// Paired differences `R_12 - R_10` per moment, errors across instances.
    pub diff_first: Estimate,
    pub diff_second: Estimate,
    pub diff_abs: Estimate,
    pub z_first: f64,
    pub z_second: f64,
    pub z_abs: f64,
    /// Two-sample KS statistic between pooled `|R_12|` and `|R_10|` draws.
    pub ks_abs: f64,
    /// Every moment difference within three standard errors.
    pub pass: bool,
}

/// Compare replica-replica and replica-truth overlaps on the one-block
/// posterior of the block at the origin, over `instances` instances.
/// `beta_scale != 1` misspecifies the lattice temperature.
pub fn nishimori_check(
    base: &ModelParams,
    scale: i64,
    t: f64,
    instances: usize,
    opts: SamplerOptions,
    beta_scale: f64,
) -> Result<NishimoriReport> {
    if instances < 2 {
        return Err(Error::param("instances", "need at least two instances"));
    }
    let part = build_partition(base.n, base.d, scale)?;
    let origin: Vec<i64> = vec![0; base.d];
    let block = part.grid().index(&origin).expect("origin block");
    let per: Vec<(OverlapMoments, Vec<f64>, Vec<f64>)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let params = base.with_seed(repetition_seed(base.seed, i)).with_range(2 * scale as usize);
            let inst = generate_instance(&params)?;
            let side = build_block_side_info(&inst, &part, t)?;
            let post = PosteriorOptions { beta_scale, lambda: 0.0 };
            let ham = block_hamiltonian(&inst, &part, &side, block, post)?;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            let m = nishimori_moments(&inst, &ham, &part.block(block).vertices, opts, &[3], Some((&mut a, &mut b)))?;
            Ok((m, a, b))
        })
        .collect::<Result<_>>()?;
    let col = |f: fn(&OverlapMoments) -> f64| per.iter().map(|p| f(&p.0)).collect::<Vec<f64>>();
    let diff = |f: fn(&OverlapMoments) -> f64, g: fn(&OverlapMoments) -> f64| {
        mean_se(&per.iter().map(|p| f(&p.0) - g(&p.0)).collect::<Vec<f64>>())
    };
    let diff_first = diff(|m| m.r12, |m| m.r10);
    let diff_second = diff(|m| m.r12_sq, |m| m.r10_sq);
    let diff_abs = diff(|m| m.r12_abs, |m| m.r10_abs);
    let (z_first, z_second, z_abs) = (diff_first.z_to(0.0), diff_second.z_to(0.0), diff_abs.z_to(0.0));
    let abs12: Vec<f64> = per.iter().flat_map(|p| p.1.iter().map(|x| x.abs())).collect();
    let abs10: Vec<f64> = per.iter().flat_map(|p| p.2.iter().map(|x| x.abs())).collect();
    Ok(NishimoriReport {
        instances,
        r12: mean_se(&col(|m| m.r12)),
        r10: mean_se(&col(|m| m.r10)),
        r12_sq: mean_se(&col(|m| m.r12_sq)),
        r10_sq: mean_se(&col(|m| m.r10_sq)),
        diff_first,
        diff_second,
        diff_abs,
        z_first,
        z_second,
        z_abs,
        ks_abs: ks_statistic(&abs12, &abs10),
        pass: z_first <= 3.0 && z_second <= 3.0 && z_abs <= 3.0,
    })
}
