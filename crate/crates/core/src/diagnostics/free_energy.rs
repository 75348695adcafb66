//! Free energies by thermodynamic integration, and a numerical probe of the
//! variational formula relating the Gaussian-pair free energy to the scalar
//! channel.
//!
//! Free energies include the constant terms of the Hamiltonians (`-lambda/2`
//! per site, `-snr/2` per Gaussian pair), so that the scalar-channel
//! derivative is exactly `phi^v / 2`. Curves are also reported with those
//! constants removed.

use rayon::prelude::*;
use serde::Serialize;

use super::correlation::{run_replicas, BATCHES};
use crate::error::{Error, Result};
use crate::gibbs::{exact_posterior, region_hamiltonian, Hamiltonian, RegionTerms, SamplerOptions};
use crate::model::{generate_instance, LatticeInstance, ModelParams};
use crate::renorm::repetition_seed;
use crate::stats::{batch_means, mean_se, Estimate};

/// How integrands are evaluated.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TiOptions {
    pub sampler: SamplerOptions,
    /// Independent instances; errors come from their spread when `reps >= 2`.
    pub reps: usize,
    /// Use exhaustive enumeration instead of Monte Carlo (small regions only).
    pub exact: bool,
}

impl Default for TiOptions {
    fn default() -> Self {
        Self {
            sampler: SamplerOptions::default(),
            reps: 4,
            exact: false,
        }
    }
}

/// Trapezoid on the full grid against the grid restricted to even indices.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RichardsonPoint {
    pub index: usize,
    pub x: f64,
    pub full: f64,
    pub half: f64,
    pub extrapolated: f64,
    pub discrepancy: f64,
}

/// `f(x) - f(0)` along a grid.
#[derive(Clone, Debug, Serialize)]
pub struct FreeEnergyCurve {
    pub grid: Vec<f64>,
    pub reps: usize,
    pub integrand: Vec<Estimate>,
    pub delta_f: Vec<Estimate>,
    /// `delta_f` with the Hamiltonian constants removed.
    pub delta_f_field_only: Vec<Estimate>,
    pub richardson: Vec<RichardsonPoint>,
}

impl FreeEnergyCurve {
    /// Value at the grid point equal to `x`.
    pub fn at(&self, x: f64) -> Option<Estimate> {
        self.grid.iter().position(|g| (g - x).abs() < 1e-12).map(|i| self.delta_f[i])
    }

    pub fn field_only_at(&self, x: f64) -> Option<Estimate> {
        self.grid.iter().position(|g| (g - x).abs() < 1e-12).map(|i| self.delta_f_field_only[i])
    }

    /// Smallest second difference in units of its error (convexity check).
    pub fn min_second_difference_z(&self) -> f64 {
        let f = &self.delta_f;
        (1..f.len().saturating_sub(1))
            .map(|i| {
                let d = f[i + 1].value - 2.0 * f[i].value + f[i - 1].value;
                let se = (f[i + 1].se.powi(2) + 4.0 * f[i].se.powi(2) + f[i - 1].se.powi(2)).sqrt();
                if d >= 0.0 {
                    f64::INFINITY
                } else if se == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    d / se
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `[0, max r^{-(points-2)}, ..., max r^{-1}, max]`.
pub fn geometric_grid(max: f64, points: usize, ratio: f64) -> Result<Vec<f64>> {
    if !(max > 0.0) || points < 3 || !(ratio > 1.0) {
        return Err(Error::param("grid", "need max > 0, at least 3 points and ratio > 1"));
    }
    let mut g = vec![0.0];
    g.extend((0..points - 1).rev().map(|k| max * ratio.powi(-(k as i32))));
    Ok(g)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "grid must start at 0 and be strictly ascending"));
    }
    Ok(())
}

/// Cumulative trapezoid of `ys` over `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        out[i] = out[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
    }
    out
}

fn richardson(grid: &[f64], ys: &[f64]) -> Vec<RichardsonPoint> {
    let full = trapezoid(grid, ys);
    let idx: Vec<usize> = (0..grid.len()).step_by(2).collect();
    let gx: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    let gy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let half = trapezoid(&gx, &gy);
    idx.iter()
        .zip(half)
        .map(|(&i, h)| RichardsonPoint {
            index: i,
            x: grid[i],
            full: full[i],
            half: h,
            extrapolated: full[i] + (full[i] - h) / 3.0,
            discrepancy: (full[i] - h).abs(),
        })
        .collect()
}

/// Integrate per-instance integrands. `point(rep, i)` returns the integrand
/// at `grid[i]` for instance `rep` with its within-instance error;
/// `constant_rate` is the derivative of the constant terms per site.
fn integrate<F>(grid: &[f64], reps: usize, constant_rate: f64, point: F) -> Result<FreeEnergyCurve>
where
    F: Fn(usize, usize) -> Result<Estimate> + Sync,
{
    check_grid(grid)?;
    if reps == 0 {
        return Err(Error::param("reps", "need at least one repetition"));
    }
    let jobs: Vec<(usize, usize)> = (0..reps).flat_map(|r| (0..grid.len()).map(move |i| (r, i))).collect();
    let vals: Vec<Estimate> = jobs.par_iter().map(|&(r, i)| point(r, i)).collect::<Result<_>>()?;
    let per_rep: Vec<&[Estimate]> = vals.chunks(grid.len()).collect();
    let ys: Vec<Vec<f64>> = per_rep.iter().map(|row| row.iter().map(|e| e.value).collect()).collect();
    let cum: Vec<Vec<f64>> = ys.iter().map(|y| trapezoid(grid, y)).collect();
    let column = |m: &Vec<Vec<f64>>, i: usize| m.iter().map(|row| row[i]).collect::<Vec<f64>>();
    let (integrand, delta_f): (Vec<Estimate>, Vec<Estimate>) = if reps >= 2 {
        (0..grid.len()).map(|i| (mean_se(&column(&ys, i)), mean_se(&column(&cum, i)))).unzip()
    } else {
        // One instance: propagate the within-instance errors through the rule.
        let row = per_rep[0];
        let mut df = vec![Estimate::exact(0.0)];
        for i in 1..grid.len() {
            let se: f64 = (0..=i)
                .map(|j| {
                    let lo = if j > 0 { 0.5 * (grid[j] - grid[j - 1]) } else { 0.0 };
                    let hi = if j < i { 0.5 * (grid[j + 1] - grid[j]) } else { 0.0 };
                    ((lo + hi) * row[j].se).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            df.push(Estimate::new(cum[0][i], se));
        }
        (row.to_vec(), df)
    };
    let mean_y: Vec<f64> = integrand.iter().map(|e| e.value).collect();
    let delta_f_field_only = grid
        .iter()
        .zip(&delta_f)
        .map(|(x, e)| Estimate::new(e.value - constant_rate * x, e.se))
        .collect();
    Ok(FreeEnergyCurve {
        grid: grid.to_vec(),
        reps,
        richardson: richardson(grid, &mean_y),
        integrand,
        delta_f,
        delta_f_field_only,
    })
}

fn rep_instance(params: &ModelParams, rep: usize) -> Result<LatticeInstance> {
    generate_instance(&params.with_seed(repetition_seed(params.seed, rep)))
}

fn check_region(inst: &LatticeInstance, region: &[usize]) -> Result<()> {
    if region.is_empty() {
        return Err(Error::param("region", "region must be non-empty"));
    }
    if region.windows(2).any(|w| w[0] >= w[1]) || region[region.len() - 1] >= inst.num_vertices() {
        return Err(Error::param("region", "region must be an ascending list of box vertices"));
    }
    Ok(())
}

/// `phi^v = |A|^{-1} sum_x <theta_x>^2`.
fn phi_v(ham: &Hamiltonian, opts: &TiOptions, seed: u64, key: &[i64]) -> Result<Estimate> {
    if opts.exact {
        let ex = exact_posterior(ham)?;
        let v = ex.site_means.iter().map(|m| m * m).sum::<f64>() / ex.n as f64;
        return Ok(Estimate::exact(v));
    }
    let mut series = Vec::with_capacity(opts.sampler.measured());
    run_replicas(ham, 2, opts.sampler, seed, key, |s| {
        let n = s[0].len();
        let o: i64 = s[0].iter().zip(s[1]).map(|(a, b)| i64::from(a * b)).sum();
        series.push(o as f64 / n as f64);
    })?;
    Ok(batch_means(&series, BATCHES))
}

/// `sum over pairs of <theta_x theta_y>^2`.
fn pair_sum(ham: &Hamiltonian, pairs: &[(usize, usize)], opts: &TiOptions, seed: u64, key: &[i64]) -> Result<Estimate> {
    if opts.exact {
        let ex = exact_posterior(ham)?;
        return Ok(Estimate::exact(pairs.iter().map(|&(i, j)| ex.pair(i, j).powi(2)).sum()));
    }
    let mut series = Vec::with_capacity(opts.sampler.measured());
    let mut c = vec![0i8; ham.len()];
    run_replicas(ham, 2, opts.sampler, seed, key, |s| {
        for (k, x) in c.iter_mut().enumerate() {
            *x = s[0][k] * s[1][k];
        }
        let v: i64 = pairs.iter().map(|&(i, j)| i64::from(c[i] * c[j])).sum();
        series.push(v as f64);
    })?;
    Ok(batch_means(&series, BATCHES))
}

/// Scalar-channel free energy `f^sc(lambda) - f^sc(0)` per site on `region`
/// (lattice term plus scalar channel, no Gaussian pairs), integrating
/// `phi^v / 2`.
pub fn free_energy_scalar(params: &ModelParams, region: &[usize], lambdas: &[f64], opts: TiOptions) -> Result<FreeEnergyCurve> {
    check_grid(lambdas)?;
    let insts: Vec<LatticeInstance> = (0..opts.reps).map(|r| rep_instance(params, r)).collect::<Result<_>>()?;
    if let Some(inst) = insts.first() {
        check_region(inst, region)?;
    }
    integrate(lambdas, opts.reps, -0.5, |r, i| {
        let lambda = lambdas[i];
        if lambda == 0.0 {
            // No field: the posterior is flip symmetric and every site mean vanishes.
            return Ok(Estimate::exact(0.0));
        }
        let terms = RegionTerms { goe: false, lambda, beta_scale: 1.0 };
        let ham = region_hamiltonian(&insts[r], region, terms)?;
        let v = phi_v(&ham, &opts, insts[r].params.seed, &[6, i as i64])?;
        Ok(Estimate::new(0.5 * v.value, 0.5 * v.se))
    })
}

/// Gaussian-pair free energy `f(eta) - f(0)` per site on `region` (lattice
/// term plus the instance's pairs within range), integrating
/// `(2 |A| L^d)^{-1} sum_pairs <theta_x theta_y>^2`.
pub fn free_energy_eta(params: &ModelParams, region: &[usize], etas: &[f64], opts: TiOptions) -> Result<FreeEnergyCurve> {
    check_grid(etas)?;
    let ld = (params.range_l as f64).powi(params.d as i32);
    let per_eta: Vec<Vec<LatticeInstance>> = etas
        .iter()
        .map(|&eta| {
            let p = ModelParams { eta, ..params.clone() };
            (0..opts.reps).map(|r| rep_instance(&p, r)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let first = &per_eta[0][0];
    check_region(first, region)?;
    let mut pairs = Vec::new();
    for i in 0..region.len() {
        for j in (i + 1)..region.len() {
            if first.goe(region[i], region[j]).is_some() {
                pairs.push((i, j));
            }
        }
    }
    let norm = 2.0 * region.len() as f64 * ld;
    integrate(etas, opts.reps, -(pairs.len() as f64) / norm, |r, i| {
        let inst = &per_eta[i][r];
        let ham = region_hamiltonian(inst, region, RegionTerms::default())?;
        let s = pair_sum(&ham, &pairs, &opts, inst.params.seed, &[7, i as i64])?;
        Ok(Estimate::new(s.value / norm, s.se / norm))
    })
}

/// Both sides of `phi(delta, eta) = sup_q { f^sc(delta, eta q) - eta q^2 / 4 }`,
/// measured relative to `f(delta, 0)` on the whole box.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalReport {
    pub eta: f64,
    pub q_grid: Vec<f64>,
    /// Left side by integration in `eta`.
    pub lhs: Estimate,
    /// `f^sc(eta q) - f^sc(0) - eta q^2 / 4` per grid point.
    pub rhs: Vec<Estimate>,
    pub q_star: f64,
    /// Largest spacing of `q_grid`.
    pub q_resolution: f64,
    pub sup_rhs: Estimate,
    /// `lhs - sup_rhs`.
    pub difference: Estimate,
    /// Largest Richardson discrepancy over both integrations.
    pub discretization: f64,
}

/// Numerical probe of the variational formula on the whole box of `params`
/// (side at most 12), with every pair of the box observed.
pub fn variational_check(params: &ModelParams, eta: f64, q_grid: &[f64], eta_points: usize, opts: TiOptions) -> Result<VariationalReport> {
    let side = 2 * params.n + 1;
    if side > 12 {
        return Err(Error::param("n", "variational check needs a box of side at most 12"));
    }
    if !(eta > 0.0) {
        return Err(Error::param("eta", "eta must be positive"));
    }
    if q_grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::param("q_grid", "q values must lie in [0, 1]"));
    }
    check_grid(q_grid)?;
    let full = params.with_range(side as usize);
    let region: Vec<usize> = (0..full_box_len(&full)).collect();
    let etas = geometric_grid(eta, eta_points, 2f64.powf(0.25))?;
    let lhs_curve = free_energy_eta(&full, &region, &etas, opts)?;
    let lambdas: Vec<f64> = q_grid.iter().map(|q| eta * q).collect();
    let sc = free_energy_scalar(&full, &region, &lambdas, opts)?;
    let rhs: Vec<Estimate> = q_grid
        .iter()
        .zip(&sc.delta_f)
        .map(|(q, f)| Estimate::new(f.value - eta * q * q / 4.0, f.se))
        .collect();
    let best = (0..rhs.len()).fold(0, |b, i| if rhs[i].value > rhs[b].value { i } else { b });
    let lhs = *lhs_curve.delta_f.last().expect("non-empty grid");
    let discretization = lhs_curve
        .richardson
        .iter()
        .chain(&sc.richardson)
        .map(|r| r.discrepancy)
        .fold(0.0, f64::max);
    Ok(VariationalReport {
        eta,
        q_grid: q_grid.to_vec(),
        lhs,
        q_star: q_grid[best],
        q_resolution: q_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max),
        sup_rhs: rhs[best],
        difference: lhs.minus(&rhs[best]),
        rhs,
        discretization,
    })
}

fn full_box_len(p: &ModelParams) -> usize {
    ((2 * p.n + 1) as usize).pow(p.d as u32)
}
