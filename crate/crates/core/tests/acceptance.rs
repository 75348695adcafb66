//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use z2sync::diagnostics::correlation::estimate_marginals;
use z2sync::diagnostics::{free_energy_scalar, nishimori_check, pair_correlation, threshold_scan, variational_check, TiOptions};
use z2sync::diagnostics::free_energy::geometric_grid;
use z2sync::diagnostics::scan::monotonicity_violations;
use z2sync::diagnostics::susceptibility::susceptibility;
use z2sync::geometry::build_partition;
use z2sync::gibbs::{exact_posterior, region_hamiltonian, Hamiltonian, RegionTerms, SamplerOptions};
use z2sync::lattice::IntBox;
use z2sync::model::{generate_instance, ModelParams};
use z2sync::multiscale::{build_hierarchy_on, check_scale_conditions, synchronize};
use z2sync::pipeline::{run_pipeline, PipelineConfig};
use z2sync::renorm::{effective_noise_curve, RenormOptions};
use z2sync::sideinfo::build_block_side_info;
use z2sync::stats::power_law_exponent;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn pipeline_config(n: i64, p: f64, eta: f64, seed: u64) -> PipelineConfig {
    PipelineConfig {
        model: ModelParams::new_closed(2, n, p, eta, 12, seed).unwrap(),
        scale: 6,
        kappa: 2,
        t: 0.5,
        renorm: RenormOptions::default(),
        risk_pairs: 200_000,
    }
}

/// Plain `2^n` enumeration of site and pair means of `exp(H)`.
fn brute_force(ham: &Hamiltonian) -> (Vec<f64>, Vec<f64>) {
    let n = ham.len();
    let configs: Vec<Vec<i8>> = (0..1u32 << n)
        .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { 1 } else { -1 }).collect())
        .collect();
    let energies: Vec<f64> = configs.iter().map(|s| ham.energy(s)).collect();
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut site = vec![0.0; n];
    let mut pair = Vec::new();
    for (s, w) in configs.iter().zip(&weights) {
        for i in 0..n {
            site[i] += w * f64::from(s[i]) / z;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            pair.push(configs.iter().zip(&weights).map(|(s, w)| w * f64::from(s[i] * s[j])).sum::<f64>() / z);
        }
    }
    (site, pair)
}

/// Connected region of `size` sites grown from a random vertex.
fn random_region(lat: &IntBox, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut region = vec![rng.random_range(0..lat.len())];
    while region.len() < size {
        let &u = region.choose(rng).unwrap();
        let axis = rng.random_range(0..lat.dim());
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        if let Some(v) = lat.step(u, axis, sign) {
            if !region.contains(&v) {
                region.push(v);
            }
        }
    }
    region.sort_unstable();
    region
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = SamplerOptions { burn_in: 1_000, sweeps: 101_000 };
    let (mut total, mut within2, mut max_z, mut max_enum_gap) = (0usize, 0usize, 0f64, 0f64);
    for r in 0..20u64 {
        let p = [0.1, 0.25][(r % 2) as usize];
        let eta = [0.0, 0.5][(r / 2 % 2) as usize];
        let lambda = [0.0, 0.5][(r / 4 % 2) as usize];
        let inst = generate_instance(&ModelParams::new(2, 4, p, eta, 2, 100 + r).unwrap()).unwrap();
        let size = rng.random_range(4..=8);
        let region = random_region(inst.lattice(), size, &mut rng);
        let ham = region_hamiltonian(&inst, &region, RegionTerms { goe: true, lambda, beta_scale: 1.0 }).unwrap();
        let (site, pair) = brute_force(&ham);
        let exact = exact_posterior(&ham).unwrap();
        let mc = estimate_marginals(&ham, opts, 7 + r, &[r as i64], 100).unwrap();
        let mut k = 0;
        for i in 0..size {
            max_enum_gap = max_enum_gap.max((exact.site_means[i] - site[i]).abs());
            let mut zs = vec![mc.site[i].z_to(site[i])];
            for j in (i + 1)..size {
                max_enum_gap = max_enum_gap.max((exact.pair(i, j) - pair[k]).abs());
                zs.push(mc.pair[k].z_to(pair[k]));
                k += 1;
            }
            for z in zs {
                total += 1;
                within2 += usize::from(z <= 2.0);
                max_z = max_z.max(z);
            }
        }
    }
    let frac = within2 as f64 / total as f64;
    outcome(
        max_z <= 3.0 && frac >= 0.95 && max_enum_gap < 1e-10,
        format!("{total} means, max |z| {max_z:.2}, {:.1}% within 2 sigma, enumeration gap {max_enum_gap:.1e}", 100.0 * frac),
    )
}

fn nishimori() -> Outcome {
    let base = ModelParams::new(2, 9, 0.3, 0.0, 12, 1).unwrap();
    let opts = SamplerOptions { burn_in: 1_000, sweeps: 10_000 };
    let good = nishimori_check(&base, 6, 0.5, 10, opts, 1.0).unwrap();
    let control = nishimori_check(&base, 6, 0.5, 10, opts, 1.5).unwrap();
    let control_z = control.z_second.max(control.z_abs);
    outcome(
        good.pass && control_z > 5.0,
        format!(
            "identity z (first, second, abs) = ({:.2}, {:.2}, {:.2}); beta x1.5 control z = {control_z:.2}",
            good.z_first, good.z_second, good.z_abs
        ),
    )
}

fn exact_recovery() -> Outcome {
    let base = IntBox::centered(2, 13).unwrap();
    let h = build_hierarchy_on(&base, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let theta: Vec<i8> = (0..base.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let mut y = vec![0i8; base.len() * 2];
    for b in 0..base.len() {
        for axis in 0..2 {
            if let Some(c) = base.step(b, axis, 1) {
                y[b * 2 + axis] = theta[b] * theta[c];
            }
        }
    }
    let state = synchronize(&y, &h).unwrap();
    let mut errors = 0usize;
    for a in 0..base.len() {
        for b in 0..base.len() {
            let truth = theta[a] * theta[b];
            errors += usize::from(state.t_tilde(a, b) != truth);
            errors += usize::from(state.t_tilde_at_lca(&h, a, b) != truth);
        }
    }
    outcome(errors == 0, format!("{} blocks, {} ordered pairs checked twice, {errors} errors", base.len(), base.len().pow(2)))
}

fn null_model() -> Outcome {
    let run = run_pipeline(&pipeline_config(30, 0.5, 0.0, 1)).unwrap();
    let risk = run.outcome.risk;
    let risk_z = risk.z_to(0.0);
    let inst = generate_instance(&ModelParams::new_closed(2, 9, 0.5, 0.0, 12, 2).unwrap()).unwrap();
    let part = build_partition(9, 2, 6).unwrap();
    let origin = part.grid().index(&[0, 0]).unwrap();
    let region = part.block(origin).vertices.clone();
    let opts = SamplerOptions { burn_in: 200, sweeps: 20_200 };
    let corr = pair_correlation(&inst, &region, RegionTerms { goe: true, lambda: 0.0, beta_scale: 1.0 }, 4, opts).unwrap();
    let target = 1.0 / region.len() as f64;
    let phi_z = corr.phi_e.z_to(target);
    outcome(
        risk_z <= 3.0 && phi_z <= 3.0,
        format!(
            "risk {:.5} +- {:.5} (z {risk_z:.2}, exact-sum {:.5}); phi_e {:.5} +- {:.5} vs 1/{} (z {phi_z:.2})",
            risk.value,
            risk.se,
            run.outcome.risk_exact,
            corr.phi_e.value,
            corr.phi_e.se,
            region.len()
        ),
    )
}

fn renormalization_direction() -> Outcome {
    let base = ModelParams::new(2, 36, 0.05, 0.3, 12, 1).unwrap();
    let rows = effective_noise_curve(&base, &[6, 12], 40, 0.5, RenormOptions::default()).unwrap();
    let (a, b) = (rows[0].p_hat, rows[1].p_hat);
    let sigma = (a.se.powi(2) + b.se.powi(2)).sqrt();
    outcome(
        b.value <= a.value + 2.0 * sigma,
        format!("p_hat(6) {:.4} +- {:.4}, p_hat(12) {:.4} +- {:.4}, 40 reps", a.value, a.se, b.value, b.se),
    )
}

fn threshold_crossover() -> Outcome {
    let base = pipeline_config(45, 0.05, 0.3, 1);
    let grid = [0.05, 0.08, 0.11, 0.14, 0.17, 0.20];
    let rows = threshold_scan(&base, &grid, 8).unwrap();
    let violations = monotonicity_violations(&rows, 2.0);
    let drop = rows[0].risk.value - rows[rows.len() - 1].risk.value;
    let curve: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.risk.value)).collect();
    outcome(
        violations == 0 && drop >= 0.3,
        format!("risk [{}], drop {drop:.2}, violations beyond 2 sigma {violations}", curve.join(", ")),
    )
}

fn scale_conditions() -> Outcome {
    let one = check_scale_conditions(1, 2).unwrap();
    let big = check_scale_conditions(70, 2).unwrap();
    let tails = [one.a2, one.a3, big.a2, big.a3].iter().map(|c| c.tail_bound).fold(0.0, f64::max);
    outcome(
        one.a2.value > 1.0 / 20.0 && big.all_pass && tails < 1e-6,
        format!("A2(kappa 1) {:.4}, all pass at kappa 70: {}, max tail {tails:.1e}", one.a2.value, big.all_pass),
    )
}

/// `E ln cosh(sqrt(l) z + l)` by composite Simpson on `[-10, 10]`.
fn ln_cosh_gauss(l: f64) -> f64 {
    let m = 4000;
    let (a, b) = (-10.0f64, 10.0f64);
    let h = (b - a) / m as f64;
    let f = |z: f64| {
        let x = l.sqrt() * z + l;
        let lc = x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2;
        lc * (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let inner: f64 = (1..m).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn free_energy_closed_form() -> Outcome {
    let params = ModelParams::new_closed(2, 4, 0.5, 0.0, 1, 1).unwrap();
    let region: Vec<usize> = (0..81).collect();
    let grid = geometric_grid(1.0, 34, 2f64.powf(0.125)).unwrap();
    let opts = TiOptions { sampler: SamplerOptions { burn_in: 100, sweeps: 2_100 }, reps: 16, exact: false };
    let curve = free_energy_scalar(&params, &region, &grid, opts).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for l in [0.25, 1.0] {
        let est = curve.field_only_at(l).unwrap();
        let target = ln_cosh_gauss(l);
        let z = est.z_to(target);
        pass &= z <= 3.0;
        parts.push(format!("lambda {l}: {:.5} +- {:.5} vs {target:.5} (z {z:.2})", est.value, est.se));
    }
    let q_grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let small = ModelParams::new_closed(2, 3, 0.5, 0.0, 1, 1).unwrap();
    let var = variational_check(&small, 0.5, &q_grid, 18, TiOptions { reps: 8, ..opts }).unwrap();
    pass &= var.q_star <= var.q_resolution;
    parts.push(format!("q* {} (resolution {})", var.q_star, var.q_resolution));
    outcome(pass, parts.join("; "))
}

fn psd_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for run in 0..100u64 {
        let p = rng.random_range(0.02..0.45);
        let eta = rng.random_range(0.0..1.5);
        let replicas = rng.random_range(1..=12);
        let sweeps = rng.random_range(1..=200);
        let inst = generate_instance(&ModelParams::new(2, 12, p, eta, 12, 500 + run).unwrap()).unwrap();
        let part = build_partition(12, 2, 6).unwrap();
        let side = build_block_side_info(&inst, &part, rng.random_range(0.0..=1.0)).unwrap();
        let pairs = part.adjacent_pairs();
        let &(b, c, _) = pairs.choose(&mut rng).unwrap();
        let r = susceptibility(&inst, &part, &side, b, c, replicas, SamplerOptions { burn_in: 0, sweeps }).unwrap();
        worst = worst.max(r.op_norm - r.tr3_root).max(r.tr3_root - r.tr2_root);
        failures += usize::from(!r.sandwich);
    }
    outcome(failures == 0 && worst <= 1e-9, format!("100 runs, {failures} violations, worst gap {worst:.2e}"))
}

fn run_binary(args: &[&str], out: &Path, threads: usize) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_z2sync"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out-dir")
        .arg(out)
        .env_clear()
        .output()
        .expect("binary runs");
    assert!(status.status.success());
    let mut bytes = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for name in names {
        bytes.extend(name.file_name().unwrap().to_string_lossy().as_bytes());
        bytes.extend(std::fs::read(name).unwrap());
    }
    bytes
}

fn determinism_and_complexity() -> Outcome {
    let runs: [&[&str]; 2] = [
        &["sync", "--n", "30", "--p", "0.08", "--eta", "0.3", "--seed", "5"],
        &["sweep", "--over", "p", "--grid", "0.05,0.1", "--n", "20", "--reps", "3", "--seed", "6"],
    ];
    let mut identical = true;
    for args in runs {
        let outputs: Vec<Vec<u8>> = [1, 4, 8]
            .iter()
            .map(|&t| {
                let dir = tempfile::tempdir().unwrap();
                run_binary(args, dir.path(), t)
            })
            .collect();
        identical &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    let pools: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&t| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
            pool.install(|| serde_json::to_string(&run_pipeline(&pipeline_config(24, 0.08, 0.3, 3)).unwrap().outcome).unwrap())
        })
        .collect();
    identical &= pools.windows(2).all(|w| w[0] == w[1]);
    let sizes = [30.0, 60.0, 120.0];
    let times: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            (0..3)
                .map(|rep| {
                    let start = Instant::now();
                    run_pipeline(&pipeline_config(n as i64, 0.05, 0.3, 10 + rep)).unwrap();
                    start.elapsed().as_secs_f64()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let exponent = power_law_exponent(&sizes, &times);
    outcome(
        identical && exponent <= 4.3,
        format!(
            "outputs identical across 1/4/8 threads: {identical}; times {:.2}/{:.2}/{:.2} s, exponent {exponent:.2}",
            times[0], times[1], times[2]
        ),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("oracle equivalence", 600, oracle_equivalence),
        ("Nishimori identity", 600, nishimori),
        ("exact recovery path", 60, exact_recovery),
        ("null model", 300, null_model),
        ("renormalization direction", 1_800, renormalization_direction),
        ("threshold crossover", 7_200, threshold_crossover),
        ("scale conditions", 1, scale_conditions),
        ("free-energy closed form", 1_200, free_energy_closed_form),
        ("PSD sandwich", 300, psd_sandwich),
        ("determinism and complexity", 3_600, determinism_and_complexity),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name}: {} [{:.1} s of {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
