//! Command-line driver: `gen`, `sync`, `sweep`, `diag` and `check-scales`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::diagnostics::free_energy::{geometric_grid, free_energy_scalar, variational_check, TiOptions};
use crate::diagnostics::locking::locking_deficit;
use crate::diagnostics::scan::scan_point;
use crate::diagnostics::susceptibility::susceptibility;
use crate::diagnostics::{nishimori_check, pair_correlation};
use crate::error::{Error, Result};
use crate::geometry::{alpha_ratio, build_partition, BlockPartition, Direction};
use crate::gibbs::RegionTerms;
use crate::io::{save_instance, CsvSink, Manifest, Record};
use crate::model::generate_instance;
use crate::multiscale::check_scale_conditions;
use crate::pipeline::{run_pipeline, PipelineOutcome};
use crate::renorm::{effective_noise_curve, overlap_report};
use crate::sideinfo::build_block_side_info;

#[derive(Debug, Parser)]
#[command(name = "z2sync", version, about = "Z2 synchronization on lattice boxes")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides of configuration keys. Flags beat environment variables, which
/// beat the config file.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<i64>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub range_l: Option<usize>,
    #[arg(long, global = true)]
    pub scale: Option<i64>,
    #[arg(long, global = true)]
    pub kappa: Option<u32>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub sweeps: Option<usize>,
    #[arg(long, global = true)]
    pub measure: Option<usize>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub instances: Option<usize>,
    #[arg(long, global = true)]
    pub risk_pairs: Option<usize>,
    #[arg(long, global = true)]
    pub beta_scale: Option<f64>,
    /// Any configuration key, e.g. `--set p_grid=0.05,0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw an instance and save it in binary form.
    Gen,
    /// Run the full pipeline once and report its risk.
    Sync,
    /// Repeat the pipeline over a grid, flushing rows after every point.
    Sweep {
        #[arg(long, value_enum)]
        over: SweepAxis,
        /// Comma-separated grid; defaults to `p_grid` or `scale_grid`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run one diagnostic.
    Diag {
        #[arg(long, value_enum)]
        kind: DiagKind,
    },
    /// Evaluate the scale conditions of the multiscale scheme.
    CheckScales,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    P,
    Scale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiagKind {
    Nishimori,
    PairCorr,
    Overlaps,
    Locking,
    Susceptibility,
    FreeEnergy,
    Variational,
    EffectiveNoise,
    Partition,
    Alpha,
    Audit,
}

impl DiagKind {
    fn name(self) -> &'static str {
        match self {
            DiagKind::Nishimori => "nishimori",
            DiagKind::PairCorr => "pair_corr",
            DiagKind::Overlaps => "overlaps",
            DiagKind::Locking => "locking",
            DiagKind::Susceptibility => "susceptibility",
            DiagKind::FreeEnergy => "free_energy",
            DiagKind::Variational => "variational",
            DiagKind::EffectiveNoise => "effective_noise",
            DiagKind::Partition => "partition",
            DiagKind::Alpha => "alpha",
            DiagKind::Audit => "audit",
        }
    }
}

/// Defaults, then the config file, then `env`, then flags.
pub fn resolve_config<I>(flags: &Flags, env: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env(env)?;
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = &flags.$field {
                cfg.set(stringify!($field), &v.to_string())?;
            })*
        };
    }
    flag!(seed, threads, d, n, p, eta, range_l, scale, kappa, t, burn_in, sweeps, measure, replicas, reps, instances, risk_pairs, beta_scale);
    if let Some(dir) = &flags.out_dir {
        cfg.out_dir = dir.clone();
    }
    for kv in &flags.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::param("set", format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

fn outcome_records(o: &PipelineOutcome, params: &str) -> Vec<Record> {
    let mut rows = vec![
        Record::estimate("risk", params, o.risk),
        Record::exact("risk_exact", params, o.risk_exact),
        Record::exact("p_hat", params, o.p_hat),
        Record::exact("delta_hat", params, o.delta_hat),
        Record::exact("disagreements", params, o.disagreements as f64),
        Record::exact("renormalized_edges", params, o.edges as f64),
        Record::exact("blocks", params, o.blocks as f64),
        Record::exact("covered_vertices", params, o.covered as f64),
    ];
    for s in &o.levels {
        let k = s.k;
        rows.push(Record::exact(format!("level{k}_quartets"), params, s.quartets as f64));
        rows.push(Record::exact(format!("level{k}_incoherent_quartets"), params, s.incoherent_quartets as f64));
        rows.push(Record::exact(format!("level{k}_agreeable"), params, s.agreeable as f64));
        rows.push(Record::exact(format!("level{k}_in_largest"), params, s.in_largest as f64));
        rows.push(Record::exact(format!("level{k}_reset_parents"), params, s.reset_parents as f64));
    }
    for a in &o.audit {
        let k = a.k;
        rows.push(Record::exact(format!("audit{k}_bad_fraction"), params, a.bad_fraction));
        rows.push(Record::exact(format!("audit{k}_bound"), params, a.bound));
        rows.push(Record::exact(format!("audit{k}_honest_edges"), params, a.honest_edges as f64));
        rows.push(Record::exact(format!("audit{k}_sibling_edges"), params, a.sibling_edges as f64));
    }
    rows
}

/// Rows of one pipeline run.
pub fn sync_records(cfg: &ExperimentConfig) -> Result<(Vec<Record>, PipelineOutcome)> {
    let run = run_pipeline(&cfg.pipeline()?)?;
    let rows = outcome_records(&run.outcome, &cfg.params_string());
    Ok((rows, run.outcome))
}

/// Files written by a command.
pub struct Written {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub extra: Vec<PathBuf>,
}

struct Output {
    name: String,
    dir: PathBuf,
    sink: CsvSink,
    extra: Vec<PathBuf>,
}

impl Output {
    fn open(cfg: &ExperimentConfig, name: &str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir)?;
        let sink = CsvSink::create(&cfg.out_dir.join(format!("{name}.csv")))?;
        Ok(Self {
            name: name.to_string(),
            dir: cfg.out_dir.clone(),
            sink,
            extra: Vec::new(),
        })
    }

    fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<Written> {
        let file_name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut outputs = vec![file_name(self.sink.path())];
        outputs.extend(self.extra.iter().map(|p| file_name(p)));
        let manifest = self.dir.join(format!("{}.manifest.json", self.name));
        Manifest::new(command, cfg, outputs).write(&manifest)?;
        Ok(Written {
            csv: self.sink.path().to_path_buf(),
            manifest,
            extra: self.extra,
        })
    }
}

fn origin_block(part: &BlockPartition) -> usize {
    let origin = vec![0i64; part.dim()];
    part.grid().index(&origin).expect("the origin block is always interior")
}

fn parse_grid<T: std::str::FromStr>(name: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::param(name, format!("cannot parse {s:?}"))))
        .collect()
}

pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Written> {
    let inst = generate_instance(&cfg.model_closed()?)?;
    let mut out = Output::open(cfg, "gen")?;
    let path = cfg.out_dir.join("instance.bin");
    save_instance(&path, &inst)?;
    out.extra.push(path);
    let params = cfg.params_string();
    let plus = inst.theta_vec().iter().filter(|&&s| s > 0).count();
    let (mut edges, mut flipped) = (0usize, 0usize);
    for u in 0..inst.num_vertices() {
        for axis in 0..cfg.d {
            if let (Some(v), Some(y)) = (inst.lattice().step(u, axis, 1), inst.edge(u, axis)) {
                edges += 1;
                flipped += usize::from(y != inst.theta(u) * inst.theta(v));
            }
        }
    }
    out.sink.write_batch(&[
        Record::exact("vertices", &params, inst.num_vertices() as f64),
        Record::exact("plus_signs", &params, plus as f64),
        Record::exact("lattice_edges", &params, edges as f64),
        Record::exact("flipped_edges", &params, flipped as f64),
    ])?;
    out.finish("gen", cfg)
}

pub fn cmd_sync(cfg: &ExperimentConfig) -> Result<Written> {
    let (rows, _) = sync_records(cfg)?;
    let mut out = Output::open(cfg, "sync")?;
    out.sink.write_batch(&rows)?;
    out.finish("sync", cfg)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, grid: Option<&str>) -> Result<Written> {
    match axis {
        SweepAxis::P => {
            let ps: Vec<f64> = match grid {
                Some(g) => parse_grid("p_grid", g)?,
                None => cfg.p_grid.clone(),
            };
            if ps.is_empty() {
                return Err(Error::param("p_grid", "sweep grid is empty"));
            }
            let mut checked = cfg.clone();
            checked.p_grid = ps.clone();
            checked.validate()?;
            let mut out = Output::open(cfg, "sweep_p")?;
            for p in ps {
                let point = ExperimentConfig {
                    p,
                    p_grid: Vec::new(),
                    scale_grid: Vec::new(),
                    ..cfg.clone()
                };
                let (mut rows, _) = sync_records(&point)?;
                if cfg.reps > 1 {
                    let row = scan_point(&point.pipeline()?, p, cfg.reps)?;
                    let params = point.params_string();
                    rows.push(Record::estimate("risk_mean", &params, row.risk));
                    rows.push(Record::estimate("p_hat_mean", &params, row.p_hat));
                }
                out.sink.write_batch(&rows)?;
            }
            out.finish("sweep", &checked)
        }
        SweepAxis::Scale => {
            let scales: Vec<i64> = match grid {
                Some(g) => parse_grid("scale_grid", g)?,
                None => cfg.scale_grid.clone(),
            };
            if scales.is_empty() {
                return Err(Error::param("scale_grid", "sweep grid is empty"));
            }
            let mut checked = cfg.clone();
            checked.scale_grid = scales.clone();
            checked.validate()?;
            let mut out = Output::open(cfg, "sweep_scale")?;
            for scale in scales {
                let point = ExperimentConfig {
                    scale,
                    p_grid: Vec::new(),
                    scale_grid: Vec::new(),
                    ..cfg.clone()
                };
                out.sink.write_batch(&noise_rows(&point)?)?;
            }
            out.finish("sweep", &checked)
        }
    }
}

fn noise_rows(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let pipe = cfg.pipeline()?;
    let rows = effective_noise_curve(&pipe.model, &[cfg.scale], cfg.reps, cfg.t, pipe.renorm)?;
    let params = cfg.params_string();
    let r = &rows[0];
    Ok(vec![
        Record::estimate("p_hat", &params, r.p_hat),
        Record::exact("disagreements", &params, r.disagreements as f64),
        Record::exact("renormalized_edges", &params, r.edges as f64),
    ])
}

pub fn cmd_diag(cfg: &ExperimentConfig, kind: DiagKind) -> Result<Written> {
    let name = format!("diag_{}", kind.name());
    let params = cfg.params_string();
    let mut out = Output::open(cfg, &name)?;
    let sampler = cfg.diag_sampler();
    let rows: Vec<Record> = match kind {
        DiagKind::Nishimori => {
            let r = nishimori_check(&cfg.model()?, cfg.scale, cfg.t, cfg.instances, sampler, cfg.beta_scale)?;
            vec![
                Record::estimate("r12", &params, r.r12),
                Record::estimate("r10", &params, r.r10),
                Record::estimate("r12_sq", &params, r.r12_sq),
                Record::estimate("r10_sq", &params, r.r10_sq),
                Record::estimate("diff_first", &params, r.diff_first),
                Record::estimate("diff_second", &params, r.diff_second),
                Record::estimate("diff_abs", &params, r.diff_abs),
                Record::exact("ks_abs", &params, r.ks_abs),
                Record::exact("pass", &params, f64::from(u8::from(r.pass))),
            ]
        }
        DiagKind::PairCorr => {
            let inst = generate_instance(&cfg.model_closed()?)?;
            let part = build_partition(cfg.n, cfg.d, cfg.scale)?;
            let region = part.block(origin_block(&part)).vertices.clone();
            let terms = RegionTerms {
                beta_scale: cfg.beta_scale,
                ..Default::default()
            };
            let c = pair_correlation(&inst, &region, terms, cfg.replicas, sampler)?;
            vec![
                Record::estimate("phi_e", &params, c.phi_e),
                Record::estimate("phi_v", &params, c.phi_v),
                Record::exact("region_size", &params, region.len() as f64),
            ]
        }
        DiagKind::Overlaps => {
            let run = run_pipeline(&cfg.pipeline()?)?;
            let r = overlap_report(&run.renorm, &run.partition, &run.instance, cfg.seed);
            vec![
                Record::estimate("mean_m_sq", &params, r.mean_m_sq),
                Record::estimate("var_m_sq", &params, r.var_m_sq),
                Record::estimate("mean_w_sq", &params, r.mean_w_sq),
                Record::estimate("var_w_sq", &params, r.var_w_sq),
                Record::estimate("mean_w_m_m", &params, r.mean_w_m_m),
            ]
        }
        DiagKind::Locking => {
            let inst = generate_instance(&cfg.model()?)?;
            let part = build_partition(cfg.n, cfg.d, cfg.scale)?;
            let side = build_block_side_info(&inst, &part, cfg.t)?;
            let dir = Direction { axis: 0, positive: true };
            let r = locking_deficit(&inst, &part, &side, origin_block(&part), dir, sampler)?;
            let mut rows = vec![
                Record::exact("alpha", &params, r.alpha),
                Record::estimate("deficit_one_block", &params, r.one_block),
            ];
            for (d, e) in &r.two_block {
                rows.push(Record::estimate(format!("deficit_two_block_{}", d.label()), &params, *e));
            }
            rows
        }
        DiagKind::Susceptibility => {
            let inst = generate_instance(&cfg.model()?)?;
            let part = build_partition(cfg.n, cfg.d, cfg.scale)?;
            let side = build_block_side_info(&inst, &part, cfg.t)?;
            let b = origin_block(&part);
            let c = part
                .neighbor(b, Direction { axis: 0, positive: true })
                .ok_or_else(|| Error::Geometry("the origin block has no interior neighbour".into()))?;
            let r = susceptibility(&inst, &part, &side, b, c, cfg.replicas, cfg.block_sampler())?;
            vec![
                Record::exact("op_norm", &params, r.op_norm),
                Record::exact("tr3_root", &params, r.tr3_root),
                Record::exact("tr2_root", &params, r.tr2_root),
                Record::exact("sandwich", &params, f64::from(u8::from(r.sandwich))),
            ]
        }
        DiagKind::FreeEnergy => {
            let model = cfg.model_closed()?;
            let grid = if cfg.lambda_grid.is_empty() {
                geometric_grid(1.0, 18, 2f64.powf(0.25))?
            } else {
                cfg.lambda_grid.clone()
            };
            let region: Vec<usize> = (0..crate::lattice::IntBox::centered(cfg.d, cfg.n)?.len()).collect();
            let opts = TiOptions {
                sampler,
                reps: cfg.reps,
                exact: false,
            };
            let c = free_energy_scalar(&model, &region, &grid, opts)?;
            let mut rows = Vec::new();
            for (i, l) in c.grid.iter().enumerate() {
                rows.push(Record::estimate(format!("integrand@lambda={l}"), &params, c.integrand[i]));
                rows.push(Record::estimate(format!("delta_f@lambda={l}"), &params, c.delta_f[i]));
                rows.push(Record::estimate(format!("delta_f_field_only@lambda={l}"), &params, c.delta_f_field_only[i]));
            }
            for r in &c.richardson {
                rows.push(Record::exact(format!("richardson_discrepancy@lambda={}", r.x), &params, r.discrepancy));
            }
            rows
        }
        DiagKind::Variational => {
            let opts = TiOptions {
                sampler,
                reps: cfg.reps,
                exact: false,
            };
            let r = variational_check(&cfg.model_closed()?, cfg.eta, &cfg.q_grid, 13, opts)?;
            let mut rows = vec![
                Record::estimate("lhs", &params, r.lhs),
                Record::estimate("sup_rhs", &params, r.sup_rhs),
                Record::estimate("difference", &params, r.difference),
                Record::exact("q_star", &params, r.q_star),
                Record::exact("q_resolution", &params, r.q_resolution),
                Record::exact("discretization", &params, r.discretization),
            ];
            for (q, e) in r.q_grid.iter().zip(&r.rhs) {
                rows.push(Record::estimate(format!("rhs@q={q}"), &params, *e));
            }
            rows
        }
        DiagKind::EffectiveNoise => noise_rows(cfg)?,
        DiagKind::Partition => {
            let part = build_partition(cfg.n, cfg.d, cfg.scale)?;
            let path = cfg.out_dir.join("partition.csv");
            part.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            out.extra.push(path);
            vec![
                Record::exact("blocks", &params, part.num_blocks() as f64),
                Record::exact("covered_vertices", &params, part.covered().len() as f64),
                Record::exact("adjacent_pairs", &params, part.adjacent_pairs().len() as f64),
            ]
        }
        DiagKind::Alpha => {
            let a = alpha_ratio(cfg.scale, cfg.d)?;
            vec![
                Record::exact("block_size", &params, a.block_size as f64),
                Record::exact("joint_size", &params, a.joint_size as f64),
                Record::exact("alpha", &params, a.exact),
                Record::exact("alpha_limit", &params, a.limit),
            ]
        }
        DiagKind::Audit => {
            let run = run_pipeline(&cfg.pipeline()?)?;
            outcome_records(&run.outcome, &params)
                .into_iter()
                .filter(|r| r.quantity.starts_with("audit") || r.quantity.starts_with("level"))
                .collect()
        }
    };
    out.sink.write_batch(&rows)?;
    out.finish("diag", cfg)
}

pub fn cmd_check_scales(cfg: &ExperimentConfig) -> Result<(Written, serde_json::Value)> {
    let r = check_scale_conditions(cfg.kappa, cfg.d)?;
    let params = cfg.params_string();
    let mut out = Output::open(cfg, "check_scales")?;
    let mut rows = Vec::new();
    for (name, c) in [("a1", &r.a1), ("a2", &r.a2), ("a3", &r.a3)] {
        rows.push(Record::exact(name, &params, c.value));
        rows.push(Record::exact(format!("{name}_tail_bound"), &params, c.tail_bound));
        rows.push(Record::exact(format!("{name}_threshold"), &params, c.threshold));
        rows.push(Record::exact(format!("{name}_pass"), &params, f64::from(u8::from(c.pass))));
    }
    rows.push(Record::exact("all_pass", &params, f64::from(u8::from(r.all_pass))));
    out.sink.write_batch(&rows)?;
    Ok((out.finish("check-scales", cfg)?, serde_json::to_value(&r)?))
}

fn init_threads(n: usize) {
    if n > 0 {
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Execute a parsed command line; returns the JSON summary printed on success.
pub fn run<I>(cli: &Cli, env: I) -> Result<serde_json::Value>
where
    I: IntoIterator<Item = (String, String)>,
{
    let cfg = resolve_config(&cli.flags, env)?;
    if !matches!(cli.command, Command::CheckScales) {
        cfg.validate()?;
    }
    init_threads(cfg.threads);
    let summary = |w: &Written| {
        json!({
            "csv": w.csv,
            "manifest": w.manifest,
            "extra": w.extra,
        })
    };
    Ok(match &cli.command {
        Command::Gen => summary(&cmd_gen(&cfg)?),
        Command::Sync => summary(&cmd_sync(&cfg)?),
        Command::Sweep { over, grid } => summary(&cmd_sweep(&cfg, *over, grid.as_deref())?),
        Command::Diag { kind } => summary(&cmd_diag(&cfg, *kind)?),
        Command::CheckScales => {
            let (w, report) = cmd_check_scales(&cfg)?;
            let mut s = summary(&w);
            s["report"] = report;
            s
        }
    })
}

/// Process exit code for an error: 2 for rejected input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        _ => 2,
    }
}

/// Machine-readable error report.
pub fn error_json(e: &Error) -> serde_json::Value {
    json!({
        "error": {
            "kind": e.kind(),
            "parameter": e.parameter(),
            "message": e.to_string(),
        }
    })
}
