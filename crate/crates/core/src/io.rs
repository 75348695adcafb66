//! Result files: binary instances, long-format CSV and JSON manifests.
//!
//! Instance layout: the 8-byte magic `Z2SYNC01`, a little-endian `u32`
//! header length, a JSON header, then the planted signs (`i8` per vertex),
//! the edge observations (`i8` per vertex and axis) and the Gaussian table
//! (`f32` little-endian per vertex and stencil offset, NaN outside the box).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::{LatticeInstance, ModelParams};
use crate::stats::Estimate;

pub const MAGIC: &[u8; 8] = b"Z2SYNC01";

/// Build identifier recorded in manifests.
pub const GIT_DESCRIBE: &str = env!("Z2SYNC_GIT_DESCRIBE");

#[derive(Serialize, Deserialize)]
struct InstanceHeader {
    d: usize,
    n: i64,
    p: f64,
    eta: f64,
    range_l: usize,
    seed: u64,
    vertices: usize,
    stencil: usize,
}

pub fn write_instance<W: Write>(mut w: W, inst: &LatticeInstance) -> Result<()> {
    let p = &inst.params;
    let header = InstanceHeader {
        d: p.d,
        n: p.n,
        p: p.p,
        eta: p.eta,
        range_l: p.range_l,
        seed: p.seed,
        vertices: inst.num_vertices(),
        stencil: inst.goe_table().stencil().len(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let theta: Vec<u8> = inst.theta_vec().iter().map(|&s| s as u8).collect();
    w.write_all(&theta)?;
    let edges: Vec<u8> = inst.edge_vec().iter().map(|&s| s as u8).collect();
    w.write_all(&edges)?;
    let mut goe = Vec::with_capacity(inst.goe_table().values().len() * 4);
    for v in inst.goe_table().values() {
        goe.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&goe)?;
    w.flush()?;
    Ok(())
}

fn read_exact(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("truncated {what} section")))?;
    Ok(buf)
}

fn signs(bytes: Vec<u8>, what: &str) -> Result<Vec<i8>> {
    bytes
        .into_iter()
        .map(|b| match b as i8 {
            1 => Ok(1),
            -1 => Ok(-1),
            x => Err(Error::Format(format!("{what} value {x} is not a sign"))),
        })
        .collect()
}

pub fn read_instance<R: Read>(mut r: R) -> Result<LatticeInstance> {
    let magic = read_exact(&mut r, 8, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format("not an instance file".into()));
    }
    let len = u32::from_le_bytes(read_exact(&mut r, 4, "header length")?.try_into().expect("4 bytes")) as usize;
    let header: InstanceHeader = serde_json::from_slice(&read_exact(&mut r, len, "header")?)?;
    let params = ModelParams::new_closed(header.d, header.n, header.p, header.eta, header.range_l, header.seed)?;
    let nv = header.vertices;
    let theta = signs(read_exact(&mut r, nv, "theta")?, "theta")?;
    let edges = signs(read_exact(&mut r, nv * header.d, "edge")?, "edge")?;
    let raw = read_exact(&mut r, nv * header.stencil * 4, "gaussian")?;
    let goe = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after instance".into()));
    }
    LatticeInstance::from_parts(params, theta, edges, goe)
}

pub fn save_instance(path: &Path, inst: &LatticeInstance) -> Result<()> {
    write_instance(BufWriter::new(File::create(path)?), inst)
}

pub fn load_instance(path: &Path) -> Result<LatticeInstance> {
    read_instance(std::io::BufReader::new(File::open(path)?))
}

/// One long-format CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    pub params: String,
    pub value: f64,
    pub se: f64,
}

impl Record {
    pub fn new(quantity: impl Into<String>, params: &str, value: f64, se: f64) -> Self {
        Self {
            quantity: quantity.into(),
            params: params.to_string(),
            value,
            se,
        }
    }

    pub fn exact(quantity: impl Into<String>, params: &str, value: f64) -> Self {
        Self::new(quantity, params, value, 0.0)
    }

    pub fn estimate(quantity: impl Into<String>, params: &str, e: Estimate) -> Self {
        Self::new(quantity, params, e.value, e.se)
    }
}

/// CSV writer that flushes after every batch, so an interrupted run leaves
/// only complete rows behind.
pub struct CsvSink {
    path: PathBuf,
    file: File,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = File::create(path)?;
        file.write_all(b"quantity,params,value,se\n")?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            rows: 0,
        })
    }

    /// Write a batch with a single system call and flush it.
    pub fn write_batch(&mut self, rows: &[Record]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.file.write_all(&bytes)?;
        self.file.flush()?;
        self.rows += rows.len();
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Provenance of a set of result files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub command: String,
    pub seed: u64,
    pub params: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_describe: GIT_DESCRIBE.to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            params: cfg.params_string(),
            config: cfg.clone(),
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}
