//! File formats: snapshot CSVs, PDE run metadata and JSON configs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::model::VelocityParams;
use crate::pde::{Grid, PdeRun, SchemeParams, SnapshotDiagnostics};

/// Which lattice a snapshot lives on; fixes the index column name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// CA or mesoscopic cells, `x = k h`.
    Lattice,
    /// PDE finite-volume cells, `x` at the cell centre.
    Grid,
}

impl Frame {
    pub fn index_label(self) -> &'static str {
        match self {
            Frame::Lattice => "k",
            Frame::Grid => "j",
        }
    }
}

pub fn write_snapshot<W: Write>(mut w: W, frame: Frame, cell_size: f64, field: &DensityField) -> std::io::Result<()> {
    writeln!(w, "{},x,rho_plus,rho_minus", frame.index_label())?;
    for (i, (p, m)) in field.rho_plus.iter().zip(&field.rho_minus).enumerate() {
        let x = match frame {
            Frame::Lattice => i as f64 * cell_size,
            Frame::Grid => (i as f64 + 0.5) * cell_size,
        };
        writeln!(w, "{i},{x:?},{p:?},{m:?}")?;
    }
    Ok(())
}

pub fn write_snapshot_file(path: &Path, frame: Frame, cell_size: f64, field: &DensityField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, frame, cell_size, field)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub frame: Frame,
    pub x: Vec<f64>,
    pub field: DensityField,
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse {what} value {s:?}")))
}

pub fn read_snapshot<R: std::io::Read>(r: R) -> Result<Snapshot> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let frame = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["k", "x", "rho_plus", "rho_minus"] => Frame::Lattice,
        ["j", "x", "rho_plus", "rho_minus"] => Frame::Grid,
        other => return Err(Error::invalid(format!("unexpected snapshot header {other:?}"))),
    };
    let (mut x, mut p, mut m) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let index: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad cell index {:?}", &rec[0])))?;
        if index != row {
            return Err(Error::invalid(format!("cell index {index} out of order at row {row}")));
        }
        x.push(parse_f64(&rec[1], "x")?);
        p.push(parse_f64(&rec[2], "rho_plus")?);
        m.push(parse_f64(&rec[3], "rho_minus")?);
    }
    Ok(Snapshot {
        frame,
        x,
        field: DensityField::new(p, m)?,
    })
}

pub fn read_snapshot_file(path: &Path) -> Result<Snapshot> {
    read_snapshot(File::open(path)?)
}

/// File name of snapshot `index` of a tier, e.g. `pde_003.csv`.
pub fn snapshot_file_name(tier: &str, index: usize) -> String {
    format!("{tier}_{index:03}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeMetadata {
    pub length: f64,
    pub cells: usize,
    pub dx: f64,
    pub params: SchemeParams,
    pub velocities: VelocityParams,
    pub steps: usize,
    pub wall_time_s: f64,
    pub snapshots: Vec<SnapshotDiagnostics>,
}

impl PdeMetadata {
    pub fn new(grid: &Grid, params: &SchemeParams, v: &VelocityParams, run: &PdeRun) -> Self {
        PdeMetadata {
            length: grid.length(),
            cells: grid.cells(),
            dx: grid.dx(),
            params: *params,
            velocities: *v,
            steps: run.steps,
            wall_time_s: run.wall_time_s,
            snapshots: run.diagnostics.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
