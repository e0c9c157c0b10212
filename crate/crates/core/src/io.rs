//! Field files: CSV (node coordinates and values) and a compact binary block.
//!
//! Binary layout, little-endian: magic `TLAB`, `u32` version, `u8` kind
//! (0 scalar, 1 vector, 2 space-time), `u32` dimension, `u32` components,
//! `u64` shape per axis, `f64` lower corner per axis, `f64` spacing per axis,
//! for space-time blocks `u64` time count and `f64` time step, then the
//! row-major `f64` payload (last axis fastest, components fastest of all,
//! time slowest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::grid::Grid;

const MAGIC: &[u8; 4] = b"TLAB";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub components: usize,
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub spacing: Vec<f64>,
    /// `(count, dt)` for space-time blocks.
    pub time: Option<(usize, f64)>,
    pub values: Vec<f64>,
}

impl Block {
    /// Box lattice described by the header.
    pub fn grid(&self) -> Result<Grid> {
        let hi: Vec<f64> = (0..self.dim)
            .map(|k| self.lo[k] + self.spacing[k] * (self.shape[k] - 1) as f64)
            .collect();
        let cells: Vec<usize> = self.shape.iter().map(|s| s - 1).collect();
        Grid::boxed(&self.lo, &hi, &cells)
    }

    pub fn scalar_field(&self) -> Result<ScalarField> {
        if self.components != 1 || self.time.is_some() {
            return Err(Error::Format("block is not a scalar field".into()));
        }
        ScalarField::from_values(Arc::new(self.grid()?), self.values.clone())
    }

    pub fn vector_field(&self) -> Result<VectorField> {
        if self.components != self.dim || self.time.is_some() {
            return Err(Error::Format("block is not a vector field".into()));
        }
        VectorField::from_values(Arc::new(self.grid()?), self.values.clone())
    }
}

pub fn write_block<W: Write>(
    w: &mut W,
    grid: &Grid,
    components: usize,
    time: Option<(usize, f64)>,
    values: &[f64],
) -> Result<()> {
    let dim = grid.dim();
    let kind: u8 = match (time, components) {
        (Some(_), _) => 2,
        (None, 1) => 0,
        (None, _) => 1,
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(components as u32).to_le_bytes())?;
    for s in grid.shape() {
        w.write_all(&(*s as u64).to_le_bytes())?;
    }
    for v in grid.lo().iter().chain(grid.spacing()) {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some((count, dt)) = time {
        w.write_all(&(count as u64).to_le_bytes())?;
        w.write_all(&dt.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated block: {e}")))?;
    Ok(buf)
}

pub fn read_block<R: Read>(r: &mut R) -> Result<Block> {
    if &read_exact::<4, _>(r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = read_exact::<1, _>(r)?[0];
    let dim = u32::from_le_bytes(read_exact(r)?) as usize;
    let components = u32::from_le_bytes(read_exact(r)?) as usize;
    if !(1..=3).contains(&dim) || kind > 2 {
        return Err(Error::Format(format!("bad header: kind {kind}, dimension {dim}")));
    }
    let mut shape = Vec::with_capacity(dim);
    for _ in 0..dim {
        shape.push(u64::from_le_bytes(read_exact(r)?) as usize);
    }
    let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(read_exact(r)?)) };
    let lo = (0..dim).map(|_| f()).collect::<Result<Vec<_>>>()?;
    let spacing = (0..dim).map(|_| f()).collect::<Result<Vec<_>>>()?;
    let time = if kind == 2 {
        let count = u64::from_le_bytes(read_exact(r)?) as usize;
        Some((count, f64::from_le_bytes(read_exact(r)?)))
    } else {
        None
    };
    let len = shape.iter().product::<usize>() * components * time.map_or(1, |t| t.0);
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(f64::from_le_bytes(read_exact(r)?));
    }
    Ok(Block {
        dim,
        components,
        shape,
        lo,
        spacing,
        time,
        values,
    })
}

pub fn save_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_block(&mut w, f.grid(), 1, None, f.values())
}

pub fn save_vector(path: &Path, f: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_block(&mut w, f.grid(), f.dim(), None, f.values())
}

pub fn load_block(path: &Path) -> Result<Block> {
    read_block(&mut BufReader::new(File::open(path)?))
}

/// CSV with columns `x1.., value` (or `value1..` for several components),
/// one row per active node.
pub fn write_field_csv(path: &Path, grid: &Grid, components: usize, values: &[f64]) -> Result<()> {
    let dim = grid.dim();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    if components == 1 {
        header.push("value".into());
    } else {
        header.extend((1..=components).map(|i| format!("value{i}")));
    }
    w.write_record(&header)?;
    for i in grid.active_nodes() {
        let x = grid.node(i);
        let mut row: Vec<String> = x[..dim].iter().map(|v| format!("{v:.17e}")).collect();
        row.extend(
            values[i * components..(i + 1) * components]
                .iter()
                .map(|v| format!("{v:.17e}")),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a field CSV onto `grid`: each row is assigned to the nearest node.
pub fn read_field_csv(path: &Path, grid: &Grid, components: usize) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let mut rd = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = vec![f64::NAN; grid.len() * components];
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != dim + components {
            return Err(Error::Format(format!(
                "row with {} columns, expected {}",
                rec.len(),
                dim + components
            )));
        }
        let nums = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut m = [0usize; 3];
        for k in 0..dim {
            let s = ((nums[k] - grid.lo()[k]) / grid.spacing()[k]).round();
            if s < 0.0 || s as usize >= grid.shape()[k] {
                return Err(Error::Format(format!("row point {:?} outside the grid", &nums[..dim])));
            }
            m[k] = s as usize;
        }
        let i = grid.index(&m[..dim]);
        out[i * components..(i + 1) * components].copy_from_slice(&nums[dim..]);
    }
    for i in grid.active_nodes() {
        if out[i * components].is_nan() {
            return Err(Error::Format(format!("no value for node {i}")));
        }
    }
    for v in out.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    Ok(out)
}
