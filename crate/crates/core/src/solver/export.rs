//! Field export: CSV `(rho, theta, u)` and a raw binary grid dump.
//!
//! Binary layout, little endian: 8-byte magic `CONECAP1`, `u64` row count
//! (radial nodes), `u64` column count (angular nodes), then `rows * cols`
//! `f64` values row-major with `θ` running fastest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::DiscreteField;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"CONECAP1";

pub fn write_csv(field: &DiscreteField, path: &Path) -> Result<()> {
    write_nodal_csv(field.grid(), field.values(), "u", path)
}

/// Writes any nodal field on a grid as `rho,theta,<name>` rows.
pub fn write_nodal_csv(grid: &crate::geometry::Grid, values: &[f64], name: &str, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "# nodal field on a {} x {} (rho, theta) grid",
        grid.rows(),
        grid.cols()
    )
    .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(["rho", "theta", name]).map_err(io)?;
    for i in 0..grid.rows() {
        for j in 0..grid.cols() {
            let k = grid.node(i, j);
            w.write_record([
                format!("{:.12e}", grid.rho()[k]),
                format!("{:.12e}", grid.theta()[j]),
                format!("{:.12e}", values[k]),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_binary(field: &DiscreteField, path: &Path) -> Result<()> {
    let g = field.grid();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut put = |b: &[u8]| out.write_all(b).map_err(|e| Error::io(path, e));
    put(BINARY_MAGIC)?;
    put(&(g.rows() as u64).to_le_bytes())?;
    put(&(g.cols() as u64).to_le_bytes())?;
    for v in field.values() {
        put(&v.to_le_bytes())?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a binary dump back as `(rows, cols, values)`.
pub fn read_binary(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::InvalidArgument(format!("{}: {m}", path.display()));
    if buf.len() < 24 || &buf[..8] != BINARY_MAGIC {
        return Err(bad("not a field dump"));
    }
    let rows = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(buf[16..24].try_into().expect("8 bytes")) as usize;
    let body = &buf[24..];
    if body.len() != rows * cols * 8 {
        return Err(bad("payload size does not match the header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((rows, cols, values))
}
