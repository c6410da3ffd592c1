//! Field dumps: a JSON header line followed by little-endian f64 values, and
//! CSV export of one-dimensional fields.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{Field, Slot};
use super::grid::{Grid, GridSpec};
use crate::error::{Result, SrfError};

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub dtype: String,
    pub byte_order: String,
    pub slots: Vec<Slot>,
    pub npts: usize,
    pub ncomp: usize,
    pub grid: GridSpec,
}

/// Writes the header as one JSON line, then `npts * ncomp` values.
pub fn write_field(w: &mut impl Write, f: &Field) -> Result<()> {
    let header = DumpHeader {
        dtype: "f64".into(),
        byte_order: "little".into(),
        slots: f.slots().to_vec(),
        npts: f.npts(),
        ncomp: f.ncomp(),
        grid: f.grid().spec().clone(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for v in f.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump back onto an existing grid with a matching spec.
pub fn read_field(r: &mut impl BufRead, grid: &Arc<Grid>) -> Result<Field> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end())?;
    if header.dtype != "f64" || header.byte_order != "little" {
        return Err(SrfError::Shape(format!("unsupported dump encoding {}/{}", header.dtype, header.byte_order)));
    }
    if &header.grid != grid.spec() || header.npts != grid.npts() {
        return Err(SrfError::Shape("dump was written on a different grid".into()));
    }
    let n = header.npts * header.ncomp;
    let mut bytes = vec![0u8; 8 * n];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Field::from_data(grid, &header.slots, data)
}

/// CSV with columns `x, c0, c1, ..` for a field on a one-dimensional grid.
pub fn write_csv_1d(w: impl Write, f: &Field) -> Result<()> {
    if f.dim() != 1 {
        return Err(SrfError::Shape("CSV export is for one-dimensional grids".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["x".to_string()];
    head.extend((0..f.ncomp()).map(|c| format!("c{c}")));
    out.write_record(&head)?;
    for p in 0..f.npts() {
        let mut row = vec![format!("{:.17e}", f.grid().coord(p, 0))];
        row.extend(f.at(p).iter().map(|v| format!("{v:.17e}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
