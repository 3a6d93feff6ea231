//! "HJF1" binary field files.
//!
//! Layout, all little-endian: magic `HJF1`; `u32` axis count (always 4);
//! per axis `f64 min, f64 max, u32 count`; then the `f64` values in storage
//! order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{AxisSpec, GridSpec, ScalarField};

pub const MAGIC: &[u8; 4] = b"HJF1";

pub fn write_field(field: &ScalarField, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&4u32.to_le_bytes())?;
    for a in field.grid().axes() {
        w.write_all(&a.min.to_le_bytes())?;
        w.write_all(&a.max.to_le_bytes())?;
        w.write_all(&(a.count as u32).to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_bytes(field: &ScalarField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + 4 + 4 * 20 + 8 * field.values().len());
    write_field(field, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_exact<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("truncated while reading {what}"))
        }
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_field(mut r: impl Read) -> Result<ScalarField> {
    let magic: [u8; 4] = read_exact(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dims = u32::from_le_bytes(read_exact(&mut r, "axis count")?);
    if dims != 4 {
        return Err(Error::Format(format!("expected 4 axes, found {dims}")));
    }
    let mut axes = [AxisSpec::new(0.0, 0.0, 0); 4];
    for a in axes.iter_mut() {
        let min = f64::from_le_bytes(read_exact(&mut r, "axis min")?);
        let max = f64::from_le_bytes(read_exact(&mut r, "axis max")?);
        let count = u32::from_le_bytes(read_exact(&mut r, "axis count")?) as usize;
        *a = AxisSpec::new(min, max, count);
    }
    let grid = GridSpec::new(axes).map_err(|e| Error::Format(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(read_exact(&mut r, "values")?));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after values".into()));
    }
    ScalarField::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<ScalarField> {
    read_field(BufReader::new(File::open(path)?))
}
