//! Plain-text and binary array output shared by the experiment writers.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"F64A";

/// Round-trip formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `# key=value` lines.
pub fn write_comment_header<W: Write>(w: &mut W, echo: &[(String, String)]) -> Result<()> {
    for (k, v) in echo {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Row-major `rows × cols` array of little-endian `f64`, preceded by the
/// magic `F64A` and the two dimensions as little-endian `u64`.
pub fn write_f64_array<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: data.len(),
        });
    }
    w.write_all(MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads an array written by [`write_f64_array`]; returns `(rows, cols, data)`.
pub fn read_f64_array<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse {
            line: 0,
            reason: "missing F64A header".into(),
        });
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok((rows, cols, data))
}
