//! Field and time-series export.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content                      |
//! |-------|------------------------------|
//! | 8     | magic `NLWIGNR1`             |
//! | 8     | `nx` as `u64`                |
//! | 8     | `np` as `u64`                |
//! | 8     | `x_max` as `f64`             |
//! | 8     | `p_max` as `f64`             |
//! | 8     | `time` as `f64`              |
//! | 8·nx·np | values as `f64`, row-major, `x` outer |

use std::io::{Read, Write};

use super::{FieldSample, PhaseGrid, WignerField};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

pub const BINARY_MAGIC: &[u8; 8] = b"NLWIGNR1";

fn comment<W: Write>(out: &mut W, header: &str) -> Result<()> {
    for line in header.lines() {
        writeln!(out, "# {}", line)?;
    }
    Ok(())
}

/// `x,p,W` triples.
pub fn write_field_csv<T: Real, W: Write>(field: &WignerField<T>, mut out: W, header: &str) -> Result<()> {
    comment(&mut out, header)?;
    writeln!(out, "x,p,W")?;
    let g = &field.grid;
    for i in 0..g.nx {
        for j in 0..g.np {
            writeln!(out, "{:e},{:e},{:e}", g.xs[i], g.ps[j], field.at(i, j))?;
        }
    }
    Ok(())
}

/// Moment series with header `t,x2,p2,xp,x4,n`.
pub fn write_series_csv<T: Real, W: Write>(samples: &[FieldSample<T>], mut out: W, header: &str) -> Result<()> {
    comment(&mut out, header)?;
    writeln!(out, "t,x2,p2,xp,x4,n")?;
    for s in samples {
        let m = &s.moments;
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t, m.state.x2, m.state.p2, m.state.xp, m.state.x4, m.n
        )?;
    }
    Ok(())
}

pub fn write_binary<T: Real, W: Write>(field: &WignerField<T>, mut out: W) -> Result<()> {
    let g = &field.grid;
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(g.nx as u64).to_le_bytes())?;
    out.write_all(&(g.np as u64).to_le_bytes())?;
    for v in [g.x_max, g.p_max, field.time] {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * field.values.len());
    for v in &field.values {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<T: Real, R: Read>(mut input: R) -> Result<WignerField<T>> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    if &word != BINARY_MAGIC {
        return Err(Error::Numerical("not a field dump: bad magic".into()));
    }
    let mut next = || -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let nx = u64::from_le_bytes(next()?) as usize;
    let np = u64::from_le_bytes(next()?) as usize;
    let x_max = f64::from_le_bytes(next()?);
    let p_max = f64::from_le_bytes(next()?);
    let time = f64::from_le_bytes(next()?);
    let grid = PhaseGrid::new(nx, np, lit::<T>(x_max), lit::<T>(p_max))?;
    let mut raw = vec![0u8; 8 * grid.len()];
    input.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| lit::<T>(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Ok(WignerField {
        grid,
        values,
        time: lit(time),
        steps: 0,
    })
}
