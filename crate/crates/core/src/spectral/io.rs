//! Field dumps: two-column text `(x, value)` and a compact little-endian binary.
//!
//! Binary layout: `n` as `u64`, `L` as `f64`, then `n` values as `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Field, Grid};
use crate::error::{Result, WaveError};
use crate::scalar::{to_f64, Real};

pub fn write_text<S: Real>(path: &Path, field: &Field<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let spec = field.grid().spec();
    for (j, &v) in field.values().iter().enumerate() {
        writeln!(w, "{:.17e}\t{:.17e}", to_f64(spec.x(j)), to_f64(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a text dump; the grid is inferred from the first two abscissae and the count.
pub fn read_text(path: &Path) -> Result<Field<f64>> {
    let r = BufReader::new(File::open(path)?);
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| WaveError::Config("short line in field dump".into()))?
                .parse::<f64>()
                .map_err(|e| WaveError::Config(format!("bad number in field dump: {e}")))
        };
        xs.push(parse(it.next())?);
        vs.push(parse(it.next())?);
    }
    if xs.len() < 2 {
        return Err(WaveError::Config("field dump too short".into()));
    }
    let half_length = -xs[0];
    let grid = Grid::new(xs.len(), half_length)?;
    Field::new(&grid, vs)
}

pub fn write_binary<S: Real>(path: &Path, field: &Field<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(field.len() as u64).to_le_bytes())?;
    w.write_all(&to_f64(field.grid().half_length()).to_le_bytes())?;
    for &v in field.values() {
        w.write_all(&to_f64(v).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Field<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let half_length = f64::from_le_bytes(b8);
    let grid = Grid::new(n, half_length)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Field::new(&grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("wavelab-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = Grid::<f64>::new(64, 10.0).unwrap();
        let f = Field::from_fn(&g, |x| (x / 3.0).sin());
        let p = tmp("f.bin");
        write_binary(&p, &f).unwrap();
        let back = read_binary(&p).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().spec(), g.spec());
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 64 * 8);
    }

    #[test]
    fn text_round_trip() {
        let g = Grid::<f64>::new(32, 4.0).unwrap();
        let f = Field::from_fn(&g, |x| x * x);
        let p = tmp("f.txt");
        write_text(&p, &f).unwrap();
        let back = read_text(&p).unwrap();
        assert_eq!(back.len(), 32);
        assert!((back.grid().half_length() - 4.0).abs() < 1e-15);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
