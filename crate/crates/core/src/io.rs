//! Field import and export.
//!
//! Binary layout (little endian): the 8-byte magic `WPFIELD1`, `d: u32`,
//! `n: u32`, `half_extent: f64`, `count: u64`, then `count` pairs of
//! `(re: f64, im: f64)` in row-major order.
//!
//! CSV layout: one comment line `# wavepacket-field v1 d=.. n=.. half_extent=..`,
//! the header `index,re,im`, then one row per point. Floats use the shortest
//! representation that parses back to the same bits.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const MAGIC: &[u8; 8] = b"WPFIELD1";

pub fn write_field_binary<W: Write>(f: &Field, mut out: W) -> Result<()> {
    let g = f.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(g.d() as u32).to_le_bytes())?;
    out.write_all(&(g.n() as u32).to_le_bytes())?;
    out.write_all(&g.half_extent().to_le_bytes())?;
    out.write_all(&(f.values().len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_array<const K: usize, R: Read>(input: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    input.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<Field> {
    let magic: [u8; 8] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic in field file".into()));
    }
    let d = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let n = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let half = f64::from_le_bytes(read_array(&mut input)?);
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let grid = Grid::new(d, n, half)?;
    if count != grid.len() {
        return Err(Error::Format(format!("count {count} does not match grid size {}", grid.len())));
    }
    let mut raw = vec![0u8; 16 * count];
    input.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Field::new(grid, values)
}

pub fn write_field_csv<W: Write>(f: &Field, mut out: W) -> Result<()> {
    let g = f.grid();
    writeln!(out, "# wavepacket-field v1 d={} n={} half_extent={}", g.d(), g.n(), g.half_extent())?;
    writeln!(out, "index,re,im")?;
    for (i, v) in f.values().iter().enumerate() {
        writeln!(out, "{},{},{}", i, v.re, v.im)?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(input: R) -> Result<Field> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty field csv".into()))??;
    let mut d = None;
    let mut n = None;
    let mut half = None;
    for token in header.split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            let parse = |v: &str| v.parse::<f64>().map_err(|e| Error::Format(format!("{k}: {e}")));
            match k {
                "d" => d = Some(parse(v)? as usize),
                "n" => n = Some(parse(v)? as usize),
                "half_extent" => half = Some(parse(v)?),
                _ => {}
            }
        }
    }
    let (Some(d), Some(n), Some(half)) = (d, n, half) else {
        return Err(Error::Format("field csv header lacks d, n or half_extent".into()));
    };
    let grid = Grid::new(d, n, half)?;
    let mut values = vec![C64::new(0.0, 0.0); grid.len()];
    let mut seen = 0;
    for line in lines.skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("malformed row '{line}'")));
        }
        let bad = |e: String| Error::Format(format!("row '{line}': {e}"));
        let i: usize = cols[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let re: f64 = cols[1].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        let im: f64 = cols[2].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        if i >= values.len() {
            return Err(bad("index out of range".into()));
        }
        values[i] = C64::new(re, im);
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Format(format!("expected {} rows, found {seen}", grid.len())));
    }
    Field::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Field {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let values = (0..g.len())
            .map(|i| C64::new((i as f64 * 0.37).sin() / 3.0, -(i as f64).sqrt() * 1e-7))
            .collect();
        Field::new(g, values).unwrap()
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_field_binary(&f, &mut buf).unwrap();
        let back = read_field_binary(buf.as_slice()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(f.grid(), back.grid());
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let back = read_field_csv(buf.as_slice()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(read_field_binary(&b"NOTAFILE"[..]).is_err());
        assert!(read_field_csv(&b"# wavepacket-field v1 d=1 n=8\n"[..]).is_err());
    }
}
