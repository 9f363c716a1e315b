//! Binary field snapshots.
//!
//! Field layout (all little endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `TFLD`                              |
//! | 4     | u32 format version (1)                    |
//! | 4     | u32 points per axis n                     |
//! | 1     | u8 rank code (0 scalar, 1 vector, 2 sym)  |
//! | 1     | u8 reality flag                           |
//! | 2     | reserved, zero                            |
//! | 8     | f64 dealias fraction                      |
//! | ...   | components × n³ × (re f64, im f64) modes  |
//!
//! A time series is `TSER`, a u32 count, then per entry an f64 time followed
//! by one field record.

use super::{Grid, PeriodicField, Rank, Space};
use crate::error::SpectralError;
use num_complex::Complex64;
use std::io::{Read, Write};

const FIELD_MAGIC: &[u8; 4] = b"TFLD";
const SERIES_MAGIC: &[u8; 4] = b"TSER";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(w: &mut W, field: &PeriodicField) -> Result<(), SpectralError> {
    let m = field.to_modes();
    let g = field.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&[field.rank().code(), field.is_real() as u8, 0, 0])?;
    w.write_all(&g.dealias_fraction().to_le_bytes())?;
    let mut buf = Vec::with_capacity(g.len() * 16);
    for comp in m.comps() {
        buf.clear();
        for z in comp {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SpectralError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, SpectralError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(r: &mut R) -> Result<PeriodicField, SpectralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(SpectralError::Format("bad field magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(SpectralError::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(r)? as usize;
    let mut flags = [0u8; 4];
    r.read_exact(&mut flags)?;
    let rank = Rank::from_code(flags[0]).ok_or_else(|| SpectralError::Format("bad rank code".into()))?;
    let real = flags[1] != 0;
    let dealias = read_f64(r)?;
    let grid = Grid::new(n, dealias)?;
    let mut bytes = vec![0u8; grid.len() * 16];
    let mut comps = Vec::with_capacity(rank.components());
    for _ in 0..rank.components() {
        r.read_exact(&mut bytes)?;
        let comp = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        comps.push(comp);
    }
    PeriodicField::from_complex(grid, rank, Space::Modes, real, comps)
}

pub fn write_series<W: Write>(w: &mut W, series: &[(f64, PeriodicField)]) -> Result<(), SpectralError> {
    w.write_all(SERIES_MAGIC)?;
    w.write_all(&(series.len() as u32).to_le_bytes())?;
    for (t, f) in series {
        w.write_all(&t.to_le_bytes())?;
        write_field(w, f)?;
    }
    Ok(())
}

pub fn read_series<R: Read>(r: &mut R) -> Result<Vec<(f64, PeriodicField)>, SpectralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SERIES_MAGIC {
        return Err(SpectralError::Format("bad series magic".into()));
    }
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let t = read_f64(r)?;
        out.push((t, read_field(r)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let g = Grid::two_thirds(8).unwrap();
        let f = PeriodicField::vector_fn(g, |x| [x[0].sin(), x[1].cos(), (x[0] + x[2]).sin()]);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 24 + 3 * 512 * 16);
        let back = read_field(&mut buf.as_slice()).unwrap();
        let m = f.to_modes();
        for c in 0..3 {
            assert_eq!(back.comp(c), m.comp(c));
        }
    }

    #[test]
    fn series_round_trip_and_bad_magic() {
        let g = Grid::two_thirds(8).unwrap();
        let f = PeriodicField::scalar_fn(g, |x| x[2].cos());
        let mut buf = Vec::new();
        write_series(&mut buf, &[(0.5, f.clone()), (1.0, f)]).unwrap();
        let s = read_series(&mut buf.as_slice()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].0, 1.0);
        buf[0] = b'X';
        assert!(read_series(&mut buf.as_slice()).is_err());
    }
}
