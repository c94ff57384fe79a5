//! Stable on-disk layouts for [`ZonalField`].
//!
//! Binary (all little-endian):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 4     | magic `ZFLD`                    |
//! | 4     | format version (`u32`, = 1)     |
//! | 4     | `n` (`u32`)                     |
//! | 8     | `p` (`f64`)                     |
//! | 4     | `L` (`u32`)                     |
//! | 4     | `N` (`u32`)                     |
//! | 8     | `S` (`f64`)                     |
//! | 4     | `M` angular nodes (`u32`)       |
//! | 8·(L+1)·N | profiles, row-major by degree |
//!
//! CSV: a `n,p,L,N,S,M` header row and its value row, then a `s,f0,...,fL`
//! header and one row per grid node.

use super::{Cylinder, Grid, ZonalField};
use crate::error::{CknError, Result};
use crate::params::CknParams;
use std::io::{Read, Write};
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"ZFLD";
const VERSION: u32 = 1;

pub fn write_binary<W: Write>(field: &ZonalField, mut w: W) -> Result<()> {
    let cyl = field.cylinder();
    let grid = cyl.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(cyl.params().n as u32).to_le_bytes())?;
    w.write_all(&cyl.params().p.to_le_bytes())?;
    w.write_all(&(cyl.l_max() as u32).to_le_bytes())?;
    w.write_all(&(grid.len() as u32).to_le_bytes())?;
    w.write_all(&grid.half_width().to_le_bytes())?;
    w.write_all(&(cyl.quad().len() as u32).to_le_bytes())?;
    for prof in field.profiles() {
        for x in prof {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn rebuild(n: usize, p: f64, l: usize, len: usize, s: f64, m: usize) -> Result<Arc<Cylinder>> {
    let params = CknParams::from_pn(p, n)?;
    Cylinder::new(params, Grid::new(s, len)?, l, m)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<ZonalField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CknError::Parse("not a zonal field file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CknError::Parse(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let p = read_f64(&mut r)?;
    let l = read_u32(&mut r)? as usize;
    let len = read_u32(&mut r)? as usize;
    let s = read_f64(&mut r)?;
    let m = read_u32(&mut r)? as usize;
    let cyl = rebuild(n, p, l, len, s, m)?;
    let profiles = (0..=l)
        .map(|_| (0..len).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ZonalField::from_profiles(&cyl, profiles)
}

pub fn write_csv<W: Write>(field: &ZonalField, w: W) -> Result<()> {
    let cyl = field.cylinder();
    let grid = cyl.grid();
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let csv_err = |e: csv::Error| CknError::Parse(e.to_string());
    out.write_record(["n", "p", "L", "N", "S", "M"]).map_err(csv_err)?;
    out.write_record([
        cyl.params().n.to_string(),
        format!("{:e}", cyl.params().p),
        cyl.l_max().to_string(),
        grid.len().to_string(),
        format!("{:e}", grid.half_width()),
        cyl.quad().len().to_string(),
    ])
    .map_err(csv_err)?;
    let mut header = vec!["s".to_string()];
    header.extend((0..=cyl.l_max()).map(|l| format!("f{l}")));
    out.write_record(&header).map_err(csv_err)?;
    for (i, s) in grid.nodes().enumerate() {
        let mut row = vec![format!("{s:e}")];
        row.extend(field.profiles().iter().map(|p| format!("{:e}", p[i])));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<ZonalField> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut records = rdr.records();
    let mut next = || -> Result<csv::StringRecord> {
        records
            .next()
            .ok_or_else(|| CknError::Parse("truncated CSV".into()))?
            .map_err(|e| CknError::Parse(e.to_string()))
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| CknError::Parse(format!("{s}: {e}")));
    let int = |s: &str| s.trim().parse::<usize>().map_err(|e| CknError::Parse(format!("{s}: {e}")));
    let _keys = next()?;
    let meta = next()?;
    if meta.len() != 6 {
        return Err(CknError::Parse("metadata row needs 6 fields".into()));
    }
    let (n, p, l, len, s, m) = (
        int(&meta[0])?,
        num(&meta[1])?,
        int(&meta[2])?,
        int(&meta[3])?,
        num(&meta[4])?,
        int(&meta[5])?,
    );
    let cyl = rebuild(n, p, l, len, s, m)?;
    let _columns = next()?;
    let mut profiles = vec![Vec::with_capacity(len); l + 1];
    for _ in 0..len {
        let row = next()?;
        if row.len() != l + 2 {
            return Err(CknError::Parse(format!("row with {} fields, expected {}", row.len(), l + 2)));
        }
        for (k, prof) in profiles.iter_mut().enumerate() {
            prof.push(num(&row[k + 1])?);
        }
    }
    ZonalField::from_profiles(&cyl, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ZonalField {
        let c = CknParams::from_pn(3.0, 3).unwrap();
        let cyl = Cylinder::new(c, Grid::new(30.0 / c.sqrt_lambda(), 2049).unwrap(), 3, 8).unwrap();
        ZonalField::separable(&cyl, &cyl.bubble(0.4), |x| 1.0 + x - x * x)
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 40 + 8 * 4 * 2049);
        let g = read_binary(buf.as_slice()).unwrap();
        assert_eq!(f.profiles(), g.profiles());
        assert_eq!(f.cylinder().signature(), g.cylinder().signature());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let g = read_csv(buf.as_slice()).unwrap();
        assert_eq!(f.profiles(), g.profiles());
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(read_binary(&b"NOPE0000"[..]), Err(CknError::Parse(_))));
    }
}
