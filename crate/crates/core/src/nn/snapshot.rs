//! Binary parameter snapshots: magic, version, manifest, little-endian data.

use std::io::{Read, Write};
use std::path::Path;

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"AFFSNAP1";
pub const SNAPSHOT_VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_params(w: &mut impl Write, params: &ParamSet) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    put_u32(w, SNAPSHOT_VERSION)?;
    put_u32(w, params.params.len() as u32)?;
    for p in &params.params {
        put_u32(w, p.name.len() as u32)?;
        w.write_all(p.name.as_bytes())?;
        put_u32(w, p.value.rows() as u32)?;
        put_u32(w, p.value.cols() as u32)?;
    }
    for p in &params.params {
        for v in &p.value.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads values into an already-constructed `params`, checking names and shapes.
pub fn read_params(r: &mut impl Read, params: &mut ParamSet) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let count = get_u32(r)? as usize;
    if count != params.params.len() {
        return Err(Error::Snapshot(format!("expected {} tensors, found {count}", params.params.len())));
    }
    for p in &params.params {
        let len = get_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let rows = get_u32(r)? as usize;
        let cols = get_u32(r)? as usize;
        if name != p.name.as_bytes() || rows != p.value.rows() || cols != p.value.cols() {
            return Err(Error::Snapshot(format!("manifest mismatch at {}", p.name)));
        }
    }
    for p in &mut params.params {
        let mut data = Vec::with_capacity(p.value.len());
        let mut b = [0u8; 8];
        for _ in 0..p.value.len() {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        p.value = Tensor::from_vec(p.value.rows(), p.value.cols(), data);
    }
    Ok(())
}

pub fn save_params(path: &Path, params: &ParamSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_params(&mut f, params)?;
    f.flush()?;
    Ok(())
}

pub fn load_params(path: &Path, params: &mut ParamSet) -> Result<()> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_params(&mut f, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut a = ParamSet::default();
        a.push("w", Tensor::from_vec(2, 2, vec![0.1, -1e-300, f64::MAX, 3.0]));
        a.push("b", Tensor::row(vec![std::f64::consts::PI]));
        let mut buf = Vec::new();
        write_params(&mut buf, &a).unwrap();
        let mut b = a.clone();
        b.params.iter_mut().for_each(|p| p.value.fill(0.0));
        read_params(&mut buf.as_slice(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_mismatches() {
        let mut a = ParamSet::default();
        a.push("w", Tensor::zeros(2, 2));
        let mut buf = Vec::new();
        write_params(&mut buf, &a).unwrap();
        let mut other = ParamSet::default();
        other.push("w", Tensor::zeros(2, 3));
        assert!(matches!(read_params(&mut buf.as_slice(), &mut other), Err(Error::Snapshot(_))));
        buf[0] = b'X';
        assert!(matches!(read_params(&mut buf.as_slice(), &mut a.clone()), Err(Error::Snapshot(_))));
    }
}
