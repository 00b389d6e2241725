//! Flat binary parameter files.
//!
//! Layout (little-endian): magic `CFGP`, `u32` version, `u32` record count,
//! then per record `u32` name length, UTF-8 name, `u32` rank, `u64` dims and
//! the `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use super::nn::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFGP";
const VERSION: u32 = 1;

pub fn write_tensors<W: Write>(mut out: W, tensors: &[(String, Tensor)]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &t.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated file"))?;
    if &magic != MAGIC {
        return Err(bad("not a parameter file"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        if len > 4096 {
            return Err(bad("name too long"));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| bad("truncated file"))?;
        let name = String::from_utf8(name).map_err(|_| bad("name is not UTF-8"))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(bad(format!("rank {rank} for {name:?}")));
        }
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| bad(format!("implausible shape {shape:?}")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_bits(read_u64(&mut r)?));
        }
        out.push((name, Tensor { shape, data }));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

pub fn save_store(store: &ParamStore, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_tensors(&mut buf, &store.named_values())?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_into(store: &mut ParamStore, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path)?;
    store.load_values(read_tensors(&bytes[..])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let tensors = vec![
            (
                "a.weight".to_string(),
                Tensor::new(vec![2, 3], vec![0.1, -2.5, 1e-300, f64::MAX, -0.0, 3.0]).unwrap(),
            ),
            ("s".to_string(), Tensor::scalar(std::f64::consts::PI)),
        ];
        let mut buf = Vec::new();
        write_tensors(&mut buf, &tensors).unwrap();
        let back = read_tensors(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for ((n1, t1), (n2, t2)) in tensors.iter().zip(&back) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape, t2.shape);
            let b1: Vec<u64> = t1.data.iter().map(|v| v.to_bits()).collect();
            let b2: Vec<u64> = t2.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_tensors(&b"nope"[..]).is_err());
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("x".into(), Tensor::scalar(1.0))]).unwrap();
        assert!(read_tensors(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_tensors(&buf[..]).is_err());
    }

    #[test]
    fn store_shape_mismatch_is_an_error() {
        let mut a = ParamStore::new();
        a.add("w", Tensor::zeros(&[2]), true);
        let mut b = ParamStore::new();
        b.add("w", Tensor::zeros(&[3]), true);
        assert!(b.load_values(a.named_values()).is_err());
    }
}
