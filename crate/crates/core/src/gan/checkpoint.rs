//! Binary checkpoint format: the magic `SCGAN001` followed by tensor records
//! until end of file. Each record holds the name length (u32 LE), the UTF-8
//! name, a dtype tag (0 = f32, 1 = f64), the rank (u32), the dims (u32 each)
//! and then the raw real and imaginary planes, little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"SCGAN001";

pub fn write_checkpoint<T: Scalar, W: Write>(mut w: W, params: &ParamSet<T>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for e in params.entries() {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.push(T::DTYPE_TAG);
        buf.extend_from_slice(&(e.value.dims().len() as u32).to_le_bytes());
        for &d in e.value.dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for plane in [e.value.re(), e.value.im()] {
            for &x in plane.data() {
                x.write_le(&mut buf);
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("truncated checkpoint while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
}

fn read_plane<T: Scalar>(c: &mut Cursor, tag: u8, n: usize) -> Result<Vec<T>> {
    Ok(match tag {
        0 => c.take(4 * n, "f32 plane")?.chunks_exact(4).map(|b| T::from_f32(f32::read_le(b)).unwrap()).collect(),
        1 => c.take(8 * n, "f64 plane")?.chunks_exact(8).map(|b| T::from_f64(f64::read_le(b)).unwrap()).collect(),
        _ => return Err(Error::Format(format!("unknown dtype tag {tag}"))),
    })
}

/// Parses every record, converting to `T` when the stored dtype differs.
pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<Vec<(String, CxTensor<T>)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("missing SCGAN001 magic".into()));
    }
    let mut c = Cursor { bytes: &bytes, pos: MAGIC.len() };
    let mut out = Vec::new();
    while c.pos < bytes.len() {
        let len = c.u32("name length")?;
        let name = std::str::from_utf8(c.take(len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let tag = c.take(1, "dtype tag")?[0];
        let rank = c.u32("rank")?;
        if rank == 0 || rank > 8 {
            return Err(Error::Format(format!("tensor `{name}` has unsupported rank {rank}")));
        }
        let dims = (0..rank).map(|_| c.u32("dims")).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).filter(|&n| n > 0);
        let Some(n) = n else {
            return Err(Error::Format(format!("tensor `{name}` has invalid dims {dims:?}")));
        };
        let re = read_plane::<T>(&mut c, tag, n)?;
        let im = read_plane::<T>(&mut c, tag, n)?;
        let t = CxTensor::new(Tensor::from_vec(dims.clone(), re)?, Tensor::from_vec(dims, im)?)?;
        out.push((name, t));
    }
    Ok(out)
}

pub fn save<T: Scalar>(path: &Path, params: &ParamSet<T>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(f), params)
}

/// Loads a checkpoint into `params`; every stored name must exist there with
/// the same shape.
pub fn load<T: Scalar>(path: &Path, params: &mut ParamSet<T>) -> Result<()> {
    let f = std::fs::File::open(path)?;
    params.load(read_checkpoint(std::io::BufReader::new(f))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> ParamSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let mut p = ParamSet::new();
        p.add("a.weight", CxTensor::randn([2, 3, 1, 1], 1.0, &mut rng).unwrap());
        p.add_buffer("a.bn.running_var", CxTensor::randn([3], 1.0, &mut rng).unwrap());
        p
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let p = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p).unwrap();
        assert_eq!(&bytes[..8], b"SCGAN001");
        let mut q = sample();
        q.set(q.find("a.weight").unwrap(), CxTensor::zeros([2, 3, 1, 1]).unwrap());
        q.load(read_checkpoint(bytes.as_slice()).unwrap()).unwrap();
        assert!(q.bit_eq(&p));
    }

    #[test]
    fn record_layout() {
        let mut p = ParamSet::<f32>::new();
        p.add("w", CxTensor::from_vecs([1], vec![1.5], vec![-2.0]).unwrap());
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p).unwrap();
        let mut expect = b"SCGAN001".to_vec();
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.push(b'w');
        expect.push(0);
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.extend_from_slice(&1.5f32.to_le_bytes());
        expect.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expect);
        let back: Vec<(String, CxTensor<f64>)> = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back[0].1.at(&[0]), (1.5, -2.0));
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let p = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p).unwrap();
        assert!(matches!(read_checkpoint::<f64, _>(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(read_checkpoint::<f64, _>(&b"NOTMAGIC"[..]), Err(Error::Format(_))));
        let mut other = ParamSet::<f64>::new();
        other.add("b", CxTensor::zeros([1]).unwrap());
        assert!(matches!(other.load(read_checkpoint(bytes.as_slice()).unwrap()), Err(Error::Format(_))));
    }
}
