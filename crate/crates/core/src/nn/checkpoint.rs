//! Named-tensor container, all integers and values little-endian:
//!
//! ```text
//! magic   8 bytes  "S2SCKPT1"
//! count   u32
//! repeated count times:
//!   name_len u32, name utf-8 bytes
//!   rank     u32, dims u64 × rank
//!   values   f64 × product(dims), row-major
//! ```

use std::io::{Read, Write};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"S2SCKPT1";

const MAX_NAME: usize = 4096;
const MAX_RANK: usize = 8;

pub fn write_checkpoint<W: Write, T: Scalar>(mut w: W, tensors: &[(&str, &Tensor<T>)]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&u32::try_from(tensors.len()).map_err(|_| Error::Checkpoint("too many tensors".into()))?.to_le_bytes())?;
    for (name, t) in tensors {
        if name.len() > MAX_NAME {
            return Err(Error::Checkpoint(format!("tensor name of {} bytes", name.len())));
        }
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor<f64>)>> {
    if &read_array::<8, _>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)?;
        if len > MAX_NAME {
            return Err(Error::Checkpoint(format!("tensor name of {len} bytes")));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
        let rank = read_u32(&mut r)?;
        if rank > MAX_RANK {
            return Err(Error::Checkpoint(format!("{name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(u64::from_le_bytes(read_array(&mut r)?)).map_err(|_| Error::Checkpoint("dimension overflow".into()))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("{name}: element count overflows")))?;
        // grow as bytes arrive so a forged header cannot force a huge allocation
        let mut data = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after the last tensor".into()));
    }
    Ok(out)
}
