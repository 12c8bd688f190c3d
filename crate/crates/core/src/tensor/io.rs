//! Raw tensor files: `"MGBT"`, version `u8`, dtype `u8` (0 = f32, 1 = f64),
//! ndim `u8`, one little-endian `u32` per dimension, then the row-major
//! little-endian payload.

use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MGBT";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor, dtype: DType) -> Result<()> {
    if t.ndim() > u8::MAX as usize {
        return Err(Error::Format("too many dimensions".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, dtype as u8, t.ndim() as u8])?;
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 8);
    match dtype {
        DType::F32 => t.data().iter().for_each(|&v| buf.extend_from_slice(&(v as f32).to_le_bytes())),
        DType::F64 => t.data().iter().for_each(|&v| buf.extend_from_slice(&v.to_le_bytes())),
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut head = [0u8; 7];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("missing MGBT magic".into()));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!("unsupported MGBT version {}", head[4])));
    }
    let dtype = match head[5] {
        0 => DType::F32,
        1 => DType::F64,
        d => return Err(Error::Format(format!("unknown dtype {d}"))),
    };
    let ndim = head[6] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        shape.push(u32::from_le_bytes(b) as usize);
    }
    let n: usize = shape.iter().product();
    let data = match dtype {
        DType::F32 => {
            let mut buf = vec![0u8; n * 4];
            r.read_exact(&mut buf)?;
            buf.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        DType::F64 => {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
    };
    Tensor::new(shape, data)
}

pub fn save(path: impl AsRef<Path>, t: &Tensor, dtype: DType) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, t, dtype)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor::new(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t, DType::F64).unwrap();
        assert_eq!(&buf[..7], b"MGBT\x01\x01\x02");
        assert_eq!(&buf[7..15], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&buf[15..23], &1.5f64.to_le_bytes());
        assert_eq!(buf.len(), 7 + 8 + 16);
        assert_eq!(read_tensor(&mut buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn f32_payload_and_bad_magic() {
        let t = Tensor::new(vec![3], vec![0.25, 1.0, -8.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t, DType::F32).unwrap();
        assert_eq!(buf.len(), 7 + 4 + 12);
        assert_eq!(read_tensor(&mut buf.as_slice()).unwrap(), t);
        buf[0] = b'X';
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }
}
