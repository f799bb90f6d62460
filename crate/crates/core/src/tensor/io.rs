//! Flat binary tensor serialization.
//!
//! Layout (little endian): magic `SAFT`, `u32` rank, `u64` per dimension,
//! then the payload as `f64` regardless of the in-memory scalar type.

use std::io::{Read, Write};

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

pub const MAGIC: &[u8; 4] = b"SAFT";

impl<S: Scalar> Tensor<S> {
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| TensorError::Io(e.to_string());
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(self.rank() as u32).to_le_bytes()).map_err(io)?;
        for &d in self.shape() {
            w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        for &v in self.data() {
            let v64 = v.to_f64().ok_or_else(|| TensorError::Io("non-finite-cast".into()))?;
            w.write_all(&v64.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Tensor<S>> {
        let io = |e: std::io::Error| TensorError::Io(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(TensorError::Io(format!("bad magic {magic:?}")));
        }
        let mut rank_buf = [0u8; 4];
        r.read_exact(&mut rank_buf).map_err(io)?;
        let rank = u32::from_le_bytes(rank_buf) as usize;
        if rank > 16 {
            return Err(TensorError::Io(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut dim_buf = [0u8; 8];
        for _ in 0..rank {
            r.read_exact(&mut dim_buf).map_err(io)?;
            shape.push(u64::from_le_bytes(dim_buf) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut val_buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut val_buf).map_err(io)?;
            let v = f64::from_le_bytes(val_buf);
            data.push(S::from(v).ok_or_else(|| TensorError::Io("cast failure".into()))?);
        }
        Tensor::from_vec(shape, data)
    }

    /// Serialized byte length of this tensor.
    pub fn saved_len(&self) -> usize {
        4 + 4 + 8 * self.rank() + 8 * self.numel()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_stable() {
        let t = Tensor::from_vec(vec![2, 1], vec![1.5f64, -2.0]).unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"SAFT");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 1.5);
        assert_eq!(buf.len(), t.saved_len());
    }

    #[test]
    fn roundtrip_preserves_shape_and_values() {
        let t = Tensor::from_vec(vec![3, 2, 2], (0..12).map(|i| i as f64 * 0.25).collect()).unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        let back = Tensor::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn f32_payload_is_still_f64_encoded() {
        let t = Tensor::from_vec(vec![2], vec![0.5f32, 1.5]).unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 16);
        let back = Tensor::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(back.data(), &[0.5f64, 1.5]);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00\x00\x00".to_vec();
        assert!(Tensor::<f64>::load(&mut buf.as_slice()).is_err());
    }
}
