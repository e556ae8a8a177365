//! `SSL1` binary matrix framing.
//!
//! Layout: the four magic bytes `SSL1`, row count and column count as
//! little-endian `u64`, then `rows·cols` little-endian IEEE-754 `f64` values
//! in row-major order. Frames may be concatenated.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: [u8; 4] = *b"SSL1";
const HEADER_LEN: usize = 4 + 8 + 8;

pub fn encode_into(m: &Matrix, out: &mut Vec<u8>) {
    out.reserve(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(m, &mut out);
    out
}

fn read_u64(bytes: &[u8], offset: usize) -> Result<u64> {
    bytes
        .get(offset..offset + 8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("slice of length 8")))
        .ok_or_else(|| Error::Parse {
            offset,
            message: "truncated header".into(),
        })
}

/// Decodes one frame starting at `offset`; returns the matrix and the offset just past it.
pub fn decode_at(bytes: &[u8], offset: usize) -> Result<(Matrix, usize)> {
    match bytes.get(offset..offset + 4) {
        Some(m) if m == MAGIC => {}
        Some(_) => {
            return Err(Error::Parse {
                offset,
                message: "bad magic, expected \"SSL1\"".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                offset,
                message: "truncated magic".into(),
            })
        }
    }
    let rows = read_u64(bytes, offset + 4)?;
    let cols = read_u64(bytes, offset + 12)?;
    let count = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Parse {
            offset: offset + 4,
            message: format!("implausible shape {rows}x{cols}"),
        })?;
    let start = offset + HEADER_LEN;
    let payload = bytes
        .get(start..)
        .filter(|p| p.len() / 8 >= count)
        .ok_or_else(|| Error::Parse {
            offset: bytes.len(),
            message: format!("truncated payload, expected {count} values"),
        })?;
    let data = payload[..count * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of length 8")))
        .collect();
    let m = Matrix::from_vec(rows as usize, cols as usize, data)?;
    Ok((m, start + count * 8))
}

/// Decodes a buffer holding exactly one frame.
pub fn decode(bytes: &[u8]) -> Result<Matrix> {
    let (m, end) = decode_at(bytes, 0)?;
    if end != bytes.len() {
        return Err(Error::Parse {
            offset: end,
            message: "trailing bytes after matrix".into(),
        });
    }
    Ok(m)
}

/// Decodes a buffer of concatenated frames.
pub fn decode_all(bytes: &[u8]) -> Result<Vec<Matrix>> {
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < bytes.len() {
        let (m, next) = decode_at(bytes, offset)?;
        out.push(m);
        offset = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Matrix::from_rows(&[[1.0, -2.5]]).unwrap();
        let b = encode(&m);
        assert_eq!(&b[..4], b"SSL1");
        assert_eq!(&b[4..12], &1u64.to_le_bytes());
        assert_eq!(&b[12..20], &2u64.to_le_bytes());
        assert_eq!(&b[20..28], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 36);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(decode(b""), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(
            decode(b"XXXX"),
            Err(Error::Parse { offset: 0, .. })
        ));
        let mut b = encode(&Matrix::zeros(2, 2));
        b.pop();
        assert!(decode(&b).is_err());
        let mut b = encode(&Matrix::zeros(1, 1));
        b.push(0);
        assert!(decode(&b).is_err());
        let mut huge = MAGIC.to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in 0usize..5,
            cols in 0usize..5,
            seed in proptest::collection::vec(any::<u64>(), 25),
        ) {
            let data = seed[..rows * cols].iter().map(|&b| f64::from_bits(b)).collect();
            let m = Matrix::from_vec(rows, cols, data).unwrap();
            let mut buf = encode(&m);
            encode_into(&m, &mut buf);
            let back = decode_all(&buf).unwrap();
            prop_assert_eq!(back.len(), 2);
            for d in back {
                prop_assert_eq!(d.shape(), m.shape());
                let a: Vec<u64> = d.as_slice().iter().map(|x| x.to_bits()).collect();
                let b: Vec<u64> = m.as_slice().iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
