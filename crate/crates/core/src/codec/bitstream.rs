//! A real prefix code realizing the two-part lengths.
//!
//! Layout: magic `0x4D`, version byte, `n` as a big-endian `u32`, then
//! MSB-first bits: the route bit (1 for the boundary route), the face
//! descriptor in `⌈log₂ #faces⌉` bits on the boundary route, the θ̈ index in
//! `⌈log₂ |Θ̈_n|⌉` bits, the ξ̈ code when the codebook has tilts (a 0 bit for
//! the zero tilt, else a 1 bit and the index in `⌈log₂ 2K²⌉` bits), and the
//! arithmetic-coded symbols under `p̄_{θ̈,ξ̈}`.

use std::sync::Arc;

use serde::Serialize;

use crate::codec::arith::{cumulative_frequencies, ArithDecoder, ArithEncoder, BitReader, BitWriter};
use crate::codec::codebook::{Codebook, Encoding, Route};
use crate::codec::config::CodeConfig;
use crate::error::{MdlError, Result};
use crate::models::family::FamilyRef;
use crate::models::pmf::Counts;
use crate::models::restricted::faces_from_descriptor;

pub const MAGIC: u8 = 0x4D;
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 6;

/// Bits needed for a fixed-length index over `count` values.
pub fn index_bits(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bitstream {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    /// Bits after the header, before padding.
    pub payload_bits: u64,
    /// Ideal code length with `α = 1`, in bits.
    pub ideal_bits: f64,
    pub encoding: Option<Encoding>,
}

fn header(n: u64) -> Result<Vec<u8>> {
    let n32 = u32::try_from(n).map_err(|_| MdlError::precondition(format!("n = {n} exceeds the 32-bit header field")))?;
    let mut out = vec![MAGIC, VERSION];
    out.extend_from_slice(&n32.to_be_bytes());
    Ok(out)
}

fn write_xi(w: &mut BitWriter, cb: &Codebook, xi_index: usize) {
    if let Some(b) = &cb.bundle {
        if xi_index == 0 {
            w.bit(false);
        } else {
            w.bit(true);
            let k = b.tilts.k as u64;
            w.bits(xi_index as u64 - 1, index_bits(2 * k * k));
        }
    }
}

fn read_xi(r: &mut BitReader<'_>, cb: &Codebook) -> Result<usize> {
    match &cb.bundle {
        None => Ok(0),
        Some(b) => {
            if r.bits(1)? == 0 {
                Ok(0)
            } else {
                let k = b.tilts.k as u64;
                let at = r.byte_offset();
                let v = r.bits(index_bits(2 * k * k))? as usize + 1;
                if v >= b.tilts.len() {
                    return Err(MdlError::Decode {
                        offset: at,
                        reason: format!("tilt index {v} out of range"),
                    });
                }
                Ok(v)
            }
        }
    }
}

fn read_index(r: &mut BitReader<'_>, count: usize, what: &str) -> Result<usize> {
    let at = r.byte_offset();
    let v = r.bits(index_bits(count as u64))? as usize;
    if v >= count {
        return Err(MdlError::Decode {
            offset: at,
            reason: format!("{what} index {v} out of range 0..{count}"),
        });
    }
    Ok(v)
}

fn write_payload(w: &mut BitWriter, log_probs: &[f64], xs: &[usize]) -> Result<()> {
    let cum = cumulative_frequencies(log_probs)?;
    let mut e = ArithEncoder::new();
    for &x in xs {
        if cum[x + 1] == cum[x] {
            return Err(MdlError::Numeric {
                symbol: x,
                what: "symbol has zero probability under the chosen density".into(),
            });
        }
        e.encode(w, &cum, x);
    }
    e.finish(w);
    Ok(())
}

/// Encodes `xs` with a codebook built for `xs.len()`.
pub fn write_bitstream(cb: &Codebook, xs: &[usize]) -> Result<Bitstream> {
    let counts = Counts::from_symbols(xs, cb.family().alphabet_size())?;
    let enc = cb.encode(&counts)?;
    let mut w = BitWriter::with_prefix(header(cb.n)?);
    match (&enc.route, &enc.face) {
        (Route::Interior, _) => {
            w.bit(false);
            w.bits(enc.theta_index as u64, index_bits(cb.grid.len() as u64));
            write_xi(&mut w, cb, enc.xi_index);
        }
        (Route::Boundary, Some(face)) => {
            w.bit(true);
            w.bits(face.descriptor, index_bits(face.descriptor_count));
            let fc = cb.face_code(&face.active)?;
            let sub = &fc.codebook;
            w.bits(enc.theta_index as u64, index_bits(sub.grid.len() as u64));
            write_xi(&mut w, sub, enc.xi_index);
        }
        (Route::Boundary, None) => unreachable!("boundary encodings carry their face"),
    }
    write_payload(&mut w, &enc.log_probs, xs)?;
    let payload_bits = w.bit_len();
    Ok(Bitstream {
        bytes: w.finish(),
        payload_bits,
        ideal_bits: enc.ideal_unweighted / std::f64::consts::LN_2,
        encoding: Some(enc),
    })
}

/// Encodes a sequence of any length, building the codebook for it.
pub fn encode_bitstream(family: &FamilyRef, xs: &[usize], config: &CodeConfig) -> Result<Bitstream> {
    if xs.is_empty() {
        return Ok(Bitstream {
            bytes: header(0)?,
            payload_bits: 0,
            ideal_bits: 0.0,
            encoding: None,
        });
    }
    let cb = Codebook::build(family.clone(), xs.len() as u64, config)?;
    write_bitstream(&cb, xs)
}

/// Reads the length field of a stream header.
pub fn read_header(bytes: &[u8]) -> Result<u64> {
    if bytes.len() < HEADER_BYTES {
        return Err(MdlError::Decode {
            offset: bytes.len(),
            reason: "stream is shorter than its header".into(),
        });
    }
    if bytes[0] != MAGIC {
        return Err(MdlError::Decode {
            offset: 0,
            reason: format!("bad magic byte {:#04x}", bytes[0]),
        });
    }
    if bytes[1] != VERSION {
        return Err(MdlError::Decode {
            offset: 1,
            reason: format!("unsupported version {}", bytes[1]),
        });
    }
    Ok(u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as u64)
}

/// Decodes with a codebook whose `n` matches the header.
pub fn read_bitstream(cb: &Codebook, bytes: &[u8]) -> Result<Vec<usize>> {
    let n = read_header(bytes)?;
    if n != cb.n {
        return Err(MdlError::Decode {
            offset: 2,
            reason: format!("stream holds n = {n}, codebook is for n = {}", cb.n),
        });
    }
    let mut r = BitReader::new(bytes, HEADER_BYTES);
    let boundary = r.bits(1)? == 1;
    let (face_cb, i, j);
    let log_probs: Vec<f64> = if boundary {
        let family = cb.family();
        let count = crate::models::restricted::descriptor_count(family.as_ref())?;
        let at = r.byte_offset();
        let d = r.bits(index_bits(count))?;
        let active = faces_from_descriptor(family.as_ref(), d).map_err(|e| MdlError::Decode {
            offset: at,
            reason: e.to_string(),
        })?;
        let fc = cb.face_code(&active).map_err(|e| MdlError::Decode {
            offset: at,
            reason: e.to_string(),
        })?;
        face_cb = Some(Arc::clone(&fc));
        let sub = &face_cb.as_ref().expect("just set").codebook;
        i = read_index(&mut r, sub.grid.len(), "parameter")?;
        j = read_xi(&mut r, sub)?;
        sub.row(i, j).to_vec()
    } else {
        i = read_index(&mut r, cb.grid.len(), "parameter")?;
        j = read_xi(&mut r, cb)?;
        cb.row(i, j).to_vec()
    };
    let cum = cumulative_frequencies(&log_probs)?;
    let mut d = ArithDecoder::new(&mut r);
    (0..n).map(|_| d.decode(&mut r, &cum)).collect()
}

/// Decodes a stream, building the codebook for the length in its header.
pub fn decode_bitstream(family: &FamilyRef, bytes: &[u8], config: &CodeConfig) -> Result<Vec<usize>> {
    let n = read_header(bytes)?;
    if n == 0 {
        if bytes.len() != HEADER_BYTES {
            return Err(MdlError::Decode {
                offset: HEADER_BYTES,
                reason: "trailing bytes after an empty stream".into(),
            });
        }
        return Ok(Vec::new());
    }
    let cb = Codebook::build(family.clone(), n, config)?;
    read_bitstream(&cb, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_widths() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(4), 2);
        assert_eq!(index_bits(5), 3);
    }

    #[test]
    fn header_rejects_garbage() {
        assert!(matches!(read_header(&[0x4D, 1, 0]), Err(MdlError::Decode { offset: 3, .. })));
        assert!(matches!(read_header(&[0, 1, 0, 0, 0, 0]), Err(MdlError::Decode { offset: 0, .. })));
        assert!(matches!(read_header(&[0x4D, 9, 0, 0, 0, 0]), Err(MdlError::Decode { offset: 1, .. })));
    }
}
