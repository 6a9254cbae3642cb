//! Bit I/O and a 32-bit binary arithmetic coder over integer frequency
//! tables.

use crate::error::{MdlError, Result};

pub const FREQ_BITS: u32 = 24;
pub const FREQ_TOTAL: u64 = 1 << FREQ_BITS;

const TOP: u64 = (1 << 32) - 1;
const HALF: u64 = 1 << 31;
const QUARTER: u64 = 1 << 30;

/// Cumulative frequencies (length `M + 1`, total `2^24`) for a pmf given
/// by its log-probabilities. Every symbol of positive probability gets a
/// frequency of at least one; the rounding remainder goes to the most
/// probable symbol.
pub fn cumulative_frequencies(log_probs: &[f64]) -> Result<Vec<u64>> {
    let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
    let sum: f64 = probs.iter().sum();
    let positive = probs.iter().filter(|p| **p > 0.0).count() as u64;
    if !(sum > 0.0 && sum.is_finite()) || positive == 0 {
        return Err(MdlError::Numeric {
            symbol: 0,
            what: "coding distribution has no mass".into(),
        });
    }
    let spread = (FREQ_TOTAL - positive) as f64;
    let mut freq: Vec<u64> = probs
        .iter()
        .map(|p| if *p > 0.0 { 1 + (p / sum * spread).floor() as u64 } else { 0 })
        .collect();
    let top = probs
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if *p > probs[b] { i } else { b });
    let assigned: u64 = freq.iter().sum();
    if assigned <= FREQ_TOTAL {
        freq[top] += FREQ_TOTAL - assigned;
    } else {
        freq[top] -= assigned - FREQ_TOTAL;
    }
    let mut cum = Vec::with_capacity(freq.len() + 1);
    cum.push(0);
    for f in freq {
        cum.push(cum.last().copied().unwrap_or(0) + f);
    }
    Ok(cum)
}

/// MSB-first bit sink.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    current: u8,
    used: u8,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_prefix(prefix: Vec<u8>) -> Self {
        BitWriter {
            bytes: prefix,
            ..Self::default()
        }
    }

    pub fn bit(&mut self, b: bool) {
        self.current = (self.current << 1) | u8::from(b);
        self.used += 1;
        self.bits += 1;
        if self.used == 8 {
            self.bytes.push(self.current);
            self.current = 0;
            self.used = 0;
        }
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.bit(value >> i & 1 == 1);
        }
    }

    /// Bits written after the prefix.
    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    /// Pads the last byte with zeros.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.current << (8 - self.used));
        }
        self.bytes
    }
}

/// MSB-first bit source over a byte slice, starting at a byte offset.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], byte_offset: usize) -> Self {
        BitReader {
            bytes,
            pos: 8 * byte_offset as u64,
        }
    }

    pub fn byte_offset(&self) -> usize {
        (self.pos / 8) as usize
    }

    /// Next bit; past the end, `None`.
    pub fn next_bit(&mut self) -> Option<bool> {
        let byte = *self.bytes.get((self.pos / 8) as usize)?;
        let b = byte >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Some(b)
    }

    /// Reads `width` bits that must be present.
    pub fn bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0;
        for _ in 0..width {
            let b = self.next_bit().ok_or_else(|| MdlError::Decode {
                offset: self.byte_offset(),
                reason: "stream ends inside the header".into(),
            })?;
            v = (v << 1) | u64::from(b);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone)]
pub struct ArithEncoder {
    low: u64,
    high: u64,
    pending: u64,
}

impl Default for ArithEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl ArithEncoder {
    pub fn new() -> Self {
        ArithEncoder {
            low: 0,
            high: TOP,
            pending: 0,
        }
    }

    fn emit(&mut self, w: &mut BitWriter, b: bool) {
        w.bit(b);
        for _ in 0..self.pending {
            w.bit(!b);
        }
        self.pending = 0;
    }

    /// Codes the symbol occupying `[cum[s], cum[s+1])`.
    pub fn encode(&mut self, w: &mut BitWriter, cum: &[u64], s: usize) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * cum[s + 1] / FREQ_TOTAL - 1;
        self.low += range * cum[s] / FREQ_TOTAL;
        loop {
            if self.high < HALF {
                self.emit(w, false);
            } else if self.low >= HALF {
                self.emit(w, true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    pub fn finish(mut self, w: &mut BitWriter) {
        self.pending += 1;
        let b = self.low >= QUARTER;
        self.emit(w, b);
    }
}

#[derive(Debug, Clone)]
pub struct ArithDecoder {
    low: u64,
    high: u64,
    code: u64,
    overrun: u32,
}

/// Reading this many implicit zero bits past the end means the stream was
/// truncated.
const MAX_OVERRUN: u32 = 64;

impl ArithDecoder {
    pub fn new(r: &mut BitReader<'_>) -> Self {
        let mut d = ArithDecoder {
            low: 0,
            high: TOP,
            code: 0,
            overrun: 0,
        };
        for _ in 0..32 {
            d.code = (d.code << 1) | u64::from(d.pull(r));
        }
        d
    }

    fn pull(&mut self, r: &mut BitReader<'_>) -> bool {
        match r.next_bit() {
            Some(b) => b,
            None => {
                self.overrun += 1;
                false
            }
        }
    }

    pub fn decode(&mut self, r: &mut BitReader<'_>, cum: &[u64]) -> Result<usize> {
        if self.overrun > MAX_OVERRUN {
            return Err(MdlError::Decode {
                offset: r.byte_offset(),
                reason: "payload is truncated".into(),
            });
        }
        let range = self.high - self.low + 1;
        let value = ((self.code - self.low + 1) * FREQ_TOTAL - 1) / range;
        // first symbol whose upper cumulative bound exceeds the value
        let s = cum[1..].partition_point(|&c| c <= value);
        if s + 1 >= cum.len() || cum[s + 1] == cum[s] {
            return Err(MdlError::Decode {
                offset: r.byte_offset(),
                reason: "arithmetic code points outside the frequency table".into(),
            });
        }
        self.high = self.low + range * cum[s + 1] / FREQ_TOTAL - 1;
        self.low += range * cum[s] / FREQ_TOTAL;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.code -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.code -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.code = (self.code << 1) | u64::from(self.pull(r));
        }
        Ok(s)
    }
}
