//! Enumeration of sequence types (count vectors) over a finite alphabet.
//! Everything the codes compute depends on a sequence only through its
//! type, so exhaustive sweeps over `M^n` sequences run over types with
//! multinomial weights.

use crate::error::{MdlError, Result};
use crate::models::pmf::Counts;

/// Default cap on the number of sequences an exhaustive oracle will cover.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

/// `M^n`, or `None` on overflow.
pub fn sequence_count(n: u64, m: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(m as u64)?;
    }
    Some(acc)
}

/// Refuses sweeps over more than `cap` sequences.
pub fn check_cap(n: u64, m: usize, cap: u64) -> Result<u64> {
    match sequence_count(n, m) {
        Some(c) if c <= cap => Ok(c),
        _ => Err(MdlError::Capacity {
            requested: (m as f64).powf(n as f64),
            cap,
        }),
    }
}

/// All count vectors of length `m` summing to `n`, in lexicographic order
/// of the counts (first symbol slowest).
pub fn all_types(n: u64, m: usize) -> Vec<Counts> {
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    let mut c = vec![0u64; m];
    fill(&mut c, 0, n, &mut out);
    out
}

fn fill(c: &mut Vec<u64>, i: usize, left: u64, out: &mut Vec<Counts>) {
    if i + 1 == c.len() {
        c[i] = left;
        out.push(Counts::new(c.clone()));
        return;
    }
    for v in 0..=left {
        c[i] = v;
        fill(c, i + 1, left - v, out);
    }
}

/// `ln k!` for `k = 0..=n`.
pub fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Log of the number of sequences with the given type.
pub fn log_multinomial(counts: &Counts, log_fact: &[f64]) -> f64 {
    log_fact[counts.n() as usize] - counts.as_slice().iter().map(|&c| log_fact[c as usize]).sum::<f64>()
}

/// One representative sequence of a type, symbols in ascending order.
pub fn representative(counts: &Counts) -> Vec<usize> {
    counts
        .as_slice()
        .iter()
        .enumerate()
        .flat_map(|(x, &c)| std::iter::repeat_n(x, c as usize))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn types_cover_all_sequences() {
        let lf = log_factorials(7);
        let types = all_types(7, 3);
        assert_eq!(types.len(), 36);
        let total: f64 = types.iter().map(|t| log_multinomial(t, &lf).exp()).sum();
        assert!((total - 3f64.powi(7)).abs() < 1e-9);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(check_cap(24, 2, DEFAULT_ENUMERATION_CAP).is_ok());
        assert!(check_cap(25, 2, DEFAULT_ENUMERATION_CAP).is_err());
        assert!(check_cap(200, 3, DEFAULT_ENUMERATION_CAP).is_err());
    }
}
