//! Bit-vector indexing conventions.
//!
//! An assignment of `k` single-bit parties is encoded as an integer in
//! `[0, 2^k)` with party 1's bit in the most significant position of the `k`
//! low bits. Every matrix and tensor in the crate indexes its input axis this
//! way; transcript bit-strings for randomized response use the same order.

use crate::{Error, Result};

/// Largest supported party count; truth tables are explicit over `2^k` rows.
pub const MAX_PARTIES: usize = 16;

/// Number of bit assignments for `k` parties.
pub fn domain_size(k: usize) -> usize {
    1 << k
}

/// Bit of party `i` (0-based) in assignment `x`.
pub fn bit(x: usize, i: usize, k: usize) -> bool {
    debug_assert!(i < k);
    x >> (k - 1 - i) & 1 == 1
}

/// Assignment with party `i`'s bit toggled. Involution.
pub fn flip(x: usize, i: usize, k: usize) -> usize {
    debug_assert!(i < k);
    x ^ (1 << (k - 1 - i))
}

/// Number of set bits in `x`.
pub fn weight(x: usize) -> u32 {
    x.count_ones()
}

/// Packs a bit vector (party 1 first) into an integer index.
pub fn encode(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
}

/// Unpacks an integer index into a bit vector of length `k` (party 1 first).
pub fn decode(x: usize, k: usize) -> Vec<bool> {
    (0..k).map(|i| bit(x, i, k)).collect()
}

/// Renders `x` as a `k`-character bit-string, party 1 first.
pub fn bitstring(x: usize, k: usize) -> String {
    (0..k)
        .map(|i| if bit(x, i, k) { '1' } else { '0' })
        .collect()
}

/// Parses a `k`-character bit-string, party 1 first.
pub fn parse_bitstring(s: &str, k: usize) -> Result<usize> {
    if s.len() != k {
        return Err(Error::Parse(format!(
            "bit-string {s:?} has length {}, expected {k}",
            s.len()
        )));
    }
    let mut x = 0;
    for c in s.chars() {
        x = x << 1
            | match c {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::Parse(format!("bit-string {s:?} has non-binary digit"))),
            };
    }
    Ok(x)
}

/// Validates a party count against [`MAX_PARTIES`].
pub fn check_party_count(k: usize) -> Result<()> {
    if k == 0 || k > MAX_PARTIES {
        return Err(Error::config(format!(
            "party count {k} outside 1..={MAX_PARTIES}"
        )));
    }
    Ok(())
}
