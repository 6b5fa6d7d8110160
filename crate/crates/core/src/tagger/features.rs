//! Hashed context-window features.

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Stands in for the piece at offsets that fall outside the sequence.
const BOUNDARY: &str = "\u{0}boundary";
const BIAS: &str = "\u{0}bias";

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        // field separator
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn feature_id(offset: i64, piece: &str, dim: usize) -> u32 {
    (fnv1a(&[&offset.to_le_bytes(), piece.as_bytes()]) & (dim as u64 - 1)) as u32
}

pub fn validate_shape(radius: usize, dim: usize) -> Result<()> {
    if radius < 1 {
        return Err(Error::Config("window radius must be at least 1".into()));
    }
    if dim < 2 || !dim.is_power_of_two() || dim > (u32::MAX as usize) + 1 {
        return Err(Error::Config(format!(
            "feature dimension must be a power of two >= 2, got {dim}"
        )));
    }
    Ok(())
}

/// Feature ids for `tokens[position]`: one per offset in `-radius..=radius`
/// (a boundary feature where the offset leaves the sequence), then a bias
/// feature. Ids are FNV-1a hashes of `(offset, piece)` masked to `dim`, so
/// two features may collide; the list keeps both.
pub fn featurize(tokens: &[String], position: usize, radius: usize, dim: usize) -> Vec<u32> {
    debug_assert!(position < tokens.len());
    debug_assert!(dim.is_power_of_two());
    let r = radius as i64;
    let mut out = Vec::with_capacity(2 * radius + 2);
    for offset in -r..=r {
        let at = position as i64 + offset;
        let piece = if at < 0 || at >= tokens.len() as i64 {
            BOUNDARY
        } else {
            tokens[at as usize].as_str()
        };
        out.push(feature_id(offset, piece, dim));
    }
    out.push(feature_id(0, BIAS, dim));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn single_token_window() {
        let dim = 1 << 20;
        let f = featurize(&toks(&["de"]), 0, 2, dim);
        assert_eq!(f.len(), 6);
        assert_eq!(f[2], feature_id(0, "de", dim));
        let boundary: Vec<_> = [-2i64, -1, 1, 2].iter().map(|&o| feature_id(o, BOUNDARY, dim)).collect();
        assert_eq!(vec![f[0], f[1], f[3], f[4]], boundary);
        assert_eq!(f[5], feature_id(0, BIAS, dim));
        assert!(f.iter().all(|&id| (id as usize) < dim));
    }

    #[test]
    fn deterministic_and_offset_sensitive() {
        let t = toks(&["a", "b", "c"]);
        assert_eq!(featurize(&t, 1, 1, 1024), featurize(&t, 1, 1, 1024));
        assert_ne!(feature_id(-1, "a", 1 << 20), feature_id(1, "a", 1 << 20));
    }

    #[test]
    fn shape_validation() {
        assert!(validate_shape(0, 16).is_err());
        assert!(validate_shape(1, 1).is_err());
        assert!(validate_shape(1, 24).is_err());
        assert!(validate_shape(1, 2).is_ok());
    }
}
