//! 3D Morton (Z-order) codes with x in bit 0.

use crate::error::{Error, Result};

pub const MORTON_AXIS_BITS: u32 = 21;

#[inline]
fn spread(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x001f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(v: u64) -> u64 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | x >> 2) & 0x10c3_0c30_c30c_30c3;
    x = (x | x >> 4) & 0x100f_00f0_0f00_f00f;
    x = (x | x >> 8) & 0x001f_0000_ff00_00ff;
    x = (x | x >> 16) & 0x001f_0000_0000_ffff;
    x = (x | x >> 32) & 0x1f_ffff;
    x
}

/// Interleaves three 21-bit indices.
pub fn morton_encode(x: u32, y: u32, z: u32) -> Result<u64> {
    let limit = 1u32 << MORTON_AXIS_BITS;
    if x >= limit || y >= limit || z >= limit {
        return Err(Error::argument(format!("morton index ({x}, {y}, {z}) exceeds 21 bits per axis")));
    }
    Ok(morton_encode_unchecked(x, y, z))
}

#[inline]
pub(crate) fn morton_encode_unchecked(x: u32, y: u32, z: u32) -> u64 {
    spread(x as u64) | spread(y as u64) << 1 | spread(z as u64) << 2
}

pub fn morton_decode(code: u64) -> (u32, u32, u32) {
    (compact(code) as u32, compact(code >> 1) as u32, compact(code >> 2) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn per_bit(x: u32, y: u32, z: u32) -> u64 {
        let mut code = 0u64;
        for b in 0..21 {
            code |= ((x as u64 >> b) & 1) << (3 * b);
            code |= ((y as u64 >> b) & 1) << (3 * b + 1);
            code |= ((z as u64 >> b) & 1) << (3 * b + 2);
        }
        code
    }

    #[test]
    fn small_codes() {
        assert_eq!(morton_encode(0, 0, 0).unwrap(), 0);
        assert_eq!(morton_encode(1, 1, 1).unwrap(), 7);
        // x=0b11 -> bits 0 and 3, z=0b10 -> bit 5
        assert_eq!(per_bit(3, 0, 2), 41);
        assert_eq!(morton_encode(3, 0, 2).unwrap(), 41);
    }

    #[test]
    fn overflow_rejected() {
        assert!(morton_encode(1 << 21, 0, 0).is_err());
        assert!(morton_encode(0, 0, (1 << 21) - 1).is_ok());
    }

    #[test]
    fn injective_on_small_cube() {
        let mut seen = std::collections::HashSet::new();
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    assert!(seen.insert(morton_encode(x, y, z).unwrap()));
                }
            }
        }
        // a 16^3 cube fills the codes 0..4096 exactly
        assert_eq!(seen.iter().max(), Some(&4095));
    }

    proptest! {
        #[test]
        fn matches_per_bit_oracle(x in 0u32..(1 << 21), y in 0u32..(1 << 21), z in 0u32..(1 << 21)) {
            let code = morton_encode(x, y, z).unwrap();
            prop_assert_eq!(code, per_bit(x, y, z));
            prop_assert_eq!(morton_decode(code), (x, y, z));
        }
    }
}
