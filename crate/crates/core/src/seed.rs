//! Deterministic seed derivation.

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Order-sensitive hash of the bit patterns of a slice.
pub(crate) fn hash_f64s(v: &[f64]) -> u64 {
    v.iter().fold(0x5151_5151_u64 ^ v.len() as u64, |h, x| mix(h, x.to_bits()))
}
