//! Seed derivation.
//!
//! A global seed fans out to named sub-seeds (`"data"`, `"init"`,
//! `"shuffle"`, `"fisher"`, `"attack"`, ...) as
//! `splitmix64(global ^ fnv1a64(name))`, and indexed streams (per sample,
//! per cycle) as `splitmix64(seed ^ splitmix64(index))`.

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn fnv1a64(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Named sub-seed of a global seed.
pub fn derive(global: u64, name: &str) -> u64 {
    splitmix64(global ^ fnv1a64(name))
}

/// Seed for the `index`-th item of a stream.
pub fn stream(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_indices_separate() {
        assert_ne!(derive(1, "data"), derive(1, "init"));
        assert_ne!(derive(1, "data"), derive(2, "data"));
        assert_eq!(derive(7, "fisher"), derive(7, "fisher"));
        assert_ne!(stream(3, 0), stream(3, 1));
    }
}
