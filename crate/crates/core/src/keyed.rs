//! Stable keyed hashing and keyed pseudo-random draws.
//!
//! Every synthetic quantity (centroids, nuisance directions, merge and split
//! decisions) is a pure function of a 64-bit key, so results never depend on
//! iteration order, thread count or the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive accumulator of 64-bit words.
#[derive(Clone, Copy, Debug)]
pub(crate) struct KeyHasher {
    state: u64,
    len: u64,
}

impl KeyHasher {
    pub(crate) fn new(domain: &str) -> Self {
        let mut h = KeyHasher { state: 0x005E_ED0F_E115_u64, len: 0 };
        for b in domain.bytes() {
            h.write_u64(u64::from(b));
        }
        h
    }

    pub(crate) fn write_u64(&mut self, v: u64) -> &mut Self {
        self.len = self.len.wrapping_add(1);
        self.state = splitmix64(self.state ^ splitmix64(v ^ self.len.wrapping_mul(GOLDEN)));
        self
    }

    pub(crate) fn write_f64(&mut self, v: f64) -> &mut Self {
        // -0.0 and 0.0 hash alike.
        let bits = if v == 0.0 { 0 } else { v.to_bits() };
        self.write_u64(bits)
    }

    pub(crate) fn finish(&self) -> u64 {
        splitmix64(self.state ^ self.len)
    }
}

/// Uniform draw in `[0, 1)` keyed by `key`.
pub(crate) fn uniform01(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniformly distributed unit vector in `R^d` keyed by `key`.
pub(crate) fn unit_vector(key: u64, d: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
