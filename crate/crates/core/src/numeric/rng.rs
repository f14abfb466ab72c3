//! Counter-based splittable random keys.
//!
//! A key is 128 bits. Every random quantity is a pure function of
//! `(key, counter)` through a 4-round mixing block, so splitting and drawing
//! are order-independent and reproducible on every platform.

use serde::{Deserialize, Serialize};

const SPLIT_TAG: u64 = 0x5350_4c49_545f_4b45;
const STREAM_TAG: u64 = 0x5354_5245_414d_5f31;
const FOLD_TAG: u64 = 0x464f_4c44_5f49_4e5f;

const ROUND_CONSTANTS: [u64; 4] = [
    0x9e37_79b9_7f4a_7c15,
    0xbf58_476d_1ce4_e5b9,
    0x94d0_49bb_1331_11eb,
    0xd6e8_feb8_6659_fd93,
];
const ROTATIONS: [u32; 4] = [16, 42, 12, 31];

#[inline]
fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

/// The 4-round mixing block: `(key, counter) -> 128 bits`.
#[inline]
fn block(key: [u64; 2], counter: [u64; 2]) -> [u64; 2] {
    let mut a = counter[0] ^ key[0];
    let mut b = counter[1] ^ key[1];
    for r in 0..4 {
        a = a.wrapping_add(b).wrapping_add(ROUND_CONSTANTS[r]);
        b = b.rotate_left(ROTATIONS[r]) ^ a;
        a = fmix64(a ^ key[r % 2]);
        b = fmix64(b.wrapping_add(key[(r + 1) % 2]));
    }
    [a, b]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey {
    hi: u64,
    lo: u64,
}

impl RngKey {
    pub fn from_seed(seed: u64) -> Self {
        let [hi, lo] = block([seed, !seed], [0, FOLD_TAG]);
        RngKey { hi, lo }
    }

    pub fn from_raw(hi: u64, lo: u64) -> Self {
        RngKey { hi, lo }
    }

    pub fn raw(self) -> (u64, u64) {
        (self.hi, self.lo)
    }

    fn words(self) -> [u64; 2] {
        [self.hi, self.lo]
    }

    pub fn split(self) -> (RngKey, RngKey) {
        let [a0, a1] = block(self.words(), [0, SPLIT_TAG]);
        let [b0, b1] = block(self.words(), [1, SPLIT_TAG]);
        (RngKey { hi: a0, lo: a1 }, RngKey { hi: b0, lo: b1 })
    }

    pub fn split_n(self, n: usize) -> Vec<RngKey> {
        (0..n as u64)
            .map(|i| {
                let [hi, lo] = block(self.words(), [i, SPLIT_TAG ^ 0xffff_0000]);
                RngKey { hi, lo }
            })
            .collect()
    }

    /// Derives a child key from integer data (row index, task index, ...).
    pub fn fold_in(self, data: u64) -> RngKey {
        let [hi, lo] = block(self.words(), [data, FOLD_TAG]);
        RngKey { hi, lo }
    }

    pub fn stream(self) -> KeyStream {
        KeyStream {
            key: self,
            counter: 0,
            spare_normal: None,
        }
    }
}

/// Free-function form of [`RngKey::split`].
pub fn rng_split(key: RngKey) -> (RngKey, RngKey) {
    key.split()
}

/// Sequential draws from one key. Draw `i` depends only on `(key, i)`.
#[derive(Clone, Debug)]
pub struct KeyStream {
    key: RngKey,
    counter: u64,
    spare_normal: Option<f64>,
}

impl KeyStream {
    pub fn next_u64(&mut self) -> u64 {
        let out = block(self.key.words(), [self.counter, STREAM_TAG])[0];
        self.counter += 1;
        out
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
