//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] built from an
//! explicit 64-bit seed plus a stream id. ChaCha is counter based, so two
//! streams with the same seed and different ids are independent, and output
//! is identical across platforms. There is no global RNG state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Stream ids for the independent consumers within one seeded instance.
pub mod tag {
    pub const GRAPH: u64 = 0x6772_6170_6800_0001;
    pub const POINTS: u64 = 0x706f_696e_7400_0002;
    pub const OBSERVE: u64 = 0x6f62_7365_7276_0003;
    pub const ADVERSARY: u64 = 0x6164_7665_7273_0004;
    pub const ESTIMATOR: u64 = 0x6573_7469_6d61_0005;
    pub const SAMPLE: u64 = 0x7361_6d70_6c65_0006;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-dependent hash of a sequence of words, used to derive cell and
/// trial seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5348_4150_4546_4954, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Independent stream `(tag, index)` under `seed`.
pub fn stream(seed: u64, tag: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive_seed(&[tag, index]));
    rng
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform draw from the unit sphere `S^{dim-1}` by normalizing a Gaussian.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut z = gaussian_vec(rng, dim);
        let n = crate::linalg::norm(&z);
        if n > 1e-300 {
            z.iter_mut().for_each(|x| *x /= n);
            return z;
        }
    }
}
