//! Seed handling.
//!
//! Every random stream in a run is derived from one master seed. A stream is
//! addressed by a label and an index (trial, drop, cluster set, ...), and its
//! seed is `splitmix64(master ^ splitmix64(label_hash ^ splitmix64(index)))`.
//! The rule is stable across platforms and releases so that a seed printed in
//! an output header reproduces the run exactly.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// Random generator used for every stream.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a; only needs to be stable, not strong.
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of stream `(label, index)` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(label_hash(label) ^ splitmix64(index)))
}

/// Generator for stream `(label, index)` under `master`.
pub fn stream(master: u64, label: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, label, index))
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Order-sensitive 64-bit checksum over a stream of complex samples.
///
/// Used to prove that two receivers consumed identical random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamChecksum(pub u64);

impl StreamChecksum {
    pub fn absorb(&mut self, samples: &[C64]) {
        for s in samples {
            self.absorb_u64(s.re.to_bits());
            self.absorb_u64(s.im.to_bits());
        }
    }

    pub fn absorb_u64(&mut self, v: u64) {
        self.0 = splitmix64(self.0 ^ v);
    }
}
