//! Reproducible random streams.
//!
//! Every random draw in this crate comes from a stream addressed by the
//! four-tuple `(master seed, trial, step, kind)`. Streams are independent,
//! creating one is cheap, and nothing is shared between them, so trials and
//! steps can be generated in any order (or on any number of threads) and the
//! draws come out identical.
//!
//! The concrete construction, which any conforming implementation must
//! reproduce bit-for-bit:
//!
//! 1. chain the four key words through the SplitMix64 finalizer:
//!    `w0 = mix(seed ^ C0)`, `w1 = mix(w0 ^ trial ^ C1)`,
//!    `w2 = mix(w1 ^ step ^ C2)`, `w3 = mix(w2 ^ kind ^ C3)`,
//!    with the domain constants below;
//! 2. use the little-endian bytes of `(w0, w1, w2, w3)` as a ChaCha8 key and
//!    read the keystream from block zero;
//! 3. standard normals are produced from that stream by `rand_distr`'s
//!    ziggurat sampler, uniforms by `rand`'s 53-bit `f64` conversion.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const DOMAIN: [u64; 4] = [
    0x9e37_79b9_7f4a_7c15,
    0xd1b5_4a32_d192_ed03,
    0x8cb9_2ba7_2f3d_8dd7,
    0x52dc_e729_7c3a_6b1f,
];

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What a stream is used for. Separating kinds keeps, say, the proposal noise
/// of a step identical whether or not the step also draws an accept uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    /// Proposal noise `g` (MALA) or initial velocity `v_0` (HMC).
    Noise,
    /// The Metropolis accept/reject uniform.
    Accept,
    /// Draws used to build starting points.
    Init,
    /// Draws used by exact stationary samplers.
    Stationary,
}

impl DrawKind {
    fn word(self) -> u64 {
        match self {
            DrawKind::Noise => 1,
            DrawKind::Accept => 2,
            DrawKind::Init => 3,
            DrawKind::Stationary => 4,
        }
    }
}

/// Address of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
    pub step: u64,
    pub kind: DrawKind,
}

/// A single addressed random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(key: StreamKey) -> Self {
        let w0 = mix(key.seed ^ DOMAIN[0]);
        let w1 = mix(w0 ^ key.trial ^ DOMAIN[1]);
        let w2 = mix(w1 ^ key.step ^ DOMAIN[2]);
        let w3 = mix(w2 ^ key.kind.word() ^ DOMAIN[3]);
        let mut seed = [0u8; 32];
        for (chunk, w) in seed.chunks_exact_mut(8).zip([w0, w1, w2, w3]) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Stream {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Standard normal draw.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fills `out` with i.i.d. standard normals.
    pub fn gaussian_fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.gaussian();
        }
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.gaussian_fill(&mut out);
        out
    }

    /// Uniform on the open interval (0, 1), safe to take logs of.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        if u > 0.0 {
            u
        } else {
            f64::MIN_POSITIVE
        }
    }
}

/// The streams one kernel step is allowed to touch.
pub struct StepRng {
    key: StreamKey,
    noise: Option<Stream>,
    accept: Option<Stream>,
}

impl StepRng {
    pub fn new(seed: u64, trial: u64, step: u64) -> Self {
        StepRng {
            key: StreamKey {
                seed,
                trial,
                step,
                kind: DrawKind::Noise,
            },
            noise: None,
            accept: None,
        }
    }

    pub fn noise(&mut self) -> &mut Stream {
        let key = StreamKey {
            kind: DrawKind::Noise,
            ..self.key
        };
        self.noise.get_or_insert_with(|| Stream::new(key))
    }

    pub fn accept(&mut self) -> &mut Stream {
        let key = StreamKey {
            kind: DrawKind::Accept,
            ..self.key
        };
        self.accept.get_or_insert_with(|| Stream::new(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let key = StreamKey {
            seed: 7,
            trial: 3,
            step: 11,
            kind: DrawKind::Noise,
        };
        let a: Vec<f64> = {
            let mut s = Stream::new(key);
            (0..32).map(|_| s.gaussian()).collect()
        };
        let b: Vec<f64> = {
            let mut s = Stream::new(key);
            (0..32).map(|_| s.gaussian()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_keys_give_distinct_streams() {
        let base = StreamKey {
            seed: 7,
            trial: 3,
            step: 11,
            kind: DrawKind::Noise,
        };
        let mut variants = vec![
            StreamKey { seed: 8, ..base },
            StreamKey { trial: 4, ..base },
            StreamKey { step: 12, ..base },
            StreamKey {
                kind: DrawKind::Accept,
                ..base
            },
        ];
        let first = Stream::new(base).gaussian();
        for key in variants.drain(..) {
            let other = Stream::new(key).gaussian();
            assert_ne!(first, other, "collision for {key:?}");
        }
    }

    #[test]
    fn uniform_is_in_open_interval() {
        let mut s = Stream::new(StreamKey {
            seed: 1,
            trial: 0,
            step: 0,
            kind: DrawKind::Accept,
        });
        for _ in 0..10_000 {
            let u = s.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
