//! Philox4x64-10, a counter-based generator.
//!
//! Every draw is a pure function of `(seed, stream, draw, trial, attempt)`:
//! key = `[seed, stream]`, counter = `[draw, trial, attempt, 0]`, and the
//! first output word is used. Streams are bit-identical to Random123 and to
//! `numpy.random.Philox` (numpy increments its counter before each block, so
//! numpy's block for counter `c` is this function at `c + 1`).

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::rational;

const M0: u64 = 0xD2E7_470E_E14C_6C93;
const M1: u64 = 0xCA5A_8263_9512_1157;
const W0: u64 = 0x9E37_79B9_7F4A_7C15;
const W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = a as u128 * b as u128;
    ((p >> 64) as u64, p as u64)
}

/// One Philox4x64 block with 10 rounds.
pub fn philox4x64(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// A uniform integer in `0..bound` from key `[seed, stream]` and `index`,
/// by rejection on the first output word.
pub fn uniform_below(seed: u64, stream: u64, index: u64, bound: u64) -> u64 {
    assert!(bound > 0, "bound must be positive");
    let limit = ((1u128 << 64) / bound as u128) * bound as u128;
    let mut attempt = 0u64;
    loop {
        let u = philox4x64([index, 0, attempt, 1], [seed, stream])[0];
        if (u as u128) < limit {
            return u % bound;
        }
        attempt += 1;
    }
}

/// FNV-1a over the bytes of `parts`, used to derive stable stream ids.
pub fn stream_id(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// A categorical distribution with integer weights `w_i / L`.
#[derive(Debug, Clone)]
pub struct Categorical {
    /// Support points, ascending.
    points: Vec<usize>,
    cumulative: Vec<u64>,
    total: u64,
    /// `floor(2^64 / total) * total`; larger words are rejected.
    bound: u128,
}

impl Categorical {
    pub fn new(mu: &DiscreteMeasure) -> Result<Self> {
        let points = mu.support();
        let scale = rational::lcm_of_denominators(mu.weights());
        let total = scale
            .to_u64()
            .ok_or_else(|| Error::Overflow(format!("weight denominator {scale} exceeds 64 bits")))?;
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0u64;
        for &x in &points {
            let w = (mu.weight(x) * rational::Rational::from_integer(BigInt::from(total)))
                .to_integer()
                .to_u64()
                .expect("weight units fit below the total");
            acc += w;
            cumulative.push(acc);
        }
        let bound = ((1u128 << 64) / total as u128) * total as u128;
        Ok(Categorical {
            points,
            cumulative,
            total,
            bound,
        })
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Index into [`Self::points`] of draw `draw` in `trial`.
    pub fn draw(&self, seed: u64, stream: u64, trial: u64, draw: u64) -> usize {
        let key = [seed, stream];
        let mut attempt = 0u64;
        loop {
            let u = philox4x64([draw, trial, attempt, 0], key)[0];
            if (u as u128) < self.bound {
                let r = u % self.total;
                return self.cumulative.partition_point(|&c| c <= r);
            }
            attempt += 1;
        }
    }

    /// Occupation counts over [`Self::points`] of `n` draws.
    pub fn sample_counts(&self, n: u64, seed: u64, stream: u64, trial: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.points.len()];
        for d in 0..n {
            counts[self.draw(seed, stream, trial, d)] += 1;
        }
        counts
    }

    /// Counts spread back over the full space.
    pub fn dense_counts(&self, space_len: usize, local: &[u64]) -> Vec<u64> {
        let mut dense = vec![0u64; space_len];
        for (&x, &c) in self.points.iter().zip(local) {
            dense[x] = c;
        }
        dense
    }
}
