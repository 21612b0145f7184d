//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream selected by `(seed, stream_id)`. Draw
//! `i` of a stream always comes from the same keystream position, so a Monte
//! Carlo estimate split into chunks gives identical draws however the chunks
//! are scheduled.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_indexed, Execution};

/// Draws per chunk in chunked Monte Carlo.
pub const CHUNK: u64 = 1 << 14;

/// Generator for `stream_id` under `seed`, positioned at draw 0.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Generator positioned at draw `index` (one draw = one `u64` = two words).
pub fn stream_at(seed: u64, stream_id: u64, index: u64) -> ChaCha8Rng {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos(2 * index as u128);
    rng
}

/// A uniform in the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Mean of `f(U_i)` over `count` uniforms, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

#[derive(Clone, Copy)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        let mean = self.mean + delta * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + delta * delta * (self.n as f64 * o.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }
}

/// Monte Carlo mean of `f` applied to `count` uniforms from `(seed, stream_id)`.
/// Chunks are combined in a fixed order, so the result does not depend on
/// `exec`.
pub fn mc_mean<F>(exec: Execution, seed: u64, stream_id: u64, count: u64, f: F) -> McEstimate
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    let parts = map_indexed(exec, chunks as usize, |c| {
        let start = c as u64 * CHUNK;
        let len = CHUNK.min(count - start);
        let mut rng = stream_at(seed, stream_id, start);
        let mut m = Moments { n: 0, mean: 0.0, m2: 0.0 };
        for _ in 0..len {
            let x = f(open01(&mut rng));
            m.n += 1;
            let d = x - m.mean;
            m.mean += d / m.n as f64;
            m.m2 += d * (x - m.mean);
        }
        m
    });
    let total = parts.into_iter().fold(Moments { n: 0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let var = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    McEstimate { mean: total.mean, stderr: (var / total.n.max(1) as f64).sqrt(), count: total.n }
}

/// `count` values `f(U_i)` in draw order.
pub fn draw_map<F>(exec: Execution, seed: u64, stream_id: u64, count: u64, f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    map_indexed(exec, chunks as usize, |c| {
        let start = c as u64 * CHUNK;
        let len = CHUNK.min(count - start);
        let mut rng = stream_at(seed, stream_id, start);
        (0..len).map(|_| f(open01(&mut rng))).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
