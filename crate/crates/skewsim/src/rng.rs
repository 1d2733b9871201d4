//! Counter-based random number streams.
//!
//! Every primitive random decision in a simulation draws from a stream keyed
//! by `(master seed, purpose, path index, step index)`. The key is hashed into
//! an initial state with the splitmix64 finalizer; successive outputs walk the
//! state by the golden-ratio increment. Consequences the estimators rely on:
//!
//! - A path's randomness is a pure function of `(seed, path index)`, so batch
//!   results are independent of worker count and of scheduling order.
//! - Each step owns its stream, so a step may consume a variable number of
//!   draws (rejection loops in the normal sampler, optional crossing and sign
//!   draws) without shifting the randomness of later steps.
//! - Distinct purposes (walk increments vs excursion signs) are decorrelated
//!   even at equal `(path, step)` keys.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0x1656_67B1_9E37_79F9;

/// What a stream's draws are spent on. Keys streams apart so that consuming an
/// extra draw for one purpose can never shift another purpose's sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamChannel {
    /// Per-step motion draws: walk increments, exact-transition normals.
    Motion,
    /// Per-excursion sign flips, keyed by excursion index instead of step.
    ExcursionSign,
}

impl StreamChannel {
    fn tag(self) -> u64 {
        match self {
            StreamChannel::Motion => 0x01,
            StreamChannel::ExcursionSign => 0x02,
        }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One keyed stream. Cheap to construct; build a fresh one per step.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn for_step(seed: u64, channel: StreamChannel, path_index: u64, step_index: u64) -> Self {
        let mut h = mix64(seed ^ SEED_SALT);
        h = mix64(h ^ channel.tag());
        h = mix64(h ^ path_index);
        h = mix64(h ^ step_index);
        CounterRng { state: h }
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw (ziggurat).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = CounterRng::for_step(7, StreamChannel::Motion, 3, 11);
        let mut b = CounterRng::for_step(7, StreamChannel::Motion, 3, 11);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn keys_separate_streams() {
        let first = |mut r: CounterRng| r.next_u64();
        let base = first(CounterRng::for_step(7, StreamChannel::Motion, 3, 11));
        assert_ne!(base, first(CounterRng::for_step(8, StreamChannel::Motion, 3, 11)));
        assert_ne!(base, first(CounterRng::for_step(7, StreamChannel::ExcursionSign, 3, 11)));
        assert_ne!(base, first(CounterRng::for_step(7, StreamChannel::Motion, 4, 11)));
        assert_ne!(base, first(CounterRng::for_step(7, StreamChannel::Motion, 3, 12)));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = CounterRng::for_step(42, StreamChannel::Motion, 0, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn uniform_mean_near_half() {
        let n = 100_000;
        let mut sum = 0.0;
        for step in 0..n {
            let mut r = CounterRng::for_step(42, StreamChannel::Motion, 0, step);
            sum += r.uniform();
        }
        let mean = sum / n as f64;
        // SE = 1/sqrt(12 n) ~ 9.1e-4; allow 4 SE.
        assert!((mean - 0.5).abs() < 3.7e-3, "mean = {mean}");
    }

    #[test]
    fn normal_moments_sane() {
        let n = 100_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for step in 0..n {
            let mut r = CounterRng::for_step(9, StreamChannel::Motion, 1, step);
            let z = r.standard_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt() * 1.0, "mean = {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / n as f64).sqrt(), "var = {var}");
    }

    #[test]
    fn fill_bytes_matches_words() {
        let mut a = CounterRng::for_step(1, StreamChannel::Motion, 2, 3);
        let mut b = CounterRng::for_step(1, StreamChannel::Motion, 2, 3);
        let mut buf = [0u8; 12];
        a.fill_bytes(&mut buf);
        let w0 = b.next_u64().to_le_bytes();
        let w1 = b.next_u64().to_le_bytes();
        assert_eq!(&buf[..8], &w0);
        assert_eq!(&buf[8..], &w1[..4]);
    }
}
