use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A deterministic random stream identified by `(master_seed, stream_id)`.
///
/// The master seed keys a ChaCha8 generator and the stream id selects one of
/// its 2^64 independent streams, so two streams never share state. Child
/// streams are keyed by `splitmix64(master_seed ^ splitmix64(stream_id))`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

/// The splitmix64 finalizer.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream derived from this stream's identity (not its position).
    pub fn substream(&self, label: u64) -> RngStream {
        let key = splitmix64(self.master_seed ^ splitmix64(self.stream_id));
        RngStream::new(key, label)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let idx = (self.uniform() * n as f64) as usize;
        idx.min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> u8 {
        u8::from(self.uniform() < p)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
