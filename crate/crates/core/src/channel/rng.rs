//! Deterministic random stream.
//!
//! Generator definition (bit-exact): SplitMix64. Each draw advances the
//! 64-bit state by `0x9E3779B97F4A7C15` (wrapping) and returns
//!
//! ```text
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! Uniform reals use the top 53 bits, `(z >> 11) * 2^-53`, on `[0, 1)`.
//! Integers below `n` use Lemire's multiply-shift with rejection.
//! Normals use Box–Muller on `u1 = 1 - uniform()`, `u2 = uniform()`:
//! `sqrt(-2 ln u1) * cos(2 pi u2)` is returned first and the matching
//! `sin` variate is returned by the following call.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    seed: u64,
    state: u64,
    position: u64,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            state: seed,
            position: 0,
            spare: None,
        }
    }

    /// Independent stream for worker or sweep point `index`: seeded `seed + index`.
    pub fn derive(seed: u64, index: u64) -> Self {
        Self::new(seed.wrapping_add(index))
    }

    /// Stream for purpose `key` (initialisation, step `i`, ...) under `seed`:
    /// the first output of a generator seeded `seed ^ (key * GAMMA)` seeds the
    /// returned stream.
    pub fn keyed(seed: u64, key: u64) -> Self {
        let mut mixer = Self::new(seed ^ key.wrapping_mul(GAMMA));
        let mut s = Self::new(mixer.next_u64());
        s.seed = seed;
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        self.position += 1;
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = u128::from(self.next_u64()) * u128::from(n);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}
