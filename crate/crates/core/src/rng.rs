//! Counter-based deterministic sampling.
//!
//! Every random draw in the toolkit comes from `splitmix64` applied to
//! `seed + counter` with odd-constant mixing, so a seed fully determines a
//! sample set and any implementation (in any language) reproduces it:
//!
//! ```text
//! state = seed .wrapping_add( counter * 0x9E3779B97F4A7C15 )
//! z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! `f64` samples take the top 53 bits of the output divided by 2^53.

/// splitmix64 output for a given seed and counter.
#[must_use]
pub fn splitmix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateful counter view over the splitmix64 stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    seed: u64,
    counter: u64,
}

impl Sampler {
    #[must_use]
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Next raw 64-bit word.
    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix64(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform point in the centered cube `[-r, r]^n`.
    pub fn point_in_box(&mut self, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform_in(-r, r)).collect()
    }

    /// Uniform choice from a slice.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        let idx = (self.next_u64() % items.len() as u64) as usize;
        &items[idx]
    }

    /// Point on the unit sphere (rejection-free: normalized Gaussian-ish
    /// via Box-Muller on uniform pairs).
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let u1 = self.uniform().max(1e-300);
            let u2 = self.uniform();
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (2.0 * std::f64::consts::PI * u2).cos());
            if v.len() < n {
                v.push(r * (2.0 * std::f64::consts::PI * u2).sin());
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}
