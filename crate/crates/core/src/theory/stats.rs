//! Chunked, order-deterministic Monte-Carlo moment accumulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per independently seeded chunk.
pub const CHUNK: usize = 8192;

/// Running means and centered cross-products of `k` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Row-major `k × k` sums of centered cross products.
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(k: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; k],
            m2: vec![0.0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Welford update.
    pub fn push(&mut self, v: &[f64]) {
        let k = self.k();
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..k {
            let after_i = v[i] - self.mean[i];
            for j in 0..k {
                self.m2[i * k + j] += delta[j] * after_i;
            }
        }
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let k = self.k();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..k {
            for j in 0..k {
                self.m2[i * k + j] += other.m2[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.n += other.n;
    }

    /// Sample covariance with divisor `n − 1`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2[i * self.k() + j] / (self.n as f64 - 1.0)
    }

    pub fn var(&self, i: usize) -> f64 {
        self.cov(i, i).max(0.0)
    }

    /// Standard error of the mean of variable `i`.
    pub fn se(&self, i: usize) -> f64 {
        (self.var(i) / self.n as f64).sqrt()
    }

    /// Standard error of `mean_i − c·mean_j`.
    pub fn se_diff(&self, i: usize, j: usize, c: f64) -> f64 {
        let v = self.var(i) + c * c * self.var(j) - 2.0 * c * self.cov(i, j);
        (v.max(0.0) / self.n as f64).sqrt()
    }
}

/// Runs `per_sample` over `n` draws split into [`CHUNK`]-sized chunks.
/// Chunk `c` uses a ChaCha8 generator seeded with `seed` on stream `c`,
/// and chunks are merged in index order, so the result does not depend
/// on the number of worker threads.
pub fn monte_carlo<F>(n: usize, seed: u64, k: usize, per_sample: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut m = Moments::new(k);
            let mut buf = vec![0.0; k];
            for _ in 0..len {
                per_sample(&mut rng, &mut buf);
                m.push(&buf);
            }
            m
        })
        .collect();
    let mut total = Moments::new(k);
    for p in &parts {
        total.merge(p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<[f64; 2]> = (0..100).map(|i| [i as f64 * 0.1, (i as f64).sin()]).collect();
        let mut whole = Moments::new(2);
        data.iter().for_each(|v| whole.push(v));
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        data[..37].iter().for_each(|v| a.push(v));
        data[37..].iter().for_each(|v| b.push(v));
        a.merge(&b);
        for (x, y) in a.mean.iter().zip(&whole.mean) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.m2.iter().zip(&whole.m2) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_variable_has_zero_variance() {
        let m = monte_carlo(20_000, 1, 1, |_, out| out[0] = 0.5);
        assert_eq!(m.mean[0], 0.5);
        assert_eq!(m.se(0), 0.0);
    }

    #[test]
    fn deterministic_across_pools() {
        let f = |rng: &mut ChaCha8Rng, out: &mut [f64]| out[0] = rng.gen::<f64>();
        let a = monte_carlo(30_000, 4, 1, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| monte_carlo(30_000, 4, 1, f));
        assert_eq!(a, b);
    }
}
