//! Deterministic low-discrepancy sampling.

/// Radical inverse of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    value
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Halton sequence in `[0, 1)^dim`. The seed shifts the starting index so that
/// different seeds give disjoint, reproducible point sets.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
        // index 0 is the origin in every base; start at 1
        Self { dim, next: 1 + seed.wrapping_mul(7919) % (1 << 20) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.next;
        self.next += 1;
        Some(PRIMES[..self.dim].iter().map(|&b| radical_inverse(i, b)).collect())
    }
}

/// Points of the closed ball of radius `radius` in `R^dim`, by rejection from
/// the Halton cube.
pub fn ball_points(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    Halton::new(dim, seed)
        .map(|u| u.into_iter().map(|x| 2.0 * x - 1.0).collect::<Vec<_>>())
        .filter(|x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0)
        .take(count)
        .map(|x| x.into_iter().map(|v| v * radius).collect())
        .collect()
}
