use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Counter-based source of exploration directions.
///
/// The vector for point `j` at round `t` is drawn from ChaCha20 keyed by the
/// master seed (expanded by `seed_from_u64`) on stream `(t << 32) | j`, using
/// `rand_distr`'s ziggurat `StandardNormal`. Draws therefore depend only on
/// `(seed, t, j)`, not on the order in which points are visited.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianStream {
    seed: u64,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal_vector(&self, round: usize, point: usize, d: usize) -> Vec<f64> {
        assert!(round < 1 << 32 && point < 1 << 32, "round or point index out of range");
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((round as u64) << 32) | point as u64);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}
