//! Seeded 1D value noise in fixed point, so every platform draws the same wobble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONE: i64 = 1 << 12;

#[derive(Debug, Clone)]
pub struct SmoothNoise {
    knots: Vec<i64>,
    spacing: f64,
}

impl SmoothNoise {
    /// Knots every `spacing` units across `[0, span]`.
    pub fn new(seed: u64, span: f64, spacing: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (span / spacing).ceil().max(1.0) as usize + 2;
        let knots = (0..n).map(|_| rng.random_range(-ONE..=ONE)).collect();
        Self { knots, spacing }
    }

    /// Value in `[-1, 1]`, C1 between knots (cubic smoothstep).
    pub fn at(&self, s: f64) -> f64 {
        let x = (s / self.spacing).max(0.0);
        let i = (x.floor() as usize).min(self.knots.len() - 2);
        let f = (((x - i as f64) * ONE as f64) as i64).clamp(0, ONE);
        let h = f * f * (3 * ONE - 2 * f) / (ONE * ONE);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        (a * ONE + (b - a) * h) as f64 / (ONE * ONE) as f64
    }

    /// Noise that wraps around `period`, for closed curves.
    pub fn periodic(seed: u64, knots: usize) -> Self {
        let mut n = Self::new(seed, knots as f64, 1.0);
        n.knots.truncate(knots);
        n.knots.push(n.knots[0]);
        n
    }

    pub fn at_periodic(&self, t: f64) -> f64 {
        let period = (self.knots.len() - 1) as f64;
        self.at(t.rem_euclid(1.0) * period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a = SmoothNoise::new(7, 100.0, 10.0);
        let b = SmoothNoise::new(7, 100.0, 10.0);
        for k in 0..1000 {
            let s = k as f64 * 0.1;
            assert_eq!(a.at(s).to_bits(), b.at(s).to_bits());
            assert!(a.at(s).abs() <= 1.0);
        }
    }

    #[test]
    fn periodic_wraps() {
        let n = SmoothNoise::periodic(3, 12);
        assert!((n.at_periodic(0.0) - n.at_periodic(1.0)).abs() < 1e-12);
        assert!((n.at_periodic(0.999999) - n.at_periodic(0.0)).abs() < 1e-3);
    }
}
