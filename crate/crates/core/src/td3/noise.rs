use rand::Rng;
use rand_distr::StandardNormal;

/// Ornstein-Uhlenbeck process discretized with a unit step per control step:
/// `n ← n + θ(0 − n) + σ ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64) -> Self {
        Self { theta, sigma, state: vec![0.0; dim] }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Stationary standard deviation of the recursion.
    pub fn stationary_std(&self) -> f64 {
        self.sigma / (self.theta * (2.0 - self.theta)).sqrt()
    }
}

pub fn ou_next<R: Rng + ?Sized>(noise: &mut OuNoise, rng: &mut R) -> Vec<f64> {
    for n in noise.state.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *n += noise.theta * (0.0 - *n) + noise.sigma * xi;
    }
    noise.state.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_step_decays_toward_zero() {
        let mut n = OuNoise::new(1, 0.25, 0.0);
        n.state[0] = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n1 = ou_next(&mut n, &mut rng)[0];
        // 0.1 and 0.075 are not exact binary fractions; allow one ulp.
        assert!((n1 - 0.075).abs() <= f64::EPSILON * 0.075, "{n1}");
    }

    #[test]
    fn reset_zeroes_every_dimension() {
        let mut n = OuNoise::new(3, 0.25, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        ou_next(&mut n, &mut rng);
        assert!(n.state.iter().all(|&x| x != 0.0));
        n.reset();
        assert_eq!(n.state, vec![0.0; 3]);
    }

    #[test]
    fn stationary_std_formula() {
        let n = OuNoise::new(1, 0.25, 0.05);
        assert!((n.stationary_std() - 0.075_593).abs() < 1e-6);
    }

    #[test]
    fn long_run_statistics() {
        let mut n = OuNoise::new(1, 0.25, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            ou_next(&mut n, &mut rng);
        }
        let steps = 100_000;
        let xs: Vec<f64> = (0..steps).map(|_| ou_next(&mut n, &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / steps as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / steps as f64).sqrt();
        let target = n.stationary_std();
        assert!((sd / target - 1.0).abs() < 0.10, "sd {sd} vs {target}");
        assert!(mean.abs() < 3.0 * target / (steps as f64).sqrt() * 7f64.sqrt(), "mean {mean}");
    }
}
