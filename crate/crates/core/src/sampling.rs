//! Thin wrappers over `rand_distr` that accept the degenerate parameters
//! (zero mean, zero trials, probability 0 or 1) the simulator produces.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};

/// Poisson draw. Non-positive or non-finite means give 0.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean.is_nan() || mean <= 0.0 || !mean.is_finite() {
        return 0;
    }
    // rand_distr returns the count as a float
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Binomial thinning of `n` trials with success probability `p`.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
}

/// Number of failures before the first success.
pub fn geometric<R: Rng + ?Sized>(rng: &mut R, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return u64::MAX;
    }
    Geometric::new(p).map(|d| d.sample(rng)).unwrap_or(u64::MAX)
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        rng.random::<f64>() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::shot_rng;

    #[test]
    fn degenerate_parameters() {
        let mut rng = shot_rng(0, 0);
        assert_eq!(poisson(&mut rng, 0.0), 0);
        assert_eq!(poisson(&mut rng, -1.0), 0);
        assert_eq!(binomial(&mut rng, 10, 0.0), 0);
        assert_eq!(binomial(&mut rng, 10, 1.0), 10);
        assert_eq!(binomial(&mut rng, 0, 0.5), 0);
        assert_eq!(geometric(&mut rng, 1.0), 0);
        assert!(!bernoulli(&mut rng, 0.0));
        assert!(bernoulli(&mut rng, 1.0));
    }
}
