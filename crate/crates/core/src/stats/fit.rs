//! Unweighted least-squares fits on a linear scale.
//!
//! Exponential models have one nonlinear rate. For a fixed rate the best
//! amplitude is a closed-form projection, so the residual sum of squares is
//! profiled over the rate and minimized by a log-spaced scan followed by a
//! golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// `y = amplitude * exp(-x / decay)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub decay: f64,
    pub residuals: Vec<f64>,
}

/// `y = amplitude * (1 - exp(-x / scale))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub amplitude: f64,
    pub scale: f64,
    pub residuals: Vec<f64>,
}

fn check_points(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} abscissae for {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("abscissae must be distinct".into()));
    }
    Ok(())
}

pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    check_points(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    Ok(LinearFit {
        slope,
        intercept,
        residuals,
    })
}

/// Best amplitude and residual sum of squares for basis values `f(x_i)`.
fn project(ys: &[f64], basis: &[f64]) -> (f64, f64) {
    let fy: f64 = basis.iter().zip(ys).map(|(f, y)| f * y).sum();
    let ff: f64 = basis.iter().map(|f| f * f).sum();
    if ff == 0.0 {
        return (0.0, ys.iter().map(|y| y * y).sum());
    }
    let a = fy / ff;
    let rss = basis.iter().zip(ys).map(|(f, y)| (y - a * f).powi(2)).sum();
    (a, rss)
}

/// Minimizes the profiled residual over `ln(rate)`. Returns the rate, or
/// `None` if the optimum sits on the edge of the searched range.
fn profile_rate(xs: &[f64], ys: &[f64], basis: impl Fn(f64, f64) -> f64) -> Option<f64> {
    let span = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if span == 0.0 {
        return None;
    }
    let rss_at = |log_rate: f64| {
        let rate = log_rate.exp();
        let b: Vec<f64> = xs.iter().map(|&x| basis(x, rate)).collect();
        project(ys, &b).1
    };
    // rates from 1e-6 to 1e3 decays per span
    let (lo, hi) = ((1.0e-6 / span).ln(), (1.0e3 / span).ln());
    const GRID: usize = 400;
    let step = (hi - lo) / GRID as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=GRID {
        let r = rss_at(lo + step * i as f64);
        if r < best.1 {
            best = (i, r);
        }
    }
    if best.0 == 0 || best.0 == GRID {
        return None;
    }
    let (mut a, mut b) = (lo + step * (best.0 - 1) as f64, lo + step * (best.0 + 1) as f64);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rss_at(d);
        }
    }
    Some((0.5 * (a + b)).exp())
}

/// Fits a decaying exponential. Data that do not decay is a fit failure.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    check_points(xs, ys)?;
    let decay_basis = |x: f64, rate: f64| (-rate * x).exp();
    let rate = profile_rate(xs, ys, decay_basis).ok_or_else(|| Error::Fit("data show no exponential decay".into()))?;
    let basis: Vec<f64> = xs.iter().map(|&x| decay_basis(x, rate)).collect();
    let (amplitude, _) = project(ys, &basis);
    if amplitude <= 0.0 {
        return Err(Error::Fit("non-positive amplitude".into()));
    }
    let residuals = ys.iter().zip(&basis).map(|(y, f)| y - amplitude * f).collect();
    Ok(ExponentialFit {
        amplitude,
        decay: 1.0 / rate,
        residuals,
    })
}

/// Fits an exponential approach to a plateau through the origin.
pub fn fit_saturation(xs: &[f64], ys: &[f64]) -> Result<SaturationFit> {
    check_points(xs, ys)?;
    let sat_basis = |x: f64, rate: f64| -(-rate * x).exp_m1();
    let rate = profile_rate(xs, ys, sat_basis).ok_or_else(|| Error::Fit("data show no saturation".into()))?;
    let basis: Vec<f64> = xs.iter().map(|&x| sat_basis(x, rate)).collect();
    let (amplitude, _) = project(ys, &basis);
    let residuals = ys.iter().zip(&basis).map(|(y, f)| y - amplitude * f).collect();
    Ok(SaturationFit {
        amplitude,
        scale: 1.0 / rate,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let fit = fit_linear(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn exact_exponential() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-x / 2.0).exp()).collect();
        let fit = fit_exponential(&xs, &ys).unwrap();
        assert!((fit.decay - 2.0).abs() < 1e-6, "{}", fit.decay);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.4).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (-x / 2.8f64).exp() * (1.0 + 0.05 * (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt()))
            .collect();
        let fit = fit_exponential(&xs, &ys).unwrap();
        assert!((2.5..=3.1).contains(&fit.decay), "{}", fit.decay);
    }

    #[test]
    fn exact_saturation() {
        let xs: Vec<f64> = (1..15).map(|i| i as f64 * 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 700.0 * (1.0 - (-x / 900.0).exp())).collect();
        let fit = fit_saturation(&xs, &ys).unwrap();
        assert!((fit.scale - 900.0).abs() < 1e-3);
        assert!((fit.amplitude - 700.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_linear(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_linear(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 2.0], &[1.0, 2.0]).is_err());
        // growing data cannot be a decay
        assert!(fit_exponential(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 4.0, 8.0]).is_err());
    }
}
