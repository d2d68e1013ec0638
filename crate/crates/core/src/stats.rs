//! Standard-normal helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Phi(x)`, accurate in the far lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return norm_cdf(x).ln();
    }
    // Mills-ratio asymptotics: Phi(x) ~ phi(x)/|x| (1 - 1/x^2 + 3/x^4)
    let x2 = x * x;
    -0.5 * x2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-x).ln()
        + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
}

pub fn norm_ppf(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(p)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
