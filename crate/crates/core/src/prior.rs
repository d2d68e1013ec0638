//! Product priors and Gaussian random-walk proposals.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::ParamVector;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub trait Prior: Send + Sync {
    fn dim(&self) -> usize;
    /// Log density, `-inf` outside the support.
    fn ln_density(&self, theta: &ParamVector) -> f64;
    fn sample(&self, rng: &mut RngStream) -> ParamVector;
}

pub trait Proposal: Send + Sync {
    fn propose(&self, from: &ParamVector, rng: &mut RngStream) -> ParamVector;
    /// `ln q(to | from)`.
    fn ln_density(&self, to: &ParamVector, from: &ParamVector) -> f64;
    /// `q(to | from) = q(from | to)` for all pairs; lets samplers skip the
    /// proposal ratio.
    fn is_symmetric(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// `ln(theta) ~ N(mu, sigma^2)`.
    Lognormal { mu: f64, sigma: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Marginal::Lognormal { mu, sigma } => {
                mu.is_finite() && sigma.is_finite() && sigma > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid marginal {self:?}"))
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
            }
            Marginal::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let lx = x.ln();
                let z = (lx - mu) / sigma;
                -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z - lx
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
            Marginal::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Marginal::Lognormal { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
        }
    }
}

/// Independent product of one-dimensional marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marginal>", into = "Vec<Marginal>")]
pub struct PriorSpec {
    marginals: Vec<Marginal>,
}

impl PriorSpec {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return invalid("prior needs at least one coordinate");
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }
}

impl TryFrom<Vec<Marginal>> for PriorSpec {
    type Error = Error;

    fn try_from(m: Vec<Marginal>) -> Result<Self> {
        PriorSpec::new(m)
    }
}

impl From<PriorSpec> for Vec<Marginal> {
    fn from(p: PriorSpec) -> Self {
        p.marginals
    }
}

impl Prior for PriorSpec {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    fn ln_density(&self, theta: &ParamVector) -> f64 {
        debug_assert_eq!(theta.dim(), self.dim());
        self.marginals
            .iter()
            .zip(theta.as_slice())
            .map(|(m, &x)| m.ln_density(x))
            .sum()
    }

    fn sample(&self, rng: &mut RngStream) -> ParamVector {
        ParamVector::from_vec_unchecked(self.marginals.iter().map(|m| m.sample(rng)).collect())
    }
}

/// Checked prior log density.
pub fn prior_logdensity(prior: &PriorSpec, theta: &ParamVector) -> Result<f64> {
    theta.check_dim(prior.dim())?;
    Ok(prior.ln_density(theta))
}

/// Gaussian random walk `theta* ~ N(theta, Sigma)`.
#[derive(Debug, Clone)]
pub struct ProposalSpec {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    ln_norm: f64,
    prec: DMatrix<f64>,
}

impl ProposalSpec {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let p = cov.nrows();
        if p == 0 || cov.ncols() != p {
            return invalid("proposal covariance must be square and non-empty");
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return invalid("proposal covariance has non-finite entries");
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > 1e-12 * cov.abs().max().max(1.0) {
            return invalid("proposal covariance is not symmetric");
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("proposal covariance is not positive definite".into()))?;
        let l = chol.l();
        let ln_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let prec = chol.inverse();
        Ok(Self {
            ln_norm: -(p as f64) * LN_SQRT_2PI - 0.5 * ln_det,
            cov,
            chol: l,
            prec,
        })
    }

    pub fn from_sd(sd: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_iterator(
            sd.len(),
            sd.iter().map(|s| s * s),
        )))
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

impl Proposal for ProposalSpec {
    fn propose(&self, from: &ParamVector, rng: &mut RngStream) -> ParamVector {
        let p = self.dim();
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.standard_normal()));
        let step = &self.chol * z;
        ParamVector::from_vec_unchecked(
            from.as_slice().iter().zip(step.iter()).map(|(a, b)| a + b).collect(),
        )
    }

    fn ln_density(&self, to: &ParamVector, from: &ParamVector) -> f64 {
        let p = self.dim();
        let d = DVector::from_iterator(
            p,
            to.as_slice().iter().zip(from.as_slice()).map(|(a, b)| a - b),
        );
        self.ln_norm - 0.5 * (d.transpose() * &self.prec * &d)[(0, 0)]
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_prior() {
        let prior = PriorSpec::new(vec![Marginal::Uniform { lo: -6.0, hi: 6.0 }]).unwrap();
        let l0 = prior_logdensity(&prior, &pv(&[0.0])).unwrap();
        assert!((l0 - (1.0f64 / 12.0).ln()).abs() < 1e-15);
        assert_eq!(prior_logdensity(&prior, &pv(&[7.0])).unwrap(), f64::NEG_INFINITY);
        assert!(prior_logdensity(&prior, &pv(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn lognormal_change_of_variables() {
        let m = Marginal::Lognormal { mu: 2.25, sigma: 0.08 };
        let tau = 2.25f64.exp();
        let normal_at_mode = 1.0 / (0.08 * (2.0 * std::f64::consts::PI).sqrt());
        let expected = (normal_at_mode / tau).ln();
        assert!((m.ln_density(tau) - expected).abs() < 1e-12);
        // the density integrates to one (trapezoid on a fine grid)
        let (a, b, n) = (4.0, 20.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * m.ln_density(a + h * i as f64).exp();
        }
        assert!((s * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_marginals() {
        assert!(PriorSpec::new(vec![Marginal::Uniform { lo: 1.0, hi: 1.0 }]).is_err());
        assert!(PriorSpec::new(vec![Marginal::Normal { mean: 0.0, sd: 0.0 }]).is_err());
        assert!(PriorSpec::new(vec![]).is_err());
    }

    #[test]
    fn prior_samples_inside_support() {
        let prior = PriorSpec::new(vec![
            Marginal::Uniform { lo: 1.8, hi: 2.2 },
            Marginal::Lognormal { mu: 0.0, sigma: 1.0 },
        ])
        .unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let th = prior.sample(&mut rng);
            assert!(prior.ln_density(&th).is_finite());
        }
    }

    #[test]
    fn proposal_is_symmetric() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let q = ProposalSpec::new(cov).unwrap();
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[1.3, 1.6]);
        assert!((q.ln_density(&a, &b) - q.ln_density(&b, &a)).abs() < 1e-14);
        assert!(ProposalSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(ProposalSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0])).is_err());
    }

    #[test]
    fn proposal_moments() {
        let q = ProposalSpec::from_sd(&[0.3]).unwrap();
        let mut rng = RngStream::new(9, 9);
        let from = pv(&[1.0]);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| q.propose(&from, &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005);
        assert!((var - 0.09).abs() < 0.002);
    }
}
