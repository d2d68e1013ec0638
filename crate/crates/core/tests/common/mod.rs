#![allow(dead_code)]

use ejabc::simulators::{generate_observed, AbcProblem, DiscrepancyKind, OdeSpec, SimulatorSpec, ToySpec};
use ejabc::{Dataset, DiscrepancySet, Marginal, ParamVector, PriorSpec, ProposalSpec, RngStream};
use nalgebra::DMatrix;

pub fn pv(x: &[f64]) -> ParamVector {
    ParamVector::new(x.to_vec()).unwrap()
}

/// Mixture toy with `y = 1`, `|x - 1|` and a `U(-6, 6)` prior.
pub fn toy() -> (AbcProblem<SimulatorSpec>, PriorSpec) {
    let observed = Dataset::scalar(1.0).unwrap();
    let problem = AbcProblem::new(
        SimulatorSpec::ToyMixture(ToySpec {}),
        observed.clone(),
        DiscrepancyKind::Abs.build(&observed),
    )
    .unwrap();
    let prior = PriorSpec::new(vec![Marginal::Uniform { lo: -6.0, hi: 6.0 }]).unwrap();
    (problem, prior)
}

/// ODE system observed at `(2, 1)` with RMSE discrepancy and a box prior.
pub fn ode(box_lo: [f64; 2], box_hi: [f64; 2]) -> (AbcProblem<SimulatorSpec>, PriorSpec) {
    let spec = SimulatorSpec::OdeSystem(OdeSpec::default());
    let observed = generate_observed(&spec, &pv(&[2.0, 1.0]), &mut RngStream::new(1, 0)).unwrap();
    let problem = AbcProblem::new(spec, observed.clone(), DiscrepancyKind::Rmse.build(&observed)).unwrap();
    let prior = PriorSpec::new(vec![
        Marginal::Uniform { lo: box_lo[0], hi: box_hi[0] },
        Marginal::Uniform { lo: box_lo[1], hi: box_hi[1] },
    ])
    .unwrap();
    (problem, prior)
}

pub fn ode_default() -> (AbcProblem<SimulatorSpec>, PriorSpec) {
    ode([1.8, 0.8], [2.2, 1.2])
}

/// Gaussian random walk whose covariance is `scale` times the covariance
/// of the training parameters with the smallest `frac` of discrepancies.
pub fn proposal_from_training(train: &DiscrepancySet, frac: f64, scale: f64) -> ProposalSpec {
    let mut recs: Vec<&(ParamVector, f64)> = train.records().iter().collect();
    recs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let keep = ((frac * recs.len() as f64).ceil() as usize).max(10).min(recs.len());
    let sel = &recs[..keep];
    let p = sel[0].0.dim();
    let n = sel.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| sel.iter().map(|r| r.0[j]).sum::<f64>() / n).collect();
    let mut cov = DMatrix::zeros(p, p);
    for r in sel {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (r.0[i] - mean[i]) * (r.0[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    for i in 0..p {
        cov[(i, i)] += 1e-10 * cov.trace() / p as f64;
    }
    ProposalSpec::new(cov * scale).unwrap()
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[k]
}
