mod common;

use std::sync::Arc;

use common::{ode_default, pv, toy};
use ejabc::diagnostics::{kde_density, l1_distance, linspace, marginal, toy_posterior_oracle, EffSummary};
use ejabc::mcmc::{run_chain, Outcome, SamplerKind, StepContext};
use ejabc::simulators::{generate_observed, AbcProblem, SdeScenario, SdeSpec, SimulatorSpec};
use ejabc::smc::{collect_prior_training, collect_training_data, SmcConfig};
use ejabc::{
    fit_gp, DiscrepancyBound, GpConfig, GpModel, GpQuantile, KernelSpec, Marginal, Prior, PriorSpec, ProposalSpec,
    RngStream,
};

fn toy_ctx<'a>(
    kind: SamplerKind,
    prior: &'a PriorSpec,
    proposal: &'a ProposalSpec,
    model: &'a AbcProblem<SimulatorSpec>,
    bound: Option<&'a dyn DiscrepancyBound>,
) -> StepContext<'a> {
    StepContext {
        kind,
        kernel: KernelSpec::Uniform,
        eps: 0.6,
        prior,
        proposal,
        model,
        bound,
    }
}

fn toy_l1(samples: &[ejabc::ParamVector]) -> f64 {
    let grid = linspace(-6.0, 6.0, 512);
    let kde = kde_density(&marginal(samples, 0), &grid, None).unwrap();
    l1_distance(&kde.density, &toy_posterior_oracle(&grid, 0.6).unwrap()).unwrap()
}

#[test]
fn abc_mcmc_matches_toy_oracle() {
    let (problem, prior) = toy();
    let proposal = ProposalSpec::from_sd(&[0.3]).unwrap();
    let ctx = toy_ctx(SamplerKind::AbcMcmc, &prior, &proposal, &problem, None);
    let out = run_chain(&ctx, 100_000, None, &RngStream::new(5, 0)).unwrap();
    let l1 = toy_l1(&out.samples);
    assert!(l1 < 0.1, "L1 = {l1}");
}

#[test]
fn oej_and_abc_chains_coincide_on_uniform_prior() {
    // with a uniform prior and kernel the early-rejection bound is never
    // below one inside the support, so both chains make the same moves
    let (problem, prior) = toy();
    let proposal = ProposalSpec::from_sd(&[0.3]).unwrap();
    let rng = RngStream::new(9, 0);
    let abc = run_chain(&toy_ctx(SamplerKind::AbcMcmc, &prior, &proposal, &problem, None), 100_000, None, &rng)
        .unwrap();
    let oej = run_chain(&toy_ctx(SamplerKind::OejMcmc, &prior, &proposal, &problem, None), 100_000, None, &rng)
        .unwrap();
    assert_eq!(abc.samples, oej.samples);
    let grid = linspace(-6.0, 6.0, 512);
    let fa = kde_density(&marginal(&abc.samples, 0), &grid, None).unwrap();
    let fo = kde_density(&marginal(&oej.samples, 0), &grid, None).unwrap();
    assert!(l1_distance(&fa.density, &fo.density).unwrap() < 0.05);
    assert_eq!(EffSummary::from_trace(&oej.trace).efficiency(), 0.0);
}

#[test]
fn ej_stage_one_only_fires_outside_the_prior_on_ode() {
    let (problem, prior) = ode_default();
    let train = collect_prior_training(300, &prior, &problem, &RngStream::new(1, 0)).unwrap();
    let gp = Arc::new(fit_gp(&train, &GpConfig::default(), &RngStream::new(2, 0)).unwrap());
    let bound = GpQuantile::new(gp, 0.05).unwrap();
    // large steps so that some proposals leave the box
    let proposal = ProposalSpec::from_sd(&[0.1, 0.1]).unwrap();
    let ctx = StepContext {
        kind: SamplerKind::EjMcmc,
        kernel: KernelSpec::Uniform,
        eps: 5.0,
        prior: &prior,
        proposal: &proposal,
        model: &problem,
        bound: Some(&bound),
    };
    let out = run_chain(&ctx, 3000, Some(&pv(&[2.0, 1.0])), &RngStream::new(3, 0)).unwrap();
    let stage1: Vec<_> = out.trace.iter().filter(|r| r.outcome == Outcome::EarlyRejectStage1).collect();
    assert!(!stage1.is_empty());
    assert!(stage1.iter().all(|r| prior.ln_density(&r.theta) == f64::NEG_INFINITY));
    let s = EffSummary::from_trace(&out.trace);
    assert!(s.n_early2 > 0);
    assert_eq!(s.n_iter, s.n_early1 + s.n_early2 + s.n_sim_reject + s.n_accept);
    // every in-support proposal got a prediction
    assert_eq!(s.n_pre, s.n_iter - s.n_early1);
}

#[test]
fn sde_pilot_collects_the_full_budget() {
    let spec = SimulatorSpec::SdeNetwork(SdeSpec {
        scenario: SdeScenario::D1,
        ..SdeSpec::default()
    });
    let truth = spec.default_truth();
    let observed = generate_observed(&spec, &pv(&truth), &mut RngStream::new(4, 0)).unwrap();
    let kind = spec.default_discrepancy();
    let problem = AbcProblem::new(spec, observed.clone(), kind.build(&observed)).unwrap();
    let prior = PriorSpec::new(
        truth
            .iter()
            .map(|t| Marginal::Lognormal {
                mu: t.ln(),
                sigma: 0.5,
            })
            .collect(),
    )
    .unwrap();
    let cfg = SmcConfig {
        n_particles: 500,
        ..SmcConfig::default()
    };
    let run = collect_training_data(&cfg, 2000, &prior, &problem, &RngStream::new(5, 0)).unwrap();
    assert!(run.complete);
    assert_eq!(run.data.len(), 2000);
    assert_eq!(run.data.dim(), Some(8));
    assert!(run.data.deltas().all(|d| d.is_finite() && d >= 0.0));
}

#[test]
fn fitted_gp_survives_json_round_trip() {
    let (problem, prior) = ode_default();
    let train = collect_prior_training(200, &prior, &problem, &RngStream::new(6, 0)).unwrap();
    let gp = fit_gp(&train, &GpConfig::default(), &RngStream::new(7, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gp.json");
    gp.save_json(&path).unwrap();
    let back = GpModel::load_json(&path).unwrap();
    let mut rng = RngStream::new(8, 0);
    for _ in 0..50 {
        let theta = prior.sample(&mut rng);
        assert_eq!(gp.predict(&theta).unwrap(), back.predict(&theta).unwrap());
        assert_eq!(gp.h_quantile(&theta, 0.05).unwrap(), back.h_quantile(&theta, 0.05).unwrap());
    }
}
