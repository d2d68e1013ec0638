//! Plot-ready CSVs built from the artifacts of a finished run.

use std::path::PathBuf;

use ejabc::diagnostics::{kde_density, linspace, marginal, silverman_bandwidth, DEFAULT_GRID_POINTS};
use ejabc::io::{fmt_num, read_numeric_csv, write_csv};
use ejabc::mcmc::{read_samples_csv, read_trace_csv, Outcome};
use ejabc::ParamVector;

use crate::metrics::load_posterior;
use crate::pipeline::{require, samples_file, trace_file, Experiment, PARTICLES_FILE, ROUNDS_FILE};
use crate::{CliError, PlotKind};

/// Grid points of the 1-d GP fit curve.
pub const GP_FIT_POINTS: usize = 200;

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn theta_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("theta_{j}")).collect()
}

fn row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_num).collect()
}

/// Writes the CSVs of `kind` into the output directory and returns their
/// paths.
pub fn emit(exp: &Experiment, kind: PlotKind) -> Result<Vec<PathBuf>, CliError> {
    match kind {
        PlotKind::MarginalDensity => marginal_density(exp),
        PlotKind::Trace => trace(exp),
        PlotKind::Scatter2d => scatter(exp),
        PlotKind::GpFit1d => gp_fit(exp),
    }
}

/// One `theta,density` file per parameter: Gaussian KDE on 512 points
/// spanning the draws plus four bandwidths.
fn marginal_density(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    let draws = load_posterior(exp)?.pooled();
    let p = draws.first().map_or(0, ParamVector::dim);
    let n = exp.cfg.metrics.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    let mut paths = Vec::new();
    for j in 0..p {
        let x = marginal(&draws, j);
        let h = silverman_bandwidth(&x);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = if h > 0.0 { 4.0 * h } else { 1.0 };
        let grid = linspace(lo - pad, hi + pad, n);
        let kde = kde_density(&x, &grid, None)?;
        let path = exp.path(&format!("plot_marginal_density_theta_{}.csv", j + 1));
        write_csv(
            &path,
            &header(&["theta", "density"]),
            grid.iter()
                .zip(&kde.density.values)
                .map(|(g, d)| row([*g, *d])),
        )?;
        paths.push(path);
    }
    Ok(paths)
}

/// Chain states by iteration (one file per chain), or the SMC tolerance
/// by round.
fn trace(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    if let Some(m) = exp.mcmc() {
        let mut paths = Vec::new();
        for c in 0..m.chains {
            let src = exp.path(&samples_file(c, m.chains));
            require(&src)?;
            let samples = read_samples_csv(&src)?;
            let p = samples.first().map_or(0, ParamVector::dim);
            let name = if m.chains == 1 {
                "plot_trace.csv".to_string()
            } else {
                format!("plot_trace_chain{}.csv", c + 1)
            };
            let path = exp.path(&name);
            let mut h = vec!["iteration".to_string()];
            h.extend(theta_names(p));
            write_csv(
                &path,
                &h,
                samples.iter().enumerate().map(|(i, s)| {
                    let mut r = vec![(i + 1).to_string()];
                    r.extend(row(s.as_slice().iter().copied()));
                    r
                }),
            )?;
            paths.push(path);
        }
        Ok(paths)
    } else {
        let src = exp.path(ROUNDS_FILE);
        require(&src)?;
        let (_, rows) = read_numeric_csv(&src)?;
        let path = exp.path("plot_trace.csv");
        write_csv(
            &path,
            &header(&["round", "eps"]),
            rows.iter().map(|r| vec![(r[0] as usize).to_string(), fmt_num(r[1])]),
        )?;
        Ok(vec![path])
    }
}

/// Accepted proposals of every chain (one row per acceptance), or the
/// alive particles of an SMC run.
fn scatter(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    let points: Vec<ParamVector> = if let Some(m) = exp.mcmc() {
        let mut pts = Vec::new();
        for c in 0..m.chains {
            let src = exp.path(&trace_file(c, m.chains));
            require(&src)?;
            pts.extend(
                read_trace_csv(&src)?
                    .into_iter()
                    .filter(|r| r.outcome == Outcome::Accept)
                    .map(|r| r.theta),
            );
        }
        pts
    } else {
        let src = exp.path(PARTICLES_FILE);
        require(&src)?;
        ejabc::smc::ParticleSet::read_csv(&src)?
            .particles
            .into_iter()
            .filter(|p| p.weight > 0.0)
            .map(|p| p.theta)
            .collect()
    };
    let p = exp.prior.marginals().len();
    let path = exp.path("plot_scatter2d.csv");
    write_csv(&path, &theta_names(p), points.iter().map(|t| row(t.as_slice().iter().copied())))?;
    Ok(vec![path])
}

/// For each parameter: the GP mean and 95% predictive band
/// `mean +- 1.96 sqrt(v + sigma^2)` along that coordinate (others held at
/// the best training point), on the scale the GP models, plus the
/// training points on that scale.
fn gp_fit(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    let gp = exp.load_gp()?;
    let train = gp.training_set();
    let log = gp.config().log_discrepancy;
    let best = train
        .records()
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0.clone())
        .ok_or_else(|| CliError::Runtime("GP has no training data".into()))?;
    let sd_noise = gp.noise_var();
    let mut paths = Vec::new();
    for j in 0..gp.dim() {
        let xs: Vec<f64> = train.thetas().map(|t| t[j]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rows = linspace(lo, hi, GP_FIT_POINTS)
            .into_iter()
            .map(|x| {
                let mut theta = best.clone().into_vec();
                theta[j] = x;
                let (mu, v) = gp.predict(&ParamVector::new(theta)?)?;
                let half = 1.96 * (v + sd_noise).sqrt();
                Ok(row([x, mu, mu - half, mu + half]))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let path = exp.path(&format!("plot_gp_fit_1d_theta_{}.csv", j + 1));
        write_csv(&path, &header(&["theta", "mean", "lower", "upper"]), rows)?;
        paths.push(path);
        let pts = exp.path(&format!("plot_gp_fit_1d_theta_{}_points.csv", j + 1));
        let target = if log { "log_delta" } else { "delta" };
        write_csv(
            &pts,
            &header(&["theta", target]),
            train
                .records()
                .iter()
                .map(|(t, d)| row([t[j], if log { d.ln() } else { *d }])),
        )?;
        paths.push(pts);
    }
    Ok(paths)
}
