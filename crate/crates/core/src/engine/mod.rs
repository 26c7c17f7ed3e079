//! Model fitting: configuration, the Gibbs sampler, posterior predictive
//! simulation and fit results.

mod result;
mod sampler;
mod simulate;
mod spec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{CovariateSet, LongitudinalData, Sociomatrix};
use crate::design::{build_design, DesignTensor};
use crate::error::{Error, Result};
use crate::factors::{posthoc_asymmetric, posthoc_symmetric};
use crate::gof::{gofstats, GofStats};
use crate::latent::Family;
use crate::stats::pnorm;

pub use result::{read_square, summarize, Diagnostics, FitResult, Summary, SummaryRow};
pub use sampler::{variance_names, ParamState, Sampler};
pub use simulate::{link, mask_like, simulate_y, simulate_z};
pub use spec::{ModelSpec, Priors};

/// Fits a model to a single sociomatrix. With `spec.symmetric` set this
/// is the same as [`fit_symmetric`].
pub fn fit_ame(y: &Sociomatrix, x: &CovariateSet, spec: &ModelSpec) -> Result<FitResult> {
    fit_slices(std::slice::from_ref(y), std::slice::from_ref(x), spec)
}

/// Fits a model to repeated sociomatrices sharing all parameters.
pub fn fit_ame_rep(data: &LongitudinalData, spec: &ModelSpec) -> Result<FitResult> {
    fit_slices(data.slices(), data.covariates(), spec)
}

/// Fits the undirected model z_ij = β'x_ij + a_i + a_j + u_i'Λu_j + e_ij.
pub fn fit_symmetric(y: &Sociomatrix, x: &CovariateSet, spec: &ModelSpec) -> Result<FitResult> {
    let spec = ModelSpec {
        symmetric: true,
        ..spec.clone()
    };
    fit_ame(y, x, &spec)
}

/// Design matrices and masked outcomes for a fit, as the sampler sees them.
pub fn prepare(ys: &[Sociomatrix], xs: &[CovariateSet], spec: &ModelSpec) -> Result<(Vec<DMatrix<f64>>, Vec<DesignTensor>)> {
    if ys.is_empty() || ys.len() != xs.len() {
        return Err(Error::Dimension(format!("{} sociomatrices for {} covariate sets", ys.len(), xs.len())));
    }
    let mut outcomes = Vec::with_capacity(ys.len());
    let mut designs = Vec::with_capacity(ys.len());
    for (y, x) in ys.iter().zip(xs) {
        if spec.symmetric {
            if let Some((i, j)) = y.asymmetry() {
                return Err(Error::Asymmetric(i, j));
            }
        }
        let d = build_design(y, x, spec.intercept(), spec.symmetric)?;
        outcomes.push(d.mask_outcome(y).values().clone());
        designs.push(d);
    }
    Ok((outcomes, designs))
}

fn fit_slices(ys: &[Sociomatrix], xs: &[CovariateSet], spec: &ModelSpec) -> Result<FitResult> {
    let (outcomes, designs) = prepare(ys, xs, spec)?;
    let spec = spec.resolve(&outcomes)?;
    let chains: Vec<ChainOutput> = (0..spec.chains)
        .into_par_iter()
        .map(|c| run_chain(&outcomes, designs.clone(), &spec, c))
        .collect::<Result<_>>()?;
    Ok(combine(chains, &outcomes, &designs, &spec, ys[0].labels().to_vec()))
}

struct ChainOutput {
    beta: Vec<DVector<f64>>,
    vc: Vec<Vec<f64>>,
    gof: Vec<GofStats>,
    apm: DVector<f64>,
    bpm: DVector<f64>,
    uvpm: DMatrix<f64>,
    ypm: Vec<DMatrix<f64>>,
    sweeps: usize,
    violations: usize,
    rho_acceptance: f64,
}

/// Runs one chain; the random stream is selected by the chain index so
/// chains are independent and reproducible.
fn run_chain(outcomes: &[DMatrix<f64>], designs: Vec<DesignTensor>, spec: &ModelSpec, chain: usize) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(chain as u64);
    let n = outcomes[0].nrows();
    let mut sampler = Sampler::new(outcomes, designs, spec)?;
    let draws = spec.draws_per_chain();
    let mut out = ChainOutput {
        beta: Vec::with_capacity(draws),
        vc: Vec::with_capacity(draws),
        gof: Vec::with_capacity(draws),
        apm: DVector::zeros(n),
        bpm: DVector::zeros(n),
        uvpm: DMatrix::zeros(n, n),
        ypm: vec![DMatrix::zeros(n, n); outcomes.len()],
        sweeps: 0,
        violations: 0,
        rho_acceptance: 0.0,
    };
    for it in 0..spec.burn {
        sampler.sweep(&mut rng)?;
        if (it + 1) % 50 == 0 {
            sampler.adapt();
        }
    }
    sampler.adapt();
    for it in 0..spec.nscan {
        sampler.sweep(&mut rng)?;
        if (it + 1) % spec.odens != 0 {
            continue;
        }
        let state = sampler.state();
        out.beta.push(state.beta.clone());
        out.vc.push(state.variance_components(spec.symmetric));
        out.apm += &state.effects.a;
        out.bpm += &state.effects.b;
        out.uvpm += state.factors.multiplicative_mean();

        let sims = sampler.simulate(outcomes, &mut rng)?;
        let stats: Vec<GofStats> = sims.iter().zip(outcomes).map(|(s, y)| gofstats(&mask_like(s, y))).collect();
        out.gof.push(GofStats::average(&stats));
        let means = sampler.means();
        for t in 0..outcomes.len() {
            // nrm: predictive draw where observed, current imputation where missing
            let mut contribution = match spec.family {
                Family::Nrm => sims[t].zip_zip_map(&state.z[t], &outcomes[t], |s, z, y| if y.is_finite() { s } else { z }),
                Family::Bin | Family::Cbin => means[t].map(pnorm),
                _ => state.z[t].clone(),
            };
            contribution.fill_diagonal(0.0);
            out.ypm[t] += contribution;
        }
    }
    let d = draws as f64;
    out.apm /= d;
    out.bpm /= d;
    out.uvpm /= d;
    for y in &mut out.ypm {
        *y /= d;
    }
    let (sweeps, violations) = sampler.audit_log();
    out.sweeps = sweeps;
    out.violations = violations;
    out.rho_acceptance = sampler.rho_acceptance();
    Ok(out)
}

fn combine(
    chains: Vec<ChainOutput>,
    outcomes: &[DMatrix<f64>],
    designs: &[DesignTensor],
    spec: &ModelSpec,
    labels: Vec<String>,
) -> FitResult {
    let n = outcomes[0].nrows();
    let k = chains.len() as f64;
    let p = designs[0].p();
    let vc_names = variance_names(spec.symmetric);
    let beta_rows: Vec<&DVector<f64>> = chains.iter().flat_map(|c| c.beta.iter()).collect();
    let vc_rows: Vec<&Vec<f64>> = chains.iter().flat_map(|c| c.vc.iter()).collect();
    let beta = DMatrix::from_fn(beta_rows.len(), p, |r, c| beta_rows[r][c]);
    let vc = DMatrix::from_fn(vc_rows.len(), vc_names.len(), |r, c| vc_rows[r][c]);

    let observed: Vec<GofStats> = outcomes.iter().map(gofstats).collect();
    let mut gof_rows = vec![GofStats::average(&observed).to_array()];
    gof_rows.extend(chains.iter().flat_map(|c| c.gof.iter().map(|g| g.to_array())));
    let gof = DMatrix::from_fn(gof_rows.len(), 4, |r, c| gof_rows[r][c]);

    let apm = chains.iter().fold(DVector::zeros(n), |acc, c| acc + &c.apm) / k;
    let bpm = chains.iter().fold(DVector::zeros(n), |acc, c| acc + &c.bpm) / k;
    let uvpm = chains.iter().fold(DMatrix::zeros(n, n), |acc, c| acc + &c.uvpm) / k;
    let ypm: Vec<DMatrix<f64>> = (0..outcomes.len())
        .map(|t| {
            let mut m = chains.iter().fold(DMatrix::zeros(n, n), |acc, c| acc + &c.ypm[t]) / k;
            m.fill_diagonal(f64::NAN);
            m
        })
        .collect();
    let (u, v, l) = if spec.symmetric {
        let (u, l) = posthoc_symmetric(&uvpm, spec.rank);
        (u, None, Some(l))
    } else {
        let (u, v) = posthoc_asymmetric(&uvpm, spec.rank);
        (u, Some(v), None)
    };
    let probit_rho = spec.family != Family::Nrm && spec.dcor && !spec.symmetric;
    let diagnostics = Diagnostics {
        sweeps: chains.iter().map(|c| c.sweeps).sum(),
        violations: chains.iter().map(|c| c.violations).sum(),
        rho_acceptance: probit_rho.then(|| chains.iter().map(|c| c.rho_acceptance).sum::<f64>() / k),
    };
    FitResult {
        spec: spec.clone(),
        labels,
        beta_names: designs[0].names().to_vec(),
        beta,
        vc_names,
        vc,
        gof,
        apm,
        bpm,
        uvpm,
        u,
        v,
        l,
        ypm,
        diagnostics,
    }
}
