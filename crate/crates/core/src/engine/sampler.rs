use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::DesignTensor;
use crate::error::{Error, Result};
use crate::factors::{gibbs_ul_symmetric, gibbs_uv, init_asymmetric, init_symmetric, FactorScales, LatentFactors};
use crate::latent::{Family, LatentMatrix};
use crate::srm::{
    gibbs_beta_a_symmetric, gibbs_beta_ab, gibbs_dyadic_cov, gibbs_s2_symmetric, gibbs_sigma_ab,
    gibbs_va_symmetric, AdditiveEffects, DesignGram, EffectFlags, RhoSampler, SrmParams,
};

use super::simulate::simulate_y;
use super::spec::ModelSpec;

/// Metropolis steps for ρ per sweep in probit-type families.
const RHO_STEPS: usize = 5;

/// Current values of every unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub beta: DVector<f64>,
    /// For symmetric models `b` mirrors `a`.
    pub effects: AdditiveEffects,
    /// [[σ²_a, σ_ab], [σ_ab, σ²_b]]; symmetric models use the (0, 0) entry.
    pub sigma_ab: DMatrix<f64>,
    pub rho: f64,
    pub s2e: f64,
    pub factors: LatentFactors,
    pub scales: FactorScales,
    /// Latent matrix per time point.
    pub z: Vec<DMatrix<f64>>,
}

impl ParamState {
    /// Xβ + a_i + b_j + multiplicative term, zero diagonal.
    pub fn mean(&self, design: &DesignTensor) -> DMatrix<f64> {
        let mut m = design.linear_predictor(&self.beta) + self.effects.mean() + self.factors.multiplicative_mean();
        m.fill_diagonal(0.0);
        m
    }

    /// Xβ + a_i + b_j only.
    fn additive_mean(&self, design: &DesignTensor) -> DMatrix<f64> {
        design.linear_predictor(&self.beta) + self.effects.mean()
    }

    /// Variance-component row: (va, ve) for symmetric models and
    /// (va, cab, vb, rho, ve) otherwise.
    pub fn variance_components(&self, symmetric: bool) -> Vec<f64> {
        if symmetric {
            vec![self.sigma_ab[(0, 0)], self.s2e]
        } else {
            vec![
                self.sigma_ab[(0, 0)],
                self.sigma_ab[(0, 1)],
                self.sigma_ab[(1, 1)],
                self.rho,
                self.s2e,
            ]
        }
    }
}

pub fn variance_names(symmetric: bool) -> Vec<String> {
    let names: &[&str] = if symmetric {
        &["va", "ve"]
    } else {
        &["va", "cab", "vb", "rho", "ve"]
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Gibbs sampler over one or more time points sharing β, a, b, Σ_ab, ρ,
/// s2e and the factors.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: ModelSpec,
    designs: Vec<DesignTensor>,
    gram: DesignGram,
    latent: Vec<LatentMatrix>,
    state: ParamState,
    rho_sampler: RhoSampler,
    beta_var: f64,
    factors_ready: bool,
    sweeps: usize,
    violations: usize,
}

impl Sampler {
    /// `ys` are outcome matrices (`NaN` missing) already masked for
    /// incomplete design rows; `spec` must be resolved.
    pub fn new(ys: &[DMatrix<f64>], designs: Vec<DesignTensor>, spec: &ModelSpec) -> Result<Self> {
        if ys.is_empty() || ys.len() != designs.len() {
            return Err(Error::Dimension(format!(
                "{} outcome matrices for {} designs",
                ys.len(),
                designs.len()
            )));
        }
        let n = ys[0].nrows();
        let gram = DesignGram::new(&designs);
        gram.check_rank(designs[0].names())?;
        let odmax = spec.odmax.as_deref();
        let latent = ys
            .iter()
            .map(|y| LatentMatrix::new(y, spec.family, spec.symmetric, odmax))
            .collect::<Result<Vec<_>>>()?;

        let observed: Vec<f64> = ys.iter().flat_map(|y| y.iter().copied().filter(|v| v.is_finite())).collect();
        if observed.len() < 2 {
            return Err(Error::Degenerate("fewer than two observed dyads".into()));
        }
        let var_y = crate::stats::var(&observed);
        let gaussian = spec.family == Family::Nrm;
        let beta_var = spec.priors.beta_var.unwrap_or(if gaussian { 100.0 * var_y } else { 100.0 });
        let s2e = if gaussian && var_y > 0.0 { var_y } else { 1.0 };

        let mut sigma_ab = DMatrix::zeros(2, 2);
        sigma_ab[(0, 0)] = if spec.rvar { 1.0 } else { 0.0 };
        sigma_ab[(1, 1)] = if spec.cvar && !spec.symmetric { 1.0 } else { 0.0 };
        let state = ParamState {
            beta: DVector::zeros(designs[0].p()),
            effects: AdditiveEffects::zeros(n),
            sigma_ab,
            rho: 0.0,
            s2e,
            factors: LatentFactors::zeros(n, spec.rank, spec.symmetric),
            scales: FactorScales::default(),
            z: latent.iter().map(|l| l.z().clone()).collect(),
        };
        Ok(Self {
            spec: spec.clone(),
            designs,
            gram,
            latent,
            state,
            rho_sampler: RhoSampler::default(),
            beta_var,
            factors_ready: spec.rank == 0,
            sweeps: 0,
            violations: 0,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    pub fn designs(&self) -> &[DesignTensor] {
        &self.designs
    }

    pub fn beta_var(&self) -> f64 {
        self.beta_var
    }

    /// Replaces the parameters; the latent matrices take `state.z`.
    pub fn set_state(&mut self, state: ParamState) {
        for (l, z) in self.latent.iter_mut().zip(&state.z) {
            l.set_z(z.clone());
        }
        self.state = state;
        self.factors_ready = true;
    }

    /// Swaps in new outcome matrices keeping the parameters. Used by
    /// successive-conditional checks, which alternate parameter sweeps
    /// with fresh data.
    pub fn replace_outcomes(&mut self, ys: &[DMatrix<f64>]) -> Result<()> {
        let odmax = self.spec.odmax.as_deref();
        self.latent = ys
            .iter()
            .map(|y| LatentMatrix::new(y, self.spec.family, self.spec.symmetric, odmax))
            .collect::<Result<Vec<_>>>()?;
        self.state.z = self.latent.iter().map(|l| l.z().clone()).collect();
        Ok(())
    }

    /// Mean of Z per time point under the current state.
    pub fn means(&self) -> Vec<DMatrix<f64>> {
        self.designs.iter().map(|d| self.state.mean(d)).collect()
    }

    /// Posterior predictive outcome per time point. `references` are the
    /// observed matrices, needed by the rank-based families.
    pub fn simulate<R: Rng + ?Sized>(&self, references: &[DMatrix<f64>], rng: &mut R) -> Result<Vec<DMatrix<f64>>> {
        self.means()
            .iter()
            .zip(references)
            .map(|(m, r)| {
                simulate_y(
                    m,
                    self.state.rho,
                    self.state.s2e,
                    self.spec.family,
                    self.spec.symmetric,
                    self.spec.odmax.as_deref(),
                    Some(r),
                    rng,
                )
            })
            .collect()
    }

    /// Number of sweeps run and total constraint violations seen (zero
    /// unless auditing is on).
    pub fn audit_log(&self) -> (usize, usize) {
        (self.sweeps, self.violations)
    }

    pub fn rho_acceptance(&self) -> f64 {
        self.rho_sampler.acceptance_rate()
    }

    /// Tunes the ρ proposal; burn-in only.
    pub fn adapt(&mut self) {
        self.rho_sampler.adapt();
    }

    /// One full sweep: Z, (β, a, b), Σ_ab, (ρ, s2e), factors.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let means = self.means();
        for (l, m) in self.latent.iter_mut().zip(&means) {
            l.update(m, self.state.rho, self.state.s2e, rng)?;
        }
        if self.spec.audit {
            self.violations += self.latent.iter().map(|l| l.audit()).sum::<usize>();
        }
        self.sweeps += 1;
        self.state.z = self.latent.iter().map(|l| l.z().clone()).collect();

        if self.spec.symmetric {
            self.sweep_symmetric(rng)?;
        } else {
            self.sweep_directed(rng)?;
        }
        Ok(())
    }

    fn targets(&self) -> Vec<DMatrix<f64>> {
        let m = self.state.factors.multiplicative_mean();
        self.state.z.iter().map(|z| z - &m).collect()
    }

    fn additive_residuals(&self) -> Vec<DMatrix<f64>> {
        self.state
            .z
            .iter()
            .zip(&self.designs)
            .map(|(z, d)| {
                let mut e = z - self.state.additive_mean(d);
                e.fill_diagonal(0.0);
                e
            })
            .collect()
    }

    fn sweep_directed<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let flags = EffectFlags {
            rvar: self.spec.rvar,
            cvar: self.spec.cvar,
        };
        let s = &self.state;
        let params = SrmParams {
            sigma_ab: s.sigma_ab.clone(),
            rho: s.rho,
            s2e: s.s2e,
        };
        let (beta, effects) = gibbs_beta_ab(&self.targets(), &self.designs, &self.gram, &params, flags, self.beta_var, rng)?;
        self.state.beta = beta;
        self.state.effects = effects;
        self.state.sigma_ab = gibbs_sigma_ab(&self.state.effects, flags, &self.spec.priors.sigma_ab, rng)?;
        self.init_factors()?;

        let m = self.state.factors.multiplicative_mean();
        let mut full: Vec<DMatrix<f64>> = self.additive_residuals();
        for e in &mut full {
            *e -= &m;
            e.fill_diagonal(0.0);
        }
        if self.spec.family == Family::Nrm {
            let (rho, s2) = gibbs_dyadic_cov(&full, self.spec.dcor, &self.spec.priors.pair, rng)?;
            self.state.rho = rho;
            self.state.s2e = s2;
        } else if self.spec.dcor {
            self.state.rho = self.rho_sampler.draw(self.state.rho, &full, RHO_STEPS, rng);
        }

        if self.spec.rank > 0 {
            let resid = self.additive_residuals();
            let (rho, s2e) = (self.state.rho, self.state.s2e);
            let LatentFactors::Asymmetric { u, v } = &mut self.state.factors else {
                unreachable!("directed model with symmetric factors")
            };
            gibbs_uv(&resid, u, v, s2e, rho, &mut self.state.scales, &self.spec.priors.factors, rng)?;
        }
        Ok(())
    }

    fn sweep_symmetric<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let va = self.state.sigma_ab[(0, 0)];
        let (beta, a) = gibbs_beta_a_symmetric(
            &self.targets(),
            &self.designs,
            &self.gram,
            va,
            self.state.s2e,
            self.spec.rvar,
            self.beta_var,
            rng,
        )?;
        self.state.beta = beta;
        self.state.effects = AdditiveEffects { a: a.clone(), b: a };
        if self.spec.rvar {
            self.state.sigma_ab[(0, 0)] = gibbs_va_symmetric(&self.state.effects.a, &self.spec.priors.sigma_ab, rng);
        }
        self.init_factors()?;

        if self.spec.family == Family::Nrm {
            let m = self.state.factors.multiplicative_mean();
            let full: Vec<DMatrix<f64>> = self.additive_residuals().into_iter().map(|e| e - &m).collect();
            self.state.s2e = gibbs_s2_symmetric(&full, &self.spec.priors.pair, rng);
        }

        if self.spec.rank > 0 {
            let resid = self.additive_residuals();
            let s2e = self.state.s2e;
            let LatentFactors::Symmetric { u, lambda } = &mut self.state.factors else {
                unreachable!("symmetric model with directed factors")
            };
            gibbs_ul_symmetric(&resid, u, lambda, s2e, &mut self.state.scales.u, &self.spec.priors.factors, rng)?;
        }
        Ok(())
    }

    /// Starts the factors at the leading components of the first additive
    /// residual averaged over time.
    fn init_factors(&mut self) -> Result<()> {
        if self.factors_ready {
            return Ok(());
        }
        let resid = self.additive_residuals();
        let avg = resid.iter().fold(DMatrix::zeros(resid[0].nrows(), resid[0].ncols()), |acc, e| acc + e)
            / resid.len() as f64;
        self.state.factors = if self.spec.symmetric {
            let (u, lambda) = init_symmetric(&avg, self.spec.rank)?;
            LatentFactors::Symmetric { u, lambda }
        } else {
            let (u, v) = init_asymmetric(&avg, self.spec.rank)?;
            LatentFactors::Asymmetric { u, v }
        };
        self.factors_ready = true;
        Ok(())
    }
}
