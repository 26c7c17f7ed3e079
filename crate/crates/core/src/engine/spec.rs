use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorPrior;
use crate::latent::{default_odmax, Family};
use crate::srm::{CovariancePrior, PairPrior};
use nalgebra::DMatrix;

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Priors {
    /// Prior variance of each regression coefficient. Defaults to
    /// 100·var(Y) for Gaussian outcomes and 100 otherwise.
    pub beta_var: Option<f64>,
    pub sigma_ab: CovariancePrior,
    pub pair: PairPrior,
    pub factors: FactorPrior,
}

/// Model and sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub rank: usize,
    pub symmetric: bool,
    pub rvar: bool,
    pub cvar: bool,
    pub dcor: bool,
    /// Per-row nomination cap for frn and cbin.
    pub odmax: Option<Vec<usize>>,
    pub burn: usize,
    pub nscan: usize,
    pub odens: usize,
    pub seed: u64,
    /// Chain k draws from ChaCha8 seeded with `seed` on stream k, so results
    /// do not depend on thread scheduling.
    pub chains: usize,
    pub priors: Priors,
    /// Count constraint violations of the latent matrix after every sweep.
    pub audit: bool,
}

impl ModelSpec {
    /// Directed-data defaults: burn 500, nscan 10000, odens 25.
    pub fn new(family: Family) -> Self {
        Self {
            family,
            rank: 0,
            symmetric: false,
            rvar: true,
            cvar: true,
            dcor: true,
            odmax: None,
            burn: 500,
            nscan: 10_000,
            odens: 25,
            seed: 1,
            chains: 1,
            priors: Priors::default(),
            audit: false,
        }
    }

    /// Undirected-data defaults: burn 1000, nscan 100000, odens 100.
    pub fn symmetric(family: Family) -> Self {
        Self {
            symmetric: true,
            dcor: false,
            burn: 1_000,
            nscan: 100_000,
            odens: 100,
            ..Self::new(family)
        }
    }

    pub fn intercept(&self) -> bool {
        self.family.has_intercept()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.nscan / self.odens
    }

    /// Checks the configuration against the data and fills defaults: odmax
    /// for frn/cbin, no row effects for rrl, no dyadic correlation or
    /// column effects for symmetric models.
    pub fn resolve(&self, ys: &[DMatrix<f64>]) -> Result<ModelSpec> {
        let n = ys[0].nrows();
        let mut out = self.clone();
        if self.odens == 0 || self.nscan == 0 {
            return Err(Error::Spec("nscan and odens must be positive".into()));
        }
        if self.nscan % self.odens != 0 {
            return Err(Error::Spec(format!(
                "odens {} does not divide nscan {}",
                self.odens, self.nscan
            )));
        }
        if self.chains == 0 {
            return Err(Error::Spec("at least one chain is required".into()));
        }
        if self.rank > n {
            return Err(Error::RankTooLarge { rank: self.rank, n });
        }
        if self.family.uses_odmax() {
            let od = match &self.odmax {
                Some(od) => od.clone(),
                None => {
                    let per_t: Vec<Vec<usize>> = ys.iter().map(default_odmax).collect();
                    (0..n)
                        .map(|i| per_t.iter().map(|v| v[i]).max().unwrap_or(0))
                        .collect()
                }
            };
            if od.len() != n {
                return Err(Error::Dimension(format!("odmax has length {}, expected {n}", od.len())));
            }
            out.odmax = Some(od);
        } else if self.odmax.is_some() {
            return Err(Error::Spec(format!(
                "odmax applies to frn and cbin only, not {}",
                self.family
            )));
        }
        if self.family == Family::Rrl {
            out.rvar = false;
        }
        if self.symmetric {
            out.dcor = false;
            out.cvar = out.rvar;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = ModelSpec::new(Family::Nrm);
        assert_eq!((s.burn, s.nscan, s.odens), (500, 10_000, 25));
        assert_eq!(s.draws_per_chain(), 400);
        let s = ModelSpec::symmetric(Family::Ord);
        assert_eq!((s.burn, s.nscan, s.odens), (1_000, 100_000, 100));
    }

    #[test]
    fn resolve_rules() {
        let y = DMatrix::from_row_slice(3, 3, &[f64::NAN, 1.0, 1.0, 0.0, f64::NAN, 1.0, 0.0, 0.0, f64::NAN]);
        let r = ModelSpec::new(Family::Frn).resolve(&[y.clone()]).unwrap();
        assert_eq!(r.odmax, Some(vec![2, 2, 2]));
        let mut bad = ModelSpec::new(Family::Nrm);
        bad.odmax = Some(vec![1, 1, 1]);
        assert!(bad.resolve(&[y.clone()]).is_err());
        let r = ModelSpec::new(Family::Rrl).resolve(&[y.clone()]).unwrap();
        assert!(!r.rvar && r.cvar);
        let mut odd = ModelSpec::new(Family::Nrm);
        odd.odens = 7;
        assert!(odd.resolve(&[y.clone()]).is_err());
        let mut big = ModelSpec::new(Family::Nrm);
        big.rank = 4;
        assert!(matches!(big.resolve(&[y]), Err(Error::RankTooLarge { .. })));
    }
}
