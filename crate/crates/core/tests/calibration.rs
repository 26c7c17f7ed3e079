//! Successive-conditional checks of the Gibbs sampler against direct prior
//! simulation, and coverage of the posterior predictive goodness of fit.

mod common;

use ame_core::engine::{fit_ame, ModelSpec};
use ame_core::stats::quantile;
use ame_core::Family;
use common::geweke::geweke;
use common::{synthetic, Truth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(n: usize, rank: usize, seed: u64) {
    let rows = geweke(n, rank, seed);
    for (name, d, p, ess) in &rows {
        println!("{name:>10}: D = {d:.3}, p = {p:.3}, ess {ess:.0}");
    }
    let failed: Vec<&str> = rows.iter().filter(|r| r.2 <= 0.01).map(|r| r.0).collect();
    assert!(failed.is_empty(), "KS p <= 0.01 for {failed:?}");
}


#[test]
fn geweke_gaussian_srm() {
    check(10, 0, 1);
}

#[test]
fn geweke_rank_one_ame() {
    check(8, 1, 2);
}

#[test]
fn posterior_predictive_gof_covers_observed_statistics() {
    let n = 30;
    let mut covered = 0;
    let mut total = 0;
    for rep in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + rep);
        let truth = Truth::srm(0, n, &mut rng);
        let (y, x, _) = synthetic(Family::Nrm, n, &truth, None, 600 + rep);
        let spec = ModelSpec { burn: 100, nscan: 1000, odens: 5, seed: rep, ..ModelSpec::new(Family::Nrm) };
        let fit = fit_ame(&y, &x, &spec).unwrap();
        let observed = fit.observed_gof().to_array();
        let sims: Vec<[f64; 4]> = fit.simulated_gof().into_iter().map(|g| g.to_array()).collect();
        let inside = (0..4).all(|k| {
            let mut xs: Vec<f64> = sims.iter().map(|s| s[k]).collect();
            xs.sort_by(f64::total_cmp);
            let (lo, hi) = (quantile(&xs, 0.005), quantile(&xs, 0.995));
            lo <= observed[k] && observed[k] <= hi
        });
        covered += usize::from(inside);
        total += 1;
    }
    println!("replicates with all four statistics inside 99% intervals: {covered}/{total}");
    assert!(covered as f64 >= 0.95 * total as f64);
}
