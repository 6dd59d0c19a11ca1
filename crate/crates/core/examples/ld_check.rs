//! Large-deviation tail `P(S_k > kα)` by Monte Carlo, direct and tilted.
use ergostat::erdos_renyi::{ld_probability_mc, LdLevel, LdMethod};
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;
use ergostat::transfer::{legendre, pressure_curve, symmetric_grid};

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let coin = Observable::coin();
    let curve = pressure_curve(&map, &coin, &symmetric_grid(4.0, 0.125), 256)?;
    let level = LdLevel::from_rate(&legendre(&curve, &[0.2])?, 0.2)?;

    for k in [20, 50, 100, 200] {
        let est = ld_probability_mc(&map, &coin, level, k, 100_000, 9, LdMethod::Auto)?;
        println!(
            "k = {k:>3} {:?}: p = {:.3e} [{:.3e}, {:.3e}]  ratio {:.3}",
            est.method, est.p_hat, est.ci_lo, est.ci_hi, est.normalized_ratio
        );
    }
    Ok(())
}
