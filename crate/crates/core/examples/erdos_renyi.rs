//! Erdős–Rényi law: maximal window averages over `e^{kφ(α)}` samples.
use ergostat::erdos_renyi::{er_law_seeds, LdLevel};
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;
use ergostat::transfer::{legendre, pressure_curve, symmetric_grid};

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let coin = Observable::coin();
    let curve = pressure_curve(&map, &coin, &symmetric_grid(4.0, 0.125), 256)?;
    let rate = legendre(&curve, &[0.2])?;
    let level = LdLevel::from_rate(&rate, 0.2)?;
    println!("phi(0.2) = {:.6}, beta = {:.4}", level.phi, level.beta);

    let k_grid = [50, 100, 200];
    let runs = er_law_seeds(&map, &coin, level, &k_grid, 1, 6)?;
    for run in &runs {
        let avgs: Vec<String> = run.averages.iter().map(|a| format!("{a:.3}")).collect();
        println!("seed {:>2}  M_k/k = [{}]", run.seed, avgs.join(", "));
    }
    Ok(())
}
