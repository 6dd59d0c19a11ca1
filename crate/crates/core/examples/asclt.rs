//! Almost-sure CLT diagnostics: logarithmic averages of `S_k/√k` against
//! the Gaussian with Green–Kubo variance.
use ergostat::asclt::{asclt_seeds, median_kappa, rate_diagnostic};
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let u = Observable::sawtooth();
    let checkpoints = [1_000, 10_000, 100_000];
    let runs = asclt_seeds(&map, &u, 0.25, 100_000, 1, 8, &checkpoints)?;

    for (j, n) in checkpoints.iter().enumerate() {
        println!("n = {n:>7}  median kappa = {:.4}", median_kappa(&runs, j));
    }
    let report = rate_diagnostic(&runs[0])?;
    println!("seed {} rate verdict: {:?}", runs[0].seed, report.verdict);
    Ok(())
}
