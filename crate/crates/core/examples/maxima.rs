//! Running maxima `max_{j≤k} S_j/√k` against the half-Gaussian law.
use ergostat::asclt::{maxima_seeds, median_kappa};
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let coin = Observable::coin();
    let checkpoints = [1_000, 10_000, 100_000];
    let runs = maxima_seeds(&map, &coin, 0.25, 100_000, 1, 8, &checkpoints)?;
    for (j, n) in checkpoints.iter().enumerate() {
        println!("n = {n:>7}  median kappa = {:.4}", median_kappa(&runs, j));
    }
    Ok(())
}
