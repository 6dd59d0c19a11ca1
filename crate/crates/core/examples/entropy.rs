//! Return-time and cylinder-measure entropy estimates on a three-branch map
//! with entropy `(1/2)log 2 + (1/2)log 4`.
use ergostat::entropy::{ow_run, rokhlin_entropy, smb_run, EntropyParams};
use ergostat::maps::PiecewiseMap;
use ergostat::transfer::invariant_density;

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::full_linear(&[2.0, 4.0, 4.0])?;
    let h = invariant_density(&map, 4096)?;
    println!("Rokhlin entropy {:.12}  (exact {:.12})", rokhlin_entropy(&map, &h), 1.5 * 2f64.ln());

    let params = EntropyParams::default();
    let checkpoints = [100, 1000, 5000];
    let smb = smb_run(&map, 5000, 4, &checkpoints, &params)?;
    let ow = ow_run(&map, 24, 4, &[8, 16, 24], &params)?;
    println!("sigma used {:.4}", smb.sigma_used);
    for (n, k) in smb.checkpoints.iter().zip(&smb.kappa_values) {
        println!("cylinder   n = {n:>5}  kappa = {k:.4}");
    }
    for (n, k) in ow.checkpoints.iter().zip(&ow.kappa_values) {
        println!("return     n = {n:>5}  kappa = {k:.4}  censored {}", ow.censored);
    }
    Ok(())
}
