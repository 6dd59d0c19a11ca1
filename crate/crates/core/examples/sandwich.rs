//! How tightly `R_n μ(𝓟_n)` concentrates around 1 over many starts.
use ergostat::entropy::{sandwich_check, EntropyParams};
use ergostat::maps::PiecewiseMap;

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let s = sandwich_check(&map, 16, 1, 500, 1.0, &EntropyParams::default())?;
    println!("n = {}  eps = {}", s.n, s.eps);
    println!("violations {} / {}  ({:.2}%)", s.violations, s.samples.len() - s.censored, 100.0 * s.violation_frequency());
    println!("mean R_n mu = {:.4}", s.mean_r_mu);
    println!("mean (1/n) log R_n = {:.4}  (log 2 = {:.4})", s.mean_log_return_rate, 2f64.ln());
    Ok(())
}
