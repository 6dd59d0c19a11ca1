//! Rate-function estimate from one trajectory: `(M_k/k, log N / k)` pairs
//! trace the graph of `φ`.
use ergostat::erdos_renyi::{rate_estimator, trajectory_values};
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::doubling();
    let v = trajectory_values(&map, &Observable::coin(), 1 << 18, 3)?;
    let est = rate_estimator(&v, &[20, 40, 80, 160, 320])?;
    println!("N = {}", est.n);
    for (k, (m, phi)) in est.k_values.iter().zip(&est.points) {
        // exact Bernoulli rate at level m for comparison
        let p = 0.5 + m;
        let exact = if p < 1.0 { p * (2.0 * p).ln() + (1.0 - p) * (2.0 * (1.0 - p)).ln() } else { 2f64.ln() };
        println!("k = {k:>4}  m_k = {m:.4}  log N/k = {phi:.4}  bernoulli phi(m_k) = {exact:.4}");
    }
    Ok(())
}
