//! Pressure curve and its Legendre transform for the sawtooth observable.
use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;
use ergostat::transfer::{center_observable, legendre, pressure_curve, symmetric_grid};

fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::perturbed_doubling(0.15)?;
    let u = center_observable(&map, &Observable::sawtooth(), 1024)?;
    let curve = pressure_curve(&map, &u, &symmetric_grid(3.0, 0.25), 1024)?;
    println!("min second difference {:.3e}", curve.min_second_difference());

    let (lo, hi) = curve.derivative_range();
    let alphas: Vec<f64> = (0..=8).map(|i| 0.9 * (lo + (hi - lo) * i as f64 / 8.0)).collect();
    let rate = legendre(&curve, &alphas)?;
    println!("{:>9} {:>12} {:>9}", "alpha", "phi", "beta");
    for i in 0..alphas.len() {
        println!("{:>9.4} {:>12.6} {:>9.4}", rate.alpha_grid[i], rate.phi_values[i], rate.beta_of_alpha[i]);
    }
    Ok(())
}
