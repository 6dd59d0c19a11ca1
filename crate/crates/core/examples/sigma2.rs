use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;
use ergostat::transfer::{center_observable, green_kubo_sigma2, Sigma2Method};

// Green–Kubo variance by operator quadrature and from a long orbit.
fn main() -> ergostat::error::Result<()> {
    let map = PiecewiseMap::perturbed_doubling(0.1)?;
    let u = center_observable(&map, &Observable::sawtooth(), 2048)?;

    let quad = green_kubo_sigma2(&map, &u, Sigma2Method::Quadrature { resolution: 2048 })?;
    let orbit = green_kubo_sigma2(
        &map,
        &u,
        Sigma2Method::Orbit { length: 1_000_000, max_lag: 32, seed: 5 },
    )?;
    println!("quadrature sigma2 = {:.6} ({} terms)", quad.value, quad.correlations.len());
    println!("orbit      sigma2 = {:.6} ({} terms)", orbit.value, orbit.correlations.len());
    for (j, c) in quad.correlations.iter().take(6).enumerate() {
        println!("  C_{j} = {c:+.6e}");
    }
    Ok(())
}
