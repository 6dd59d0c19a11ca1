//! Invariant densities of a few expanding maps from the Ulam operator.
use ergostat::maps::PiecewiseMap;
use ergostat::transfer::invariant_density;

fn main() -> ergostat::error::Result<()> {
    let maps = [
        PiecewiseMap::doubling(),
        PiecewiseMap::tent(),
        PiecewiseMap::full_linear(&[2.0, 4.0, 4.0])?,
        PiecewiseMap::perturbed_doubling(0.2)?,
    ];
    for map in &maps {
        let h = invariant_density(map, 1024)?;
        let v = h.values();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        println!(
            "{:<20} mass {:.12}  min {:.4}  max {:.4}  sup|h-1| {:.2e}",
            map.name(),
            h.total_mass(),
            lo,
            hi,
            h.sup_deviation_from(1.0)
        );
    }
    Ok(())
}
