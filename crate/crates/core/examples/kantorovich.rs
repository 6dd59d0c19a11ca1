//! Closed-form Kantorovich distance against a Gaussian and a half-Gaussian,
//! checked by direct quadrature of `|F_emp - F_law|`.
use ergostat::measures::{
    kantorovich, kantorovich_bruteforce, GaussianLaw, HalfGaussianLaw, WeightedEmpiricalMeasure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ergostat::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let atoms: Vec<(f64, f64)> = (0..500).map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0))).collect();
    let m = WeightedEmpiricalMeasure::from_atoms(atoms)?;

    let g = GaussianLaw::new(1.0)?;
    let hg = HalfGaussianLaw::new(1.0)?;
    for (name, law) in [("gaussian", &g as &dyn ergostat::measures::Law), ("half-gaussian", &hg)] {
        let closed = kantorovich(&m, law)?;
        let brute = kantorovich_bruteforce(&m, law, 40.0, 1e-12)?;
        println!("{name:<14} closed {closed:.15}  quadrature {brute:.15}  diff {:.1e}", (closed - brute).abs());
    }

    let dirac = WeightedEmpiricalMeasure::from_atoms(vec![(0.0, 1.0)])?;
    println!("kappa(delta_0, N(0,1)) = {:.10}", kantorovich(&dirac, &g)?);
    Ok(())
}
