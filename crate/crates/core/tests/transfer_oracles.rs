use ergostat::maps::PiecewiseMap;
use ergostat::observable::Observable;
use ergostat::transfer::*;

#[test]
fn densities_are_lebesgue_for_full_linear_maps() {
    let cases = [
        (PiecewiseMap::doubling(), 1024),
        (PiecewiseMap::tent(), 1024),
        (PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap(), 729),
    ];
    for (map, n) in cases {
        let h = invariant_density(&map, n).unwrap();
        assert!(h.sup_deviation_from(1.0) < 1e-3, "{}", map.name());
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn coin_pressure_is_log_cosh() {
    let d = PiecewiseMap::doubling();
    let c = pressure_curve(&d, &Observable::coin(), &symmetric_grid(2.0, 1.0), 256).unwrap();
    for (b, f) in c.beta_grid().iter().zip(c.f_values()) {
        assert!((f - (b / 2.0).cosh().ln()).abs() < 1e-6, "beta {b}: {f}");
    }
    assert_eq!(c.f_values()[2], 0.0);
}

#[test]
fn coin_rate_function_at_point_two() {
    let d = PiecewiseMap::doubling();
    let c = pressure_curve(&d, &Observable::coin(), &symmetric_grid(3.0, 0.25), 64).unwrap();
    let r = legendre(&c, &[-0.2, 0.0, 0.2]).unwrap();
    let oracle = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
    assert!((r.phi_values[2] - oracle).abs() < 1e-4, "{}", r.phi_values[2]);
    assert!((r.phi_values[2] - 0.08228).abs() < 1e-4);
    assert!(r.phi_values[1].abs() < 1e-10);
    assert!(r.beta_of_alpha[0] < r.beta_of_alpha[1] && r.beta_of_alpha[1] < r.beta_of_alpha[2]);
}

#[test]
fn pressure_from_general_observable_is_convex_and_dual() {
    let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
    let u = center_observable(&m, &Observable::sawtooth(), 512).unwrap();
    let c = pressure_curve(&m, &u, &symmetric_grid(3.0, 0.25), 512).unwrap();
    assert!(c.min_second_difference() >= -1e-8);
    let (lo, hi) = c.derivative_range();
    let alphas: Vec<f64> = (0..41).map(|i| (lo + (hi - lo) * i as f64 / 40.0).clamp(lo, hi)).collect();
    let r = legendre(&c, &alphas).unwrap();
    assert!(r.phi_values.iter().all(|&p| p >= 0.0));
    for (b, f) in c.beta_grid().iter().zip(c.f_values()).skip(3).take(c.beta_grid().len() - 6) {
        assert!((r.conjugate(*b) - f).abs() < 1e-6, "beta {b}: {} vs {f}", r.conjugate(*b));
    }
}

#[test]
fn sawtooth_variance_on_doubling() {
    let d = PiecewiseMap::doubling();
    let s = green_kubo_sigma2(&d, &Observable::sawtooth(), Sigma2Method::Quadrature { resolution: 4096 }).unwrap();
    assert!((s.value - 0.25).abs() < 0.005, "{}", s.value);
    let s = green_kubo_sigma2(&d, &Observable::coin(), Sigma2Method::Quadrature { resolution: 1024 }).unwrap();
    assert!((s.value - 0.25).abs() < 0.005, "{}", s.value);
    assert!(!s.degenerate);
}

#[test]
fn sigma2_matches_curvature_at_zero() {
    let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
    let u = center_observable(&m, &Observable::sawtooth(), 1024).unwrap();
    let s = green_kubo_sigma2(&m, &u, Sigma2Method::Quadrature { resolution: 1024 }).unwrap();
    let c = pressure_curve(&m, &u, &symmetric_grid(1.0, 0.25), 1024).unwrap();
    let r = legendre(&c, &[0.0]).unwrap();
    assert!((r.sigma2_of_alpha[0] / s.value - 1.0).abs() < 0.05, "{} vs {}", r.sigma2_of_alpha[0], s.value);
}

#[test]
fn pressure_is_resolution_stable() {
    let d = PiecewiseMap::doubling();
    let at = |u: &Observable, n| UlamPressure::new(&d, u, n).unwrap().pressure(1.0).unwrap();
    let u = Observable::coin();
    assert!((at(&u, 1024) - at(&u, 4096)).abs() < 1e-6);
    // Lipschitz observables carry the O(1/N) Ulam bias
    let u = Observable::sawtooth();
    let (a, b) = (at(&u, 1024), at(&u, 4096));
    assert!((a - b).abs() < 1e-3 && (a - b).abs() > 0.0, "{a} vs {b}");
}
