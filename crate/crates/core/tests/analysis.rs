use nalgebra::{DMatrix, SymmetricEigen};
use wavefront::analysis::laws::moment_bound;
use wavefront::analysis::spectral::{contraction_check, random_test_vectors, spectral_gap_with};
use wavefront::grid::SpatialGrid;
use wavefront::operator::kernel_residuals;
use wavefront::wave_profile::{nagumo_profile, WaveProfile};

fn profile(half_width: f64, n: usize) -> WaveProfile {
    nagumo_profile(1.0, 2.0, 0.25, &SpatialGrid::new(half_width, n).unwrap()).unwrap()
}

/// Dense symmetrisation of `νΔ + b f'(v̂) − c∂ₓ` built from scratch.
fn dense_spectrum(p: &WaveProfile) -> Vec<f64> {
    let g = p.grid();
    let (nu, b, c, dx) = (p.nu(), p.b(), p.c(), g.dx());
    let m = g.len() - 2;
    let lo = nu / (dx * dx) + c / (2.0 * dx);
    let up = nu / (dx * dx) - c / (2.0 * dx);
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let v = p.vhat()[i + 1];
        // f'(v) for v(1-v)(v-a) with a = 1/4, expanded by hand.
        let df = -3.0 * v * v + 2.5 * v - 0.25;
        a[(i, i)] = -2.0 * nu / (dx * dx) + b * df;
        if i + 1 < m {
            a[(i, i + 1)] = (lo * up).sqrt();
            a[(i + 1, i)] = (lo * up).sqrt();
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

#[test]
fn spectral_gap_matches_dense_eigensolver() {
    let p = profile(15.0, 301);
    let ev = dense_spectrum(&p);
    let gap = spectral_gap_with(&p, 50, 1).unwrap();
    assert!((gap.lambda_top - ev[0]).abs() < 1e-9, "{} vs {}", gap.lambda_top, ev[0]);
    assert!((gap.lambda_second - ev[1]).abs() < 1e-9);
    assert!((gap.kappa_hat + ev[1]).abs() < 1e-9);
    assert!(gap.kappa_hat > 0.0);
    // The top eigenvalue approximates the zero eigenvalue of the translation mode.
    assert!(ev[0].abs() < 1e-2, "λ₁ = {}", ev[0]);
    assert!(gap.c_star_hat >= gap.c_star_certified);
}

#[test]
fn test_vectors_vanish_at_the_boundary() {
    let p = profile(15.0, 301);
    let vs = random_test_vectors(&p, 5, 3);
    assert_eq!(vs.len(), 5);
    for v in &vs {
        assert_eq!((v[0], v[v.len() - 1]), (0.0, 0.0));
        assert!(v.iter().any(|x| x.abs() > 1e-3));
    }
    assert_eq!(vs, random_test_vectors(&p, 5, 3));
}

#[test]
fn kernel_residuals_are_second_order() {
    let (k0, a0) = kernel_residuals(&profile(20.0, 401)).unwrap();
    let (k1, a1) = kernel_residuals(&profile(20.0, 801)).unwrap();
    assert!((3.2..=4.8).contains(&(k0 / k1)), "{}", k0 / k1);
    assert!((3.2..=4.8).contains(&(a0 / a1)), "{}", a0 / a1);
}

#[test]
fn contraction_respects_the_gap() {
    let p = profile(15.0, 301);
    let gap = spectral_gap_with(&p, 50, 1).unwrap();
    let u: Vec<f64> = p.grid().x().iter().map(|x| (-(x * x) / 4.0).exp() * x.sin()).collect();
    let mut u = u;
    let n = u.len();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let rep = contraction_check(&p, &gap, &u, 0.01, 5.0, 50, 1.05).unwrap();
    assert!(rep.worst_bound_ratio <= 1.05, "{}", rep.worst_bound_ratio);
    assert!(rep.first_violation.is_none());
}

#[test]
fn moment_bound_limits() {
    assert_eq!(moment_bound(0.0, 0.5, 0.3, 0.2), 0.6);
    let far = moment_bound(1e3, 0.5, 0.3, 0.2);
    assert!((far - 0.4).abs() < 1e-12);
    // Monotone between the two limits when the start lies above the plateau.
    let mid = moment_bound(1.0, 0.5, 0.3, 0.2);
    let expect = 2.0 * (-1.0f64).exp() * 0.3 + 0.4 * (1.0 - (-1.0f64).exp());
    assert!((mid - expect).abs() < 1e-15);
}
