use brwp_core::experiments::preset;
use brwp_core::{Grid, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn integrate_exp(v: &Potential, beta: f64, lo: f64, hi: f64, n: usize) -> f64 {
    let g = Grid::uniform(lo, hi, n, 1).unwrap();
    let vals: Vec<f64> = g.points().iter().map(|x| (-beta * v.value(&[*x])).exp()).collect();
    g.integrate(&vals)
}

#[test]
fn quadratic_examples() {
    let q = Potential::quadratic(1.0, 1).unwrap();
    assert_eq!(q.value(&[2.0]), 2.0);
    assert_eq!(q.gradient_vec(&[2.0]), vec![2.0]);
    let q2 = Potential::quadratic(3.0, 2).unwrap();
    assert_eq!(q2.laplacian(&[0.3, -7.0]), 6.0);
    assert_eq!(q2.gradient_vec(&[1.0, -2.0]), vec![3.0, -6.0]);
    assert_eq!(q2.alpha(), Some(3.0));
    assert!(Potential::quadratic(0.0, 1).is_err());
    assert!(Potential::quadratic(-1.0, 1).is_err());
}

#[test]
fn mixture_examples() {
    let m = Potential::gaussian_mixture(vec![2.0, 0.0, 0.0], 1.0, 1.0).unwrap();
    assert!(m.gradient_vec(&[0.0; 3]).iter().all(|g| g.abs() < 1e-15));
    let m1 = Potential::gaussian_mixture(vec![2.0], 1.0, 1.0).unwrap();
    assert!(m1.value(&[2.0]) < m1.value(&[0.0]));
    let z = integrate_exp(&m1, 1.0, -10.0, 10.0, 4001);
    assert!((z - 1.0).abs() < 1e-6, "mass {z}");
    assert!(Potential::gaussian_mixture(vec![2.0], 0.0, 1.0).is_err());
}

#[test]
fn nonsmooth_examples() {
    // subgradient of ‖x + 2e₁‖₁ at the origin
    let l = Potential::l1_l12(3, 1.0).unwrap();
    let g = l.gradient_vec(&[0.0; 3]);
    assert!(g.iter().all(|v| v.is_finite()));
    assert!(l.value(&[0.0; 3]).is_finite());
    // exact kink of the L_{1/2} branch is regularized, not an error
    assert!(l.value(&[2.0, 0.0, 0.0]).is_finite());
    assert!(l.laplacian(&[2.0, 0.0, 0.0]).is_finite());

    let gl = Potential::gauss_laplace(1, 1.0, 0.25, 1.0).unwrap();
    let z = integrate_exp(&gl, 1.0, -12.0, 12.0, 24001);
    assert!((z - 1.0).abs() < 1e-5, "mass {z}");
}

#[test]
fn gauss_laplace_value_is_the_mixture_formula() {
    let (sigma, b) = (1.0f64, 0.25f64);
    let gl = Potential::gauss_laplace(1, sigma, b, 1.0).unwrap();
    let x = 2.0f64;
    let gauss = (-(x - 2.0) * (x - 2.0) / (2.0 * sigma * sigma)).exp();
    let laplace = (-(x + 2.0f64).abs() / (2.0 * b)).exp();
    let z = (sigma * (2.0 * std::f64::consts::PI).sqrt()) + 4.0 * b;
    let want = -((gauss + laplace) / z).ln();
    assert!((gl.value(&[x]) - want).abs() < 1e-12, "{} vs {want}", gl.value(&[x]));
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let smooth = [
        Potential::quadratic(2.0, 3).unwrap(),
        Potential::gaussian_mixture(vec![2.0, 0.0], 1.0, 1.0).unwrap(),
        Potential::gaussian_mixture(vec![2.0, 2.0, 2.0], 0.7, 2.0).unwrap(),
    ];
    for v in &smooth {
        assert!(v.is_smooth());
        let d = v.dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = v.gradient_vec(&x);
            let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            for k in 0..d {
                let eps = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let fd = (v.value(&xp) - v.value(&xm)) / (2.0 * eps);
                assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + gn), "{} at {x:?}", v.name());
            }
        }
    }
}

#[test]
fn quadratic_rayleigh_quotient_is_alpha() {
    let q = Potential::quadratic(1.7, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let gx = q.gradient_vec(&x);
        let gy = q.gradient_vec(&y);
        let num: f64 = (0..4).map(|k| (gx[k] - gy[k]) * (x[k] - y[k])).sum();
        let den: f64 = (0..4).map(|k| (x[k] - y[k]).powi(2)).sum();
        assert!((num / den - 1.7).abs() < 1e-12);
    }
}

#[test]
fn presets_resolve_and_normalize() {
    for (id, lo, hi, n) in [
        ("quadratic", -12.0, 12.0, 2401),
        ("gaussian_mixture", -12.0, 12.0, 2401),
        ("l1_l12", -24.0, 24.0, 48001),
        ("gauss_laplace", -12.0, 12.0, 24001),
    ] {
        let v = preset(id, 1, 1.0).unwrap();
        assert!(v.is_normalizable());
        let z = integrate_exp(&v, 1.0, lo, hi, n);
        let expected = if id == "quadratic" { (2.0 * std::f64::consts::PI).sqrt() } else { 1.0 };
        assert!((z - expected).abs() < 2e-5 * expected, "{id}: {z}");
    }
    assert!(preset("banana", 1, 1.0).is_err());
}

#[test]
fn potentials_roundtrip_through_json() {
    let v = Potential::gauss_laplace(2, 1.0, 0.25, 1.0).unwrap();
    let s = serde_json::to_string(&v).unwrap();
    assert!(s.contains("\"kind\":\"gauss_laplace\""));
    let back: Potential = serde_json::from_str(&s).unwrap();
    assert_eq!(back, v);
}
