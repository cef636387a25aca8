use approx::assert_relative_eq;
use proptest::prelude::*;
use resolvent_lab::cone_model::*;
use resolvent_lab::quad::gauss_legendre;
use resolvent_lab::Error;
use std::f64::consts::PI;

fn k32(x: f64) -> f64 {
    (PI / (2.0 * x)).sqrt() * (-x).exp() * (1.0 + 1.0 / x)
}

#[test]
fn mode_tables() {
    let m = mode_table(&ConeGeometry::euclidean(4), 2);
    let nus: Vec<f64> = m.iter().map(|m| m.nu).collect();
    assert_eq!(nus, vec![1.0, 2.0, 3.0]);
    let m = mode_table(&ConeGeometry { n: 3, link: Link::ScaledSphere(2.0) }, 1);
    assert_relative_eq!(m[1].nu, 0.75f64.sqrt(), max_relative = 1e-15);
    assert_eq!(m[1].multiplicity, 3);
    let m = mode_table(&ConeGeometry::euclidean(3), 0);
    assert_eq!((m[0].nu, m[0].multiplicity), (0.5, 1));
    let g = ConeGeometry::with_mode_order(3, 1, 0.75).unwrap();
    assert_relative_eq!(mode_table(&g, 1)[1].nu, 0.75, max_relative = 1e-14);
}

#[test]
fn projection_kernel_values() {
    assert_relative_eq!(projection_kernel(3, 0, 0.3), 1.0 / (4.0 * PI), max_relative = 1e-14);
    assert_relative_eq!(projection_kernel(3, 1, 0.3), 3.0 * 0.3 / (4.0 * PI), max_relative = 1e-14);
    assert_relative_eq!(projection_kernel(4, 0, -0.7), 1.0 / (2.0 * PI * PI), max_relative = 1e-14);
    // Legendre P_2 on S²
    let x: f64 = 0.4;
    assert_relative_eq!(projection_kernel(3, 2, x), 5.0 / (4.0 * PI) * (1.5 * x * x - 0.5), max_relative = 1e-14);
}

#[test]
fn explicit_spectrum_has_no_kernel() {
    let g = ConeGeometry { n: 3, link: Link::ExplicitSpectrum(vec![(0.0, 1), (0.5, 2)]) };
    let m = mode_table(&g, 1);
    assert!(matches!(g.projection(&m[0], 0.1), Err(Error::Capability(_))));
}

/// ∫_{S²} Π_j(x·y) Π_j(y·z) dy = Π_j(x·z), with x the north pole.
#[test]
fn projection_reproduces_on_s2() {
    let (t, w) = gauss_legendre(24);
    let nphi = 48;
    let z = [0.6f64.sin(), 0.0, 0.6f64.cos()];
    for j in 0..5 {
        let mut acc = 0.0;
        for (ct, wt) in t.iter().zip(&w) {
            let st = (1.0 - ct * ct).sqrt();
            for p in 0..nphi {
                let phi = 2.0 * PI * p as f64 / nphi as f64;
                let y = [st * phi.cos(), st * phi.sin(), *ct];
                let yz = y[0] * z[0] + y[1] * z[1] + y[2] * z[2];
                acc += wt * (2.0 * PI / nphi as f64) * projection_kernel(3, j, *ct) * projection_kernel(3, j, yz);
            }
        }
        assert_relative_eq!(acc, projection_kernel(3, j, z[2]), max_relative = 1e-12, epsilon = 1e-14);
    }
}

#[test]
fn free_sum_matches_yukawa_in_three_dimensions() {
    let v = free_resolvent_sum(3, 0.3, 1.0, 1.0, 1.0 - 2.0, 2000).unwrap();
    // r = r′ = 1, antipodal: d = 2
    assert_relative_eq!(v, (-0.6f64).exp() / (8.0 * PI), max_relative = 1e-6);
    // the closed form evaluates to 0.0218365, not the rounded 0.02183801 quoted alongside it
    assert!((v - 0.0218365212).abs() < 1e-9);
    for &(k, r, rp, c) in &[(1.0, 0.5, 2.0, 0.3), (0.01, 3.0, 1.0, -0.2), (2.0, 1.0, 1.5, 0.9)] {
        let d: f64 = (r * r + rp * rp - 2.0 * r * rp * c as f64).sqrt();
        let v = free_resolvent_sum(3, k, r, rp, c, 400).unwrap();
        assert_relative_eq!(v, (-k * d).exp() / (4.0 * PI * d), max_relative = 1e-8);
    }
}

#[test]
fn free_sum_matches_closed_form_in_five_dimensions() {
    let (k, r, rp, c): (f64, f64, f64, f64) = (0.7, 1.2, 0.8, 0.1);
    let d: f64 = (r * r + rp * rp - 2.0 * r * rp * c).sqrt();
    let exact = (2.0 * PI).powf(-2.5) * (k / d).powf(1.5) * k32(k * d);
    let v = free_resolvent_sum(5, k, r, rp, c, 300).unwrap();
    assert_relative_eq!(v, exact, max_relative = 1e-8);
}

#[test]
fn free_sum_is_symmetric_and_converges() {
    let a = free_resolvent_sum(4, 0.5, 0.7, 1.9, 0.2, 200).unwrap();
    let b = free_resolvent_sum(4, 0.5, 1.9, 0.7, 0.2, 200).unwrap();
    assert_eq!(a, b);
    let c = free_resolvent_sum(4, 0.5, 0.7, 1.9, 0.2, 400).unwrap();
    assert!((a - c).abs() < 1e-12 * a.abs());
}

#[test]
fn free_sum_rejects_coincident_points() {
    assert!(matches!(free_resolvent_sum(3, 1.0, 1.0, 1.0, 1.0, 10), Err(Error::Domain(_))));
}

/// Front face on ℝ³ sums to e^{−|t|/2}(1 − 2xw + w²)^{−1/2}/(4π), w = e^{−|t|}.
#[test]
fn front_face_generating_function() {
    let g = ConeGeometry::euclidean(3);
    let modes = mode_table(&g, 150);
    for &(s, x) in &[(2.0f64, 0.3f64), (0.4, -0.8), (1.3, 0.95)] {
        let w = (-s.ln().abs()).exp();
        let exact = w.sqrt() / (4.0 * PI) / (1.0 - 2.0 * x * w + w * w).sqrt();
        let v = ff_kernel(&g, &modes, s, x, 1e-8).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-8);
    }
}

/// Each mode of the front-face kernel solves (−∂ₜ² + ν²)f = δ: derivative jump −1.
#[test]
fn front_face_mode_jump() {
    let g = ConeGeometry::euclidean(5);
    let modes = mode_table(&g, 0);
    let m = modes[0];
    let h = 1e-6;
    let f = |t: f64| ff_kernel(&g, &modes, t.exp(), 1.0, f64::INFINITY).unwrap() / g.projection_diag(&m).unwrap();
    let jump = (f(h) - f(0.0)) / h - (f(0.0) - f(-h)) / h;
    assert!((jump + 1.0).abs() < 1e-4, "jump {jump}");
}

#[test]
fn front_face_tail_error_at_diagonal() {
    let g = ConeGeometry::euclidean(3);
    let modes = mode_table(&g, 10);
    assert!(matches!(ff_kernel(&g, &modes, 1.0, 0.2, 1e-6), Err(Error::Numeric { .. })));
}

/// On ℝⁿ the bf₀ kernel in the function convention is the free resolvent at k = 1.
#[test]
fn bf0_is_unit_energy_free_resolvent() {
    let g = ConeGeometry::euclidean(3);
    let modes = mode_table(&g, 80);
    let (ka, kb, x): (f64, f64, f64) = (0.5, 1.5, 0.4);
    let d: f64 = (ka * ka + kb * kb - 2.0 * ka * kb * x).sqrt();
    let v = bf0_kernel(&g, &modes, ka, kb, x, None, Convention::Function, 1e-10).unwrap();
    assert_relative_eq!(v, (-d).exp() / (4.0 * PI * d), max_relative = 1e-9);
    let q = bf0_kernel(&g, &modes, ka, kb, x, None, Convention::BHalfDensity, 1e-10).unwrap();
    assert_relative_eq!(q, v * (ka * kb).sqrt(), max_relative = 1e-13);
}

#[test]
fn bf0_resonance_swaps_regular_branch() {
    let g = ConeGeometry::euclidean(3);
    let modes = mode_table(&g, 60);
    let c0 = resonance_coefficient(0.5).unwrap();
    assert_relative_eq!(c0, 2.0 / PI, max_relative = 1e-14);
    let res = Resonance { nu: 0.5, mode_j: 0, coeff: c0 };
    let (ka, kb): (f64, f64) = (0.3, 1.1);
    let with = bf0_kernel(&g, &modes, ka, kb, 0.2, Some(res), Convention::BHalfDensity, 1e-10).unwrap();
    let without = bf0_kernel(&g, &modes, ka, kb, 0.2, None, Convention::BHalfDensity, 1e-10).unwrap();
    let i_minus = (2.0 / (PI * ka)).sqrt() * ka.cosh();
    let i_plus = (2.0 / (PI * ka)).sqrt() * ka.sinh();
    let k_half = (PI / (2.0 * kb)).sqrt() * (-kb).exp();
    assert_relative_eq!(with - without, (i_minus - i_plus) * k_half / (4.0 * PI), max_relative = 1e-11);
}

#[test]
fn bf0_truncation_is_reported() {
    let g = ConeGeometry::euclidean(3);
    let modes = mode_table(&g, 2);
    let r = bf0_kernel(&g, &modes, 1.0, 1.1, 0.0, None, Convention::Function, 1e-12);
    assert!(matches!(r, Err(Error::Numeric { .. })));
}

proptest! {
    #[test]
    fn projection_trace_is_multiplicity(n in 3u32..8, j in 0u32..6) {
        let g = ConeGeometry::euclidean(n);
        let m = mode_table(&g, j).into_iter().find(|m| m.j == j).unwrap();
        let diag = g.projection(&m, 1.0).unwrap();
        prop_assert!((diag - g.projection_diag(&m).unwrap()).abs() < 1e-12 * diag);
    }

    #[test]
    fn bf0_symmetric(a in 0.1f64..3.0, b in 0.1f64..3.0, x in -1.0f64..1.0) {
        prop_assume!(a.min(b) / a.max(b) < 0.7);
        let g = ConeGeometry::euclidean(4);
        let modes = mode_table(&g, 120);
        let p = bf0_kernel(&g, &modes, a, b, x, None, Convention::Function, 1e-8).unwrap();
        let q = bf0_kernel(&g, &modes, b, a, x, None, Convention::Function, 1e-8).unwrap();
        prop_assert!((p - q).abs() <= 1e-14 * p.abs());
    }
}
