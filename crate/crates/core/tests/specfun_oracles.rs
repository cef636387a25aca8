use approx::assert_relative_eq;
use proptest::prelude::*;
use resolvent_lab::specfun::*;
use resolvent_lab::Error;
use std::f64::consts::PI;

/// Stirling series after shifting the argument above 20.
fn gamma_oracle(x: f64) -> f64 {
    if x < 0.5 {
        let n = x.round();
        let s = (PI * (x - n)).sin() * if n as i64 % 2 == 0 { 1.0 } else { -1.0 };
        return PI / (s * gamma_oracle(1.0 - x));
    }
    let mut y = x;
    let mut p = 1.0;
    while y < 25.0 {
        p *= y;
        y += 1.0;
    }
    let b = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0];
    let mut s = 0.0;
    for (k, c) in b.iter().enumerate() {
        s += c / y.powi(2 * k as i32 + 1);
    }
    ((y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + s).exp() / p
}

/// Direct positive-term power series.
fn i_oracle(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (0.5 * z).powf(nu) / gamma_oracle(nu + 1.0);
    let mut sum = term;
    for k in 1..2000 {
        term *= q / (k as f64 * (k as f64 + nu));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Trapezoid rule on K_ν(z) = ∫₀^∞ exp(−z cosh t) cosh(νt) dt.
fn k_oracle(nu: f64, z: f64) -> f64 {
    let h: f64 = 0.02;
    let mut sum = 0.5 * (-z).exp();
    let mut t = h;
    loop {
        let e = -z * t.cosh() + nu * t;
        let v = 0.5 * (e.exp() + (-z * t.cosh() - nu * t).exp());
        sum += v;
        if e < -760.0 && t > 1.0 {
            break;
        }
        t += h;
    }
    sum * h
}

#[test]
fn gamma_matches_stirling_oracle_on_range() {
    let mut x: f64 = -9.97;
    while x < 30.0 {
        if (x - x.round()).abs() > 1e-3 || x > 0.5 {
            let g = gamma_fn(x).unwrap();
            assert_relative_eq!(g, gamma_oracle(x), max_relative = 1e-13);
        }
        x += 0.0731;
    }
    assert_relative_eq!(gamma_fn(0.5).unwrap(), 1.772_453_850_905_516, max_relative = 1e-15);
    assert_relative_eq!(gamma_fn(2.5).unwrap(), 1.329_340_388_179_137, max_relative = 1e-14);
}

#[test]
fn gamma_poles_are_domain_errors() {
    for x in [0.0, -1.0, -7.0] {
        assert!(matches!(gamma_fn(x), Err(Error::Domain(_))));
    }
}

#[test]
fn bessel_i_against_power_series() {
    for &nu in &[0.0, 0.3, 0.5, 1.0, 1.5, 2.0, 3.7, 7.25, 12.0] {
        for &z in &[1e-6, 1e-3, 0.1, 0.9, 1.99, 2.0, 5.0, 13.0, 30.0, 50.0] {
            let e = bessel_i(nu, z).unwrap();
            let o = i_oracle(nu, z);
            assert_relative_eq!(e.value, o, max_relative = 1e-13);
            assert!(e.est_abs_err <= 1e-12 * e.value.abs().max(1.0));
        }
    }
    assert_relative_eq!(bessel_i(0.5, 1.0).unwrap().value, 0.937_674_888_245_488_2, max_relative = 1e-14);
}

#[test]
fn bessel_k_against_integral_representation() {
    for &nu in &[0.0, 0.3, 0.5, 1.0, 1.5, 2.0, 3.7, 7.25, 12.0] {
        for &z in &[1e-6, 1e-3, 0.1, 0.9, 1.99, 2.0, 5.0, 13.0, 30.0, 50.0] {
            let e = bessel_k(nu, z).unwrap();
            let o = k_oracle(nu, z);
            assert_relative_eq!(e.value, o, max_relative = 2e-13);
            assert!(e.est_abs_err <= 1e-12 * e.value.abs().max(1.0));
        }
    }
}

#[test]
fn k_half_closed_form_cross_check() {
    for &z in &[0.01, 0.5, 1.0, 4.0, 20.0] {
        let closed = (PI / (2.0 * z)).sqrt() * (-z).exp();
        assert_relative_eq!(k_nu(0.5, z), closed, max_relative = 1e-14);
        assert_relative_eq!(k_nu(1.5, z), closed * (1.0 + 1.0 / z), max_relative = 1e-14);
    }
    assert_relative_eq!(bessel_k(0.5, 1.0).unwrap().value, 0.461_068_504_447_894_4, max_relative = 1e-14);
}

#[test]
fn i1_is_derivative_of_i0() {
    let z = 0.7;
    let h = 1e-3;
    let d = (-i_nu(0.0, z + 2.0 * h) + 8.0 * i_nu(0.0, z + h) - 8.0 * i_nu(0.0, z - h)
        + i_nu(0.0, z - 2.0 * h))
        / (12.0 * h);
    assert!((i_nu(1.0, z) - d).abs() < 1e-10);
}

#[test]
fn small_argument_leading_terms() {
    let z = 1e-4;
    let r = bessel_i(2.0, z).unwrap().value / ((z / 2.0).powi(2) / gamma_fn(3.0).unwrap());
    assert!((r - 1.0).abs() < 1e-7);
    let z = 1e-5;
    assert!((bessel_k(2.0, z).unwrap().value * z * z / 2.0 - 1.0).abs() < 1e-8);
}

#[test]
fn expansion_examples() {
    let e = small_arg_expansion(1.5, BesselFamily::K, 2.0).unwrap();
    let lead = e.terms.iter().find(|t| t.power == -1.5).unwrap();
    // Γ(ν)/2 · 2^ν
    assert_relative_eq!(lead.coefficient, gamma_fn(1.5).unwrap() * 2f64.powf(1.5) / 2.0, max_relative = 1e-14);
    assert_relative_eq!(lead.coefficient, (PI / 2.0).sqrt(), max_relative = 1e-14);
    let powers: Vec<f64> = e.terms.iter().map(|t| t.power).collect();
    for p in [-1.5, 0.5, 1.5] {
        assert!(powers.contains(&p));
    }

    let e = small_arg_expansion(0.5, BesselFamily::K, 1.0).unwrap();
    assert_eq!(e.terms.len(), 2);
    let c = (PI / 2.0).sqrt();
    assert_eq!((e.terms[0].power, e.terms[0].logpower), (-0.5, 0));
    assert_relative_eq!(e.terms[0].coefficient, c, max_relative = 1e-14);
    assert_eq!((e.terms[1].power, e.terms[1].logpower), (0.5, 0));
    assert_relative_eq!(e.terms[1].coefficient, -c, max_relative = 1e-14);

    let e = small_arg_expansion(2.0, BesselFamily::I, 2.0).unwrap();
    assert_eq!(e.terms.len(), 1);
    assert_eq!(e.terms[0].power, 2.0);
    assert_relative_eq!(e.terms[0].coefficient, 0.125, max_relative = 1e-15);

    assert!(matches!(
        small_arg_expansion(1.0, BesselFamily::K, 5.5),
        Err(Error::Capability(_))
    ));
}

/// Log-log slope of |K − expansion| on [1e-4, 1e-2] after dividing out the
/// leading log power of the remainder.
fn remainder_slope(nu: f64, fam: BesselFamily, trunc: f64) -> (f64, f64) {
    let e = small_arg_expansion(nu, fam, trunc).unwrap();
    let pts: Vec<(f64, f64)> = (0..=20)
        .map(|i| {
            let z = 10f64.powf(-4.0 + 0.1 * i as f64);
            let v = match fam {
                BesselFamily::K => k_nu(nu, z),
                BesselFamily::I => i_nu(nu, z),
            };
            let r = (v - e.eval(z)).abs() / z.ln().abs().powi(e.remainder_logpower as i32);
            (z.ln(), r.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx, e.remainder_power)
}

#[test]
fn expansion_remainders_decay_at_stated_order() {
    let cases = [
        (0.0, BesselFamily::K, 0.0),
        (0.25, BesselFamily::K, -0.25),
        (0.25, BesselFamily::K, 0.25),
        (0.5, BesselFamily::K, -0.5),
        (0.5, BesselFamily::K, 0.5),
        (1.0, BesselFamily::K, -1.0),
        (1.5, BesselFamily::K, -1.5),
        (1.5, BesselFamily::K, 0.5),
        (2.0, BesselFamily::K, -2.0),
        (2.5, BesselFamily::K, -2.5),
        (3.7, BesselFamily::K, -3.7),
        (0.5, BesselFamily::I, 0.5),
        (1.5, BesselFamily::I, 1.5),
        (2.0, BesselFamily::I, 2.0),
    ];
    for (nu, fam, trunc) in cases {
        let (slope, expect) = remainder_slope(nu, fam, trunc);
        assert!((slope - expect).abs() < 0.1, "nu={nu} trunc={trunc}: slope {slope} vs {expect}");
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    x
}

#[test]
fn k1_linear_coefficient_fit() {
    // (K₁(z) − 1/z − (z/2) ln z)/z = α + β z² ln z + γ' z² + …
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for i in 0..=40 {
        let z = 10f64.powf(-4.0 + 0.05 * i as f64);
        let y = (k_nu(1.0, z) - 1.0 / z - 0.5 * z * z.ln()) / z;
        let row = [1.0, z * z * z.ln(), z * z];
        for r in 0..3 {
            atb[r] += row[r] * y;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let fit = solve3(ata, atb);
    let alpha = -(2.0 * 2f64.ln() + 1.0 - 2.0 * EULER_GAMMA) / 4.0;
    assert!((fit[0] - alpha).abs() < 1e-6, "{} vs {alpha}", fit[0]);
    assert!((alpha + 0.307_965_7).abs() < 1e-7);
    assert!((fit[1] - 1.0 / 16.0).abs() < 1e-2);
}

#[test]
fn wronskian_identity() {
    for &nu in &[0.0, 0.5, 1.0, 1.5, 2.0, 3.7] {
        for i in 0..=60 {
            let z = 0.01 * 2000f64.powf(i as f64 / 60.0);
            let s = bessel_ik_scaled(nu, z);
            let w = s.i_value() * s.kp_value() - s.ip_value() * s.k_value();
            assert_relative_eq!(w, -1.0 / z, max_relative = 1e-10);
        }
    }
}

/// Integration by parts turns the integral into −∫₀^∞ κ^{ν−1}K_{ν−1}(κ) dκ,
/// a Mellin transform with value −2^{ν−2}√π Γ(ν−½).
fn comp_ibp_oracle(nu: f64) -> f64 {
    -2f64.powf(nu - 2.0) * PI.sqrt() * gamma_oracle(nu - 0.5)
}

#[test]
fn comp_integral_matches_integration_by_parts_oracle() {
    for nu in [1.1, 1.25, 1.5, 2.0, 3.0, 4.5] {
        let v = comp_integral(nu).unwrap();
        assert_relative_eq!(v, comp_ibp_oracle(nu), max_relative = 1e-10);
    }
    assert_relative_eq!(comp_integral(2.0).unwrap(), -PI / 2.0, max_relative = 1e-10);
    assert!(matches!(comp_integral(1.0), Err(Error::Precondition(_))));
}

#[test]
fn comp_integral_ratio_to_published_form_is_one_half() {
    for nu in [1.1, 1.25, 1.5, 2.0, 3.0] {
        let r = comp_integral(nu).unwrap() / comp_closed_form(nu);
        assert_relative_eq!(r, 0.5, max_relative = 1e-10);
    }
}

proptest! {
    #[test]
    fn bessel_values_positive_and_error_bounded(nu in 0.0f64..12.0, lz in -6.0f64..1.69) {
        let z = 10f64.powf(lz);
        let i = bessel_i(nu, z).unwrap();
        let k = bessel_k(nu, z).unwrap();
        prop_assert!(i.value > 0.0 && k.value > 0.0);
        prop_assert!(i.est_abs_err <= 1e-12 * i.value.max(1.0));
        prop_assert!(k.est_abs_err <= 1e-12 * k.value.max(1.0));
    }

    #[test]
    fn recurrences_hold(nu in 1.0f64..11.0, lz in -2.0f64..1.5) {
        let z = 10f64.powf(lz);
        let lhs = i_nu(nu - 1.0, z) - i_nu(nu + 1.0, z);
        prop_assert!((lhs - 2.0 * nu / z * i_nu(nu, z)).abs() <= 1e-12 * lhs.abs().max(i_nu(nu - 1.0, z)));
        let lhs = k_nu(nu + 1.0, z) - k_nu(nu - 1.0, z);
        prop_assert!((lhs - 2.0 * nu / z * k_nu(nu, z)).abs() <= 1e-12 * k_nu(nu + 1.0, z));
    }

    #[test]
    fn gamma_recurrence(x in -9.9f64..29.0) {
        prop_assume!((x - x.round()).abs() > 1e-3);
        let g = gamma_fn(x).unwrap();
        let g1 = gamma_fn(x + 1.0).unwrap();
        prop_assert!((g1 - x * g).abs() <= 1e-13 * g1.abs());
    }
}
