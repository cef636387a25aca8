use approx::assert_relative_eq;
use resolvent_lab::cone_model::{mode_table, ConeGeometry};
use resolvent_lab::radial_lab::*;
use resolvent_lab::specfun::sphere_volume;
use std::f64::consts::PI;

fn op(problem: &RadialProblem, j: u32, k: f64) -> RadialOperator {
    reduce(problem, problem.mode(j).unwrap(), k)
}

#[test]
fn free_channel_matches_bessel_product() {
    for n in [3u32, 4, 5] {
        let p = RadialProblem::free(ConeGeometry::euclidean(n));
        for j in 0..4 {
            for &(k, r, rp) in &[(1.0f64, 0.5f64, 2.0f64), (0.01, 3.0, 0.7), (1e-6, 1.0, 5.0), (3.0, 0.2, 0.9)] {
                let o = op(&p, j, k);
                for prec in [Precision::Double, Precision::DoubleDouble] {
                    let g = ChannelGreen::new(&o, r.min(rp), r.max(rp), prec).unwrap().g(r, rp);
                    let exact = free_channel_green(o.nu, k, r, rp);
                    assert_relative_eq!(g, exact, max_relative = 1e-11);
                }
            }
        }
    }
}

#[test]
fn wronskian_is_constant() {
    let p = RadialProblem::new(
        ConeGeometry::euclidean(3),
        Potential::Terms(vec![Term::Well { depth: 2.0, scale: 1.0 }]),
    )
    .unwrap();
    let c = Channel::<f64>::new(&op(&p, 1, 0.4), 0.5, 3.0).unwrap();
    for r in [0.01, 0.3, 1.0, 7.0, 40.0] {
        assert!((c.wronskian_ratio(r) - 1.0).abs() < 1e-12, "r = {r}");
    }
    assert_relative_eq!(c.g(0.5, 3.0), c.g(3.0, 0.5), max_relative = 1e-15);
}

/// Finite-difference Dirichlet matrix of −d²/dr² + Q on [a, b] inverted directly.
#[test]
fn green_matches_dense_inverse() {
    let p = RadialProblem::new(
        ConeGeometry::euclidean(3),
        Potential::Terms(vec![Term::Rational { coeff: 1.5, scale: 1.0, p: 0, q: 2 }]),
    )
    .unwrap();
    let o = op(&p, 0, 1.0);
    let (a, b, m) = (0.0, 30.0, 3000usize);
    let h = (b - a) / m as f64;
    let nn = m - 1;
    let mut mat = nalgebra::DMatrix::<f64>::zeros(nn, nn);
    for i in 0..nn {
        let r = a + (i + 1) as f64 * h;
        mat[(i, i)] = 2.0 / (h * h) + o.q::<f64>(r);
        if i > 0 {
            mat[(i, i - 1)] = -1.0 / (h * h);
        }
        if i + 1 < nn {
            mat[(i, i + 1)] = -1.0 / (h * h);
        }
    }
    let inv = mat.try_inverse().unwrap();
    let (i1, i2) = (49usize, 199usize);
    let (r1, r2) = ((i1 + 1) as f64 * h, (i2 + 1) as f64 * h);
    let fd = inv[(i1, i2)] / h;
    let g = green_function(&o, 1.0, r1, r2).unwrap();
    assert_relative_eq!(g, fd, max_relative = 1e-4);
}

#[test]
fn free_resolvent_closed_form() {
    let p = RadialProblem::free(ConeGeometry::euclidean(3));
    let s = resolvent_kernel(&p, 0.7, 0.5, 1.5, 0.3, &ResolventOptions::default()).unwrap();
    let d: f64 = (0.25f64 + 2.25 - 2.0 * 0.75 * 0.3).sqrt();
    assert_relative_eq!(s.value, (-0.7 * d).exp() / (4.0 * PI * d), max_relative = 1e-13);
}

/// With a potential, the mode sum with free subtraction agrees with the direct
/// mode sum of the full channel Green functions.
#[test]
fn subtracted_sum_matches_direct_sum() {
    let pot = Potential::Terms(vec![Term::Well { depth: 1.0, scale: 1.0 }]);
    let p = RadialProblem::new(ConeGeometry::euclidean(4), pot.clone()).unwrap();
    let (k, r, rp, c) = (0.3, 0.6, 1.5, 0.2);
    let s = resolvent_kernel(&p, k, r, rp, c, &ResolventOptions::default()).unwrap();
    let g = ConeGeometry::euclidean(4);
    let mut direct = 0.0;
    for m in mode_table(&g, 80) {
        let o = reduce(&p, m, k);
        let ch = ChannelGreen::new(&o, r, rp, Precision::Double).unwrap();
        direct += (r * rp).powf(-1.5) * ch.g(r, rp) * g.projection(&m, c).unwrap();
    }
    assert_relative_eq!(s.value, direct, max_relative = 1e-10);
    assert!(s.value > 0.0);
}

#[test]
fn coincident_radii_rejected() {
    let p = RadialProblem::free(ConeGeometry::euclidean(3));
    assert!(resolvent_kernel(&p, 1.0, 1.0, 1.0, 0.2, &ResolventOptions::default()).is_err());
}

#[test]
fn free_zero_energy_wronskian_is_one() {
    for n in [3u32, 4, 5] {
        let p = RadialProblem::free(ConeGeometry::euclidean(n));
        for j in 0..3 {
            let z = zero_solutions(&op(&p, j, 0.0)).unwrap();
            assert!((z.wronskian - 1.0).abs() < 1e-12, "n {n} j {j}: {}", z.wronskian);
            let nu = z.profile.nu;
            assert!((z.regular_at_0.value - (nu + 0.5)).abs() < 1e-8);
            assert!((z.decaying_at_inf.value - (0.5 - nu)).abs() < 1e-8);
        }
    }
}

#[test]
fn planted_potential_depths() {
    for &(n, j, depth) in &[(5u32, 1u32, 35.0), (6, 2, 80.0), (4, 0, 8.0), (3, 0, 3.0)] {
        let g = ConeGeometry::euclidean(n);
        let f = planted_profile(&g, j, 1.0).unwrap();
        let p = potential_from_mode(&g, j, f.clone()).unwrap();
        let one = AlgebraicProfile::single(f.a, 1.0, p.mode(j).unwrap().nu);
        let q = potential_from_mode(&g, j, one).unwrap();
        assert_relative_eq!(-q.potential.value(1e-9), depth, max_relative = 1e-12);
        let lam = p.mode(j).unwrap().lambda;
        for r in [0.1, 1.0, 4.0] {
            assert!(profile_residual(n, lam, &f, &p.potential, r) < 1e-12);
        }
    }
}

#[test]
fn planted_potential_rejects_wrong_exponents() {
    let g = ConeGeometry::euclidean(5);
    let f = AlgebraicProfile::single(1.0, 1.0, 2.0);
    assert!(potential_from_mode(&g, 1, f).is_err());
    let f = AlgebraicProfile::single(0.0, 1.0, 1.5);
    assert!(potential_from_mode(&g, 1, f).is_err());
}

#[test]
fn slow_decay_rejected() {
    let pot = Potential::Terms(vec![Term::Rational { coeff: 1.0, scale: 1.0, p: 0, q: 1 }]);
    assert!(RadialProblem::new(ConeGeometry::euclidean(3), pot).is_err());
}

#[test]
fn detects_planted_zero_mode() {
    let g = ConeGeometry::euclidean(5);
    let f = planted_profile(&g, 1, 1.0).unwrap();
    let p = potential_from_mode(&g, 1, f.clone()).unwrap();
    let rep = detect_kernel(&p, 3).unwrap();
    assert_eq!(rep.kernel_dimension, 5);
    assert!(!rep.resonance);
    assert_relative_eq!(rep.m, 1.0, epsilon = 1e-12);
    // normalized against an independent quadrature of ∫ f² r⁴ dr
    let km = &rep.kernel[0];
    let nrm = resolvent_lab::quad::integrate(|t: f64| { let r = t / (1.0 - t); f.eval(r).powi(2) * r.powi(4) / (1.0 - t).powi(2) }, 0.0, 1.0, 1e-16, 1e-13, 4000).unwrap().value;
    let c = nrm.sqrt().recip();
    for r in [0.3, 1.0, 10.0, 300.0] {
        assert_relative_eq!(km.profile.f(r), c * f.eval(r), max_relative = 1e-9);
    }
    assert!(!rep.entries.iter().any(|e| e.j != 1 && e.count > 0));
}

#[test]
fn detects_planted_resonance() {
    let g = ConeGeometry::euclidean(3);
    let f = planted_profile(&g, 0, 1.0).unwrap();
    let p = potential_from_mode(&g, 0, f.clone()).unwrap();
    let rep = detect_kernel(&p, 2).unwrap();
    assert!(rep.resonance);
    assert_eq!(rep.kernel_dimension, 0);
    // f = (1+r²)^{−1/2} ~ r^{−1}
    let rm = &rep.resonances[0];
    for r in [0.5, 2.0, 100.0] {
        assert_relative_eq!(rm.profile.f(r), f.eval(r), max_relative = 1e-9);
    }
}

/// Green pairing in ℝ³ with a zero mode: ∂ solution of Pθ = ψ paired against ψ.
#[test]
fn boundary_pairing_of_pure_powers() {
    let lin = fit_asymptotic(|r| 2.0 * r.powf(0.5) + 3.0 * r.powf(-0.5), 1e2, 1e4, &[(0.5, 0), (-0.5, 0)]).unwrap();
    // the pairing is antisymmetric, so a self pairing vanishes
    assert!(boundary_pairing(&lin, &lin).unwrap().abs() < 1e-9);
    let u = fit_asymptotic(|r| r.powf(0.5), 1e2, 1e4, &[(0.5, 0)]).unwrap();
    let v = fit_asymptotic(|r| r.powf(-0.5), 1e2, 1e4, &[(-0.5, 0)]).unwrap();
    assert_relative_eq!(boundary_pairing(&u, &v).unwrap(), -1.0, max_relative = 1e-10);
}

#[test]
fn finite_part_oracle() {
    // ψ = Vol^{−½}(1+r²)^{−1} on ℝ⁴: ∫_{r<R} r³(1+r²)^{−2} dr = ½[log(1+R²) + 1/(1+R²) − 1]
    let fp = finite_part_norm(|rr: f64| 0.5 * ((1.0 + rr * rr).ln() + 1.0 / (1.0 + rr * rr) - 1.0)).unwrap();
    assert_relative_eq!(fp.value, -0.5, epsilon = 1e-8);
    let vol = sphere_volume(3);
    let m = radial_mass(|r| (1.0 + r * r).recip() / vol.sqrt(), 4, 50.0) * vol;
    assert_relative_eq!(m, 0.5 * ((2501.0f64).ln() + 1.0 / 2501.0 - 1.0), max_relative = 1e-10);
}

#[test]
fn unsubtracted_free_mode_sum() {
    let p = RadialProblem::free(ConeGeometry::euclidean(3));
    let opts = ResolventOptions { subtract_free: false, ..Default::default() };
    let (k, r, rp) = (0.2, 1.0, 2.5);
    let s = &mode_series(&p, k, &[(r, rp)], &opts).unwrap()[0];
    assert!(!s.free_closed && s.terms.len() > 10);
    for c in [-0.9, 0.0, 0.7] {
        let d: f64 = (r * r + rp * rp - 2.0 * r * rp * c).sqrt();
        assert_relative_eq!(s.eval(&p.geom, c).unwrap(), (-k * d).exp() / (4.0 * PI * d), max_relative = 1e-9);
    }
}

#[test]
fn problem_file_planted() {
    let p = parse_problem("# planted dipole\ndimension = 5\nplanted_mode = 1\n").unwrap();
    let g = ConeGeometry::euclidean(5);
    let q = potential_from_mode(&g, 1, planted_profile(&g, 1, 1.0).unwrap()).unwrap();
    assert_eq!(p, q);
    let c = parse_problem("dimension = 3\nlink = order 1 0.75\nplanted_mode = 1\n").unwrap();
    assert_relative_eq!(c.mode(1).unwrap().nu, 0.75, max_relative = 1e-13);
}

#[test]
fn problem_file_terms_and_free() {
    let p = parse_problem("dimension = 4\nwell = 2 1.5   # comment\nrational = 1 1 0 2\n").unwrap();
    let r: f64 = 0.7;
    let expect = -2.0 * 2.25 / (2.25 + r * r).powi(2) + 1.0 / (1.0 + r * r).powi(2);
    assert_relative_eq!(p.potential.value(r), expect, max_relative = 1e-14);
    assert!(parse_problem("dimension = 3").unwrap().potential.is_zero());
}

#[test]
fn problem_file_errors_carry_line() {
    let line = |t: &str| match parse_problem(t) {
        Err(resolvent_lab::Error::Parse { line, .. }) => line,
        other => panic!("{other:?}"),
    };
    assert_eq!(line("dimension = 3\n\nfoo = 1\n"), 3);
    assert_eq!(line("dimension = 3\nwell = 1\n"), 2);
    assert_eq!(line("dimension = 2\n"), 1);
    assert_eq!(line("dimension = 5\nplanted_mode = 1\nwell = 1 1\n"), 3);
    assert_eq!(line("dimension = 5\nlink = torus\n"), 2);
    assert_eq!(line("planted_mode = 1\n"), 0);
    // ℓ = 1 profile with the wrong exponent at 0
    assert_eq!(line("dimension = 5\nplanted_mode = 1\nprofile = 2 1:3\n"), 2);
}
