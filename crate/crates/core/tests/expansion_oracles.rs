use approx::assert_relative_eq;
use proptest::prelude::*;
use resolvent_lab::cone_model::ConeGeometry;
use resolvent_lab::expansion_lab::*;
use resolvent_lab::index_algebra::{Face, IndexSet};
use resolvent_lab::radial_lab::{KernelConvention, RadialProblem, ResolventOptions};
use resolvent_lab::Error;
use std::f64::consts::PI;

#[test]
fn k_grid_is_geometric() {
    let g = k_grid(1e-4, 1e-2, 16);
    assert_eq!(g.len(), 33);
    assert_relative_eq!(g[0], 1e-4, max_relative = 1e-14);
    assert_relative_eq!(*g.last().unwrap(), 1e-2, max_relative = 1e-12);
    let q = 10f64.powf(1.0 / 16.0);
    for w in g.windows(2) {
        assert_relative_eq!(w[1] / w[0], q, max_relative = 1e-12);
    }
    assert_eq!(zf_grid(), g);
}

#[test]
fn basis_term_eval() {
    let k: f64 = 3e-3;
    let l = k.ln();
    assert_relative_eq!(BasisTerm::pow(-1.5).eval(k), k.powf(-1.5));
    assert_relative_eq!(BasisTerm::log(0.5, 2).eval(k), k.sqrt() * l * l);
    assert_relative_eq!(BasisTerm::invlog(-2.0, 3).eval(k), 1.0 / (k * k * l * l * l));
    assert_eq!(BasisTerm::log(1.0, 1).label(), "k^1 log^1");
    assert_eq!(BasisTerm::invlog(0.0, 2).label(), "k^0 log^-2");
}

#[test]
fn fit_recovers_exact_combination() {
    let basis = [BasisTerm::pow(-2.0), BasisTerm::log(-1.0, 1), BasisTerm::pow(-1.0), BasisTerm::pow(0.0)];
    let truth = [2.0, -3.0, 0.7, 0.5];
    let ks = zf_grid();
    let v: Vec<f64> = ks.iter().map(|&k| basis.iter().zip(&truth).map(|(b, c)| c * b.eval(k)).sum()).collect();
    let f = fit_expansion(&ks, &v, &basis).unwrap();
    for (i, c) in truth.iter().enumerate() {
        assert_relative_eq!(f.coef[i], *c, max_relative = 1e-7);
    }
    assert!(f.residual_norm < 1e-12 && f.trusted);
    assert_eq!(f.k_window, (ks[0], *ks.last().unwrap()));
    assert_eq!(f.coeff(BasisTerm::log(-1.0, 1)).unwrap().0, f.coef[1]);
    assert!(f.coeff(BasisTerm::pow(3.0)).is_none());
}

#[test]
fn fit_preconditions() {
    let ks = k_grid(1e-3, 1e-2, 3);
    let v = vec![1.0; ks.len()];
    let basis: Vec<BasisTerm> = (0..3).map(|i| BasisTerm::pow(i as f64)).collect();
    assert!(matches!(fit_expansion(&ks, &v, &basis), Err(Error::Precondition(_))));
    assert!(matches!(fit_expansion(&ks, &v[1..], &basis[..1]), Err(Error::Domain(_))));
}

#[test]
fn free_order_found() {
    let ks = zf_grid();
    let alpha = -1.3;
    let v: Vec<f64> = ks.iter().map(|&k| 1.5 * k.powf(alpha) * (1.0 - 0.4 * k) + 4.0).collect();
    let (fit, a, se) = fit_free_order(&ks, &v, &[BasisTerm::pow(0.0)], &[0.0, 1.0], -1.9, -0.6).unwrap();
    assert!((a - alpha).abs() < 1e-5, "alpha = {a}");
    assert!(se < 1e-2);
    assert_relative_eq!(fit.coef[0], 1.5, max_relative = 1e-4);
    assert_relative_eq!(fit.coef[2], 4.0, max_relative = 1e-4);
}

#[test]
fn zero_in_fit_tells_present_from_absent() {
    let ks = zf_grid();
    let basis = [BasisTerm::pow(-2.0), BasisTerm::pow(-1.0), BasisTerm::pow(0.0)];
    let absent: Vec<f64> = ks.iter().map(|&k| 1.0 / (k * k) + 1.0).collect();
    let f = fit_expansion(&ks, &absent, &basis).unwrap();
    let c = CoefficientCheck::zero_in_fit("k^-1", &f, BasisTerm::pow(-1.0), absent[0]);
    assert!(c.pass, "{c:?}");
    assert_eq!(c.predicted, 0.0);

    let present: Vec<f64> = ks.iter().map(|&k| 1.0 / (k * k) + 0.1 / k + 1.0).collect();
    let f = fit_expansion(&ks, &present, &basis).unwrap();
    let c = CoefficientCheck::zero_in_fit("k^-1", &f, BasisTerm::pow(-1.0), present[0]);
    assert!(!c.pass, "{c:?}");
    assert_relative_eq!(c.fitted, 0.1, max_relative = 1e-6);

    // a term missing from the basis counts as zero
    let c = CoefficientCheck::zero_in_fit("k^1", &f, BasisTerm::pow(1.0), present[0]);
    assert!(c.pass && c.fitted == 0.0);
}

#[test]
fn simple_checks() {
    let r = CoefficientCheck::relative("a", 2.0, 2.01, 0.0, 1e-2);
    assert!(r.pass);
    assert_relative_eq!(r.rel_err, 5e-3, max_relative = 1e-12);
    assert!(!CoefficientCheck::relative("a", -2.0, 2.0, 0.0, 0.5).pass);
    let a = CoefficientCheck::absolute("o", 1.25, 1.3, 0.0, 0.1);
    assert!(a.pass);
    assert_relative_eq!(a.rel_err, 0.05, max_relative = 1e-12);
    let f = CoefficientCheck::flag("x", false, "why");
    assert!(!f.pass && f.note == "why" && f.tol.is_nan());
}

#[test]
fn theorem_basis_closes_logs_and_fills_integers() {
    let set = IndexSet::new(&[(-2.0, 1), (-0.5, 0)], Some(0.0));
    let b = theorem_basis(&set, 2.0);
    let want = [
        BasisTerm::log(-2.0, 1),
        BasisTerm::pow(-2.0),
        BasisTerm::pow(-0.5),
        BasisTerm::log(1.0, 1),
        BasisTerm::pow(1.0),
        BasisTerm::log(2.0, 1),
        BasisTerm::pow(2.0),
    ];
    assert_eq!(b, want);
    let closed = IndexSet::new(&[(1.0, 0)], None);
    assert_eq!(theorem_basis(&closed, 5.0), vec![BasisTerm::pow(1.0)]);
}

#[test]
fn audit_flags_foreign_terms() {
    let ks = zf_grid();
    let integers = IndexSet::new(&[(0.0, 0), (1.0, 0), (2.0, 0)], Some(2.0));

    let basis = [BasisTerm::pow(0.0), BasisTerm::pow(0.5), BasisTerm::pow(1.0)];
    let v: Vec<f64> = ks.iter().map(|&k| 1.0 + 3.0 * k.sqrt() + k).collect();
    let f = fit_expansion(&ks, &v, &basis).unwrap();
    let a = audit_against_index_family(&f, &integers, Face::Zf, 1e-6);
    assert!(!a.pass);
    assert_eq!(a.checked_terms, 3);
    assert_eq!(a.violations.len(), 1);
    assert!(a.violations[0].starts_with("k^0.5"));

    let v: Vec<f64> = ks.iter().map(|&k| 1.0 + k).collect();
    let f = fit_expansion(&ks, &v, &basis).unwrap();
    assert!(audit_against_index_family(&f, &integers, Face::Zf, 1e-6).pass);

    // inverse logs are never admitted by a power family
    let basis = [BasisTerm::pow(0.0), BasisTerm::invlog(0.0, 1)];
    let v: Vec<f64> = ks.iter().map(|&k| 1.0 + 2.0 / k.ln()).collect();
    let f = fit_expansion(&ks, &v, &basis).unwrap();
    let a = audit_against_index_family(&f, &integers, Face::Zf, 1e-6);
    assert!(!a.pass && a.violations[0].contains("log^-1"));
}

#[test]
fn power_families_include_integers() {
    for n in 3..=6 {
        let fams = power_families(n);
        assert!(fams[0].0.starts_with("integer powers"));
        assert!(fams[0].1.admits(1.0, 0, 1e-9) && !fams[0].1.admits(0.5, 0, 1e-9));
        for (i, (_, s)) in fams.iter().enumerate() {
            assert!(fams[..i].iter().all(|o| o.1 != *s), "duplicate family in n = {n}");
        }
    }
}

#[test]
fn points() {
    let p = Point::new(2.0, &[3.0, 4.0, 0.0]).unwrap();
    assert_relative_eq!(p.dir[0], 0.6);
    assert_relative_eq!(p.dir[1], 0.8);
    assert!(Point::new(0.0, &[1.0, 0.0]).is_err());
    assert!(Point::new(1.0, &[0.0, 0.0]).is_err());
    let q = Point::polar(3, 1.0, PI / 3.0);
    assert_relative_eq!(Point::polar(3, 5.0, 0.0).cos_to(&q), 0.5, max_relative = 1e-14);
}

#[test]
fn free_samples_match_closed_form() {
    let p = RadialProblem::free(ConeGeometry::euclidean(3));
    let z = Point::polar(3, 0.7, 0.0);
    let zp = Point::polar(3, 1.6, 1.1);
    let d = (0.7f64 * 0.7 + 1.6 * 1.6 - 2.0 * 0.7 * 1.6 * 1.1f64.cos()).sqrt();
    let ks = [1e-3, 0.1, 2.0];
    let s = sample_resolvent(&p, &z, &zp, &ks, KernelConvention::Function, &ResolventOptions::default()).unwrap();
    for (g, &k) in s.iter().zip(&ks) {
        assert_relative_eq!(g.value, (-k * d).exp() / (4.0 * PI * d), max_relative = 1e-8);
    }
    let bad = Point::polar(4, 1.0, 0.0);
    assert!(sample_resolvent(&p, &bad, &zp, &ks, KernelConvention::Function, &ResolventOptions::default()).is_err());
}

proptest! {
    #[test]
    fn generic_directions_unit_and_reproducible(n in 2u32..8, count in 1usize..10, seed in any::<u64>()) {
        let a = generic_directions(n, count, seed);
        prop_assert_eq!(a.len(), count);
        for v in &a {
            prop_assert_eq!(v.len(), n as usize);
            let s: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(&a, &generic_directions(n, count, seed));
        prop_assert_ne!(&a, &generic_directions(n, count, seed.wrapping_add(1)));
    }

    #[test]
    fn fit_is_linear_in_data(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in 0.1f64..5.0) {
        let ks = zf_grid();
        let basis = [BasisTerm::pow(-2.0), BasisTerm::pow(-1.0), BasisTerm::pow(0.0)];
        let v: Vec<f64> = ks.iter().map(|&k| c2 / (k * k) + c1 / k + c0).collect();
        let f = fit_expansion(&ks, &v, &basis).unwrap();
        prop_assert!((f.coef[0] - c2).abs() <= 1e-8 * c2);
        prop_assert!((f.coef[1] - c1).abs() <= 1e-6 * (1.0 + c1.abs()));
        prop_assert!((f.coef[2] - c0).abs() <= 1e-4 * (1.0 + c0.abs()));
    }
}
