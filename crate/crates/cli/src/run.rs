//! Command execution and report files.

use std::fs;
use std::path::{Path, PathBuf};

use resolvent_lab::cone_model::{bf0_kernel, mode_table, Convention, ConeGeometry, Link};
use resolvent_lab::expansion_lab::{
    check_dim3_resonance, check_leading_projector, check_n4_resonance_series, fit_pairs, generic_directions,
    theorem_basis, write_fit_csv, write_samples_csv, zf_grid, zf_theorem, BasisTerm, CoefficientCheck, Point,
};
use resolvent_lab::index_algebra::Face;
use resolvent_lab::radial_lab::{
    detect_kernel, free_kernel, parse_problem, reduce, resolvent_kernel, zero_solutions, Channel, RadialProblem,
    ResolventOptions,
};
use resolvent_lab::riesz_lab::{default_p_list, lp_threshold_sweep, threshold_range, RieszOptions, Verdict};
use resolvent_lab::specfun::{bessel_i, bessel_ik_scaled, bessel_k, comp_integral, small_arg_expansion, BesselFamily};
use resolvent_lab::{Error, Result};
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::suites::{Check, Report, Session, Tolerances};

/// Outcome of a run: the reports written and whether every check passed.
#[derive(Debug)]
pub struct Outcome {
    pub reports: Vec<Report>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, report: &Report) -> Result<()> {
        let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
        let p = self.path(name);
        fs::write(p, text + "\n")?;
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(p).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn load_problem(cfg: &RunConfig) -> Result<RadialProblem> {
    match &cfg.problem_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            parse_problem(&text)
        }
        None => Err(Error::Precondition(format!("{} needs a problem file (`problem = <path>`)", cfg.command))),
    }
}

fn finish(mut report: Report, cfg: &RunConfig) -> Report {
    report.seed = cfg.seed;
    report.tolerance_overrides = cfg.tolerances.clone();
    report
}

/// Execute a configuration. Errors from the numerical layers are returned,
/// never replaced by a passing report.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.output_dir)?;
    let tols = Tolerances(cfg.tolerances.clone());
    let reports = match cfg.command {
        Command::Verify => {
            let mut session = Session::new(cfg.tolerances.clone(), cfg.seed);
            let mut reports = Vec::new();
            for &s in &cfg.suites {
                let rep = session.run(s)?;
                w.json(&format!("verify_{}.json", s.name()), &rep)?;
                reports.push(rep);
            }
            let rows: Vec<Vec<String>> = reports
                .iter()
                .flat_map(|r| {
                    r.checks.iter().map(move |c| {
                        vec![
                            r.check_id.clone(),
                            c.name.clone(),
                            format!("{:.12e}", c.predicted),
                            format!("{:.12e}", c.measured),
                            format!("{:.3e}", c.error),
                            format!("{:.3e}", c.tolerance),
                            c.pass.to_string(),
                        ]
                    })
                })
                .collect();
            w.csv("verify_summary.csv", &["check_id", "check", "predicted", "measured", "error", "tolerance", "pass"], &rows)?;
            reports
        }
        Command::Specfun => vec![specfun(cfg, &tols, &mut w)?],
        Command::ConeKernel => vec![cone_kernel(cfg, &tols, &mut w)?],
        Command::Solve => vec![solve(cfg, &tols, &mut w)?],
        Command::ZeroModes => vec![zero_modes(cfg, &mut w)?],
        Command::Expand => vec![expand(cfg, &mut w)?],
        Command::RieszSweep => vec![riesz_sweep(cfg, &mut w)?],
    };
    Ok(Outcome { reports, files: w.files })
}

fn specfun(cfg: &RunConfig, tols: &Tolerances, w: &mut Writer) -> Result<Report> {
    let p = &cfg.params;
    let key = "bessel.wronskian";
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for &nu in &p.nu {
        if nu < 0.0 {
            return Err(Error::Domain(format!("order must be >= 0, got {nu}")));
        }
        for &z in &p.z {
            let (i, k) = (bessel_i(nu, z)?, bessel_k(nu, z)?);
            let s = bessel_ik_scaled(nu, z);
            let wr = (s.i_value() * s.kp_value() - s.ip_value() * s.k_value()) * z;
            checks.push(Check::relative(format!("Wronskian nu = {nu}, z = {z}"), -1.0, wr, 0.0, tols.get(key)));
            rows.push(vec![format!("{nu}"), format!("{z:e}"), format!("{:.17e}", i.value), format!("{:.17e}", k.value), format!("{:.3e}", (wr + 1.0).abs())]);
            values.push(json!({"nu": nu, "z": z, "I": i, "K": k}));
        }
    }
    let mut expansions = Vec::new();
    for &nu in &p.nu {
        let k = small_arg_expansion(nu, BesselFamily::K, -nu)?;
        let terms: Vec<_> = k.terms.iter().map(|t| json!({"power": t.power, "logpower": t.logpower, "coefficient": t.coefficient})).collect();
        expansions.push(json!({"nu": nu, "family": "K", "terms": terms, "remainder_power": k.remainder_power, "remainder_logpower": k.remainder_logpower}));
    }
    let comp: Vec<_> = p.nu.iter().filter(|&&nu| nu > 1.0).map(|&nu| Ok(json!({"nu": nu, "comp_integral": comp_integral(nu)?}))).collect::<Result<_>>()?;
    w.csv("specfun.csv", &["nu", "z", "I", "K", "wronskian_error"], &rows)?;
    let rep = Report::new("specfun", "modified Bessel functions", checks, json!({"values": values, "expansions": expansions, "comp": comp}));
    let rep = finish(rep, cfg);
    w.json("specfun.json", &rep)?;
    Ok(rep)
}

fn cone_kernel(cfg: &RunConfig, tols: &Tolerances, w: &mut Writer) -> Result<Report> {
    let p = &cfg.params;
    let geom = match &cfg.problem_path {
        Some(_) => load_problem(cfg)?.geom,
        None => ConeGeometry::euclidean(3),
    };
    let modes = mode_table(&geom, 60);
    let (kappa, kappa_p) = (p.k * p.r, p.k * p.r_p);
    let value = bf0_kernel(&geom, &modes, kappa, kappa_p, p.cos_theta, None, Convention::Function, 1e-12)?;
    let mut checks = Vec::new();
    if geom.link == Link::RoundSphere {
        // on ℝⁿ the bf0 model is the free resolvent at unit energy
        let d = (kappa * kappa + kappa_p * kappa_p - 2.0 * kappa * kappa_p * p.cos_theta).sqrt();
        checks.push(Check::relative("bf0 kernel = free resolvent at k = 1", free_kernel(geom.n, 1.0, d), value, 0.0, tols.get("cone-kernel")));
    }
    let table: Vec<_> = modes.iter().take(p.j_max as usize + 1).collect();
    let rep = Report::new(
        "cone-kernel",
        "exact-cone bf0 kernel",
        checks,
        json!({"geometry": geom, "modes": table, "kappa": kappa, "kappa_p": kappa_p, "cos_theta": p.cos_theta, "bf0_kernel": value}),
    );
    let rep = finish(rep, cfg);
    w.json("cone_kernel.json", &rep)?;
    Ok(rep)
}

fn solve(cfg: &RunConfig, tols: &Tolerances, w: &mut Writer) -> Result<Report> {
    let problem = load_problem(cfg)?;
    let p = &cfg.params;
    let opts = ResolventOptions::default();
    let kernel = resolvent_kernel(&problem, p.k, p.r, p.r_p, p.cos_theta, &opts)?;
    let mut checks = Vec::new();
    let mut channels = Vec::new();
    let (lo, hi) = (p.r.min(p.r_p), p.r.max(p.r_p));
    for j in 0..=p.j_max {
        let op = reduce(&problem, problem.mode(j)?, p.k);
        let ch = Channel::<f64>::new(&op, lo, hi)?;
        let drift = [0.1 * lo, lo, hi, 10.0 * hi].iter().map(|&r| (ch.wronskian_ratio(r) - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::absolute(format!("mode {j}: Wronskian constant"), 0.0, drift, 0.0, tols.get("solve.wronskian")).keyed("solve.wronskian"));
        let zs = zero_solutions(&reduce(&problem, problem.mode(j)?, 0.0))?;
        channels.push(json!({
            "j": j,
            "nu": op.nu,
            "green": ch.g(lo, hi),
            "zero_energy_wronskian": zs.wronskian,
            "regular_exponent_at_0": zs.regular_at_0,
            "decaying_exponent_at_inf": zs.decaying_at_inf,
        }));
    }
    let rep = Report::new("solve", "resolvent kernel and channel solutions", checks, json!({"kernel": kernel, "channels": channels}));
    let rep = finish(rep, cfg);
    w.json("solve.json", &rep)?;
    Ok(rep)
}

fn zero_modes(cfg: &RunConfig, w: &mut Writer) -> Result<Report> {
    let problem = load_problem(cfg)?;
    let rep = detect_kernel(&problem, cfg.params.j_max)?;
    let mut checks = Vec::new();
    if let Some(e) = &problem.engineered {
        let found = rep.entries.iter().any(|m| m.j == e.mode_j && m.count > 0);
        checks.push(Check::flag(format!("planted mode {} detected", e.mode_j), found, ""));
        if let Some(m) = e.planted_m {
            checks.push(Check::absolute("m of the planted kernel", m, rep.m, 0.0, 1e-9));
        }
    }
    let kernel: Vec<_> = rep
        .kernel
        .iter()
        .chain(&rep.resonances)
        .map(|k| json!({"j": k.j, "nu": k.nu, "multiplicity": k.multiplicity, "leading_coeff": k.leading_coeff}))
        .collect();
    let out = Report::new("zero-modes", "zero-energy kernel and resonances", checks, json!({"report": rep, "modes": kernel}));
    let out = finish(out, cfg);
    w.json("zero_modes.json", &out)?;
    Ok(out)
}

fn expand(cfg: &RunConfig, w: &mut Writer) -> Result<Report> {
    let problem = load_problem(cfg)?;
    let p = &cfg.params;
    let n = problem.n;
    let dirs = generic_directions(n, p.directions + 1, cfg.seed);
    let pairs: Vec<(Point, Point)> = dirs[1..]
        .iter()
        .map(|d| Ok((Point::new(p.r, &dirs[0])?, Point::new(p.r_p, d)?)))
        .collect::<Result<_>>()?;
    let rep = detect_kernel(&problem, 4)?;
    let opts = ResolventOptions::default();
    let (checks, fits, label): (Vec<CoefficientCheck>, _, &str) = if !rep.kernel.is_empty() {
        let r = check_leading_projector(&problem, &pairs, &opts)?;
        (r.checks, r.fits, "kernel: k^-2 projector")
    } else if rep.resonance && n == 3 && problem.is_euclidean() {
        let r = check_dim3_resonance(&problem, &pairs, &opts)?;
        (r.checks, r.fits, "resonance: k^-1 term")
    } else if rep.resonance && n == 4 && problem.is_euclidean() {
        let r = check_n4_resonance_series(&problem, &pairs[0].0, &pairs[0].1, &opts)?;
        w.csv(
            "expand_samples.csv",
            &["k", "value"],
            &r.ks.iter().zip(&r.values).map(|(k, v)| vec![format!("{k:.17e}"), format!("{v:.17e}")]).collect::<Vec<_>>(),
        )?;
        let f = fs::File::create(w.path("expand_fit.csv"))?;
        write_fit_csv(f, &r.invlog_fit)?;
        let out = finish(Report::new("expand", "resonance: inverse-log series", r.checks.iter().map(Check::from).collect(), json!(r)), cfg);
        w.json("expand.json", &out)?;
        return Ok(out);
    } else if rep.resonance {
        return Err(Error::Capability("resonant conic problems are expanded by the verify suites".into()));
    } else {
        let (_, fam) = zf_theorem(&problem, &rep)?;
        let basis = theorem_basis(fam.get(Face::Zf), 3.0);
        let fits = fit_pairs(&problem, &pairs, &zf_grid(), &basis, &opts)?;
        let mut checks = Vec::new();
        for pf in &fits {
            let tag = format!("(r={}, r'={}, cos={:.3})", pf.r, pf.r_p, pf.cos_theta);
            for o in [-2.0, -1.0] {
                checks.push(CoefficientCheck::zero_in_fit(format!("no kernel: k^{o} = 0 {tag}"), &pf.fit, BasisTerm::pow(o), pf.values[0]));
            }
        }
        (checks, fits, "no kernel")
    };
    if let Some(first) = fits.first() {
        write_samples_csv(fs::File::create(w.path("expand_samples.csv"))?, &zf_grid(), &first.values)?;
        write_fit_csv(fs::File::create(w.path("expand_fit.csv"))?, &first.fit)?;
    }
    let out = Report::new(
        "expand",
        format!("zero-energy expansion ({label})"),
        checks.iter().map(Check::from).collect(),
        json!({"zero_modes": rep, "fits": fits}),
    );
    let out = finish(out, cfg);
    w.json("expand.json", &out)?;
    Ok(out)
}

fn riesz_sweep(cfg: &RunConfig, w: &mut Writer) -> Result<Report> {
    let problem = load_problem(cfg)?;
    let p = &cfg.params;
    let rep = detect_kernel(&problem, p.mode.unwrap_or(p.j_max).max(2))?;
    let j = match p.mode {
        Some(j) => j,
        None => rep
            .kernel
            .first()
            .map(|k| k.j)
            .ok_or_else(|| Error::Precondition("no L² kernel; give the sweep mode with `mode`".into()))?,
    };
    let m_prime = if rep.m.is_finite() { rep.m_prime } else { 2.0 };
    let pred = threshold_range(problem.n, m_prime)?;
    let p_list = if p.p.is_empty() { default_p_list(&pred) } else { p.p.clone() };
    let grid: Vec<f64> = (0..p.r_points)
        .map(|i| p.r_min * (p.r_max / p.r_min).powf(i as f64 / (p.r_points.max(2) - 1) as f64))
        .collect();
    let sweep = lp_threshold_sweep(&problem, j, &pred, &p_list, &grid, &RieszOptions::default())?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for pb in &sweep.probes {
        for (i, r) in pb.r_grid.iter().enumerate() {
            rows.push(vec![
                format!("{:?}", pb.family),
                format!("{}", pb.p),
                format!("{r:.10e}"),
                format!("{:.12e}", pb.ratios_lower[i]),
                format!("{:.12e}", pb.ratios_upper[i]),
            ]);
        }
        checks.push(Check::flag(
            format!("{:?} p = {:.4}: slope sign", pb.family, pb.p),
            pb.verdict == Verdict::Consistent,
            format!("predicted {:+.4}, fitted {:+.4} ± {:.4}", pb.predicted_slope, pb.fit_lower.slope, pb.fit_lower.stderr),
        ));
    }
    w.csv("riesz_sweep.csv", &["family", "p", "R", "ratio_lower", "ratio_upper"], &rows)?;
    let out = finish(Report::new("riesz-sweep", "Riesz transform L^p sweep", checks, json!(sweep)), cfg);
    w.json("riesz_sweep.json", &out)?;
    Ok(out)
}
