//! Riesz transform T = d P_>^{−1/2} on single angular modes, L^p threshold
//! sweeps and the Rayleigh-quotient experiment.
//!
//! P_>^{−1/2} = (2/π)∫₀^∞ (R(k) − k^{−2}Π₀) dk is evaluated channel by
//! channel. The kernel channel is solved in double-double so the k^{−2}
//! subtraction survives down to k ~ 1e−8.

use serde::{Deserialize, Serialize};

use crate::cone_model::{gegenbauer, ConeGeometry, Link};
use crate::error::{Error, Result};
use crate::index_algebra::m_prime_condition;
use crate::ode::{Real, DD};
use crate::quad::{gauss_legendre, integrate};
use crate::radial_lab::{detect_kernel, reduce, Channel, KernelMode, RadialOperator, RadialProblem, Solution};
use crate::specfun::sphere_volume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPrediction {
    pub n: u32,
    pub m_prime: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

/// Open interval n/(n−2+m′) < p < n/(3−m′) of L^p boundedness.
pub fn threshold_range(n: u32, m_prime: f64) -> Result<ThresholdPrediction> {
    if n < 3 {
        return Err(Error::Precondition(format!("dimension must be >= 3, got {n}")));
    }
    if !(0.0..=2.0).contains(&m_prime) {
        return Err(Error::Precondition(format!("m' must lie in [0, 2], got {m_prime}")));
    }
    if !m_prime_condition(n, m_prime) {
        return Err(Error::Precondition(format!("m' = {m_prime} violates m' > (5-n)/2 for n = {n}")));
    }
    let nf = n as f64;
    Ok(ThresholdPrediction { n, m_prime, p_lo: nf / (nf - 2.0 + m_prime), p_hi: nf / (3.0 - m_prime) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszOptions {
    /// Gauss nodes per decade of k.
    pub per_decade: usize,
    /// k_min = k_min_scale / (largest radius involved).
    pub k_min_scale: f64,
    /// Disjoint supports: k is integrated up to gap_cut / gap.
    pub gap_cut: f64,
    /// Overlapping supports: k is integrated up to this value, the rest by
    /// the large-k expansion.
    pub overlap_k_max: f64,
    /// Source panel width in log r.
    pub log_panel: f64,
}

impl Default for RieszOptions {
    fn default() -> Self {
        RieszOptions { per_decade: 16, k_min_scale: 1e-4, gap_cut: 60.0, overlap_k_max: 100.0, log_panel: 0.1 }
    }
}

/// A function f(r)Y(ω) with Y a unit harmonic of mode j; `profile` is f.
pub struct ModeFunction<'a> {
    pub j: u32,
    pub profile: &'a (dyn Fn(f64) -> f64 + Sync),
    pub support: (f64, f64),
}

/// P_>^{−1/2}f = u(r)Y and its radial derivative; Tf = u′Y dr + u dY.
#[derive(Debug, Clone, Serialize)]
pub struct RieszOutput {
    pub j: u32,
    pub lambda: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// ⟨f, ψ⟩ removed by Π_>; zero when the mode carries no L² kernel.
    pub kernel_component: f64,
    pub k_range: (f64, f64),
}

impl RieszOutput {
    /// Pointwise |Tf|² averaged over the link: u′² + λu²/r².
    pub fn energy_density(&self, i: usize) -> f64 {
        self.du[i] * self.du[i] + self.lambda * self.u[i] * self.u[i] / (self.r[i] * self.r[i])
    }
}

struct Job {
    nodes: Vec<(f64, f64, f64)>,
    eval: Vec<f64>,
    inside: Vec<bool>,
    a: f64,
    disjoint_gap: Option<f64>,
}

fn panels(a: f64, b: f64, breaks: &[f64], log_w: f64, lin_w: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let by_log = ((hi / lo).ln() / log_w).ceil();
        let by_lin = ((hi - lo) / lin_w).ceil();
        let m = by_log.max(by_lin).max(1.0) as usize;
        let ratio = (hi / lo).powf(1.0 / m as f64);
        let mut x = lo;
        for i in 0..m {
            let y = if i + 1 == m { hi } else { x * ratio };
            out.push((x, y));
            x = y;
        }
    }
    out
}

fn gl_nodes(panels: &[(f64, f64)], order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let mut out = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        for (x, w) in xs.iter().zip(&ws) {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    out
}

/// The single L² kernel profile of mode j, if any.
fn kernel_profile(problem: &RadialProblem, j: u32) -> Result<Option<KernelMode>> {
    let rep = detect_kernel(problem, j)?;
    Ok(rep.kernel.into_iter().find(|m| m.j == j))
}

/// (value, derivative) mantissas and binary exponent.
fn state0<T: Real>(sol: &Solution<T>, r: f64) -> (T, T, i32) {
    let (y, yp, e) = sol.state(r);
    (y[0], yp[0], e)
}

/// R(k)F − k^{−2}⟨F, ψ⟩ψ and its r-derivative at every evaluation radius.
fn integrand<T: Real>(
    op: &RadialOperator,
    r_lo: f64,
    r_hi: f64,
    jobs: &[Job],
    psi_u: &dyn Fn(f64) -> (f64, f64),
) -> Result<Vec<Vec<(f64, f64)>>> {
    let ch = Channel::<T>::new(op, r_lo, r_hi)?;
    if ch.bound_states > 0 {
        return Err(Error::Precondition(format!(
            "mode {} has {} bound state(s); negative spectrum is not projected",
            op.mode.j, ch.bound_states
        )));
    }
    let (wm, we) = ch.wronskian();
    let inv_w = T::from_f64(1.0) / wm;
    let kk = T::from_f64(op.k) * T::from_f64(op.k);
    let zero = T::from_f64(0.0);
    let mut out = Vec::with_capacity(jobs.len());
    for jb in jobs {
        let src: Vec<_> = jb
            .nodes
            .iter()
            .map(|&(s, w, f)| {
                let (yr, _, er) = state0(&ch.reg, s);
                let (yd, _, ed) = state0(&ch.dec, s);
                let wf = T::from_f64(w * f) * inv_w;
                (s, wf * yr, er, wf * yd, ed)
            })
            .collect();
        let mut row = Vec::with_capacity(jb.eval.len());
        for &r in &jb.eval {
            let (yr, ypr, er) = state0(&ch.reg, r);
            let (yd, ypd, ed) = state0(&ch.dec, r);
            let (mut v, mut dv) = (zero, zero);
            for &(s, a_reg, e_reg, a_dec, e_dec) in &src {
                if s < r {
                    let e = e_reg + ed - we;
                    v = v + (a_reg * yd).ldexp(e);
                    dv = dv + (a_reg * ypd).ldexp(e);
                } else {
                    let e = er + e_dec - we;
                    v = v + (a_dec * yr).ldexp(e);
                    dv = dv + (a_dec * ypr).ldexp(e);
                }
            }
            let (pu, pd) = psi_u(r);
            let a = T::from_f64(jb.a);
            let iv = (v - a * T::from_f64(pu) / kk).to_f64();
            let id = (dv - a * T::from_f64(pd) / kk).to_f64();
            row.push((iv, id));
        }
        out.push(row);
    }
    Ok(out)
}

/// Apply P_>^{−1/2} in one mode to several sources at once, sharing the
/// channel solves. Each source comes with its own evaluation radii.
pub fn riesz_apply_batch(
    problem: &RadialProblem,
    sources: &[(ModeFunction, Vec<f64>)],
    opts: &RieszOptions,
) -> Result<Vec<RieszOutput>> {
    if sources.is_empty() {
        return Ok(Vec::new());
    }
    let j = sources[0].0.j;
    if sources.iter().any(|s| s.0.j != j) {
        return Err(Error::Precondition("all sources of a batch must share one mode".into()));
    }
    let mode = problem.mode(j)?;
    let n = problem.n as f64;
    let half = 0.5 * (n - 1.0);
    let km = kernel_profile(problem, j)?;
    let psi_u = |r: f64| km.as_ref().map_or((0.0, 0.0), |m| m.profile.u_deriv(r));

    // per-source quadrature and evaluation layout
    let mut jobs = Vec::new();
    let (mut r_lo, mut r_hi) = (f64::INFINITY, 0.0f64);
    for (src, eval) in sources {
        let (a, b) = src.support;
        if !(a > 0.0 && b > a) {
            return Err(Error::Domain(format!("source support ({a}, {b}) must satisfy 0 < a < b")));
        }
        let inside: Vec<bool> = eval.iter().map(|&r| r > a && r < b).collect();
        let overlap = inside.iter().any(|&x| x) || eval.iter().any(|&r| r == a || r == b);
        let lin = if overlap { 5.0 / opts.overlap_k_max } else { f64::INFINITY };
        let breaks: Vec<f64> = eval.iter().copied().filter(|&r| r > a && r < b).collect();
        let nodes: Vec<(f64, f64, f64)> = gl_nodes(&panels(a, b, &breaks, opts.log_panel, lin), 8)
            .into_iter()
            .map(|(s, w)| (s, w, s.powf(half) * (src.profile)(s)))
            .collect();
        let kc: f64 = nodes.iter().map(|&(s, w, f)| w * f * psi_u(s).0).sum();
        let gap = if overlap {
            None
        } else {
            Some(eval.iter().map(|&r| if r < a { a - r } else { r - b }).fold(f64::INFINITY, f64::min))
        };
        for &r in eval.iter() {
            if !(r > 0.0) {
                return Err(Error::Domain("evaluation radii must be positive".into()));
            }
        }
        r_lo = r_lo.min(a).min(eval.iter().copied().fold(f64::INFINITY, f64::min));
        r_hi = r_hi.max(b).max(eval.iter().copied().fold(0.0, f64::max));
        jobs.push(Job { nodes, eval: eval.clone(), inside, a: kc, disjoint_gap: gap });
    }
    let k_min = opts.k_min_scale / r_hi;
    let k_max = jobs
        .iter()
        .map(|jb| jb.disjoint_gap.map_or(opts.overlap_k_max, |g| opts.gap_cut / g))
        .fold(0.0, f64::max);
    let decades = (k_max / k_min).log10();
    let n_panels = (2.0 * decades).ceil() as usize;
    let (gx, gw) = gauss_legendre((opts.per_decade / 2).max(2));
    let (t0, t1) = (k_min.ln(), k_max.ln());
    let dt = (t1 - t0) / n_panels as f64;
    let mut k_nodes = Vec::new();
    for p in 0..n_panels {
        let c = t0 + (p as f64 + 0.5) * dt;
        for (x, w) in gx.iter().zip(&gw) {
            let t = c + 0.5 * dt * x;
            k_nodes.push((t.exp(), 0.5 * dt * w * t.exp()));
        }
    }

    let base = reduce(problem, mode, 1.0);
    // integrand samples per job: (value, derivative) at each eval radius
    let mut acc: Vec<Vec<(f64, f64)>> = jobs.iter().map(|jb| vec![(0.0, 0.0); jb.eval.len()]).collect();
    let mut low_end: Vec<f64> = vec![0.0; jobs.len()];
    let mut peak: Vec<f64> = vec![0.0; jobs.len()];
    for (ki, &(k, wk)) in k_nodes.iter().enumerate() {
        let op = base.with_k(k);
        // without a kernel there is no k^{−2} cancellation to protect
        let samples = if km.is_some() {
            integrand::<DD>(&op, r_lo, r_hi, &jobs, &psi_u)?
        } else {
            integrand::<f64>(&op, r_lo, r_hi, &jobs, &psi_u)?
        };
        for (ji, row) in samples.iter().enumerate() {
            let mut size = 0.0f64;
            for (ei, &(iv, id)) in row.iter().enumerate() {
                acc[ji][ei].0 += wk * iv;
                acc[ji][ei].1 += wk * id;
                size = size.max(k * iv.abs());
                if ki == 0 {
                    // ∫₀^{k_min}: the regular part is bounded near k = 0
                    acc[ji][ei].0 += k * iv;
                    acc[ji][ei].1 += k * id;
                }
            }
            if ki == 0 {
                low_end[ji] = size;
            }
            peak[ji] = peak[ji].max(size);
        }
    }

    let mut out = Vec::with_capacity(jobs.len());
    for (ji, jb) in jobs.iter().enumerate() {
        if low_end[ji] > 1e-2 * peak[ji] {
            return Err(Error::Numeric {
                msg: format!("R(k)Π_> is not integrable at k = 0 in mode {j}: divergent regime"),
                achieved: low_end[ji] / peak[ji],
            });
        }
        let src = &sources[ji].0;
        let mut u = Vec::with_capacity(jb.eval.len());
        let mut du = Vec::with_capacity(jb.eval.len());
        for (ei, &r) in jb.eval.iter().enumerate() {
            let (mut uu, mut ud) = acc[ji][ei];
            let (pu, pd) = psi_u(r);
            uu -= jb.a * pu / k_max;
            ud -= jb.a * pd / k_max;
            if jb.inside[ei] {
                // −U″ + QU + k²U = F ⇒ U = F/k² + (F″ − QF)/k⁴ + …
                let ff = |x: f64| x.powf(half) * (src.profile)(x);
                let qf = |x: f64| (base.q::<f64>(x) - 1.0) * ff(x);
                let h = 1e-3 * r;
                let d1 = |g: &dyn Fn(f64) -> f64| (g(r - 2.0 * h) - 8.0 * g(r - h) + 8.0 * g(r + h) - g(r + 2.0 * h)) / (12.0 * h);
                let d2 = |g: &dyn Fn(f64) -> f64| {
                    (-g(r - 2.0 * h) + 16.0 * g(r - h) - 30.0 * g(r) + 16.0 * g(r + h) - g(r + 2.0 * h)) / (12.0 * h * h)
                };
                let d3 = |g: &dyn Fn(f64) -> f64| {
                    (-g(r - 2.0 * h) + 2.0 * g(r - h) - 2.0 * g(r + h) + g(r + 2.0 * h)) / (2.0 * h.powi(3))
                };
                let k3 = 3.0 * k_max.powi(3);
                uu += ff(r) / k_max + (d2(&ff) - qf(r)) / k3;
                ud += d1(&ff) / k_max + (d3(&ff) - d1(&qf)) / k3;
            }
            let s = r.powf(-half);
            uu *= 2.0 / std::f64::consts::PI;
            ud *= 2.0 / std::f64::consts::PI;
            u.push(uu * s);
            du.push((ud - half / r * uu) * s);
        }
        out.push(RieszOutput {
            j,
            lambda: mode.lambda,
            r: jb.eval.clone(),
            u,
            du,
            kernel_component: jb.a,
            k_range: (k_min, k_max),
        });
    }
    Ok(out)
}

/// P_>^{−1/2}f and its radial derivative at `eval_r`.
pub fn riesz_apply(problem: &RadialProblem, f: ModeFunction, eval_r: &[f64], opts: &RieszOptions) -> Result<RieszOutput> {
    Ok(riesz_apply_batch(problem, &[(f, eval_r.to_vec())], opts)?.remove(0))
}

// ------------------------------------------------------------------- norms

/// Standard bump supported on (1, 2), equal to 1 at s = 3/2.
pub fn bump(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        (4.0 - 1.0 / ((s - 1.0) * (2.0 - s))).exp()
    }
}

/// Gauss nodes on [a, b] in log-panels of width ≤ `log_w`.
pub fn radial_nodes(a: f64, b: f64, log_w: f64) -> Vec<(f64, f64)> {
    gl_nodes(&panels(a, b, &[], log_w, f64::INFINITY), 8)
}

/// ∫_{link} |Y|^p and ∫_{link} |∇Y|^p for the unit zonal harmonic of mode j.
pub fn zonal_factors(geom: &ConeGeometry, j: u32, p: f64) -> Result<(f64, f64)> {
    let c = match &geom.link {
        Link::RoundSphere => 1.0,
        Link::ScaledSphere(c) => *c,
        Link::ExplicitSpectrum(_) => {
            return Err(Error::Capability("angular L^p factors need an explicit link".into()));
        }
    };
    let n = geom.n;
    let alpha = 0.5 * (n as f64 - 2.0);
    let sv = sphere_volume(n - 2) * c.powi(n as i32 - 1);
    let (xs, ws) = gauss_legendre(32);
    let panels = 64;
    let pi = std::f64::consts::PI;
    let mut acc = [0.0; 3];
    for i in 0..panels {
        let (a, b) = (pi * i as f64 / panels as f64, pi * (i + 1) as f64 / panels as f64);
        for (x, w) in xs.iter().zip(&ws) {
            let th = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let wt = 0.5 * (b - a) * w * sv * th.sin().powi(n as i32 - 2);
            let y = gegenbauer(alpha, j, th.cos());
            let dy = if j == 0 { 0.0 } else { th.sin() * 2.0 * alpha * gegenbauer(alpha + 1.0, j - 1, th.cos()) / c };
            acc[0] += wt * y * y;
            acc[1] += wt * y.abs().powf(p);
            acc[2] += wt * dy.abs().powf(p);
        }
    }
    let nrm = acc[0].sqrt();
    Ok((acc[1] / nrm.powf(p), acc[2] / nrm.powf(p)))
}

/// ‖f‖_p of f(r)Y over radii [a, b] from radial samples at Gauss nodes.
fn radial_lp(n: u32, nodes: &[(f64, f64)], vals: &[f64], p: f64) -> f64 {
    nodes.iter().zip(vals).map(|(&(r, w), v)| w * v.abs().powf(p) * r.powi(n as i32 - 1)).sum::<f64>().powf(1.0 / p)
}

/// Lower and upper brackets of ‖Tf‖_{L^p} from its radial (u′Y) and angular
/// (u∇Y/r) parts: max(‖a‖, ‖b‖) ≤ ‖Tf‖ ≤ ‖a‖ + ‖b‖ (p ≥ 1) or
/// (‖a‖^p + ‖b‖^p)^{1/p} (p < 1).
pub fn gradient_lp_brackets(geom: &ConeGeometry, out: &RieszOutput, nodes: &[(f64, f64)], p: f64) -> Result<(f64, f64)> {
    let (ay, ag) = zonal_factors(geom, out.j, p)?;
    let rad: Vec<f64> = out.du.clone();
    let ang: Vec<f64> = out.u.iter().zip(&out.r).map(|(u, r)| u / r).collect();
    let a = radial_lp(geom.n, nodes, &rad, p) * ay.powf(1.0 / p);
    let b = radial_lp(geom.n, nodes, &ang, p) * ag.powf(1.0 / p);
    let upper = if p >= 1.0 { a + b } else { (a.powf(p) + b.powf(p)).powf(1.0 / p) };
    Ok((a.max(b), upper))
}

/// ‖f(r)Y‖_{L^p} for the unit zonal harmonic Y of mode j.
pub fn mode_function_lp(geom: &ConeGeometry, j: u32, f: &dyn Fn(f64) -> f64, a: f64, b: f64, p: f64) -> Result<f64> {
    let (ay, _) = zonal_factors(geom, j, p)?;
    let nodes = radial_nodes(a, b, 0.05);
    let vals: Vec<f64> = nodes.iter().map(|&(r, _)| f(r)).collect();
    Ok(radial_lp(geom.n, &nodes, &vals, p) * ay.powf(1.0 / p))
}

// ------------------------------------------------------------------- sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeFamily {
    /// Bump at radii [R, 2R]; ‖Tf_R‖ measured on the fixed shell [1, 2].
    BoundaryBump,
    /// Fixed bump on [1, 2]; ‖Tf‖ measured on the shell [R, 2R].
    DualBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> SlopeFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let stderr = if m > 2.0 { (rss / (m - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    SlopeFit { slope, stderr }
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszProbe {
    pub family: ProbeFamily,
    pub mode: u32,
    pub p: f64,
    pub r_grid: Vec<f64>,
    /// ‖Tf‖/‖f‖ with ‖Tf‖ from its lower and upper brackets.
    pub ratios_lower: Vec<f64>,
    pub ratios_upper: Vec<f64>,
    pub fit_lower: SlopeFit,
    pub fit_upper: SlopeFit,
    /// Asymptotic slope predicted from the kernel's boundary orders.
    pub predicted_slope: f64,
    pub verdict: Verdict,
}

fn verdict(pred: f64, fits: [&SlopeFit; 2]) -> Verdict {
    if fits.iter().any(|f| !(f.slope.abs() > 2.0 * f.stderr)) {
        Verdict::Inconclusive
    } else if fits.iter().all(|f| f.slope.signum() == pred.signum()) {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub prediction: ThresholdPrediction,
    pub mode: u32,
    pub probes: Vec<RieszProbe>,
}

/// Exponents of ‖Tf‖ on the shell against ‖f‖: the boundary family grows
/// like R^{(3−m′)−n/p}, the dual family like R^{n/p−(n−2+m′)}.
pub fn predicted_slope(family: ProbeFamily, pred: &ThresholdPrediction, p: f64) -> f64 {
    let n = pred.n as f64;
    match family {
        ProbeFamily::BoundaryBump => (3.0 - pred.m_prime) - n / p,
        ProbeFamily::DualBump => n / p - (n - 2.0 + pred.m_prime),
    }
}

/// Threshold sweep in the kernel mode `j`: both families over `r_grid` for
/// every p in `p_list`.
pub fn lp_threshold_sweep(
    problem: &RadialProblem,
    j: u32,
    prediction: &ThresholdPrediction,
    p_list: &[f64],
    r_grid: &[f64],
    opts: &RieszOptions,
) -> Result<Sweep> {
    if r_grid.len() < 3 || r_grid.iter().fold(0.0f64, |a, &b| a.max(b)) < 10.0 * r_grid.iter().fold(f64::INFINITY, |a, &b| a.min(b)) {
        return Err(Error::Precondition("R grid must hold >= 3 values spanning >= 1 decade".into()));
    }
    if r_grid.iter().any(|&r| r < 4.0) {
        return Err(Error::Precondition("R grid must stay clear of the measuring shell [1, 2]".into()));
    }
    let below = p_list.iter().any(|&p| p < prediction.p_lo);
    let above = p_list.iter().any(|&p| p > prediction.p_hi);
    if !(below && above) {
        return Err(Error::Precondition("p list must straddle both thresholds".into()));
    }
    let geom = &problem.geom;
    let shell = radial_nodes(1.0, 2.0, 0.05);
    let shell_r: Vec<f64> = shell.iter().map(|x| x.0).collect();

    // boundary family: sources on [R, 2R], evaluation on [1, 2]
    let profiles: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        r_grid.iter().map(|&rr| Box::new(move |r: f64| bump(r / rr)) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let jobs: Vec<(ModeFunction, Vec<f64>)> = r_grid
        .iter()
        .zip(&profiles)
        .map(|(&rr, f)| (ModeFunction { j, profile: f.as_ref(), support: (rr, 2.0 * rr) }, shell_r.clone()))
        .collect();
    let boundary = riesz_apply_batch(problem, &jobs, opts)?;

    // dual family: one source on [1, 2], evaluation on every [R, 2R]
    let shells: Vec<Vec<(f64, f64)>> = r_grid.iter().map(|&rr| radial_nodes(rr, 2.0 * rr, 0.05)).collect();
    let all_r: Vec<f64> = shells.iter().flatten().map(|x| x.0).collect();
    let unit = |r: f64| bump(r);
    let dual = riesz_apply(problem, ModeFunction { j, profile: &unit, support: (1.0, 2.0) }, &all_r, opts)?;

    let mut probes = Vec::new();
    for &p in p_list {
        // boundary family
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (i, &rr) in r_grid.iter().enumerate() {
            let (a, b) = gradient_lp_brackets(geom, &boundary[i], &shell, p)?;
            let nf = mode_function_lp(geom, j, &|r| bump(r / rr), rr, 2.0 * rr, p)?;
            lo.push(a / nf);
            hi.push(b / nf);
        }
        let (fl, fu) = (loglog_slope(r_grid, &lo), loglog_slope(r_grid, &hi));
        let pred = predicted_slope(ProbeFamily::BoundaryBump, prediction, p);
        let v = verdict(pred, [&fl, &fu]);
        probes.push(RieszProbe {
            family: ProbeFamily::BoundaryBump,
            mode: j,
            p,
            r_grid: r_grid.to_vec(),
            ratios_lower: lo,
            ratios_upper: hi,
            fit_lower: fl,
            fit_upper: fu,
            predicted_slope: pred,
            verdict: v,
        });
        // dual family
        let nf = mode_function_lp(geom, j, &unit, 1.0, 2.0, p)?;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut off = 0;
        for sh in &shells {
            let part = RieszOutput {
                r: dual.r[off..off + sh.len()].to_vec(),
                u: dual.u[off..off + sh.len()].to_vec(),
                du: dual.du[off..off + sh.len()].to_vec(),
                ..dual.clone()
            };
            off += sh.len();
            let (a, b) = gradient_lp_brackets(geom, &part, sh, p)?;
            lo.push(a / nf);
            hi.push(b / nf);
        }
        let (fl, fu) = (loglog_slope(r_grid, &lo), loglog_slope(r_grid, &hi));
        let pred = predicted_slope(ProbeFamily::DualBump, prediction, p);
        let v = verdict(pred, [&fl, &fu]);
        probes.push(RieszProbe {
            family: ProbeFamily::DualBump,
            mode: j,
            p,
            r_grid: r_grid.to_vec(),
            ratios_lower: lo,
            ratios_upper: hi,
            fit_lower: fl,
            fit_upper: fu,
            predicted_slope: pred,
            verdict: v,
        });
    }
    Ok(Sweep { prediction: *prediction, mode: j, probes })
}

/// Default p values: one below p_lo, one inside, one above p_hi.
pub fn default_p_list(pred: &ThresholdPrediction) -> Vec<f64> {
    vec![0.8 * pred.p_lo, (pred.p_lo * pred.p_hi).sqrt(), 1.25 * pred.p_hi]
}

// ---------------------------------------------------------------- Rayleigh

#[derive(Debug, Clone, Serialize)]
pub struct RayleighPoint {
    pub r: f64,
    /// ⟨φ_R, ψ⟩
    pub overlap: f64,
    /// ⟨df_R, df_R⟩
    pub dirichlet: f64,
    /// ⟨Pf_R, f_R⟩ = ⟨Pφ_R, φ_R⟩
    pub energy: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayleighReport {
    pub points: Vec<RayleighPoint>,
    pub fit: SlopeFit,
    /// Mean of ⟨φ_R, ψ⟩ over the upper half of the grid.
    pub overlap_limit: f64,
}

/// Cutoff equal to 1 on [0, 1], 0 on [2, ∞), smooth in between.
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        g(2.0 - s) / (g(2.0 - s) + g(s - 1.0))
    }
}

fn cutoff_deriv(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        return 0.0;
    }
    let h = 1e-6;
    (cutoff(s + h) - cutoff(s - h)) / (2.0 * h)
}

/// φ_R = R^{−1}χ(r/R)·Y₁ with f_R = φ_R − ⟨φ_R, ψ⟩ψ and
/// α(R) = ⟨df_R, df_R⟩/⟨Pf_R, f_R⟩, in the mode-1 channel.
pub fn rayleigh_unboundedness(problem: &RadialProblem, r_grid: &[f64]) -> Result<RayleighReport> {
    let n = problem.n;
    let mode = problem.mode(1)?;
    let km = kernel_profile(problem, 1)?;
    if let Some(k) = &km {
        let rep = detect_kernel(problem, 1)?;
        let m = rep.m;
        let ok = match n {
            3 => m > 0.5 && m < 1.5,
            4 => m > 0.0 && m < 1.0,
            5 => m == 0.0,
            _ => false,
        };
        if !ok || k.j != 1 {
            return Err(Error::Precondition(format!("m = {m} is outside the unbounded regime for n = {n}")));
        }
    }
    let lam = mode.lambda;
    let np = n as i32 - 1;
    let psi = |r: f64| -> (f64, f64) {
        match &km {
            Some(k) => {
                let (u, up) = k.profile.u_deriv(r);
                let s = r.powf(-0.5 * (n as f64 - 1.0));
                (u * s, (up - 0.5 * (n as f64 - 1.0) / r * u) * s)
            }
            None => (0.0, 0.0),
        }
    };
    let v = |r: f64| problem.potential.value(r);
    let q = |g: &dyn Fn(f64) -> f64, a: f64, b: f64| -> Result<f64> { Ok(integrate(g, a, b, 1e-14, 1e-11, 20000)?.value) };
    let mut points = Vec::new();
    for &rr in r_grid {
        let phi = |r: f64| cutoff(r / rr) / rr;
        let dphi = |r: f64| cutoff_deriv(r / rr) / (rr * rr);
        let pieces = [(0.0, 1.0), (1.0, rr), (rr, 2.0 * rr)];
        let mut overlap = 0.0;
        let mut energy = 0.0;
        for &(a, b) in &pieces {
            overlap += q(&|r: f64| phi(r) * psi(r).0 * r.powi(np), a, b)?;
            energy += q(
                &|r: f64| {
                    let f = phi(r);
                    (dphi(r).powi(2) + lam * f * f / (r * r) + v(r) * f * f) * r.powi(np)
                },
                a,
                b,
            )?;
        }
        let fr = |r: f64| phi(r) - overlap * psi(r).0;
        let dfr = |r: f64| dphi(r) - overlap * psi(r).1;
        let mut dirichlet = 0.0;
        let tail = |t: f64| {
            // r = 2R/t on t ∈ (0, 1]
            if t <= 0.0 {
                return 0.0;
            }
            let r = 2.0 * rr / t;
            let f = fr(r);
            (dfr(r).powi(2) + lam * f * f / (r * r)) * r.powi(np) * 2.0 * rr / (t * t)
        };
        for &(a, b) in &pieces {
            dirichlet += q(&|r: f64| (dfr(r).powi(2) + lam * fr(r).powi(2) / (r * r)) * r.powi(np), a, b)?;
        }
        dirichlet += q(&tail, 0.0, 1.0)?;
        points.push(RayleighPoint { r: rr, overlap, dirichlet, energy, alpha: dirichlet / energy });
    }
    let rs: Vec<f64> = points.iter().map(|p| p.r).collect();
    let al: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    let fit = loglog_slope(&rs, &al);
    let upper = &points[points.len() / 2..];
    let overlap_limit = upper.iter().map(|p| p.overlap).sum::<f64>() / upper.len() as f64;
    Ok(RayleighReport { points, fit, overlap_limit })
}
