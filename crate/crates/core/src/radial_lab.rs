//! Per-mode radial reduction: Wronskian Green functions, zero-energy
//! solutions, kernel detection, engineered potentials and source solves.
//!
//! Radial functions are carried in the reduced variable U = r^{(n−1)/2} f,
//! which solves −U'' + Q U = 0 with Q = (ν² − ¼)/r² + V + k². The b-variable
//! is h = r^{−1/2} U = r^{(n−2)/2} f.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone_model::{mode_table, ConeGeometry, Link, Mode};
use crate::error::{Error, Result};
use crate::fit::{least_squares, LinearFit};
use crate::ode::{step, Real, DD, STAGES};
use crate::specfun::{ik_product, k_nu, sphere_volume};

// ------------------------------------------------------------- potentials

/// One summand of a closed-form potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// −depth·s²/(s² + r²)²
    Well { depth: f64, scale: f64 },
    /// Δf/f in the mode of f = r^a Π(s_i² + r²)^{−β_i}, with the 1/r² part
    /// cancelled: G′ + G² − (2a + n − 1)Σ 2β_i/(s_i² + r²), G = −Σ 2β_i r/(s_i² + r²).
    Profile { a: f64, n: u32, factors: Vec<(f64, f64)> },
    /// coeff·r^{2p}/(s² + r²)^q
    Rational { coeff: f64, scale: f64, p: u32, q: u32 },
}

impl Term {
    fn eval<T: Real>(&self, r: T) -> T {
        let r2 = r * r;
        match *self {
            Term::Well { depth, scale } => {
                let s2 = T::from_f64(scale) * T::from_f64(scale);
                let d = s2 + r2;
                -(T::from_f64(depth) * s2 / (d * d))
            }
            Term::Profile { a, n, ref factors } => {
                // u_i = r²/d_i, w_i = s_i²/d_i, U = Σβ_i u_i, W = Σβ_i w_i, c = 2a + n − 1:
                // r²V/2 = 2U² + 2Σβ_i u_i² − (c + 1)U
                //       = (c − 4B − 3)W + 2W² + 2Σβ_i w_i² + B(2B + 1 − c),
                // and the constant vanishes for an admissible profile.
                let zero = T::from_f64(0.0);
                let c = T::from_f64(2.0 * a + n as f64 - 1.0);
                let s_max = factors.iter().map(|f| f.0).fold(0.0, f64::max);
                let two = T::from_f64(2.0);
                if r.to_f64() <= s_max {
                    let (mut ut, mut sq) = (zero, zero);
                    for &(sc, beta) in factors {
                        let d = T::from_f64(sc) * T::from_f64(sc) + r2;
                        let bt = T::from_f64(beta);
                        ut = ut + bt / d;
                        sq = sq + bt * r2 / (d * d);
                    }
                    two * (two * ut * ut * r2 + two * sq - (c + T::from_f64(1.0)) * ut)
                } else {
                    let (mut w, mut sq) = (zero, zero);
                    let mut bsum = 0.0;
                    for &(sc, beta) in factors {
                        let s2 = T::from_f64(sc) * T::from_f64(sc);
                        let wi = s2 / (s2 + r2);
                        let bt = T::from_f64(beta);
                        w = w + bt * wi;
                        sq = sq + bt * wi * wi;
                        bsum += beta;
                    }
                    let lin = c - T::from_f64(4.0 * bsum + 3.0);
                    two * (lin * w + two * w * w + two * sq) / r2
                }
            }
            Term::Rational { coeff, scale, p, q } => {
                let s2 = T::from_f64(scale) * T::from_f64(scale);
                let d = s2 + r2;
                let mut num = T::from_f64(coeff);
                for _ in 0..p {
                    num = num * r2;
                }
                let mut den = T::from_f64(1.0);
                for _ in 0..q {
                    den = den * d;
                }
                num / den
            }
        }
    }

    fn decay_order(&self) -> f64 {
        match *self {
            Term::Well { .. } | Term::Profile { .. } => 4.0,
            Term::Rational { p, q, .. } => 2.0 * (q as f64 - p as f64),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            Term::Well { scale, .. } | Term::Rational { scale, .. } => scale,
            Term::Profile { ref factors, .. } => factors.iter().map(|f| f.0).fold(0.0, f64::max),
        }
    }
}

/// Sampled potential; log-linear interpolation inside, power tail outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    /// Decay order of the extrapolated tail V(r_last)(r_last/r)^l.
    pub tail_order: f64,
}

impl Table {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() < 4 || r.len() != v.len() {
            return Err(Error::Domain("potential table needs at least 4 (r, V) rows".into()));
        }
        if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("table radii must be positive and increasing".into()));
        }
        // decay order from the last decade of samples
        let r_last = *r.last().unwrap();
        let pts: Vec<(f64, f64)> = r
            .iter()
            .zip(&v)
            .filter(|(x, y)| **x >= r_last / 10.0 && **y != 0.0)
            .map(|(x, y)| (x.ln(), y.abs().ln()))
            .collect();
        let tail_order = if pts.len() >= 2 {
            let d: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0]).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            -least_squares(&d, &y, None)?.coef[1]
        } else {
            f64::INFINITY
        };
        Ok(Table { r, v, tail_order })
    }

    fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.v[0];
        }
        if r >= self.r[n - 1] {
            if !self.tail_order.is_finite() {
                return 0.0;
            }
            return self.v[n - 1] * (self.r[n - 1] / r).powf(self.tail_order);
        }
        let i = self.r.partition_point(|&x| x <= r) - 1;
        let t = (r.ln() - self.r[i].ln()) / (self.r[i + 1].ln() - self.r[i].ln());
        self.v[i] * (1.0 - t) + self.v[i + 1] * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Terms(Vec<Term>),
    Table(Table),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Terms(Vec::new())
    }

    pub fn eval<T: Real>(&self, r: T) -> T {
        match self {
            Potential::Terms(ts) => ts.iter().fold(T::from_f64(0.0), |acc, t| acc + t.eval(r)),
            Potential::Table(t) => T::from_f64(t.eval(r.to_f64())),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval::<f64>(r)
    }

    /// Nominal decay order l with V = O(r^{−l}).
    pub fn nominal_decay(&self) -> f64 {
        match self {
            Potential::Terms(ts) => ts.iter().map(Term::decay_order).fold(f64::INFINITY, f64::min),
            Potential::Table(t) => t.tail_order,
        }
    }

    /// Length scale beyond which the tail regime is reached.
    pub fn scale(&self) -> f64 {
        match self {
            Potential::Terms(ts) => ts.iter().map(Term::scale).fold(1.0, f64::max),
            Potential::Table(t) => *t.r.last().unwrap(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Terms(ts) if ts.is_empty())
    }
}

/// |V(r)| ≤ c r^{−l} for r ≥ r0, checked on samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub order: f64,
    pub c: f64,
    pub r0: f64,
    /// l ≥ 5, the stronger decay used by some expansions.
    pub strong: bool,
}

pub fn certify_decay(v: &Potential) -> Result<DecayCertificate> {
    let l = v.nominal_decay();
    if v.is_zero() {
        return Ok(DecayCertificate { order: f64::INFINITY, c: 0.0, r0: 1.0, strong: true });
    }
    if !(l >= 3.0) {
        return Err(Error::Precondition(format!("potential decays like r^-{l:.3}, need order >= 3")));
    }
    let r0 = 10.0 * v.scale();
    let samples: Vec<f64> = (0..=200).map(|i| r0 * 10f64.powf(i as f64 * 6.0 / 200.0)).collect();
    let bounds: Vec<f64> = samples.iter().map(|&r| v.value(r).abs() * r.powf(l)).collect();
    let c = bounds.iter().cloned().fold(0.0, f64::max);
    // the scaled profile must settle, not grow, across the sampled decades
    let tail = bounds[150..].iter().cloned().fold(0.0, f64::max);
    if tail > 1.01 * bounds[100].max(1e-300) && tail > 1e-12 * c {
        return Err(Error::Precondition("sampled potential does not respect its nominal decay".into()));
    }
    Ok(DecayCertificate { order: l, c, r0, strong: l >= 5.0 })
}

/// f(r) = r^a Π_i (s_i² + r²)^{−β_i}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicProfile {
    pub a: f64,
    /// (s_i, β_i)
    pub factors: Vec<(f64, f64)>,
}

impl AlgebraicProfile {
    pub fn single(a: f64, scale: f64, beta: f64) -> Self {
        AlgebraicProfile { a, factors: vec![(scale, beta)] }
    }
    pub fn eval(&self, r: f64) -> f64 {
        self.factors.iter().fold(r.powf(self.a), |acc, &(s, b)| acc * (s * s + r * r).powf(-b))
    }
    /// (f, f', f'')
    pub fn derivs(&self, r: f64) -> (f64, f64, f64) {
        let f = self.eval(r);
        // log-derivative g and its derivative
        let mut g = self.a / r;
        let mut gp = -self.a / (r * r);
        for &(s, b) in &self.factors {
            let d = s * s + r * r;
            g -= 2.0 * b * r / d;
            gp -= 2.0 * b * (s * s - r * r) / (d * d);
        }
        (f, f * g, f * (g * g + gp))
    }
    /// Exponent of decay at infinity, f ~ r^{−decay}.
    pub fn decay(&self) -> f64 {
        2.0 * self.factors.iter().map(|f| f.1).sum::<f64>() - self.a
    }
}

/// Metadata of a planted zero-energy solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engineered {
    pub mode_j: u32,
    pub nu: f64,
    pub profile: AlgebraicProfile,
    /// ν − (n−2)/2 for an L² element; `None` for a planted resonance.
    pub planted_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProblem {
    pub n: u32,
    pub geom: ConeGeometry,
    pub potential: Potential,
    pub decay: DecayCertificate,
    pub engineered: Option<Engineered>,
}

impl RadialProblem {
    pub fn new(geom: ConeGeometry, potential: Potential) -> Result<Self> {
        if geom.n < 3 {
            return Err(Error::Domain(format!("dimension {} < 3", geom.n)));
        }
        let decay = certify_decay(&potential)?;
        Ok(RadialProblem { n: geom.n, geom, potential, decay, engineered: None })
    }

    pub fn free(geom: ConeGeometry) -> Self {
        Self::new(geom, Potential::zero()).expect("zero potential is admissible")
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.geom.link, Link::RoundSphere)
    }

    /// Mode with index j of the link.
    pub fn mode(&self, j: u32) -> Result<Mode> {
        mode_table(&self.geom, j)
            .into_iter()
            .find(|m| m.j == j)
            .ok_or_else(|| Error::Domain(format!("link has no mode {j}")))
    }
}

/// Potential with a planted zero-energy solution f·Y_j in mode j.
/// The profile must be regular at 0 (a = ν − (n−2)/2) and decay like the
/// decaying branch (2β − a = ν + (n−2)/2); then V = [f″ + (n−1)f′/r − λf/r²]/f
/// is −4ν(ν+1)s²/(s²+r²)².
pub fn potential_from_mode(geom: &ConeGeometry, j: u32, f: AlgebraicProfile) -> Result<RadialProblem> {
    if f.factors.is_empty() || f.factors.iter().any(|&(s, _)| !(s > 0.0)) {
        return Err(Error::Domain("profile vanishes identically or changes sign (scale <= 0)".into()));
    }
    let mode = mode_table(geom, j)
        .into_iter()
        .find(|m| m.j == j)
        .ok_or_else(|| Error::Domain(format!("link has no mode {j}")))?;
    let half = (geom.n as f64 - 2.0) / 2.0;
    let nu = mode.nu;
    if (f.a - (nu - half)).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "profile exponent {} at 0 differs from the regular exponent {}",
            f.a,
            nu - half
        )));
    }
    if (f.decay() - (nu + half)).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "profile decays like r^-{}, the decaying branch of mode {j} is r^-{}",
            f.decay(),
            nu + half
        )));
    }
    let potential = Potential::Terms(vec![Term::Profile { a: f.a, n: geom.n, factors: f.factors.clone() }]);
    let mut p = RadialProblem::new(geom.clone(), potential)?;
    p.engineered = Some(Engineered { mode_j: j, nu, profile: f, planted_m: (nu > 1.0).then_some(nu - half) });
    Ok(p)
}

/// The standard planted profile for mode j: r^{ν−(n−2)/2}(s² + r²)^{−ν} for
/// j = 0, and r^{ν−(n−2)/2}((s/5)² + r²)³(s² + r²)^{−ν−3} otherwise. On a
/// round sphere the one-scale profile with j ≥ 1 is conformally special: its
/// potential also carries zero solutions in every lower mode.
pub fn planted_profile(geom: &ConeGeometry, j: u32, scale: f64) -> Result<AlgebraicProfile> {
    let mode = mode_table(geom, j)
        .into_iter()
        .find(|m| m.j == j)
        .ok_or_else(|| Error::Domain(format!("link has no mode {j}")))?;
    let a = mode.nu - (geom.n as f64 - 2.0) / 2.0;
    Ok(if j == 0 {
        AlgebraicProfile::single(a, scale, mode.nu)
    } else {
        AlgebraicProfile { a, factors: vec![(scale, mode.nu + 3.0), (0.2 * scale, -3.0)] }
    })
}

/// Residual (−Δ + V)(f) in mode λ, relative to |V f|, from analytic derivatives.
pub fn profile_residual(n: u32, lambda: f64, f: &AlgebraicProfile, v: &Potential, r: f64) -> f64 {
    let (f0, f1, f2) = f.derivs(r);
    let lap = f2 + (n as f64 - 1.0) * f1 / r - lambda * f0 / (r * r);
    let vf = v.value(r) * f0;
    (vf - lap).abs() / (vf.abs() + lap.abs()).max(1e-300)
}

// ----------------------------------------------------------- problem files

/// Parse a problem file: one `key = value` per line, `#` starts a comment.
///
/// ```text
/// dimension = 5
/// link = sphere            # or `scaled <c>`, or `order <j> <nu>`
/// planted_mode = 1         # potential_from_mode with the standard profile
/// planted_scale = 1.0
/// profile = 1 1.0:3.5 0.2:-3   # optional explicit profile a s:β ...
/// well = <depth> <scale>       # repeatable
/// rational = <coeff> <scale> <p> <q>
/// table = <r> <V>              # repeatable, at least 4 rows
/// ```
///
/// A planted mode excludes explicit potential terms.
pub fn parse_problem(text: &str) -> Result<RadialProblem> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut n: Option<u32> = None;
    let mut link = Link::RoundSphere;
    let mut order_link: Option<(u32, f64, usize)> = None;
    let mut planted: Option<(u32, usize)> = None;
    let mut scale = 1.0;
    let mut profile: Option<AlgebraicProfile> = None;
    let mut terms = Vec::new();
    let mut table: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut last_term_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(ln, format!("expected `key = value`, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let nums = |count: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = value
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(ln, format!("`{key}`: `{t}` is not a number"))))
                .collect::<Result<_>>()?;
            if v.len() != count {
                return Err(err(ln, format!("`{key}` takes {count} number(s), found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err(ln, format!("`{key}`: non-finite value")));
            }
            Ok(v)
        };
        let nat = |x: f64| -> Result<u32> {
            if x >= 0.0 && x.fract() == 0.0 && x < 1e6 {
                Ok(x as u32)
            } else {
                Err(err(ln, format!("`{key}`: {x} is not a natural number")))
            }
        };
        match key {
            "dimension" => {
                let d = nat(nums(1)?[0])?;
                if d < 3 {
                    return Err(err(ln, format!("dimension must be >= 3, got {d}")));
                }
                n = Some(d);
            }
            "link" => {
                let mut it = value.split_whitespace();
                match it.next() {
                    Some("sphere") if it.next().is_none() => link = Link::RoundSphere,
                    Some("scaled") => {
                        let c: f64 = it
                            .next()
                            .and_then(|t| t.parse().ok())
                            .filter(|c: &f64| *c > 0.0)
                            .ok_or_else(|| err(ln, "`link = scaled <c>` needs a radius c > 0".into()))?;
                        link = Link::ScaledSphere(c);
                    }
                    Some("order") => {
                        let v: Vec<f64> = it.filter_map(|t| t.parse().ok()).collect();
                        if v.len() != 2 {
                            return Err(err(ln, "`link = order <j> <nu>` needs a mode and an order".into()));
                        }
                        order_link = Some((nat(v[0])?, v[1], ln));
                    }
                    _ => return Err(err(ln, format!("unknown link `{value}`"))),
                }
            }
            "planted_mode" => planted = Some((nat(nums(1)?[0])?, ln)),
            "planted_scale" => {
                scale = nums(1)?[0];
                if !(scale > 0.0) {
                    return Err(err(ln, format!("planted_scale must be positive, got {scale}")));
                }
            }
            "profile" => {
                let mut it = value.split_whitespace();
                let a: f64 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(ln, "`profile` starts with the exponent a".into()))?;
                let mut factors = Vec::new();
                for t in it {
                    let (s, b) = t
                        .split_once(':')
                        .and_then(|(s, b)| Some((s.parse::<f64>().ok()?, b.parse::<f64>().ok()?)))
                        .ok_or_else(|| err(ln, format!("profile factor `{t}` is not `scale:beta`")))?;
                    factors.push((s, b));
                }
                profile = Some(AlgebraicProfile { a, factors });
            }
            "well" => {
                let v = nums(2)?;
                terms.push(Term::Well { depth: v[0], scale: v[1] });
                last_term_line = ln;
            }
            "rational" => {
                let v = nums(4)?;
                terms.push(Term::Rational { coeff: v[0], scale: v[1], p: nat(v[2])?, q: nat(v[3])? });
                last_term_line = ln;
            }
            "table" => {
                let v = nums(2)?;
                table.0.push(v[0]);
                table.1.push(v[1]);
                last_term_line = ln;
            }
            _ => return Err(err(ln, format!("unknown key `{key}`"))),
        }
    }
    let n = n.ok_or_else(|| err(0, "missing `dimension`".into()))?;
    if let Some((j, nu, ln)) = order_link {
        link = ConeGeometry::with_mode_order(n, j, nu).map_err(|e| err(ln, e.to_string()))?.link;
    }
    let geom = ConeGeometry { n, link };
    if let Some((j, ln)) = planted {
        if !terms.is_empty() || !table.0.is_empty() {
            return Err(err(last_term_line, "explicit potential terms cannot be combined with `planted_mode`".into()));
        }
        let f = match profile {
            Some(f) => f,
            None => planted_profile(&geom, j, scale).map_err(|e| err(ln, e.to_string()))?,
        };
        return potential_from_mode(&geom, j, f).map_err(|e| err(ln, e.to_string()));
    }
    if profile.is_some() {
        return Err(err(0, "`profile` needs `planted_mode`".into()));
    }
    let potential = match (terms.is_empty(), table.0.is_empty()) {
        (_, true) => Potential::Terms(terms),
        (true, false) => Potential::Table(Table::new(table.0, table.1).map_err(|e| err(last_term_line, e.to_string()))?),
        (false, false) => return Err(err(last_term_line, "use either closed-form terms or a table, not both".into())),
    };
    RadialProblem::new(geom, potential).map_err(|e| err(last_term_line, e.to_string()))
}

// ---------------------------------------------------------------- operator

#[derive(Debug, Clone, PartialEq)]
pub struct RadialOperator {
    pub n: u32,
    pub mode: Mode,
    pub nu: f64,
    pub k: f64,
    pub potential: Arc<Potential>,
}

pub fn reduce(problem: &RadialProblem, mode: Mode, k: f64) -> RadialOperator {
    RadialOperator { n: problem.n, mode, nu: mode.nu, k, potential: Arc::new(problem.potential.clone()) }
}

impl RadialOperator {
    pub fn with_k(&self, k: f64) -> Self {
        RadialOperator { k, ..self.clone() }
    }

    /// Q(r) = (ν² − ¼)/r² + V(r) + k².
    pub fn q<T: Real>(&self, r: T) -> T {
        let nu = T::from_f64(self.nu);
        let k = T::from_f64(self.k);
        (nu * nu - T::from_f64(0.25)) / (r * r) + self.potential.eval(r) + k * k
    }

    pub fn effective_potential(&self, r: f64) -> f64 {
        (self.nu * self.nu - 0.25) / (r * r) + self.potential.value(r)
    }

    fn q_abs(&self, r: f64) -> f64 {
        ((self.nu * self.nu - 0.25) / (r * r)).abs() + self.potential.value(r).abs() + self.k * self.k
    }

    /// Value of V + k² at the origin (second Frobenius coefficient).
    fn u0(&self) -> f64 {
        self.potential.value(1e-30) + self.k * self.k
    }
}

// -------------------------------------------------------------- integrator

/// Component c ≥ 1 of a chain solves −y_c'' + Q y_c = coef·r^power·y_{c−1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub coef: f64,
    pub power: i32,
}

fn powi_t<T: Real>(r: T, p: i32) -> T {
    let mut v = T::from_f64(1.0);
    for _ in 0..p.unsigned_abs() {
        v = v * r;
    }
    if p < 0 {
        T::from_f64(1.0) / v
    } else {
        v
    }
}

/// Advance all chain components across one panel. If `nodes` is given it
/// receives the component values at the collocation nodes.
fn advance<T: Real>(
    op: &RadialOperator,
    chain: &[Coupling],
    ra: T,
    h: T,
    y: &[T],
    yp: &[T],
    mut nodes: Option<&mut Vec<Vec<T>>>,
) -> (Vec<T>, Vec<T>) {
    let tab = T::tableau();
    let rn: Vec<T> = tab.c.iter().map(|&c| ra + c * h).collect();
    let q: Vec<T> = rn.iter().map(|&r| op.q(r)).collect();
    let m = y.len();
    let mut out_y = Vec::with_capacity(m);
    let mut out_yp = Vec::with_capacity(m);
    let mut prev = vec![T::from_f64(0.0); STAGES];
    let mut cur = vec![T::from_f64(0.0); STAGES];
    for c in 0..m {
        let (yb, ypb) = if c == 0 {
            step(h, &q, None, y[0], yp[0], if m > 1 || nodes.is_some() { Some(&mut cur) } else { None })
        } else {
            let cp = chain[c - 1];
            let f: Vec<T> = (0..STAGES).map(|i| -(T::from_f64(cp.coef) * powi_t(rn[i], cp.power) * prev[i])).collect();
            step(h, &q, Some(&f), y[c], yp[c], Some(&mut cur))
        };
        if let Some(nd) = nodes.as_deref_mut() {
            nd[c].copy_from_slice(&cur);
        }
        std::mem::swap(&mut prev, &mut cur);
        out_y.push(yb);
        out_yp.push(ypb);
    }
    (out_y, out_yp)
}

/// Knots r_0 < … < r_N adapted to Q: steps ≤ 0.25 r and ≤ 0.8/√|Q|.
fn build_grid(op: &RadialOperator, r_lo: f64, r_hi: f64) -> Vec<f64> {
    let mut g = vec![r_lo];
    let mut r = r_lo;
    while r < r_hi {
        let h1 = (0.25 * r).min(0.8 / op.q_abs(r).sqrt());
        let h = h1.min(0.8 / op.q_abs(r + h1).sqrt());
        let next = if r + h >= r_hi * (1.0 - 1e-12) { r_hi } else { r + h };
        g.push(next);
        r = next;
    }
    g
}

/// A (possibly chained) solution tabulated at grid knots as mantissa × 2^e2.
#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    op: RadialOperator,
    chain: Vec<Coupling>,
    grid: Arc<Vec<f64>>,
    y: Vec<Vec<T>>,
    yp: Vec<Vec<T>>,
    e2: Vec<i32>,
    forward: bool,
}

fn renormalize<T: Real>(r: f64, y: &mut [T], yp: &mut [T], e2: &mut i32) {
    let m = y
        .iter()
        .chain(yp.iter())
        .enumerate()
        .map(|(i, v)| v.to_f64().abs() * if i < y.len() { 1.0 } else { r })
        .fold(0.0, f64::max);
    if m > 0.0 && !(2f64.powi(-60)..2f64.powi(60)).contains(&m) {
        let e = m.log2().round() as i32;
        for v in y.iter_mut().chain(yp.iter_mut()) {
            *v = v.ldexp(-e);
        }
        *e2 += e;
    }
}

impl<T: Real> Solution<T> {
    fn integrate(
        op: &RadialOperator,
        chain: &[Coupling],
        grid: Arc<Vec<f64>>,
        forward: bool,
        y0: Vec<T>,
        yp0: Vec<T>,
        e20: i32,
    ) -> Self {
        let n = grid.len();
        let m = y0.len();
        let mut y = vec![vec![T::from_f64(0.0); m]; n];
        let mut yp = y.clone();
        let mut e2 = vec![0; n];
        let start = if forward { 0 } else { n - 1 };
        y[start] = y0;
        yp[start] = yp0;
        e2[start] = e20;
        let order: Vec<usize> = if forward { (0..n - 1).collect() } else { (1..n).rev().collect() };
        for i in order {
            let j = if forward { i + 1 } else { i - 1 };
            let ra = T::from_f64(grid[i]);
            let h = T::from_f64(grid[j]) - ra;
            let (mut ny, mut nyp) = advance(op, chain, ra, h, &y[i], &yp[i], None);
            let mut e = e2[i];
            renormalize(grid[j], &mut ny, &mut nyp, &mut e);
            y[j] = ny;
            yp[j] = nyp;
            e2[j] = e;
        }
        Solution { op: op.clone(), chain: chain.to_vec(), grid, y, yp, e2, forward }
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.grid
    }

    /// Mantissas (values, derivatives) and exponent at r, by a partial step
    /// from the nearest knot in the direction of integration.
    pub fn state(&self, r: f64) -> (Vec<T>, Vec<T>, i32) {
        let g = &self.grid;
        let r = r.clamp(g[0], *g.last().unwrap());
        let idx = g.partition_point(|&x| x <= r).saturating_sub(1).min(g.len() - 2);
        let base = if self.forward || r == g[idx] { idx } else { idx + 1 };
        if r == g[base] {
            return (self.y[base].clone(), self.yp[base].clone(), self.e2[base]);
        }
        let ra = T::from_f64(g[base]);
        let h = T::from_f64(r) - ra;
        let (y, yp) = advance(&self.op, &self.chain, ra, h, &self.y[base], &self.yp[base], None);
        (y, yp, self.e2[base])
    }

    /// Value of component `comp` at r (f64, exponent applied).
    pub fn value(&self, r: f64, comp: usize) -> f64 {
        let (y, _, e) = self.state(r);
        y[comp].to_f64() * 2f64.powi(e)
    }

    /// Value and derivative of component `comp`.
    pub fn value_deriv(&self, r: f64, comp: usize) -> (f64, f64) {
        let (y, yp, e) = self.state(r);
        let s = 2f64.powi(e);
        (y[comp].to_f64() * s, yp[comp].to_f64() * s)
    }

    /// Number of sign changes of component 0 across the knots.
    pub fn sign_changes(&self) -> usize {
        self.y.windows(2).filter(|w| w[0][0].to_f64() * w[1][0].to_f64() < 0.0).count()
    }

    /// ∫ y_a y_b r^p dr over [lo, hi] (clamped to the grid), by panel Gauss rules.
    pub fn integrate_product(&self, a: usize, b: usize, p: i32, lo: f64, hi: f64) -> f64 {
        let tab = f64::tableau();
        let g = &self.grid;
        let m = self.y[0].len();
        let mut acc = 0.0;
        let mut nodes = vec![vec![T::from_f64(0.0); STAGES]; m];
        for i in 0..g.len() - 1 {
            let (ra, rb) = (g[i], g[i + 1]);
            if rb <= lo || ra >= hi {
                continue;
            }
            let base = if self.forward { i } else { i + 1 };
            let other = if self.forward { i + 1 } else { i };
            let r0 = T::from_f64(g[base]);
            let h = T::from_f64(g[other]) - r0;
            advance(&self.op, &self.chain, r0, h, &self.y[base], &self.yp[base], Some(&mut nodes));
            let s = 2f64.powi(self.e2[base]);
            let hf = (g[other] - g[base]).abs();
            let (lo_c, hi_c) = (lo.max(ra), hi.min(rb));
            if lo_c > ra || hi_c < rb {
                // partial panel: fall back to sub-panel quadrature on the node polynomial
                let sub = 16;
                let (xs, ws) = crate::quad::gauss_legendre(sub);
                for (x, w) in xs.iter().zip(&ws) {
                    let rr = 0.5 * (lo_c + hi_c) + 0.5 * (hi_c - lo_c) * x;
                    let (ya, _) = self.value_deriv(rr, a);
                    let (yb, _) = self.value_deriv(rr, b);
                    acc += 0.5 * (hi_c - lo_c) * w * ya * yb * rr.powi(p);
                }
                continue;
            }
            for k in 0..STAGES {
                let rr = g[base] + tab.c[k] * (g[other] - g[base]);
                acc += hf * tab.b[k] * nodes[a][k].to_f64() * nodes[b][k].to_f64() * s * s * rr.powi(p);
            }
        }
        acc
    }
}

fn r_min_for<T: Real>(op: &RadialOperator, r_eval: f64) -> f64 {
    let u0 = op.u0().abs().max(1.0);
    (T::EPS.powf(0.25) / u0.sqrt()).min(1e-3 * r_eval)
}

/// Frobenius start U = r^{ν+½}(1 + U0 r²/(4ν+4)) as mantissas and exponent.
fn regular_start<T: Real>(op: &RadialOperator, r: f64, comps: usize) -> (Vec<T>, Vec<T>, i32) {
    let nu = op.nu;
    let c = op.u0() / (4.0 * nu + 4.0);
    let lg = (nu + 0.5) * r.log2();
    let e = lg.floor() as i32;
    let mant = 2f64.powf(lg - e as f64);
    let rt = T::from_f64(r);
    let r2 = rt * rt;
    let cc = T::from_f64(c);
    let y = T::from_f64(mant) * (T::from_f64(1.0) + cc * r2);
    let yp = T::from_f64(mant) * (T::from_f64(nu + 0.5) + T::from_f64(nu + 2.5) * cc * r2) / rt;
    let mut ys = vec![T::from_f64(0.0); comps];
    let mut yps = ys.clone();
    ys[0] = y;
    yps[0] = yp;
    (ys, yps, e)
}

/// Start of the solution decaying at infinity: WKB for k > 0, r^{−ν+½} at k = 0.
fn decaying_start<T: Real>(op: &RadialOperator, r: f64) -> (Vec<T>, Vec<T>, i32) {
    if op.k > 0.0 {
        let q = op.q_abs(r);
        let dq = -2.0 * (op.nu * op.nu - 0.25) / r.powi(3);
        let slope = -q.sqrt() - dq / (4.0 * q);
        (vec![T::from_f64(1.0)], vec![T::from_f64(slope)], 0)
    } else {
        let p = 0.5 - op.nu;
        let lg = p * r.log2();
        let e = lg.floor() as i32;
        let mant = 2f64.powf(lg - e as f64);
        (vec![T::from_f64(mant)], vec![T::from_f64(mant * p / r)], e)
    }
}

fn r_far_for<T: Real>(op: &RadialOperator, r_eval_max: f64) -> f64 {
    let base = r_eval_max.max(100.0 * op.potential.scale());
    if op.k > 0.0 {
        base + if T::EPS < 1e-20 { 45.0 } else { 25.0 } / op.k
    } else if T::EPS < 1e-20 {
        1e14 * op.potential.scale()
    } else {
        1e9 * op.potential.scale()
    }
}

// ------------------------------------------------------------ Green function

/// Regular and decaying solutions of one channel with their Wronskian.
#[derive(Debug, Clone)]
pub struct Channel<T: Real> {
    pub reg: Solution<T>,
    pub dec: Solution<T>,
    w: T,
    w_e2: i32,
    /// Sign changes of the regular solution: bound states below −k².
    pub bound_states: usize,
}

impl<T: Real> Channel<T> {
    /// Solve the channel on a grid covering [r_lo, r_hi] for evaluation.
    pub fn new(op: &RadialOperator, r_lo: f64, r_hi: f64) -> Result<Self> {
        let rmin = r_min_for::<T>(op, r_lo);
        let rfar = r_far_for::<T>(op, r_hi);
        let grid = Arc::new(build_grid(op, rmin, rfar));
        let (y, yp, e) = regular_start::<T>(op, rmin, 1);
        let reg = Solution::integrate(op, &[], grid.clone(), true, y, yp, e);
        let (y, yp, e) = decaying_start::<T>(op, rfar);
        let dec = Solution::integrate(op, &[], grid.clone(), false, y, yp, e);
        // Wronskian at the knot nearest the geometric centre of the window
        let rc = (r_lo * r_hi).sqrt();
        let m = grid.partition_point(|&x| x < rc).min(grid.len() - 1);
        let a = reg.yp[m][0] * dec.y[m][0];
        let b = reg.y[m][0] * dec.yp[m][0];
        let w = a - b;
        let rel = w.to_f64().abs() / (a.to_f64().abs() + b.to_f64().abs());
        let bound_states = reg.y[..m].windows(2).filter(|w| w[0][0].to_f64() * w[1][0].to_f64() < 0.0).count()
            + dec.y[m..].windows(2).filter(|w| w[0][0].to_f64() * w[1][0].to_f64() < 0.0).count();
        if !(rel > 100.0 * T::EPS) {
            return Err(Error::Spectral(format!(
                "Wronskian vanishes to {rel:e} in mode {} at k = {}: −k² is an eigenvalue or a resonance",
                op.mode.j, op.k
            )));
        }
        let w_e2 = reg.e2[m] + dec.e2[m];
        Ok(Channel { reg, dec, w, w_e2, bound_states })
    }

    /// g(r, r′) = U_reg(r_<) U_dec(r_>)/W, the Green function of −d²/dr² + Q.
    pub fn g(&self, r: f64, rp: f64) -> f64 {
        let (a, b) = if r <= rp { (r, rp) } else { (rp, r) };
        let (yr, _, er) = self.reg.state(a);
        let (yd, _, ed) = self.dec.state(b);
        let v = (yr[0] * yd[0] / self.w).to_f64();
        v * 2f64.powi(er + ed - self.w_e2)
    }

    /// Reference Wronskian as mantissa and binary exponent.
    pub fn wronskian(&self) -> (T, i32) {
        (self.w, self.w_e2)
    }

    /// Wronskian W(U_reg, U_dec) evaluated at an arbitrary radius, in units of
    /// the stored reference value (1 for an exact computation).
    pub fn wronskian_ratio(&self, r: f64) -> f64 {
        let (yr, ypr, er) = self.reg.state(r);
        let (yd, ypd, ed) = self.dec.state(r);
        let w = ypr[0] * yd[0] - yr[0] * ypd[0];
        (w / self.w).to_f64() * 2f64.powi(er + ed - self.w_e2)
    }
}

/// Working precision per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Double,
    DoubleDouble,
}

/// Channel Green function in the chosen precision.
#[derive(Debug, Clone)]
pub enum ChannelGreen {
    Double(Channel<f64>),
    DoubleDouble(Channel<DD>),
}

impl ChannelGreen {
    pub fn new(op: &RadialOperator, r_lo: f64, r_hi: f64, prec: Precision) -> Result<Self> {
        Ok(match prec {
            Precision::Double => ChannelGreen::Double(Channel::new(op, r_lo, r_hi)?),
            Precision::DoubleDouble => ChannelGreen::DoubleDouble(Channel::new(op, r_lo, r_hi)?),
        })
    }
    pub fn g(&self, r: f64, rp: f64) -> f64 {
        match self {
            ChannelGreen::Double(c) => c.g(r, rp),
            ChannelGreen::DoubleDouble(c) => c.g(r, rp),
        }
    }
    pub fn bound_states(&self) -> usize {
        match self {
            ChannelGreen::Double(c) => c.bound_states,
            ChannelGreen::DoubleDouble(c) => c.bound_states,
        }
    }
}

/// Reduced Green function G(r, r′) of −d²/dr² + (ν²−¼)/r² + V + k².
pub fn green_function(op: &RadialOperator, k: f64, r: f64, rp: f64) -> Result<f64> {
    if !(k > 0.0) || !(r > 0.0) || !(rp > 0.0) {
        return Err(Error::Domain("green_function needs k, r, r′ > 0".into()));
    }
    let op = op.with_k(k);
    let c = Channel::<DD>::new(&op, r.min(rp), r.max(rp))?;
    Ok(c.g(r, rp))
}

/// Free channel Green function √(rr′) I_ν(kr_<) K_ν(kr_>).
pub fn free_channel_green(nu: f64, k: f64, r: f64, rp: f64) -> f64 {
    let (a, b) = if r <= rp { (r, rp) } else { (rp, r) };
    (r * rp).sqrt() * ik_product(nu, k * a, k * b)
}

/// Density conventions for kernel samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelConvention {
    Function,
    BHalfDensity,
    ScHalfDensity,
}

impl KernelConvention {
    /// Factor converting a function-convention kernel at radii (r, r′).
    pub fn factor(self, n: u32, r: f64, rp: f64) -> f64 {
        match self {
            KernelConvention::Function | KernelConvention::ScHalfDensity => 1.0,
            KernelConvention::BHalfDensity => (r * rp).powf((n as f64 - 2.0) / 2.0),
        }
    }
}

/// One value of the resolvent kernel at (k, r, r′, cos θ) in a density convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenSample {
    pub k: f64,
    pub r: f64,
    pub r_p: f64,
    pub cos_theta: f64,
    pub value: f64,
    pub modes_used: u32,
    pub convention: KernelConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventOptions {
    pub j_max: u32,
    pub tol: f64,
    /// Modes 0..dd_modes are solved in double-double.
    pub dd_modes: u32,
    /// On ℝⁿ, add the free kernel in closed form and sum only g_j − g_j^free.
    pub subtract_free: bool,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions { j_max: 200, tol: 1e-11, dd_modes: 3, subtract_free: true }
    }
}

/// Radial coefficients of the angular expansion of the kernel at one pair of
/// radii: R(z, z′) = free(d) + Σ_j c_j Π_j(cos θ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSeries {
    pub n: u32,
    pub k: f64,
    pub r: f64,
    pub r_p: f64,
    /// Whether the closed-form free kernel is part of the sum.
    pub free_closed: bool,
    pub terms: Vec<(Mode, f64)>,
}

impl ModeSeries {
    pub fn eval(&self, geom: &ConeGeometry, cos_theta: f64) -> Result<f64> {
        let mut total = 0.0;
        if self.free_closed {
            let d2 = self.r * self.r + self.r_p * self.r_p - 2.0 * self.r * self.r_p * cos_theta;
            total = free_kernel(self.n, self.k, d2.max(0.0).sqrt());
        }
        for (mode, c) in &self.terms {
            total += c * geom.projection(mode, cos_theta)?;
        }
        Ok(total)
    }

    /// Only the terms of one mode index j.
    pub fn mode_term(&self, j: u32) -> f64 {
        self.terms.iter().filter(|(m, _)| m.j == j).map(|(_, c)| c).sum()
    }

    pub fn sample(&self, geom: &ConeGeometry, cos_theta: f64, convention: KernelConvention) -> Result<GreenSample> {
        Ok(GreenSample {
            k: self.k,
            r: self.r,
            r_p: self.r_p,
            cos_theta,
            value: self.eval(geom, cos_theta)? * convention.factor(self.n, self.r, self.r_p),
            modes_used: self.terms.last().map_or(0, |(m, _)| m.j + 1),
            convention,
        })
    }
}

/// (−Δ + k²)^{−1} on ℝⁿ at distance d: (2π)^{−n/2}(k/d)^{n/2−1}K_{n/2−1}(kd).
pub fn free_kernel(n: u32, k: f64, d: f64) -> f64 {
    let h = n as f64 / 2.0 - 1.0;
    (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0) * (k / d).powf(h) * k_nu(h, k * d)
}

/// Mode series for several radius pairs at once; every channel is solved once
/// on a grid covering all radii. The sum over j stops when, for every pair, a
/// geometric majorant of the remaining terms (with Π_j bounded by its diagonal
/// value) falls below `tol` times the largest term seen.
pub fn mode_series(problem: &RadialProblem, k: f64, pairs: &[(f64, f64)], opts: &ResolventOptions) -> Result<Vec<ModeSeries>> {
    if !(k > 0.0) || pairs.is_empty() {
        return Err(Error::Domain("mode series need k > 0 and at least one pair".into()));
    }
    for &(r, rp) in pairs {
        if !(r > 0.0) || !(rp > 0.0) {
            return Err(Error::Domain("resolvent needs r, r′ > 0".into()));
        }
        if (r - rp).abs() <= 1e-9 * r.max(rp) {
            return Err(Error::Domain("mode sums need distinct radii r ≠ r′".into()));
        }
    }
    let n = problem.n;
    let euclid = problem.is_euclidean();
    let subtract = euclid && opts.subtract_free;
    let lo = pairs.iter().map(|p| p.0.min(p.1)).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0.max(p.1)).fold(0.0, f64::max);
    let mut out: Vec<ModeSeries> = pairs
        .iter()
        .map(|&(r, rp)| ModeSeries { n, k, r, r_p: rp, free_closed: subtract, terms: Vec::new() })
        .collect();
    let mut scale: Vec<f64> = pairs
        .iter()
        .map(|&(r, rp)| if subtract { free_kernel(n, k, (r - rp).abs()) } else { 0.0 })
        .collect();
    let mut quiet = vec![0u32; pairs.len()];
    if subtract && problem.potential.is_zero() {
        return Ok(out);
    }
    let mut modes = mode_table(&problem.geom, opts.j_max);
    modes.sort_by_key(|m| m.j);
    for mode in modes {
        let op = reduce(problem, mode, k);
        let prec = if mode.j < opts.dd_modes { Precision::DoubleDouble } else { Precision::Double };
        let ch = ChannelGreen::new(&op, lo, hi, prec)?;
        let diag = problem.geom.projection_diag(&mode)?;
        for (i, &(r, rp)) in pairs.iter().enumerate() {
            let mut g = ch.g(r, rp);
            if subtract {
                g -= free_channel_green(mode.nu, k, r, rp);
            }
            let c = (r * rp).powf(-(n as f64 - 1.0) / 2.0) * g;
            out[i].terms.push((mode, c));
            let mag = (c * diag).abs();
            scale[i] = scale[i].max(mag);
            let rho = r.min(rp) / r.max(rp);
            let bound = mag * rho / (1.0 - rho).max(1e-3);
            if bound <= opts.tol * scale[i] {
                quiet[i] += 1;
            } else {
                quiet[i] = 0;
            }
        }
        if quiet.iter().all(|&q| q >= 3) {
            return Ok(out);
        }
        if mode.j == opts.j_max {
            break;
        }
    }
    Err(Error::Numeric { msg: format!("mode sum not converged by j = {}", opts.j_max), achieved: f64::NAN })
}

/// Full resolvent kernel (P + k²)^{−1}(z, z′) in the function convention, by
/// the mode sum Σ_j (rr′)^{−(n−1)/2} g_j(r, r′) Π_j(cos θ).
pub fn resolvent_kernel(
    problem: &RadialProblem,
    k: f64,
    r: f64,
    rp: f64,
    cos_theta: f64,
    opts: &ResolventOptions,
) -> Result<GreenSample> {
    let s = mode_series(problem, k, &[(r, rp)], opts)?;
    s[0].sample(&problem.geom, cos_theta, KernelConvention::Function)
}

// ------------------------------------------------------------ zero energy

/// Exponent fitted on log|U| = p log r + c (+ q log|log r|) over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub value: f64,
    pub stderr: f64,
    pub log_power: f64,
    pub log_present: bool,
    pub window: (f64, f64),
}

pub fn fit_exponent(sample: impl Fn(f64) -> f64, lo: f64, hi: f64, with_log: bool) -> Result<ExponentFit> {
    let npts = 24;
    let mut d = Vec::new();
    let mut y = Vec::new();
    for i in 0..npts {
        let r = lo * (hi / lo).powf(i as f64 / (npts - 1) as f64);
        let v = sample(r).abs();
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Numeric { msg: format!("profile vanishes or blows up at r = {r:e}"), achieved: v });
        }
        let mut row = vec![1.0, r.ln()];
        if with_log {
            row.push(r.ln().abs().ln());
        }
        d.push(row);
        y.push(v.ln());
    }
    let f = least_squares(&d, &y, None)?;
    let (lp, lse) = if with_log { (f.coef[2], f.stderr[2]) } else { (0.0, 0.0) };
    Ok(ExponentFit {
        value: f.coef[1],
        stderr: f.stderr[1].max(1e-15),
        log_power: lp,
        log_present: with_log && lp.abs() > 5.0 * lse.max(1e-12),
        window: (lo, hi),
    })
}

/// Zero-energy solution assembled from the regular branch near 0 and the
/// decaying branch (rescaled to match) beyond `r_match`, each used in its
/// stable direction. When the channel carries no zero solution the two
/// branches are independent and only `reg` / `dec` are meaningful.
#[derive(Debug, Clone)]
pub struct ZeroProfile {
    pub n: u32,
    pub nu: f64,
    pub reg: Solution<DD>,
    pub dec: Solution<DD>,
    pub r_match: f64,
    /// dec·dec_to_reg agrees with reg at r_match.
    pub dec_to_reg: f64,
    /// Overall factor applied to the regular normalization U ~ r^{ν+½}.
    pub norm: f64,
}

impl ZeroProfile {
    /// Reduced value U(r).
    pub fn u(&self, r: f64) -> f64 {
        self.norm
            * if r <= self.r_match {
                self.reg.value(r, 0)
            } else {
                self.dec.value(r, 0) * self.dec_to_reg
            }
    }
    /// (U, U′) at r.
    pub fn u_deriv(&self, r: f64) -> (f64, f64) {
        let (v, d) = if r <= self.r_match {
            self.reg.value_deriv(r, 0)
        } else {
            let (v, d) = self.dec.value_deriv(r, 0);
            (v * self.dec_to_reg, d * self.dec_to_reg)
        };
        (self.norm * v, self.norm * d)
    }
    /// Radial function f = r^{−(n−1)/2} U.
    pub fn f(&self, r: f64) -> f64 {
        self.u(r) * r.powf(-(self.n as f64 - 1.0) / 2.0)
    }
    /// b-variable h = r^{−1/2} U.
    pub fn h(&self, r: f64) -> f64 {
        self.u(r) / r.sqrt()
    }
    /// Coefficient A of U ~ A r^{½−ν} at infinity.
    pub fn leading_coeff_inf(&self) -> f64 {
        self.norm * self.dec_to_reg
    }
    /// ∫₀^∞ U² r^p dr, with the power tail beyond the grid added analytically.
    pub fn norm_integral(&self, p: i32) -> Result<f64> {
        let (_, rfar) = self.dec.r_range();
        let cut = rfar / 10.0;
        let inner = self.reg.integrate_product(0, 0, p, 0.0, self.r_match);
        let outer = self.dec.integrate_product(0, 0, p, self.r_match, cut);
        let e = 1.0 - 2.0 * self.nu + p as f64;
        if !(e < -1.0) {
            return Err(Error::Precondition(format!("∫U²r^{p} diverges at infinity (ν = {})", self.nu)));
        }
        let a = self.leading_coeff_inf();
        let tail = a * a * cut.powf(e + 1.0) / -(e + 1.0);
        Ok(self.norm * self.norm * inner + self.norm * self.norm * self.dec_to_reg * self.dec_to_reg * outer + tail)
    }
    /// ∫₀^R U² dr (finite radius; no tail).
    pub fn partial_norm(&self, rr: f64) -> f64 {
        let s2 = self.norm * self.norm;
        if rr <= self.r_match {
            s2 * self.reg.integrate_product(0, 0, 0, 0.0, rr)
        } else {
            s2 * (self.reg.integrate_product(0, 0, 0, 0.0, self.r_match)
                + self.dec_to_reg * self.dec_to_reg * self.dec.integrate_product(0, 0, 0, self.r_match, rr))
        }
    }
    pub fn scaled(&self, c: f64) -> Self {
        ZeroProfile { norm: self.norm * c, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSolutions {
    pub profile: ZeroProfile,
    /// W(U_reg, U_dec)/(2ν) with U_reg ~ r^{ν+½} at 0 and U_dec ~ r^{½−ν} at ∞;
    /// equals 1 without potential and 0 when the channel carries a zero solution.
    pub wronskian: f64,
    pub regular_at_0: ExponentFit,
    pub regular_at_inf: ExponentFit,
    pub decaying_at_0: ExponentFit,
    pub decaying_at_inf: ExponentFit,
}

/// Zero-energy threshold below which the normalized Wronskian counts as zero.
pub const ZERO_WRONSKIAN: f64 = 1e-9;
/// Above ZERO_WRONSKIAN but below this, classification is refused.
pub const AMBIGUOUS_WRONSKIAN: f64 = 1e-5;

/// Regular and decaying zero-energy solutions with fitted exponents (reduced variables).
pub fn zero_solutions(op: &RadialOperator) -> Result<ZeroSolutions> {
    let op = op.with_k(0.0);
    let s = op.potential.scale();
    let rmin = r_min_for::<DD>(&op, 1e-5 * s);
    let rfar = r_far_for::<DD>(&op, 1e6 * s);
    let grid = Arc::new(build_grid(&op, rmin, rfar));
    let (y, yp, e) = regular_start::<DD>(&op, rmin, 1);
    let reg = Solution::integrate(&op, &[], grid.clone(), true, y, yp, e);
    let (y, yp, e) = decaying_start::<DD>(&op, rfar);
    let dec = Solution::integrate(&op, &[], grid.clone(), false, y, yp, e);
    // stitch away from nodes of the zero solution
    let r_match = [1.0, 0.7, 1.4, 0.5, 2.0]
        .iter()
        .map(|c| c * s)
        .map(|r| {
            let (y, yp, _) = reg.state(r);
            let (y, yp) = (y[0].to_f64().abs(), yp[0].to_f64().abs());
            (y / (y + r * yp), r)
        })
        .fold((-1.0, s), |a, b| if b.0 > a.0 + 0.1 { b } else { a })
        .1;
    let (yr, ypr, er) = reg.state(r_match);
    let (yd, ypd, ed) = dec.state(r_match);
    let w = ((ypr[0] * yd[0] - yr[0] * ypd[0]).to_f64()) * 2f64.powi(er + ed);
    let wn = w / (2.0 * op.nu);
    let dec_to_reg = (yr[0] / yd[0]).to_f64() * 2f64.powi(er - ed);
    let profile = ZeroProfile { n: op.n, nu: op.nu, reg, dec, r_match, dec_to_reg, norm: 1.0 };
    let kernel = wn.abs() < ZERO_WRONSKIAN;
    let near = (1e-5 * s, 1e-4 * s);
    let far = (1e4 * s, 1e5 * s);
    let with_log = (op.nu - 1.0).abs() < 1e-12 || op.nu < 1e-12;
    let regular_at_0 = fit_exponent(|r| profile.reg.value(r, 0), near.0, near.1, false)?;
    let regular_at_inf = if kernel {
        fit_exponent(|r| profile.u(r), far.0, far.1, with_log)?
    } else {
        fit_exponent(|r| profile.reg.value(r, 0), far.0, far.1, with_log)?
    };
    let decaying_at_inf = fit_exponent(|r| profile.dec.value(r, 0), far.0, far.1, false)?;
    let decaying_at_0 = if kernel {
        fit_exponent(|r| profile.u(r), near.0, near.1, false)?
    } else {
        fit_exponent(|r| profile.dec.value(r, 0), near.0, near.1, with_log)?
    };
    Ok(ZeroSolutions { profile, wronskian: wn, regular_at_0, regular_at_inf, decaying_at_0, decaying_at_inf })
}

// --------------------------------------------------------- kernel detection

#[derive(Debug, Clone, Serialize)]
pub struct ModeEntry {
    pub j: u32,
    pub nu: f64,
    pub multiplicity: u32,
    /// Number of independent zero solutions carried (0 or the multiplicity).
    pub count: u32,
    pub wronskian: f64,
    /// Decay exponent a_∞ of the zero solution, f ~ r^{−a_∞} (function convention).
    pub decay_exponent: f64,
    /// Exponent of the regular solution at 0 (function convention).
    pub regular_exponent: f64,
    pub l2: bool,
}

/// A zero solution f(r)Y with Y running over an orthonormal basis of the mode.
#[derive(Debug, Clone)]
pub struct KernelMode {
    pub j: u32,
    pub nu: f64,
    pub multiplicity: u32,
    /// L² modes: ∫f² r^{n−1} dr = 1. Resonances: f ~ r^{−(ν+(n−2)/2)} with unit coefficient.
    pub profile: ZeroProfile,
    /// Coefficient of the leading power r^{−(ν+(n−2)/2)} in f.
    pub leading_coeff: f64,
}

impl KernelMode {
    /// Σ over the basis of the mode: ψ_i(z)ψ_i(z′) = f(r)f(r′)Π_j(cos θ).
    pub fn outer(&self, geom: &ConeGeometry, r: f64, rp: f64, cos_theta: f64) -> Result<f64> {
        let mode = Mode { j: self.j, lambda: 0.0, nu: self.nu, multiplicity: self.multiplicity };
        let lambda = mode_table(geom, self.j).into_iter().find(|m| m.j == self.j).map_or(0.0, |m| m.lambda);
        let mode = Mode { lambda, ..mode };
        Ok(self.profile.f(r) * self.profile.f(rp) * geom.projection(&mode, cos_theta)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroModeReport {
    pub n: u32,
    pub entries: Vec<ModeEntry>,
    /// min over L² modes of a_∞ − (n−2); +∞ without L² kernel.
    pub m: f64,
    pub m_prime: f64,
    pub resonance: bool,
    pub kernel_dimension: u32,
    pub m_prime_condition: bool,
    /// The identity here: the radial basis already diagonalizes the pairing.
    pub alpha_matrix: Vec<Vec<f64>>,
    /// Leading coefficient of each L² mode at infinity (function convention).
    pub leading_coeffs: Vec<f64>,
    #[serde(skip)]
    pub kernel: Vec<KernelMode>,
    #[serde(skip)]
    pub resonances: Vec<KernelMode>,
}

/// Zero-energy analysis of every mode up to j_max.
pub fn detect_kernel(problem: &RadialProblem, j_max: u32) -> Result<ZeroModeReport> {
    let n = problem.n;
    let half = (n as f64 - 2.0) / 2.0;
    let mut entries = Vec::new();
    let mut kernel = Vec::new();
    let mut resonances = Vec::new();
    let mut modes = mode_table(&problem.geom, j_max);
    modes.sort_by_key(|m| m.j);
    for mode in modes {
        let op = reduce(problem, mode, 0.0);
        let zs = zero_solutions(&op)?;
        let wn = zs.wronskian;
        let nu = mode.nu;
        let mut count = 0;
        let mut l2 = false;
        if wn.abs() < ZERO_WRONSKIAN {
            if (nu - 1.0).abs() < 1e-6 && nu != 1.0 {
                return Err(Error::Ambiguity(format!("mode {} has ν = {nu} at the L² threshold", mode.j)));
            }
            let fit = zs.regular_at_inf;
            // fitted decay must agree with the decaying branch
            if (fit.value - (0.5 - nu)).abs() > 1e-3 {
                return Err(Error::Ambiguity(format!(
                    "mode {}: zero solution decays like r^{:.4}, expected r^{:.4}",
                    mode.j,
                    fit.value,
                    0.5 - nu
                )));
            }
            l2 = nu > 1.0;
            count = mode.multiplicity;
            let mut prof = zs.profile.clone();
            let sign = prof.leading_coeff_inf().signum();
            if l2 {
                let nrm = prof.norm_integral(0)?;
                prof = prof.scaled(sign / nrm.sqrt());
                let lc = prof.leading_coeff_inf();
                kernel.push(KernelMode { j: mode.j, nu, multiplicity: mode.multiplicity, profile: prof, leading_coeff: lc });
            } else {
                let lc = prof.leading_coeff_inf();
                prof = prof.scaled(1.0 / lc);
                resonances.push(KernelMode { j: mode.j, nu, multiplicity: mode.multiplicity, profile: prof, leading_coeff: 1.0 });
            }
        } else if wn.abs() < AMBIGUOUS_WRONSKIAN {
            return Err(Error::Ambiguity(format!(
                "mode {}: zero-energy Wronskian {wn:e} is neither clearly zero nor clearly nonzero",
                mode.j
            )));
        }
        entries.push(ModeEntry {
            j: mode.j,
            nu,
            multiplicity: mode.multiplicity,
            count,
            wronskian: wn,
            decay_exponent: nu + half,
            regular_exponent: nu - half,
            l2,
        });
    }
    let m = kernel.iter().map(|km| km.nu - half).fold(f64::INFINITY, f64::min);
    let m_prime = m.min(2.0);
    let kernel_dimension: u32 = kernel.iter().map(|k| k.multiplicity).sum();
    let leading_coeffs = kernel.iter().map(|k| k.leading_coeff).collect();
    let d = kernel_dimension as usize;
    let alpha_matrix = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    Ok(ZeroModeReport {
        n,
        entries,
        m,
        m_prime,
        resonance: !resonances.is_empty(),
        kernel_dimension,
        m_prime_condition: kernel.is_empty() || crate::index_algebra::m_prime_condition(n, m_prime),
        alpha_matrix,
        leading_coeffs,
        kernel,
        resonances,
    })
}

// ------------------------------------------------------------ source solves

/// Particular solution of −U₁'' + Q U₁ = coef·r^power·U₀ at zero energy with
/// U₀ the regular solution of the same channel, itself regular at 0.
#[derive(Debug, Clone)]
pub struct SourceSolution {
    pub sol: Solution<DD>,
    /// U₀ = base_scale·(regular branch), so U₁ scales the same way.
    pub base_scale: f64,
    pub r_out: f64,
}

impl SourceSolution {
    pub fn u(&self, r: f64) -> f64 {
        self.base_scale * self.sol.value(r, 1)
    }
    pub fn source_u(&self, r: f64) -> f64 {
        self.base_scale * self.sol.value(r, 0)
    }
    /// Re-apply the operator by finite differences; relative residual at r.
    pub fn residual(&self, r: f64, coupling: Coupling) -> f64 {
        let (u, up) = self.sol.value_deriv(r, 1);
        let hstep = 1e-4 * r;
        let (_, upp1) = self.sol.value_deriv(r + hstep, 1);
        let (_, upm1) = self.sol.value_deriv(r - hstep, 1);
        let upp = (upp1 - upm1) / (2.0 * hstep);
        let q = self.sol.op.q::<f64>(r);
        let s = coupling.coef * r.powi(coupling.power) * self.sol.value(r, 0);
        let _ = up;
        (-upp + q * u - s).abs() / (q.abs() * u.abs() + s.abs()).max(1e-300)
    }
}

/// Admissible growth window in the reduced variable: U = O(r^{at_0}) at 0
/// and U = O(r^{at_inf}) at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub at_0: f64,
    pub at_inf: f64,
}

/// Solve the chained source problem for the zero-energy regular solution of
/// `op` scaled by `base_scale`. The solution is required to stay within
/// `window`; a forced growth outside it is reported with the obstruction
/// (the coefficient of the excess growth).
pub fn solve_source(
    op: &RadialOperator,
    coupling: Coupling,
    base_scale: f64,
    window: Window,
    r_out: f64,
) -> Result<SourceSolution> {
    let op = op.with_k(0.0);
    let rmin = r_min_for::<DD>(&op, 1e-6);
    let grid = Arc::new(build_grid(&op, rmin, r_out));
    let (y, yp, e) = regular_start::<DD>(&op, rmin, 2);
    let sol = Solution::integrate(&op, &[coupling], grid, true, y, yp, e);
    let out = SourceSolution { sol, base_scale, r_out };
    let lo = r_out / 100.0;
    let fit = fit_exponent(|r| out.u(r), lo, r_out / 10.0, false)?;
    let near = fit_exponent(|r| out.u(r), 10.0 * rmin, 100.0 * rmin, false)?;
    if near.value < window.at_0 - 1e-3 {
        return Err(Error::Solvability { msg: "solution singular at the origin".into(), pairing: near.value });
    }
    if fit.value > window.at_inf + 0.05 {
        let pairing = out.u(r_out / 10.0) / (r_out / 10.0).powf(fit.value);
        return Err(Error::Solvability {
            msg: format!("solution grows like r^{:.3}, outside the window r^{}", fit.value, window.at_inf),
            pairing,
        });
    }
    Ok(out)
}

/// Terms c·r^p (log r)^l of an asymptotic expansion at infinity.
#[derive(Debug, Clone, Serialize)]
pub struct Asymptotic {
    /// (power p, log power l, coefficient, standard error)
    pub terms: Vec<(f64, u32, f64, f64)>,
    pub fit: LinearFit,
}

impl Asymptotic {
    pub fn coeff(&self, p: f64, l: u32) -> Option<(f64, f64)> {
        self.terms.iter().find(|t| (t.0 - p).abs() < 1e-9 && t.1 == l).map(|t| (t.2, t.3))
    }
    /// The same expansion with every power shifted by `s` (U → r^s U).
    pub fn shifted(&self, s: f64) -> Self {
        Asymptotic { terms: self.terms.iter().map(|t| (t.0 + s, t.1, t.2, t.3)).collect(), fit: self.fit.clone() }
    }
}

/// Least-squares fit of `sample` over [lo, hi] in the basis r^p (log r)^l.
/// Rows are weighted by the leading term so that the fit is relative.
pub fn fit_asymptotic(sample: impl Fn(f64) -> f64, lo: f64, hi: f64, basis: &[(f64, u32)]) -> Result<Asymptotic> {
    let npts = (basis.len() * 6).max(40);
    let lead = basis.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
    let mut d = Vec::new();
    let mut y = Vec::new();
    for i in 0..npts {
        let r = lo * (hi / lo).powf(i as f64 / (npts - 1) as f64);
        let sc = r.powf(-lead);
        d.push(basis.iter().map(|&(p, l)| r.powf(p) * r.ln().powi(l as i32) * sc).collect());
        y.push(sample(r) * sc);
    }
    let fit = least_squares(&d, &y, None)?;
    let terms = basis.iter().enumerate().map(|(i, &(p, l))| (p, l, fit.coef[i], fit.stderr[i])).collect();
    Ok(Asymptotic { terms, fit })
}

/// Limit at infinity of the boundary term (x∂ₓu)v − u(x∂ₓv), x = 1/r, for
/// b-variable expansions u, v (powers of r with log factors). A pair
/// a r^p logˡr, b r^q logᵐr contributes −ab r^{p+q}[(p − q)log^{l+m} + (l − m)log^{l+m−1}];
/// surviving growing or logarithmic terms whose coefficient exceeds 5σ make the limit diverge.
pub fn boundary_pairing(u: &Asymptotic, v: &Asymptotic) -> Result<f64> {
    // (power, log power) -> (coefficient, variance)
    let mut acc: Vec<(f64, i32, f64, f64)> = Vec::new();
    let mut add = |s: f64, l: i32, c: f64, var: f64| {
        if c == 0.0 && var == 0.0 {
            return;
        }
        match acc.iter_mut().find(|e| (e.0 - s).abs() < 1e-9 && e.1 == l) {
            Some(e) => {
                e.2 += c;
                e.3 += var;
            }
            None => acc.push((s, l, c, var)),
        }
    };
    for &(p, l, a, sa) in &u.terms {
        for &(q, m, b, sb) in &v.terms {
            let var_ab = (a * sb).powi(2) + (b * sa).powi(2);
            let (l, m) = (l as i32, m as i32);
            add(p + q, l + m, -(p - q) * a * b, (p - q).powi(2) * var_ab);
            if l + m > 0 {
                add(p + q, l + m - 1, -((l - m) as f64) * a * b, ((l - m) as f64).powi(2) * var_ab);
            }
        }
    }
    let mut total = 0.0;
    for (s, l, c, var) in acc {
        if s < -1e-9 {
            continue;
        }
        if s.abs() <= 1e-9 && l == 0 {
            total += c;
            continue;
        }
        let scale = c.abs().max(1e-300);
        if scale > 5.0 * var.sqrt() && scale > 1e-10 * total.abs().max(1e-300) {
            return Err(Error::Numeric {
                msg: format!("pairing diverges: term r^{s}·log^{l} r with coefficient {c:e}"),
                achieved: c,
            });
        }
    }
    Ok(total)
}

// ------------------------------------------------------------ finite part

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinitePart {
    pub value: f64,
    pub log_coeff: f64,
    pub stderr: f64,
}

/// Finite part of ∫_{r<R}|ψ|² dV for ψ ~ c r^{−2} on a four-dimensional end:
/// fit c₁ log R + c₀ over R ∈ [10², 10⁶]; c₁ must be 1 for the normalized ψ.
pub fn finite_part_norm(cumulative: impl Fn(f64) -> f64) -> Result<FinitePart> {
    let mut d = Vec::new();
    let mut y = Vec::new();
    for i in 0..=32 {
        let rr = 1e2 * 10f64.powf(4.0 * i as f64 / 32.0);
        d.push(vec![rr.ln(), 1.0, rr.powi(-2)]);
        y.push(cumulative(rr));
    }
    let f = least_squares(&d, &y, None)?;
    if (f.coef[0] - 1.0).abs() > 1e-4 {
        return Err(Error::Precondition(format!("log coefficient {} differs from 1: ψ not normalized", f.coef[0])));
    }
    Ok(FinitePart { value: f.coef[1], log_coeff: f.coef[0], stderr: f.stderr[1] })
}

/// ∫_{r<R}|f Y|² dV for a radial function with orthonormal Y (adaptive quadrature).
pub fn radial_mass(f: impl Fn(f64) -> f64, n: u32, rr: f64) -> f64 {
    let g = |r: f64| f(r).powi(2) * r.powi(n as i32 - 1);
    let mut acc = 0.0;
    let mut a = 0.0;
    let mut b = 1e-3_f64.min(rr);
    while a < rr {
        acc += crate::quad::integrate(g, a, b, 1e-15, 1e-13, 2000).map(|q| q.value).unwrap_or(f64::NAN);
        a = b;
        b = (b * 4.0).min(rr);
    }
    acc
}

/// Volume of the link S^{n−1} (or its scaled version).
pub fn link_volume(problem: &RadialProblem) -> Result<f64> {
    if problem.is_euclidean() {
        Ok(sphere_volume(problem.n - 1))
    } else {
        problem.geom.link_volume()
    }
}

// ------------------------------------------------------- Green constants

/// A constant fixed by Green's formula, measured from fitted asymptotics.
#[derive(Debug, Clone, Serialize)]
pub struct GreenConstant {
    pub label: String,
    pub predicted: f64,
    pub measured: f64,
    pub stderr: f64,
    pub rel_err: f64,
    /// Auxiliary numbers of the measurement (name, value).
    pub details: Vec<(String, f64)>,
}

impl GreenConstant {
    fn new(label: &str, predicted: f64, measured: f64, stderr: f64, details: Vec<(String, f64)>) -> Self {
        GreenConstant {
            label: label.into(),
            predicted,
            measured,
            stderr,
            rel_err: (measured - predicted).abs() / predicted.abs(),
            details,
        }
    }
}

fn distinct(basis: &[(f64, u32)]) -> Vec<(f64, u32)> {
    let mut out: Vec<(f64, u32)> = Vec::new();
    for &b in basis {
        if !out.iter().any(|o| (o.0 - b.0).abs() < 1e-9 && o.1 == b.1) {
            out.push(b);
        }
    }
    out
}

fn mode0(problem: &RadialProblem) -> Result<RadialOperator> {
    Ok(reduce(problem, problem.mode(0)?, 0.0))
}

/// Resonance in mode 0 (n = 3 or 4): normalize φ in L²_b, solve P_b u = φ,
/// and return ab for u ~ b x^{−ν}, φ ~ a x^{ν} with a, b the coefficients of
/// angularly constant functions. Green's formula predicts ab = −1/(2ν Vol).
pub fn resonance_ab(problem: &RadialProblem) -> Result<GreenConstant> {
    let rep = detect_kernel(problem, 1)?;
    let res = rep
        .resonances
        .iter()
        .find(|m| m.j == 0)
        .ok_or_else(|| Error::Precondition("no resonance in mode 0".into()))?;
    let nu = res.nu;
    let vol = link_volume(problem)?;
    // ⟨φ, φ⟩_b = ∫ f² r^{n−3} dr
    let nb = res.profile.norm_integral(-2)?;
    let a_h = res.leading_coeff / nb.sqrt();
    let op = mode0(problem)?;
    let s = problem.potential.scale();
    let r_out = 1e7 * s;
    let src = solve_source(
        &op,
        Coupling { coef: 1.0, power: -2 },
        res.profile.norm / nb.sqrt(),
        Window { at_0: nu + 0.5, at_inf: nu + 0.5 },
        r_out,
    )?;
    let p = nu + 0.5;
    let q = 0.5 - nu;
    let basis = [(p, 0), (q, 1), (q, 0), (p - 2.0, 1), (p - 2.0, 0), (q - 1.0, 0), (q - 2.0, 1), (q - 2.0, 0)];
    let fit = fit_asymptotic(|r| src.u(r), 1e2 * s, 1e5 * s, &distinct(&basis))?;
    let (b_h, b_se) = fit.coeff(p, 0).expect("basis term");
    let phi = fit_asymptotic(|r| res.profile.u(r) / nb.sqrt(), 1e2 * s, 1e5 * s, &distinct(&[(q, 0), (q - 2.0, 0), (q - 2.0, 1)]))?;
    let pairing = boundary_pairing(&fit.shifted(-0.5), &phi.shifted(-0.5))?;
    let ab = a_h * b_h / vol;
    Ok(GreenConstant::new(
        &format!("ab (n = {}, resonance)", problem.n),
        -1.0 / (2.0 * nu * vol),
        ab,
        (a_h * b_se / vol).abs(),
        vec![
            ("a_h".into(), a_h),
            ("b_h".into(), b_h),
            ("boundary_pairing".into(), pairing),
            ("log_coeff_u".into(), fit.coeff(q, 1).unwrap().0),
        ],
    ))
}

/// L² zero mode in mode 0 with m = 0 (n = 5): θ regular at 0 with Pθ = ψ₀
/// tends to e₀ at infinity; Green's formula predicts e₀ = −1/(3c₀Vol) with
/// ψ₀ ~ c₀ r^{−3}.
pub fn theta_coefficient(problem: &RadialProblem) -> Result<GreenConstant> {
    let rep = detect_kernel(problem, 1)?;
    let km = rep
        .kernel
        .iter()
        .find(|m| m.j == 0)
        .ok_or_else(|| Error::Precondition("no L² zero mode in mode 0".into()))?;
    let nu = km.nu;
    let vol = link_volume(problem)?;
    let c0 = km.leading_coeff / vol.sqrt();
    let s = problem.potential.scale();
    let p = nu + 0.5;
    let q = 0.5 - nu;
    let src = solve_source(&mode0(problem)?, Coupling { coef: 1.0, power: 0 }, km.profile.norm, Window { at_0: p, at_inf: p }, 1e7 * s)?;
    let basis = [(p, 0), (p - 1.0, 0), (p - 2.0, 0), (p - 2.0, 1), (q, 0), (q, 1), (q - 1.0, 0), (q - 2.0, 0)];
    let fit = fit_asymptotic(|r| src.u(r), 1e2 * s, 1e5 * s, &distinct(&basis))?;
    let (e, se) = fit.coeff(p, 0).expect("basis term");
    let e0 = e / vol.sqrt();
    let theta = fit.shifted(-0.5);
    let psi = fit_asymptotic(|r| km.profile.u(r), 1e2 * s, 1e5 * s, &[(q, 0), (q - 2.0, 0)])?.shifted(-0.5);
    Ok(GreenConstant::new(
        "e0 (n = 5, m = 0)",
        -1.0 / (3.0 * c0 * vol),
        e0,
        se / vol.sqrt(),
        vec![
            ("c0".into(), c0),
            ("boundary_pairing".into(), boundary_pairing(&theta, &psi)?),
            ("source_residual".into(), src.residual(3.0 * s, Coupling { coef: 1.0, power: 0 })),
        ],
    ))
}

/// Mode-0 solution of P_b ṽ = x^{−2}w for a problem whose kernel has m ≥ 2,
/// where w is the zero-energy mode-0 solution with w ~ x^{−(n−2)/2}/((n−2)Vol).
/// Returns the coefficient of x^{−n/2−1} in ṽ; the predicted value is the
/// published 1/(2n(n−2)Vol).
pub fn lemma_coefficient(problem: &RadialProblem) -> Result<GreenConstant> {
    let n = problem.n as f64;
    let rep = detect_kernel(problem, 3)?;
    if !(rep.m >= 2.0) {
        return Err(Error::Precondition(format!("needs m >= 2, found {}", rep.m)));
    }
    let op = mode0(problem)?;
    let nu = op.nu;
    let p = nu + 0.5;
    let s = problem.potential.scale();
    let vol = link_volume(problem)?;
    let zs = zero_solutions(&op)?;
    let reg_fit = fit_asymptotic(
        |r| zs.profile.reg.value(r, 0),
        1e2 * s,
        1e5 * s,
        &distinct(&[(p, 0), (p - 2.0, 0), (p - 2.0, 1), (0.5 - nu, 0), (p - 4.0, 0)]),
    )?;
    let alpha = reg_fit.coeff(p, 0).unwrap().0;
    let target = 1.0 / ((n - 2.0) * vol);
    let base = target / alpha;
    let top = p + 2.0;
    let src = solve_source(&op, Coupling { coef: 1.0, power: 0 }, base, Window { at_0: p, at_inf: top }, 1e7 * s)?;
    let basis = [(top, 0), (p, 1), (p, 0), (p - 2.0, 1), (p - 2.0, 0), (p - 4.0, 0)];
    let fit = fit_asymptotic(|r| src.u(r), 1e2 * s, 1e5 * s, &distinct(&basis))?;
    // w and ṽ are angularly constant: U ~ c r^{n/2+3/2} is ṽ ~ c x^{−n/2−1}
    let (c, se) = fit.coeff(top, 0).unwrap();
    Ok(GreenConstant::new(
        &format!("lemma coefficient (n = {}, m = {})", problem.n, rep.m),
        1.0 / (2.0 * n * (n - 2.0) * vol),
        c,
        se,
        vec![("w_constant".into(), target), ("regular_growth".into(), alpha)],
    ))
}
