//! Polyhomogeneous index sets and per-face index families.
//!
//! An [`IndexSet`] lists (order, log-power) pairs explicitly below a
//! truncation order; anything strictly above the truncation is unspecified.
//! Text form: `{(-2,0),(-1,0),(0,1)}+trunc(2)`; the suffix is omitted when
//! the set is fully specified.

use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexEntry {
    pub order: f64,
    pub logpower: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSet {
    entries: Vec<IndexEntry>,
    /// Orders strictly above this value are unspecified; `+∞` when none are.
    truncation: f64,
}

impl Default for IndexSet {
    fn default() -> Self {
        Self::empty()
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet { entries: Vec::new(), truncation: f64::INFINITY }
    }

    pub fn new(pairs: &[(f64, u32)], truncation: Option<f64>) -> Self {
        let mut entries: Vec<IndexEntry> =
            pairs.iter().map(|&(order, logpower)| IndexEntry { order, logpower }).collect();
        normalize(&mut entries);
        IndexSet { entries, truncation: truncation.unwrap_or(f64::INFINITY) }
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation.is_finite().then_some(self.truncation)
    }

    /// True for the empty set with no unspecified tail (rapid vanishing).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && !self.truncation.is_finite()
    }

    pub fn is_log_bearing(&self) -> bool {
        self.entries.iter().any(|e| e.logpower > 0)
    }

    pub fn shift(&self, a: f64) -> IndexSet {
        IndexSet {
            entries: self
                .entries
                .iter()
                .map(|e| IndexEntry { order: e.order + a, logpower: e.logpower })
                .collect(),
            truncation: self.truncation + a,
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        normalize(&mut entries);
        IndexSet { entries, truncation: self.truncation.min(other.truncation) }
    }

    /// Leading entry: smallest order, largest log power at that order.
    pub fn min_order(&self) -> Option<IndexEntry> {
        let first = self.entries.first()?;
        self.entries.iter().filter(|e| e.order == first.order).last().copied()
    }

    /// Whether a term k^order (log k)^logpower is admitted, with orders
    /// compared to within `tol`.
    pub fn admits(&self, order: f64, logpower: u32, tol: f64) -> bool {
        if order > self.truncation + tol {
            return true;
        }
        self.entries
            .iter()
            .any(|e| (e.order - order).abs() <= tol && logpower <= e.logpower)
    }
}

fn normalize(entries: &mut Vec<IndexEntry>) {
    entries.sort_by(|a, b| a.order.total_cmp(&b.order).then(a.logpower.cmp(&b.logpower)));
    entries.dedup_by(|a, b| a.order == b.order && a.logpower == b.logpower);
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({},{})", e.order, e.logpower)?;
        }
        write!(f, "}}")?;
        if self.truncation.is_finite() {
            write!(f, "+trunc({})", self.truncation)?;
        }
        Ok(())
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Syntax(format!("bad number '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::Syntax(format!("non-finite order '{s}'")));
    }
    Ok(v)
}

impl FromStr for IndexSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let body_end = s.find('}').ok_or_else(|| Error::Syntax("missing '}'".into()))?;
        if !s.starts_with('{') {
            return Err(Error::Syntax("index set must start with '{'".into()));
        }
        let body = &s[1..body_end];
        let rest = s[body_end + 1..].trim();
        let mut pairs = Vec::new();
        let mut cur = body.trim();
        while !cur.is_empty() {
            let open = cur.strip_prefix('(').ok_or_else(|| Error::Syntax(format!("expected '(' at '{cur}'")))?;
            let close = open.find(')').ok_or_else(|| Error::Syntax("unclosed '('".into()))?;
            let inner = &open[..close];
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| Error::Syntax(format!("expected (order,logpower), got '({inner})'")))?;
            let order = parse_num(a)?;
            let logpower: u32 = b
                .trim()
                .parse()
                .map_err(|_| Error::Syntax(format!("log power must be a natural number, got '{}'", b.trim())))?;
            pairs.push((order, logpower));
            cur = open[close + 1..].trim();
            if let Some(r) = cur.strip_prefix(',') {
                cur = r.trim();
                if cur.is_empty() {
                    return Err(Error::Syntax("trailing ','".into()));
                }
            } else if !cur.is_empty() {
                return Err(Error::Syntax(format!("unexpected '{cur}'")));
            }
        }
        let truncation = if rest.is_empty() {
            None
        } else {
            let t = rest
                .strip_prefix("+trunc(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Syntax(format!("expected '+trunc(t)', got '{rest}'")))?;
            Some(parse_num(t)?)
        };
        Ok(IndexSet::new(&pairs, truncation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Face {
    Zf,
    Bf0,
    Rb0,
    Lb0,
    Sc,
    Bf,
    Lb,
    Rb,
}

impl Face {
    pub const ALL: [Face; 8] =
        [Face::Zf, Face::Bf0, Face::Rb0, Face::Lb0, Face::Sc, Face::Bf, Face::Lb, Face::Rb];

    pub fn label(self) -> &'static str {
        match self {
            Face::Zf => "zf",
            Face::Bf0 => "bf0",
            Face::Rb0 => "rb0",
            Face::Lb0 => "lb0",
            Face::Sc => "sc",
            Face::Bf => "bf",
            Face::Lb => "lb",
            Face::Rb => "rb",
        }
    }
}

impl FromStr for Face {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Face::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::Syntax(format!("unknown face '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IndexFamily {
    sets: [IndexSet; 8],
}

impl IndexFamily {
    pub fn get(&self, face: Face) -> &IndexSet {
        &self.sets[face as usize]
    }

    pub fn set(&mut self, face: Face, s: IndexSet) {
        self.sets[face as usize] = s;
    }
}

/// Resolvent structure theorems whose index statements are encoded here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Theorem {
    /// Asymptotically Euclidean, nontrivial L² kernel.
    EuclideanNullspace,
    /// Asymptotically conic, nontrivial L² kernel.
    ConicNullspace,
    /// Euclidean ℝ³ with kernel and/or resonance.
    Dim3Full,
    /// Conic n = 3 with a unique resonance of boundary order ν ∈ [½, 1).
    ConicDim3Resonance { nu: f64 },
    /// Conic n = 3 with a unique zero mode of boundary order ν ∈ (1, 3/2].
    ConicDim3ZeroMode { nu: f64 },
}

/// The m′ > (5 − n)/2 hypothesis for n = 3, 4, 5.
pub fn m_prime_condition(n: u32, m_prime: f64) -> bool {
    !(3..=5).contains(&n) || m_prime > (5.0 - n as f64) / 2.0
}

fn single(order: f64) -> IndexSet {
    IndexSet::new(&[(order, 0)], Some(order))
}

/// Index family stated by `theorem` for dimension `n` and decay index `m_prime`.
pub fn theorem_index_family(theorem: Theorem, n: u32, m_prime: f64) -> Result<IndexFamily> {
    if n < 3 {
        return Err(Error::Precondition(format!("dimension must be >= 3, got {n}")));
    }
    if !(0.0..=2.0).contains(&m_prime) {
        return Err(Error::Precondition(format!("m' must lie in [0, 2], got {m_prime}")));
    }
    if matches!(theorem, Theorem::EuclideanNullspace | Theorem::ConicNullspace)
        && !m_prime_condition(n, m_prime)
    {
        return Err(Error::Precondition(format!(
            "m' > (5 - n)/2 condition fails for n = {n}, m' = {m_prime}"
        )));
    }
    theorem_index_family_unchecked(theorem, n, m_prime)
}

/// As [`theorem_index_family`] without the m′ hypothesis; used for the
/// n = 5, m = 0 case whose zf terms the Euclidean statement still describes.
pub fn theorem_index_family_unchecked(theorem: Theorem, n: u32, m_prime: f64) -> Result<IndexFamily> {
    let mut fam = IndexFamily::default();
    let edge = n as f64 / 2.0 - 4.0 + m_prime;
    fam.set(Face::Sc, IndexSet::new(&[(0.0, 0)], Some(0.0)));
    match theorem {
        Theorem::EuclideanNullspace => {
            fam.set(Face::Zf, IndexSet::new(&[(-2.0, 0), (-1.0, 0), (0.0, 1)], Some(0.0)));
            fam.set(Face::Bf0, single(-2.0));
            fam.set(Face::Lb0, single(edge));
            fam.set(Face::Rb0, single(edge));
        }
        Theorem::ConicNullspace => {
            let s = IndexSet::new(&[(-2.0, 0), (-1.0, 0)], Some(-1.0));
            fam.set(Face::Zf, s.clone());
            fam.set(Face::Bf0, s);
            fam.set(Face::Lb0, single(edge));
            fam.set(Face::Rb0, single(edge));
        }
        Theorem::Dim3Full => {
            if n != 3 {
                return Err(Error::Precondition(format!("dimension-3 statement used with n = {n}")));
            }
            fam.set(Face::Zf, single(-2.0));
            fam.set(Face::Bf0, single(-2.0));
            fam.set(Face::Lb0, single(-1.5));
            fam.set(Face::Rb0, single(-1.5));
        }
        Theorem::ConicDim3Resonance { nu } => {
            if n != 3 || !(0.5..1.0).contains(&nu) {
                return Err(Error::Precondition(format!("conic resonance needs n = 3, nu in [1/2, 1); got n = {n}, nu = {nu}")));
            }
            fam.set(Face::Zf, single(-2.0 * nu));
            fam.set(Face::Bf0, single(-2.0));
            fam.set(Face::Lb0, single(-nu - 1.0));
            fam.set(Face::Rb0, single(-nu - 1.0));
        }
        Theorem::ConicDim3ZeroMode { nu } => {
            if n != 3 || !(nu > 1.0 && nu <= 1.5) {
                return Err(Error::Precondition(format!("conic zero mode needs n = 3, nu in (1, 3/2]; got n = {n}, nu = {nu}")));
            }
            let sub = 2.0 * nu - 4.0;
            fam.set(Face::Zf, IndexSet::new(&[(-2.0, 0), (sub, 0)], Some(sub)));
            fam.set(Face::Bf0, single(-2.0));
            fam.set(Face::Lb0, single(nu - 3.0));
            fam.set(Face::Rb0, single(nu - 3.0));
        }
    }
    Ok(fam)
}
