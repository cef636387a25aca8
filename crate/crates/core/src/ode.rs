//! Gauss–Legendre collocation for linear second-order equations y'' = Q y + F,
//! generic over the working precision (f64 or double-double).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::quad::gauss_legendre;

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2 (about 32 significant digits).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DD {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DD {
    pub const fn new(hi: f64, lo: f64) -> Self {
        DD { hi, lo }
    }
    pub fn hi(self) -> f64 {
        self.hi
    }
    pub fn lo(self) -> f64 {
        self.lo
    }
    /// Exact sum of two doubles.
    pub fn sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        DD { hi, lo }
    }
    /// Exact product of two doubles.
    pub fn prod(a: f64, b: f64) -> Self {
        let p = a * b;
        DD { hi: p, lo: a.mul_add(b, -p) }
    }
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DD::from(self.hi.sqrt());
        }
        let x = self.hi.sqrt();
        let r = self - DD::prod(x, x);
        DD::sum(x, r.hi / (2.0 * x))
    }
}

impl From<f64> for DD {
    fn from(x: f64) -> Self {
        DD { hi: x, lo: 0.0 }
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, o: DD) -> DD {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        DD { hi, lo }
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, o: DD) -> DD {
        self + (-o)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, o: DD) -> DD {
        let p = DD::prod(self.hi, o.hi);
        let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p.hi, lo);
        DD { hi, lo }
    }
}

impl Mul<f64> for DD {
    type Output = DD;
    fn mul(self, o: f64) -> DD {
        let p = DD::prod(self.hi, o);
        let (hi, lo) = quick_two_sum(p.hi, p.lo + self.lo * o);
        DD { hi, lo }
    }
}

impl Add<f64> for DD {
    type Output = DD;
    fn add(self, o: f64) -> DD {
        self + DD::from(o)
    }
}

impl Sub<f64> for DD {
    type Output = DD;
    fn sub(self, o: f64) -> DD {
        self - DD::from(o)
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, o: DD) -> DD {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::from(q3)
    }
}

impl Div<f64> for DD {
    type Output = DD;
    fn div(self, o: f64) -> DD {
        self / DD::from(o)
    }
}

/// Number of collocation stages (order 2·STAGES).
pub const STAGES: usize = 12;

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const EPS: f64;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn tableau() -> &'static Tableau<Self>;
    /// Exact multiplication by 2^e.
    fn ldexp(self, e: i32) -> Self;
}

impl Real for f64 {
    const EPS: f64 = f64::EPSILON;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn tableau() -> &'static Tableau<f64> {
        static T: OnceLock<Tableau<f64>> = OnceLock::new();
        T.get_or_init(|| Tableau::<DD>::get().map(|x| x.hi()))
    }
    fn ldexp(self, e: i32) -> Self {
        self * pow2(e)
    }
}

impl Real for DD {
    const EPS: f64 = 1e-31;
    fn from_f64(x: f64) -> Self {
        DD::from(x)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn tableau() -> &'static Tableau<DD> {
        Tableau::<DD>::get()
    }
    fn ldexp(self, e: i32) -> Self {
        self * pow2(e)
    }
}

fn pow2(e: i32) -> f64 {
    // split so that neither factor leaves the normal range
    if e.abs() > 1000 {
        let h = e / 2;
        2f64.powi(h) * 2f64.powi(e - h)
    } else {
        2f64.powi(e)
    }
}

/// Butcher-type data on [0, 1]: nodes c, weights b, Ā_ij = ∫₀^{c_i}(c_i−s)ℓ_j(s)ds
/// and b̄_j = b_j(1−c_j).
#[derive(Debug, Clone)]
pub struct Tableau<T> {
    pub c: Vec<T>,
    pub b: Vec<T>,
    pub abar: Vec<Vec<T>>,
    pub bbar: Vec<T>,
}

impl<T> Tableau<T> {
    fn map<U>(&self, f: impl Fn(&T) -> U + Copy) -> Tableau<U> {
        Tableau {
            c: self.c.iter().map(f).collect(),
            b: self.b.iter().map(f).collect(),
            abar: self.abar.iter().map(|r| r.iter().map(f).collect()).collect(),
            bbar: self.bbar.iter().map(f).collect(),
        }
    }
}

impl Tableau<DD> {
    fn get() -> &'static Tableau<DD> {
        static T: OnceLock<Tableau<DD>> = OnceLock::new();
        T.get_or_init(|| build_tableau(STAGES))
    }
}

/// Legendre P_n and P_n' at x in double-double.
fn legendre_dd(n: usize, x: DD) -> (DD, DD) {
    let one = DD::from(1.0);
    let mut p0 = one;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = (x * p1 * (2.0 * kf - 1.0) - p0 * (kf - 1.0)) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = (p0 - x * p1) * (n as f64) / (one - x * x);
    (p1, dp)
}

fn build_tableau(s: usize) -> Tableau<DD> {
    let (x0, _) = gauss_legendre(s);
    let one = DD::from(1.0);
    let mut c = Vec::with_capacity(s);
    let mut b = Vec::with_capacity(s);
    for &xf in &x0 {
        let mut x = DD::from(xf);
        for _ in 0..3 {
            let (p, dp) = legendre_dd(s, x);
            x = x - p / dp;
        }
        let (_, dp) = legendre_dd(s, x);
        let w = DD::from(2.0) / ((one - x * x) * dp * dp);
        c.push((x + one) * 0.5);
        b.push(w * 0.5);
    }
    let lag = |j: usize, x: DD| {
        let mut v = one;
        for m in 0..s {
            if m != j {
                v = v * (x - c[m]) / (c[j] - c[m]);
            }
        }
        v
    };
    let mut abar = vec![vec![DD::from(0.0); s]; s];
    for i in 0..s {
        for (j, a) in abar[i].iter_mut().enumerate() {
            let mut acc = DD::from(0.0);
            for m in 0..s {
                let sm = c[i] * c[m];
                acc = acc + c[i] * b[m] * (c[i] - sm) * lag(j, sm);
            }
            *a = acc;
        }
    }
    let bbar = (0..s).map(|j| b[j] * (one - c[j])).collect();
    Tableau { c, b, abar, bbar }
}

/// Solve the dense system `a x = rhs` in place (partial pivoting).
pub fn solve_dense<T: Real>(a: &mut [Vec<T>], rhs: &mut [T]) {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].to_f64().abs().total_cmp(&a[q][col].to_f64().abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f.to_f64() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[row][k] = a[row][k] - f * t;
            }
            let t = rhs[col];
            rhs[row] = rhs[row] - f * t;
        }
    }
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * rhs[k];
        }
        rhs[row] = acc / a[row][row];
    }
}

/// One collocation step of width `h` for y'' = q(s) y + f(s) from (y, y').
/// `q` and `f` hold the coefficient values at the nodes a + c_i h.
/// Returns the end state and, if requested, y at the nodes.
pub fn step<T: Real>(h: T, q: &[T], f: Option<&[T]>, y: T, yp: T, nodes: Option<&mut [T]>) -> (T, T) {
    let tab = T::tableau();
    let s = tab.c.len();
    let h2 = h * h;
    let mut a = vec![vec![T::from_f64(0.0); s]; s];
    let mut sig = vec![T::from_f64(0.0); s];
    for i in 0..s {
        for j in 0..s {
            a[i][j] = -(h2 * q[i] * tab.abar[i][j]);
        }
        a[i][i] = a[i][i] + T::from_f64(1.0);
        sig[i] = q[i] * (y + tab.c[i] * h * yp);
        if let Some(f) = f {
            sig[i] = sig[i] + f[i];
        }
    }
    solve_dense(&mut a, &mut sig);
    if let Some(out) = nodes {
        for i in 0..s {
            let mut acc = T::from_f64(0.0);
            for j in 0..s {
                acc = acc + tab.abar[i][j] * sig[j];
            }
            out[i] = y + tab.c[i] * h * yp + h2 * acc;
        }
    }
    let mut yb = T::from_f64(0.0);
    let mut ypb = T::from_f64(0.0);
    for j in 0..s {
        yb = yb + tab.bbar[j] * sig[j];
        ypb = ypb + tab.b[j] * sig[j];
    }
    (y + h * yp + h2 * yb, yp + h * ypb)
}
