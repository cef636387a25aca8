//! Exact-cone model kernels: mode tables, sphere projection kernels, the bf₀
//! and front-face kernels, and the free resolvent as a mode sum.

use crate::error::{Error, Result};
use crate::specfun::{gamma_fn, ik_product, k_nu, sphere_volume};
use serde::Serialize;

/// Link of the cone: cross-section with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Link {
    RoundSphere,
    /// Sphere of radius `c`; eigenvalues j(j+n−2)/c².
    ScaledSphere(f64),
    /// Eigenvalues with multiplicities; no angular kernels available.
    ExplicitSpectrum(Vec<(f64, u32)>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeGeometry {
    pub n: u32,
    pub link: Link,
}

impl ConeGeometry {
    pub fn euclidean(n: u32) -> Self {
        ConeGeometry { n, link: Link::RoundSphere }
    }

    /// Scaled-sphere cone whose mode `j` has order `nu`.
    pub fn with_mode_order(n: u32, j: u32, nu: f64) -> Result<Self> {
        let h = (n as f64 - 2.0) / 2.0;
        let lam = nu * nu - h * h;
        if j == 0 || lam <= 0.0 {
            return Err(Error::Precondition(format!("cannot place order {nu} on mode {j} in dimension {n}")));
        }
        let c = ((j * (j + n - 2)) as f64 / lam).sqrt();
        Ok(ConeGeometry { n, link: Link::ScaledSphere(c) })
    }

    pub fn link_volume(&self) -> Result<f64> {
        match self.link {
            Link::RoundSphere => Ok(sphere_volume(self.n - 1)),
            Link::ScaledSphere(c) => Ok(sphere_volume(self.n - 1) * c.powi(self.n as i32 - 1)),
            Link::ExplicitSpectrum(_) => Err(Error::Capability("explicit spectrum carries no volume".into())),
        }
    }

    /// Π_{E_j}(y, y′) as a function of the angle between y and y′.
    pub fn projection(&self, mode: &Mode, costheta: f64) -> Result<f64> {
        match self.link {
            Link::RoundSphere => Ok(projection_kernel(self.n, mode.j, costheta)),
            Link::ScaledSphere(c) => Ok(projection_kernel(self.n, mode.j, costheta) / c.powi(self.n as i32 - 1)),
            Link::ExplicitSpectrum(_) => Err(Error::Capability(
                "projection kernels need a sphere link".into(),
            )),
        }
    }

    /// Diagonal value Π_{E_j}(y, y) = multiplicity / volume.
    pub fn projection_diag(&self, mode: &Mode) -> Result<f64> {
        Ok(mode.multiplicity as f64 / self.link_volume()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub j: u32,
    pub lambda: f64,
    pub nu: f64,
    pub multiplicity: u32,
}

/// Dimension of degree-j spherical harmonics on S^{n−1}.
pub fn harmonic_dimension(n: u32, j: u32) -> u32 {
    if n == 2 {
        return if j == 0 { 1 } else { 2 };
    }
    let (n, j) = (n as u64, j as u64);
    // (2j+n−2)(j+n−3)! / (j!(n−2)!)
    let mut binom: u64 = 1;
    for i in 1..=(n - 3) {
        binom = binom * (j + i) / i;
    }
    ((2 * j + n - 2) * binom / (n - 2)) as u32
}

pub fn mode_order(n: u32, lambda: f64) -> f64 {
    let h = (n as f64 - 2.0) / 2.0;
    (h * h + lambda).sqrt()
}

/// Modes 0..=j_max of the link, sorted by ν.
pub fn mode_table(geom: &ConeGeometry, j_max: u32) -> Vec<Mode> {
    let n = geom.n;
    let mut modes: Vec<Mode> = match &geom.link {
        Link::RoundSphere => (0..=j_max)
            .map(|j| Mode {
                j,
                lambda: (j * (j + n - 2)) as f64,
                nu: (n as f64 - 2.0) / 2.0 + j as f64,
                multiplicity: harmonic_dimension(n, j),
            })
            .collect(),
        Link::ScaledSphere(c) => (0..=j_max)
            .map(|j| {
                let lambda = (j * (j + n - 2)) as f64 / (c * c);
                Mode { j, lambda, nu: mode_order(n, lambda), multiplicity: harmonic_dimension(n, j) }
            })
            .collect(),
        Link::ExplicitSpectrum(list) => list
            .iter()
            .take(j_max as usize + 1)
            .enumerate()
            .map(|(j, &(lambda, mult))| Mode { j: j as u32, lambda, nu: mode_order(n, lambda), multiplicity: mult })
            .collect(),
    };
    modes.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    modes
}

/// Gegenbauer polynomial C_j^{(λ)}(x) by three-term recurrence.
pub fn gegenbauer(lambda: f64, j: u32, x: f64) -> f64 {
    let mut c0 = 1.0;
    if j == 0 {
        return c0;
    }
    let mut c1 = 2.0 * lambda * x;
    for m in 2..=j {
        let mf = m as f64;
        let c2 = (2.0 * x * (mf + lambda - 1.0) * c1 - (mf + 2.0 * lambda - 2.0) * c0) / mf;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Kernel of the orthogonal projection onto degree-j harmonics on the round
/// S^{n−1}, n ≥ 3, from the addition theorem.
pub fn projection_kernel(n: u32, j: u32, costheta: f64) -> f64 {
    let lam = (n as f64 - 2.0) / 2.0;
    let x = costheta.clamp(-1.0, 1.0);
    (2.0 * j as f64 + n as f64 - 2.0) / ((n as f64 - 2.0) * sphere_volume(n - 1)) * gegenbauer(lam, j, x)
}

/// Density trivialization used when exporting kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Convention {
    /// Schwartz kernel against Riemannian measure.
    Function,
    /// Coefficient of |dκ dy dκ′ dy′/(κκ′)|^{1/2}.
    BHalfDensity,
}

/// Rank-one resonance correction coeff·Π_{E_j}·K_ν(κ)K_ν(κ′).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub nu: f64,
    pub mode_j: u32,
    pub coeff: f64,
}

/// 2/(Γ(ν)Γ(1−ν)) = (2/π) sin νπ: the coefficient for which
/// I_ν + coeff·K_ν = I_{−ν}, i.e. the regular branch is swapped for the
/// resonant one. Equals 2/π at ν = ½.
pub fn resonance_coefficient(nu: f64) -> Result<f64> {
    Ok(2.0 / (gamma_fn(nu)? * gamma_fn(1.0 - nu)?))
}

fn check_tail(bound: f64, tol: f64, what: &str) -> Result<()> {
    if bound > tol {
        return Err(Error::Numeric { msg: format!("{what}: mode tail not below tolerance"), achieved: bound });
    }
    Ok(())
}

/// Upper bound on mult(j+1)/mult(j) for all larger j.
fn growth(n: u32, j: u32) -> f64 {
    harmonic_dimension(n, j + 1) as f64 / harmonic_dimension(n, j).max(1) as f64
}

fn next_sphere_mode(geom: &ConeGeometry, modes: &[Mode]) -> Option<Mode> {
    let jmax = modes.iter().map(|m| m.j).max()?;
    mode_table(geom, jmax + 1).into_iter().find(|m| m.j == jmax + 1)
}

/// Q_{bf₀}(κ, κ′, θ) summed over `modes`. The tail beyond the last mode is
/// bounded by a geometric majorant and must fall below `tol`.
#[allow(clippy::too_many_arguments)]
pub fn bf0_kernel(
    geom: &ConeGeometry,
    modes: &[Mode],
    kappa: f64,
    kappa_p: f64,
    costheta: f64,
    resonance: Option<Resonance>,
    convention: Convention,
    tol: f64,
) -> Result<f64> {
    if !(kappa > 0.0 && kappa_p > 0.0) {
        return Err(Error::Domain("bf0 kernel needs κ, κ′ > 0".into()));
    }
    let (lo, hi) = if kappa <= kappa_p { (kappa, kappa_p) } else { (kappa_p, kappa) };
    let mut sum = 0.0;
    for m in modes {
        sum += geom.projection(m, costheta)? * ik_product(m.nu, lo, hi);
    }
    if let Some(next) = next_sphere_mode(geom, modes) {
        let rho = lo / hi;
        if rho < 1.0 {
            let step = (next.nu - modes.last().unwrap().nu).max(1e-3);
            let first = geom.projection_diag(&next)? * ik_product(next.nu, lo, hi);
            let ratio = rho.powf(step) * growth(geom.n, next.j);
            let bound = if ratio < 1.0 { first / (1.0 - ratio) } else { f64::INFINITY };
            check_tail(bound, tol, "bf0 kernel")?;
        } else if modes.len() > 1 {
            check_tail(f64::INFINITY, tol, "bf0 kernel on κ = κ′")?;
        }
    }
    if let Some(r) = resonance {
        let m = Mode { j: r.mode_j, lambda: 0.0, nu: r.nu, multiplicity: 1 };
        sum += r.coeff * geom.projection(&m, costheta)? * k_nu(r.nu, kappa) * k_nu(r.nu, kappa_p);
    }
    Ok(match convention {
        Convention::BHalfDensity => sum,
        Convention::Function => sum * (kappa * kappa_p).powf(-(geom.n as f64 - 2.0) / 2.0),
    })
}

/// Front-face kernel Σ_j Π_{E_j} e^{−ν_j|log s|}/(2ν_j).
pub fn ff_kernel(geom: &ConeGeometry, modes: &[Mode], s: f64, costheta: f64, tol: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain("front-face variable must be positive".into()));
    }
    let ls = s.ln().abs();
    let mut sum = 0.0;
    for m in modes {
        sum += geom.projection(m, costheta)? * (-m.nu * ls).exp() / (2.0 * m.nu);
    }
    if let Some(next) = next_sphere_mode(geom, modes) {
        let step = (next.nu - modes.last().unwrap().nu).max(1e-3);
        let ratio = (-step * ls).exp() * growth(geom.n, next.j);
        let first = geom.projection_diag(&next)? * (-next.nu * ls).exp() / (2.0 * next.nu);
        let bound = if ratio < 1.0 { first / (1.0 - ratio) } else { f64::INFINITY };
        check_tail(bound, tol, "front-face kernel")?;
    }
    Ok(sum)
}

/// Minimum separation |z − z′| accepted by [`free_resolvent_sum`].
pub const MIN_SEPARATION: f64 = 1e-8;

/// (Δ + k²)^{−1}(z, z′) on ℝⁿ as Σ_j (rr′)^{−(n−2)/2} I_{ν_j}(kr_<)K_{ν_j}(kr_>)Π_{E_j}.
///
/// The k = 0 part of every mode is summed in closed form (the Newtonian
/// kernel) so that only the faster-decaying differences are truncated.
pub fn free_resolvent_sum(n: u32, k: f64, r: f64, r_p: f64, costheta: f64, j_max: u32) -> Result<f64> {
    if n < 3 || !(k > 0.0 && r > 0.0 && r_p > 0.0) {
        return Err(Error::Domain("free_resolvent_sum needs n >= 3 and k, r, r′ > 0".into()));
    }
    let x = costheta.clamp(-1.0, 1.0);
    let d2 = r * r + r_p * r_p - 2.0 * r * r_p * x;
    let d = d2.max(0.0).sqrt();
    if d < MIN_SEPARATION {
        return Err(Error::Domain(format!("points closer than {MIN_SEPARATION}: diagonal singularity")));
    }
    let nf = n as f64;
    let newton = d.powf(2.0 - nf) / ((nf - 2.0) * sphere_volume(n - 1));
    let (a, b) = if r <= r_p { (r, r_p) } else { (r_p, r) };
    let pref = (r * r_p).powf(-(nf - 2.0) / 2.0);
    let mut diff = 0.0;
    for j in 0..=j_max {
        let nu = (nf - 2.0) / 2.0 + j as f64;
        let term = ik_product(nu, k * a, k * b) - (a / b).powf(nu) / (2.0 * nu);
        diff += term * projection_kernel(n, j, x);
    }
    Ok(newton + pref * diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_dimensions() {
        assert_eq!((0..4).map(|j| harmonic_dimension(3, j)).collect::<Vec<_>>(), vec![1, 3, 5, 7]);
        assert_eq!(harmonic_dimension(5, 1), 5);
        assert_eq!(harmonic_dimension(6, 2), 20);
        assert_eq!(harmonic_dimension(4, 2), 9);
    }
}
