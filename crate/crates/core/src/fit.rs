//! Weighted linear least squares with standard errors and conditioning.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Weighted residual 2-norm.
    pub residual_norm: f64,
    /// Ratio of extreme singular values of the column-scaled design.
    pub condition: f64,
    pub dof: usize,
}

/// Minimize Σ w_i (y_i − Σ_j X_ij β_j)². Columns are rescaled to unit norm
/// before the SVD so that the condition number reflects genuine collinearity.
pub fn least_squares(design: &[Vec<f64>], y: &[f64], w: Option<&[f64]>) -> Result<LinearFit> {
    let m = y.len();
    let p = design.first().map_or(0, |r| r.len());
    if m == 0 || p == 0 || design.len() != m {
        return Err(Error::Domain("empty or mismatched design".into()));
    }
    if m < p {
        return Err(Error::Precondition(format!("{m} samples for {p} parameters")));
    }
    let sw: Vec<f64> = (0..m).map(|i| w.map_or(1.0, |w| w[i]).sqrt()).collect();
    let mut a = DMatrix::from_fn(m, p, |i, j| design[i][j] * sw[i]);
    let b = DVector::from_fn(m, |i, _| y[i] * sw[i]);
    let mut colscale = vec![1.0; p];
    for j in 0..p {
        let nrm = a.column(j).norm();
        if nrm == 0.0 {
            return Err(Error::Precondition(format!("basis column {j} vanishes on the samples")));
        }
        colscale[j] = nrm;
        a.column_mut(j).scale_mut(1.0 / nrm);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e15) {
        return Err(Error::Precondition(format!("rank-deficient basis (condition {condition:e})")));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Numeric { msg: e.to_string(), achieved: f64::NAN })?;
    let resid = &b - &a * &x;
    let rn = resid.norm();
    let dof = m - p;
    let s2 = if dof > 0 { rn * rn / dof as f64 } else { 0.0 };
    // (AᵀA)⁻¹ = V Σ⁻² Vᵀ
    let v_t = svd.v_t.as_ref().unwrap();
    let mut stderr = vec![0.0; p];
    for (j, se) in stderr.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, s) in svd.singular_values.iter().enumerate() {
            acc += (v_t[(k, j)] / s).powi(2);
        }
        *se = (s2 * acc).sqrt() / colscale[j];
    }
    let coef = (0..p).map(|j| x[j] / colscale[j]).collect();
    Ok(LinearFit { coef, stderr, residual_norm: rn, condition, dof })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 - 3.0 * x).collect();
        let f = least_squares(&d, &y, None).unwrap();
        assert!((f.coef[0] - 2.0).abs() < 1e-12 && (f.coef[1] + 3.0).abs() < 1e-12);
        assert!(f.residual_norm < 1e-10);
    }

    #[test]
    fn collinear_columns_rejected() {
        let d: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(least_squares(&d, &[0.0; 5], None).is_err());
    }
}
