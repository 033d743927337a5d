use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A design whose smallest singular value falls below this fraction of the
/// largest is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `y = b0 + b1 E (1 - R) + b2 E R`
    Full,
    /// `y = b0 + b1 E`
    EffortOnly,
    /// `y = b0 + b1 R`
    RiskOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Full, ModelKind::EffortOnly, ModelKind::RiskOnly];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::EffortOnly => "effort-only",
            ModelKind::RiskOnly => "risk-only",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub model: ModelKind,
    pub beta0: f64,
    pub beta1: f64,
    /// Only present for the full model.
    pub beta2: Option<f64>,
    /// Standard errors of the coefficients in the order above; NaN when the
    /// fit leaves no residual degrees of freedom.
    pub std_errors: Vec<f64>,
    /// Noise level the risk regressor was computed with, when known.
    pub sigma: Option<f64>,
    pub rmse: f64,
    /// Correlation of the fitted values with the observations (0 when either
    /// is constant).
    pub pearson_r: f64,
    pub predictions: Vec<f64>,
}

impl ModelFit {
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![self.beta0, self.beta1];
        c.extend(self.beta2);
        c
    }

    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.predictions).map(|(y, p)| y - p).collect()
    }
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

struct Ols {
    coefficients: Vec<f64>,
    std_errors: Vec<f64>,
    fitted: Vec<f64>,
}

/// Least squares through the SVD of the design. Columns are the given
/// regressors after an intercept column of ones.
fn ols(columns: &[Vec<f64>], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    let p = columns.len() + 1;
    if n < 3 {
        return Err(Error::Validation(format!("at least 3 observations are required, got {n}")));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Validation("regressors and observations differ in length".into()));
    }
    if columns.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("regression inputs must be finite".into()));
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let s = &svd.singular_values;
    let (smax, smin) = (s.max(), s.min());
    if n < p || !(smin > RANK_TOL * smax) {
        return Err(Error::SingularFit(format!(
            "design with {p} columns has singular values in [{smin:.3e}, {smax:.3e}]"
        )));
    }
    let beta = svd.solve(&yv, 0.0).map_err(|e| Error::SingularFit(e.to_string()))?;
    let fitted = &x * &beta;
    let rss = (&yv - &fitted).norm_squared();

    // (X'X)^-1 = V S^-2 V'
    let v_t = svd.v_t.as_ref().expect("V requested");
    let inv_s2 = DMatrix::from_diagonal(&s.map(|x| 1.0 / (x * x)));
    let cov_unscaled = v_t.transpose() * inv_s2 * v_t;
    let sigma2 = if n > p { rss / (n - p) as f64 } else { f64::NAN };
    let std_errors = (0..p).map(|j| (sigma2 * cov_unscaled[(j, j)]).sqrt()).collect();
    Ok(Ols {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        fitted: fitted.iter().copied().collect(),
    })
}

fn finish(model: ModelKind, fit: Ols, y: &[f64]) -> ModelFit {
    let rmse = (y.iter().zip(&fit.fitted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    ModelFit {
        model,
        beta0: fit.coefficients[0],
        beta1: fit.coefficients[1],
        beta2: fit.coefficients.get(2).copied(),
        std_errors: fit.std_errors,
        sigma: None,
        rmse,
        pearson_r: pearson(&fit.fitted, y).unwrap_or(0.0),
        predictions: fit.fitted,
    }
}

/// The effort regressor split by risk: `E (1 - R)` and `E R`.
pub fn full_regressors(effort: &[f64], risk: &[f64]) -> Result<[Vec<f64>; 2]> {
    if effort.len() != risk.len() {
        return Err(Error::Validation("effort and risk differ in length".into()));
    }
    Ok([
        effort.iter().zip(risk).map(|(e, r)| e * (1.0 - r)).collect(),
        effort.iter().zip(risk).map(|(e, r)| e * r).collect(),
    ])
}

pub fn fit_full(effort: &[f64], risk: &[f64], y: &[f64]) -> Result<ModelFit> {
    let cols = full_regressors(effort, risk)?;
    Ok(finish(ModelKind::Full, ols(&cols, y)?, y))
}

pub fn fit_effort_only(effort: &[f64], y: &[f64]) -> Result<ModelFit> {
    Ok(finish(ModelKind::EffortOnly, ols(&[effort.to_vec()], y)?, y))
}

pub fn fit_risk_only(risk: &[f64], y: &[f64]) -> Result<ModelFit> {
    Ok(finish(ModelKind::RiskOnly, ols(&[risk.to_vec()], y)?, y))
}

pub fn fit_model(model: ModelKind, effort: &[f64], risk: &[f64], y: &[f64]) -> Result<ModelFit> {
    match model {
        ModelKind::Full => fit_full(effort, risk, y),
        ModelKind::EffortOnly => fit_effort_only(effort, y),
        ModelKind::RiskOnly => fit_risk_only(risk, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_full_model() {
        let e = [1.0, 2.0, 3.5, 4.0, 6.0, 7.5];
        let r = [0.0, 0.5, 0.1, 0.9, 0.3, 0.6];
        let y: Vec<f64> = e.iter().zip(&r).map(|(e, r)| 0.5 + 2.0 * e * (1.0 - r) + 7.0 * e * r).collect();
        let f = fit_full(&e, &r, &y).unwrap();
        assert!((f.beta0 - 0.5).abs() < 1e-8);
        assert!((f.beta1 - 2.0).abs() < 1e-8);
        assert!((f.beta2.unwrap() - 7.0).abs() < 1e-8);
        assert!(f.rmse < 1e-8);
        assert!((f.pearson_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_risk_is_singular() {
        let e = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit_full(&e, &[0.0; 4], &[1.0, 2.0, 3.0, 5.0]), Err(Error::SingularFit(_))));
        assert!(matches!(fit_risk_only(&[0.2; 4], &[1.0, 2.0, 3.0, 5.0]), Err(Error::SingularFit(_))));
    }

    #[test]
    fn lesioned_models() {
        let e = [1.0, 2.0, 3.0, 5.0];
        let f = fit_effort_only(&e, &e.map(|e| 3.0 * e + 1.0)).unwrap();
        assert!((f.beta0 - 1.0).abs() < 1e-10 && (f.beta1 - 3.0).abs() < 1e-10);
        assert!((f.pearson_r - 1.0).abs() < 1e-12);
        let r = [0.0, 0.3, 0.5, 1.0];
        let f = fit_risk_only(&r, &r.map(|r| -2.0 * r + 4.0)).unwrap();
        assert!((f.beta1 + 2.0).abs() < 1e-10);
        // fitted values increase with y, so the correlation is +1
        assert!((f.pearson_r.abs() - 1.0).abs() < 1e-12);
        assert!((pearson(&r, &r.map(|r| -2.0 * r + 4.0)).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_errors_match_simple_regression() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 1.9, 3.2, 3.8, 5.3];
        let f = fit_effort_only(&x, &y).unwrap();
        // textbook: se(b1) = sqrt(s^2 / Sxx), Sxx = 10
        let rss: f64 = f.residuals(&y).iter().map(|r| r * r).sum();
        let se1 = (rss / 3.0 / 10.0).sqrt();
        assert!((f.std_errors[1] - se1).abs() < 1e-12);
        // se(b0) = sqrt(s^2 (1/n + mean^2 / Sxx))
        let se0 = (rss / 3.0 * (0.2 + 9.0 / 10.0)).sqrt();
        assert!((f.std_errors[0] - se0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_effort_only(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
