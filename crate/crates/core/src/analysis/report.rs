use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::bootstrap::{bootstrap_compare, BootstrapReport};
use super::dataset::HumanDataset;
use super::grid::{dataset_targets, GridSearch};
use super::regress::{fit_model, ModelFit, ModelKind};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// The three models fitted to one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetFits {
    pub dataset: String,
    pub sigma: Option<f64>,
    pub trials: Vec<String>,
    /// Per-trial mean z-scored response.
    pub observed: Vec<f64>,
    pub fits: Vec<ModelFit>,
}

impl DatasetFits {
    pub fn get(&self, model: ModelKind) -> Option<&ModelFit> {
        self.fits.iter().find(|f| f.model == model)
    }

    /// Fitted values keyed by model name, for [`super::bootstrap_compare`].
    pub fn predictions(&self) -> BTreeMap<String, Vec<f64>> {
        self.fits.iter().map(|f| (f.model.to_string(), f.predictions.clone())).collect()
    }
}

pub fn fit_dataset(
    dataset: &str,
    trials: &[String],
    effort: &[f64],
    risk: &[f64],
    observed: &[f64],
    sigma: Option<f64>,
) -> Result<DatasetFits> {
    let fits = ModelKind::ALL
        .iter()
        .map(|&m| {
            fit_model(m, effort, risk, observed)
                .map(|f| ModelFit { sigma, ..f })
                .map_err(|e| Error::SingularFit(format!("{dataset}, {m} model: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetFits {
        dataset: dataset.to_string(),
        sigma,
        trials: trials.to_vec(),
        observed: observed.to_vec(),
        fits,
    })
}

/// Fits the three models to every dataset, with trials in the order of `ids`.
pub fn fit_datasets(
    ids: &[String],
    effort: &[f64],
    risk: &[f64],
    datasets: &[HumanDataset],
    sigma: Option<f64>,
) -> Result<Vec<DatasetFits>> {
    dataset_targets(datasets, ids)?
        .iter()
        .map(|(name, y)| fit_dataset(name, ids, effort, risk, y, sigma))
        .collect()
}

/// Model fits plus a participant bootstrap for every dataset. Dataset `k`
/// resamples with seed `derive_seed(seed, k)`.
pub fn compare_datasets(
    ids: &[String],
    effort: &[f64],
    risk: &[f64],
    datasets: &[HumanDataset],
    sigma: Option<f64>,
    resamples: usize,
    seed: u64,
) -> Result<FitReport> {
    let fits = fit_datasets(ids, effort, risk, datasets, sigma)?;
    let bootstrap = datasets
        .iter()
        .zip(&fits)
        .enumerate()
        .map(|(k, (d, f))| bootstrap_compare(&d.select_trials(ids)?, &f.predictions(), resamples, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitReport {
        datasets: fits,
        grid: None,
        bootstrap,
    })
}

/// Everything the `fit` and `compare` commands report.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitReport {
    pub datasets: Vec<DatasetFits>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSearch>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bootstrap: Vec<BootstrapReport>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `dataset,model,sigma,beta0,beta1,beta2,rmse,pearson_r`
    pub fn write_fits_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "model", "sigma", "beta0", "beta1", "beta2", "rmse", "pearson_r"])?;
        for d in &self.datasets {
            for f in &d.fits {
                w.write_record([
                    d.dataset.clone(),
                    f.model.to_string(),
                    opt(f.sigma),
                    f.beta0.to_string(),
                    f.beta1.to_string(),
                    opt(f.beta2),
                    f.rmse.to_string(),
                    f.pearson_r.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    /// `sigma,dataset,rmse`, with the stacked fit listed as dataset `pooled`.
    pub fn write_grid_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sigma", "dataset", "rmse"])?;
        if let Some(g) = &self.grid {
            for p in &g.points {
                for (name, rmse) in &p.rmse {
                    w.write_record([p.sigma.to_string(), name.clone(), rmse.to_string()])?;
                }
                w.write_record([p.sigma.to_string(), "pooled".into(), p.pooled_rmse.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    /// `dataset,model,r,median,lower,upper`
    pub fn write_bootstrap_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "model", "r", "median", "lower", "upper"])?;
        for b in &self.bootstrap {
            for m in &b.models {
                w.write_record([
                    b.dataset.clone(),
                    m.model.clone(),
                    m.r.to_string(),
                    m.median.to_string(),
                    m.lower.to_string(),
                    m.upper.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }
}
