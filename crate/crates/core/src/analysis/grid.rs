use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{zscore_and_average, HumanDataset};
use super::regress::fit_full;
use crate::error::{Error, Result};
use crate::pipeline::{self, TrialParams};
use crate::scene::TrialSpec;

/// Grid values are rounded to this many decimals so that `0.05 + 3 * 0.005`
/// prints and compares as `0.065`.
const GRID_DECIMALS: i32 = 9;

fn round_grid(x: f64) -> f64 {
    let k = 10f64.powi(GRID_DECIMALS);
    (x * k).round() / k
}

/// 0.05, 0.055, ..., 0.1.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| round_grid(0.05 + 0.005 * i as f64)).collect()
}

/// Parses `lo:hi:step`. Both ends are included when `step` divides the span.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Validation(format!("grid must look like lo:hi:step, got `{text}`"));
    let [lo, hi, step] = parts.as_slice() else {
        return Err(bad());
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    if count > 100_000 {
        return Err(Error::Validation(format!("grid `{text}` has too many points")));
    }
    Ok((0..=count).map(|i| round_grid(lo + step * i as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub sigma: f64,
    /// Full-model rmse for each dataset.
    pub rmse: BTreeMap<String, f64>,
    /// Full-model rmse with every dataset stacked into one regression.
    pub pooled_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearch {
    pub points: Vec<GridPoint>,
    /// Best sigma for each dataset.
    pub best: BTreeMap<String, f64>,
    pub pooled_best: f64,
}

/// Sigma with the smallest rmse; ties go to the smaller sigma.
fn argmin<'a>(pairs: impl Iterator<Item = (f64, &'a f64)>) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for (sigma, &rmse) in pairs {
        let better = match best {
            None => true,
            Some((bs, br)) => rmse < br || (rmse == br && sigma < bs),
        };
        if better {
            best = Some((sigma, rmse));
        }
    }
    best.expect("grid is not empty").0
}

/// Picks sigma from precomputed risks. `risks[k]` holds the per-trial risk at
/// `grid[k]`; `targets` pairs a dataset name with its per-trial responses.
pub fn select_sigma(
    grid: &[f64],
    effort: &[f64],
    risks: &[Vec<f64>],
    targets: &[(String, Vec<f64>)],
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::Validation("sigma grid is empty".into()));
    }
    if targets.is_empty() {
        return Err(Error::Validation("at least one dataset is required".into()));
    }
    assert_eq!(grid.len(), risks.len());
    let mut points = Vec::with_capacity(grid.len());
    for (&sigma, risk) in grid.iter().zip(risks) {
        let wrap = |e| Error::Sigma {
            sigma,
            source: Box::new(e),
        };
        let mut rmse = BTreeMap::new();
        let (mut pe, mut pr, mut py) = (Vec::new(), Vec::new(), Vec::new());
        for (name, y) in targets {
            rmse.insert(name.clone(), fit_full(effort, risk, y).map_err(wrap)?.rmse);
            pe.extend_from_slice(effort);
            pr.extend_from_slice(risk);
            py.extend_from_slice(y);
        }
        let pooled_rmse = fit_full(&pe, &pr, &py).map_err(wrap)?.rmse;
        points.push(GridPoint {
            sigma,
            rmse,
            pooled_rmse,
        });
    }
    let best = targets
        .iter()
        .map(|(name, _)| (name.clone(), argmin(points.iter().map(|p| (p.sigma, &p.rmse[name])))))
        .collect();
    let pooled_best = argmin(points.iter().map(|p| (p.sigma, &p.pooled_rmse)));
    Ok(GridSearch {
        points,
        best,
        pooled_best,
    })
}

/// Per-trial effort (computed once) and per-trial risk at every grid value.
/// Trial `i` uses the same seeds as in [`pipeline::run_suite`] with `seed`,
/// so the risk at a grid value matches a suite table computed at that sigma.
pub fn grid_risks(
    trials: &[TrialSpec],
    grid: &[f64],
    params: &TrialParams,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    pipeline::check_unique_ids(trials)?;
    let effort = trials
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            crate::trajectory::estimate_effort_with(t, params.m, pipeline::trial_seed(seed, i), &params.transport)
                .map(|e| e.sample_mean)
                .map_err(|e| Error::Trial {
                    id: t.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let risks = grid
        .par_iter()
        .map(|&sigma| {
            let p = TrialParams { sigma, ..*params };
            trials
                .iter()
                .enumerate()
                .map(|(i, t)| pipeline::trial_risk(t, &p, pipeline::trial_seed(seed, i)).map(|r| r.risk))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Sigma {
                    sigma,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((effort, risks))
}

/// Per-trial mean z-scored responses of each dataset, aligned to `ids`.
pub fn dataset_targets(datasets: &[HumanDataset], ids: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    datasets
        .iter()
        .map(|d| Ok((d.name.clone(), zscore_and_average(&d.select_trials(ids)?)?)))
        .collect()
}

/// Recomputes trial risk at each grid value and fits the full model to every
/// dataset; see [`grid_risks`] for seeding.
pub fn grid_search_sigma(
    trials: &[TrialSpec],
    datasets: &[HumanDataset],
    grid: &[f64],
    params: &TrialParams,
    seed: u64,
) -> Result<GridSearch> {
    let ids: Vec<String> = trials.iter().map(|t| t.id.clone()).collect();
    let targets = dataset_targets(datasets, &ids)?;
    let (effort, risks) = grid_risks(trials, grid, params, seed)?;
    select_sigma(grid, &effort, &risks, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_values() {
        let g = default_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[3], 0.065);
        assert_eq!(g[10], 0.1);
        assert_eq!(parse_grid("0.05:0.1:0.005").unwrap(), g);
    }

    #[test]
    fn parse_errors_and_partial_step() {
        assert!(parse_grid("0.05:0.1").is_err());
        assert!(parse_grid("0.1:0.05:0.01").is_err());
        assert!(parse_grid("0.05:0.1:0").is_err());
        assert_eq!(parse_grid("0.05:0.07:0.015").unwrap(), [0.05, 0.065]);
        assert_eq!(parse_grid("0.065:0.065:0.01").unwrap(), [0.065]);
    }

    #[test]
    fn selection_and_ties() {
        let e = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let r_true = vec![0.1, 0.5, 0.2, 0.8, 0.4];
        let y: Vec<f64> = e.iter().zip(&r_true).map(|(e, r)| 1.0 + e * (1.0 - r) + 4.0 * e * r).collect();
        let r_other = vec![0.3, 0.1, 0.6, 0.2, 0.9];
        let targets = vec![("d".to_string(), y)];
        let g = select_sigma(&[0.05, 0.06], &e, &[r_other.clone(), r_true.clone()], &targets).unwrap();
        assert_eq!(g.best["d"], 0.06);
        assert_eq!(g.pooled_best, 0.06);
        let tie = select_sigma(&[0.07, 0.06], &e, &[r_true.clone(), r_true], &targets).unwrap();
        assert_eq!(tie.best["d"], 0.06);
        assert!(select_sigma(&[], &e, &[], &targets).is_err());
    }
}
