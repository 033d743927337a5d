use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{column_means, HumanDataset};
use super::regress::pearson;
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

pub const DEFAULT_RESAMPLES: usize = 1000;
/// Redraws allowed for a single resample whose trial means are constant.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInterval {
    pub model: String,
    /// Correlation on the full dataset.
    pub r: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exceedance {
    pub a: String,
    pub b: String,
    /// Fraction of resamples in which `a` correlates better than `b`, ties
    /// counting one half.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub dataset: String,
    pub resamples: usize,
    pub seed: Option<u64>,
    pub models: Vec<ModelInterval>,
    pub exceedance: Vec<Exceedance>,
    /// Resamples that were drawn again because their trial means were constant.
    pub redrawn: usize,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn check_predictions(n_trials: usize, predictions: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::Validation("no model predictions to compare".into()));
    }
    for (name, p) in predictions {
        if p.len() != n_trials {
            return Err(Error::Validation(format!(
                "model `{name}` has {} predictions for {n_trials} trials",
                p.len()
            )));
        }
    }
    Ok(())
}

fn correlations(means: &[f64], predictions: &BTreeMap<String, Vec<f64>>) -> Vec<f64> {
    predictions.values().map(|p| pearson(p, means).unwrap_or(0.0)).collect()
}

fn summarize(
    dataset: &HumanDataset,
    rows: &[Vec<f64>],
    predictions: &BTreeMap<String, Vec<f64>>,
    per_resample: Vec<Vec<f64>>,
    seed: Option<u64>,
    redrawn: usize,
) -> BootstrapReport {
    let full = correlations(&column_means(rows), predictions);
    let names: Vec<&String> = predictions.keys().collect();
    let b = per_resample.len();
    let models = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut v: Vec<f64> = per_resample.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            ModelInterval {
                model: name.to_string(),
                r: full[k],
                median: percentile(&v, 50.0),
                lower: percentile(&v, 2.5),
                upper: percentile(&v, 97.5),
            }
        })
        .collect();
    let mut exceedance = Vec::new();
    for i in 0..names.len() {
        for j in 0..names.len() {
            if i == j {
                continue;
            }
            let score: f64 = per_resample
                .iter()
                .map(|r| match r[i].total_cmp(&r[j]) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                })
                .sum();
            exceedance.push(Exceedance {
                a: names[i].clone(),
                b: names[j].clone(),
                p: score / b as f64,
            });
        }
    }
    BootstrapReport {
        dataset: dataset.name.clone(),
        resamples: b,
        seed,
        models,
        exceedance,
        redrawn,
    }
}

fn has_spread(v: &[f64]) -> bool {
    v.iter().any(|x| (x - v[0]).abs() > 1e-12)
}

/// Resamples participants with replacement `b` times. Resample `i` draws from
/// its own stream of `seed`; a resample whose trial means are all equal is
/// drawn again. Model predictions are held fixed and correlated with each
/// resample's z-scored trial means.
pub fn bootstrap_compare(
    dataset: &HumanDataset,
    predictions: &BTreeMap<String, Vec<f64>>,
    b: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    if b == 0 {
        return Err(Error::Validation("bootstrap needs at least one resample".into()));
    }
    check_predictions(dataset.trials.len(), predictions)?;
    let rows = dataset.zscored_rows()?;
    let draws: Vec<(Vec<f64>, usize)> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for redraws in 0..=MAX_REDRAWS {
                let pick: Vec<&Vec<f64>> = (0..rows.len()).map(|_| &rows[rng.random_range(0..rows.len())]).collect();
                let means = column_means(pick);
                if has_spread(&means) {
                    return Ok((correlations(&means, predictions), redraws));
                }
            }
            Err(Error::EmptyDataset(format!(
                "resample {i} of `{}` stayed degenerate after {MAX_REDRAWS} redraws",
                dataset.name
            )))
        })
        .collect::<Result<_>>()?;
    let redrawn = draws.iter().map(|(_, r)| r).sum();
    if redrawn > 0 {
        log::warn!("dataset `{}`: {redrawn} degenerate resamples redrawn", dataset.name);
    }
    let per_resample = draws.into_iter().map(|(c, _)| c).collect();
    Ok(summarize(dataset, &rows, predictions, per_resample, Some(seed), redrawn))
}

/// As [`bootstrap_compare`] with explicit resamples, each a list of indices
/// into the dataset's usable (z-scored) participants.
pub fn bootstrap_with_resamples(
    dataset: &HumanDataset,
    predictions: &BTreeMap<String, Vec<f64>>,
    resamples: &[Vec<usize>],
) -> Result<BootstrapReport> {
    if resamples.is_empty() {
        return Err(Error::Validation("bootstrap needs at least one resample".into()));
    }
    check_predictions(dataset.trials.len(), predictions)?;
    let rows = dataset.zscored_rows()?;
    let mut per_resample = Vec::with_capacity(resamples.len());
    for pick in resamples {
        if pick.is_empty() || pick.iter().any(|&i| i >= rows.len()) {
            return Err(Error::Validation(format!("resample indices must lie in 0..{}", rows.len())));
        }
        let means = column_means(pick.iter().map(|&i| &rows[i]));
        per_resample.push(correlations(&means, predictions));
    }
    Ok(summarize(dataset, &rows, predictions, per_resample, None, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> HumanDataset {
        let trials: Vec<String> = (0..5).map(|i| format!("t{i}")).collect();
        let rows = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![2.0, 1.0, 4.0, 3.0, 6.0],
            vec![1.0, 3.0, 2.0, 5.0, 4.0],
            vec![5.0, 4.0, 3.0, 2.0, 1.0],
        ];
        HumanDataset::from_matrix("d", trials, &rows).unwrap()
    }

    fn preds() -> BTreeMap<String, Vec<f64>> {
        BTreeMap::from([
            ("up".to_string(), vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            ("flat".to_string(), vec![3.0, 1.0, 4.0, 1.0, 5.0]),
        ])
    }

    #[test]
    fn identity_resample_gives_plain_correlation() {
        let d = data();
        let rep = bootstrap_with_resamples(&d, &preds(), &[vec![0, 1, 2, 3]]).unwrap();
        for m in &rep.models {
            assert_eq!(m.median, m.r);
            assert_eq!(m.lower, m.r);
            assert_eq!(m.upper, m.r);
        }
    }

    #[test]
    fn identical_models_tie() {
        let mut p = preds();
        p.insert("copy".into(), p["up"].clone());
        let rep = bootstrap_compare(&data(), &p, 200, 4).unwrap();
        let e = rep.exceedance.iter().find(|e| e.a == "copy" && e.b == "up").unwrap();
        assert_eq!(e.p, 0.5);
    }

    #[test]
    fn reproducible_and_ordered() {
        let a = bootstrap_compare(&data(), &preds(), 300, 9).unwrap();
        let b = bootstrap_compare(&data(), &preds(), 300, 9).unwrap();
        assert_eq!(a, b);
        for m in &a.models {
            assert!(m.lower <= m.median && m.median <= m.upper);
        }
        let p = |x: &str, y: &str| a.exceedance.iter().find(|e| e.a == x && e.b == y).unwrap().p;
        assert!((p("up", "flat") + p("flat", "up") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn percentiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 2.5), 1.1);
        assert!((percentile(&v, 97.5) - 4.9).abs() < 1e-12);
    }

    #[test]
    fn misaligned_predictions_rejected() {
        let mut p = preds();
        p.insert("short".into(), vec![1.0]);
        assert!(bootstrap_compare(&data(), &p, 10, 1).is_err());
    }
}
