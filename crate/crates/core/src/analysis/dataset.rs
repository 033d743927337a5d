use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Raw responses of several participants to a common set of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanDataset {
    pub name: String,
    pub participants: Vec<String>,
    pub trials: Vec<String>,
    /// `responses[p][t]`, `None` where participant `p` skipped trial `t`.
    pub responses: Vec<Vec<Option<f64>>>,
}

#[derive(Deserialize)]
struct Row {
    participant: String,
    trial: String,
    response: f64,
}

impl HumanDataset {
    pub fn new(
        name: impl Into<String>,
        participants: Vec<String>,
        trials: Vec<String>,
        responses: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let ds = HumanDataset {
            name: name.into(),
            participants,
            trials,
            responses,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a complete dataset from a participant × trial matrix.
    pub fn from_matrix(name: impl Into<String>, trials: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let participants = (0..rows.len()).map(|i| format!("p{i}")).collect();
        let responses = rows.iter().map(|r| r.iter().copied().map(Some).collect()).collect();
        HumanDataset::new(name, participants, trials, responses)
    }

    fn validate(&self) -> Result<()> {
        if self.trials.len() < 2 {
            return Err(Error::Validation(format!(
                "dataset `{}` needs at least 2 trials, found {}",
                self.name,
                self.trials.len()
            )));
        }
        if self.responses.len() != self.participants.len() {
            return Err(Error::Validation("one response row is required per participant".into()));
        }
        for (p, row) in self.participants.iter().zip(&self.responses) {
            if row.len() != self.trials.len() {
                return Err(Error::Validation(format!("participant `{p}` has {} columns", row.len())));
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("participant `{p}` has a non-finite response")));
            }
        }
        Ok(())
    }

    /// Reads `participant,trial,response` rows. Participants and trials keep
    /// the order of their first appearance.
    pub fn from_csv<R: Read>(name: impl Into<String>, input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut participants: Vec<String> = Vec::new();
        let mut trials: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let (mut p_index, mut t_index) = (BTreeMap::new(), BTreeMap::new());
        for row in reader.deserialize() {
            let row: Row = row?;
            let p = *p_index.entry(row.participant.clone()).or_insert_with(|| {
                participants.push(row.participant.clone());
                participants.len() - 1
            });
            let t = *t_index.entry(row.trial.clone()).or_insert_with(|| {
                trials.push(row.trial.clone());
                trials.len() - 1
            });
            if cells.insert((p, t), row.response).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate response for participant `{}` on trial `{}`",
                    row.participant, row.trial
                )));
            }
        }
        let responses = (0..participants.len())
            .map(|p| (0..trials.len()).map(|t| cells.get(&(p, t)).copied()).collect())
            .collect();
        HumanDataset::new(name, participants, trials, responses)
    }

    /// Loads a CSV file; the dataset is named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
        HumanDataset::from_csv(name, file)
    }

    /// Reorders the trial columns to `ids`, dropping trials not listed.
    pub fn select_trials(&self, ids: &[String]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = self.trials.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let cols = ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| {
                    Error::Validation(format!("dataset `{}` has no responses for trial `{id}`", self.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        HumanDataset::new(
            self.name.clone(),
            self.participants.clone(),
            ids.to_vec(),
            self.responses.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect(),
        )
    }

    /// Standardized rows of the participants kept for analysis. Rows with a
    /// missing trial or with identical responses everywhere are dropped with
    /// a warning.
    pub fn zscored_rows(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.responses.len());
        for (p, row) in self.participants.iter().zip(&self.responses) {
            let Some(values) = row.iter().copied().collect::<Option<Vec<f64>>>() else {
                log::warn!("dataset `{}`: dropping participant `{p}` with missing responses", self.name);
                continue;
            };
            match zscore(&values) {
                Some(z) => out.push(z),
                None => log::warn!("dataset `{}`: dropping participant `{p}` with constant responses", self.name),
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyDataset(format!("no usable participants in `{}`", self.name)));
        }
        Ok(out)
    }
}

/// Standardizes with the population standard deviation; `None` when constant.
pub fn zscore(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Column means of equal-length rows.
pub fn column_means<'a>(rows: impl IntoIterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for row in rows {
        if sum.is_empty() {
            sum = vec![0.0; row.len()];
        }
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        count += 1;
    }
    sum.iter().map(|s| s / count as f64).collect()
}

/// Per-trial mean of the participants' z-scored responses.
pub fn zscore_and_average(dataset: &HumanDataset) -> Result<Vec<f64>> {
    Ok(column_means(&dataset.zscored_rows()?))
}
