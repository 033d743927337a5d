//! Effort and risk for each trial of a suite, and the table that carries them
//! to the analysis.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::assign_blocks;
use crate::error::{Error, Result};
use crate::physics::SimConfig;
use crate::risk::{self, PerturbAxes, RiskEstimate};
use crate::scene::TrialSpec;
use crate::seeds::derive_seed;
use crate::symplan::plan_symbolic;
use crate::trajectory::{self, EffortEstimate, TransportParams};

pub const TABLE_HEADER: [&str; 6] = [
    "trial",
    "effort_mean",
    "effort_std",
    "risk",
    "plan_length",
    "assignment_distance",
];

/// Everything a trial evaluation depends on besides the trial itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub sigma: f64,
    /// Perturbed simulations per risk estimate.
    pub n: usize,
    /// Scatter samples per effort estimate.
    pub m: usize,
    pub axes: PerturbAxes,
    pub sim: SimConfig,
    pub transport: TransportParams,
}

impl Default for TrialParams {
    fn default() -> Self {
        TrialParams {
            sigma: risk::DEFAULT_SIGMA,
            n: risk::DEFAULT_N,
            m: trajectory::DEFAULT_M,
            axes: PerturbAxes::All,
            sim: SimConfig::default(),
            transport: TransportParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub id: String,
    pub effort: EffortEstimate,
    pub risk: RiskEstimate,
    pub plan_length: usize,
    pub assignment_distance: f64,
}

/// Seed of trial `index` within a suite run with `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Seed of a trial's risk estimate; effort samples use the trial seed itself.
pub fn risk_seed(trial_seed: u64) -> u64 {
    derive_seed(trial_seed, u64::MAX)
}

fn tag(id: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Trial {
        id: id.to_string(),
        source: Box::new(e),
    }
}

/// Risk of the trial's target structure.
pub fn trial_risk(trial: &TrialSpec, params: &TrialParams, seed: u64) -> Result<RiskEstimate> {
    risk::estimate_risk_with(&trial.state_b, params.sigma, params.n, risk_seed(seed), &params.sim, params.axes)
        .map(|(r, _)| r)
        .map_err(tag(&trial.id))
}

/// Effort, risk and plan statistics of one trial. Plan length and assignment
/// distance describe the first effort sample.
pub fn run_trial(trial: &TrialSpec, params: &TrialParams, seed: u64) -> Result<TrialResult> {
    let wrap = tag(&trial.id);
    let (a, b) = trial.realize(seed).map_err(&wrap)?;
    let assignment = assign_blocks(&a, &b).map_err(&wrap)?;
    let plan = plan_symbolic(&a, &b, &assignment).map_err(&wrap)?;
    let effort = trajectory::estimate_effort_with(trial, params.m, seed, &params.transport).map_err(&wrap)?;
    let risk = trial_risk(trial, params, seed)?;
    Ok(TrialResult {
        id: trial.id.clone(),
        effort,
        risk,
        plan_length: plan.len(),
        assignment_distance: assignment.total_distance,
    })
}

#[derive(Debug)]
pub struct TrialFailure {
    pub index: usize,
    pub id: String,
    pub error: Error,
}

/// Results of a suite run in input order; failed trials are listed apart.
#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

impl SuiteOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.results.iter().map(TableRow::from).collect()
    }

    pub fn write_table<W: Write>(&self, out: W) -> Result<()> {
        write_table(&self.rows(), out)
    }
}

pub fn check_unique_ids(trials: &[TrialSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in trials {
        if !seen.insert(t.id.as_str()) {
            return Err(Error::Validation(format!("duplicate trial id `{}`", t.id)));
        }
    }
    Ok(())
}

/// Runs every trial with its own derived seed. A failing trial is recorded
/// and the others still run.
pub fn run_suite(trials: &[TrialSpec], params: &TrialParams, seed: u64) -> Result<SuiteOutcome> {
    check_unique_ids(trials)?;
    let results: Vec<Result<TrialResult>> = trials
        .par_iter()
        .enumerate()
        .map(|(i, t)| run_trial(t, params, trial_seed(seed, i)))
        .collect();
    let mut out = SuiteOutcome::default();
    for (index, (trial, r)) in trials.iter().zip(results).enumerate() {
        match r {
            Ok(r) => out.results.push(r),
            Err(error) => {
                log::error!("trial `{}` failed: {error}", trial.id);
                out.failures.push(TrialFailure {
                    index,
                    id: trial.id.clone(),
                    error,
                })
            }
        }
    }
    Ok(out)
}

/// One row of the effort/risk table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub trial: String,
    pub effort_mean: f64,
    pub effort_std: f64,
    pub risk: f64,
    pub plan_length: usize,
    pub assignment_distance: f64,
}

impl From<&TrialResult> for TableRow {
    fn from(r: &TrialResult) -> Self {
        TableRow {
            trial: r.id.clone(),
            effort_mean: r.effort.sample_mean,
            effort_std: r.effort.sample_std,
            risk: r.risk.risk,
            plan_length: r.plan_length,
            assignment_distance: r.assignment_distance,
        }
    }
}

pub fn write_table<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn read_table<R: Read>(input: R) -> Result<Vec<TableRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(TABLE_HEADER) {
        return Err(Error::Parse(format!(
            "table header must be `{}`, found `{}`",
            TABLE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<TableRow>, _>>()?;
    for r in &rows {
        if !(r.effort_mean.is_finite() && (0.0..=1.0).contains(&r.risk)) {
            return Err(Error::Validation(format!("table row for `{}` is out of range", r.trial)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Block, Scene, StateA};

    fn lone_trial() -> TrialSpec {
        let s = Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5)]).unwrap();
        TrialSpec::new("lone", StateA::Fixed(s.clone()), s).unwrap()
    }

    #[test]
    fn null_trial() {
        let r = run_trial(&lone_trial(), &TrialParams::default(), 3).unwrap();
        assert_eq!(r.effort.sample_mean, 0.0);
        assert_eq!(r.risk.risk, 0.0);
        assert_eq!(r.plan_length, 0);
        assert_eq!(r.assignment_distance, 0.0);
    }

    #[test]
    fn defaults() {
        let p = TrialParams::default();
        assert_eq!((p.sigma, p.n, p.m), (0.065, 100, 30));
    }

    #[test]
    fn empty_suite() {
        let out = run_suite(&[], &TrialParams::default(), 1).unwrap();
        let mut buf = Vec::new();
        out.write_table(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", TABLE_HEADER.join(",")));
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(run_suite(&[lone_trial(), lone_trial()], &TrialParams::default(), 1).is_err());
    }

    #[test]
    fn table_round_trip() {
        let rows = vec![TableRow {
            trial: "1E".into(),
            effort_mean: 1.25,
            effort_std: 0.1,
            risk: 0.03,
            plan_length: 4,
            assignment_distance: 2.5,
        }];
        let mut buf = Vec::new();
        write_table(&rows, &mut buf).unwrap();
        assert_eq!(read_table(buf.as_slice()).unwrap(), rows);
        assert!(read_table("a,b\n1,2\n".as_bytes()).is_err());
    }
}
