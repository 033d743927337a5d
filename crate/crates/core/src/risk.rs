//! Fall probability of a structure under positional noise.

use std::io::Write;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::physics::{simulate, SimConfig};
use crate::scene::{extract_support_graph, penetration_depth, Block, Scene, CONTACT_TOL};
use crate::seeds::stream_rng;

pub const DEFAULT_SIGMA: f64 = 0.065;
pub const DEFAULT_N: usize = 100;
/// Offset draws allowed per block.
pub const MAX_ATTEMPTS: usize = 10_000;

/// Which position components receive noise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbAxes {
    #[default]
    All,
    Horizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    pub n: usize,
    pub sigma: f64,
    pub fell_count: usize,
    pub seed: u64,
}

/// Result of one perturbed simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    pub fell: bool,
    /// Largest distance between a block's final position and the position it
    /// would take if dropped straight onto what lies beneath its perturbed
    /// placement. Settling through a vertical gap alone is not a fall.
    pub max_displacement: f64,
    /// Offset draws used to build the overlap-free perturbed scene.
    pub attempts: usize,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 0.5 {
        Ok(())
    } else {
        Err(Error::Validation(format!("sigma must lie in (0, 0.5), got {sigma}")))
    }
}

/// Offset for one block: independent zero-mean Gaussians whose standard
/// deviation is `sigma` times the block's extent along each axis.
pub fn draw_offset<R: Rng + ?Sized>(block: &Block, sigma: f64, axes: PerturbAxes, rng: &mut R) -> Vector3<f64> {
    let mut d = Vector3::zeros();
    for k in 0..3 {
        let z: f64 = rng.sample(StandardNormal);
        if k < 2 || axes == PerturbAxes::All {
            d[k] = z * sigma * block.world_extent(k);
        }
    }
    d
}

/// Sideways pushes tried before a block's offset is redrawn.
const MAX_PUSHES: usize = 8;

/// Jitters every block position so that no two blocks interpenetrate.
///
/// Blocks are placed bottom-up in the support order of `scene`. A block that
/// a downward offset pushes into its supporters (or the ground) is set back
/// onto them; a block overlapping a neighbour placed before it is slid
/// sideways out of contact. If sliding does not clear every overlap the
/// block's offset is redrawn. Returns the perturbed scene and the total
/// number of offset draws.
pub fn perturb_scene_with<R: Rng + ?Sized>(
    scene: &Scene,
    sigma: f64,
    axes: PerturbAxes,
    rng: &mut R,
) -> Result<(Scene, usize)> {
    check_sigma(sigma)?;
    let graph = extract_support_graph(scene, CONTACT_TOL)?;
    let order = graph.topological_order().expect("support graph of a valid scene is acyclic");
    let mut out = scene.clone();
    let mut placed: Vec<usize> = Vec::with_capacity(scene.len());
    let mut draws = 0;
    for &i in &order {
        let floor = graph
            .supporters(i)
            .map(|s| out.blocks[s].top())
            .fold(0.0, f64::max);
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            draws += 1;
            let mut b = scene.blocks[i].clone();
            b.position += draw_offset(&b, sigma, axes, rng);
            if b.bottom() < floor {
                b.position.z = floor + b.dims.z / 2.0;
            }
            if push_clear(&mut b, placed.iter().map(|&j| &out.blocks[j])) {
                accepted = Some(b);
                break;
            }
        }
        out.blocks[i] = accepted.ok_or(Error::OverConstrained {
            attempts: MAX_ATTEMPTS,
        })?;
        placed.push(i);
    }
    Ok((out, draws))
}

/// Slides `b` horizontally out of any overlap with `others`; true on success.
fn push_clear<'a>(b: &mut Block, others: impl Iterator<Item = &'a Block> + Clone) -> bool {
    for _ in 0..MAX_PUSHES {
        let Some(o) = others.clone().find(|o| penetration_depth(b, o) > CONTACT_TOL) else {
            return true;
        };
        let (axis, depth) = geom::min_translation(&b.footprint(), &o.footprint());
        b.position.x += axis.x * depth;
        b.position.y += axis.y * depth;
    }
    others.clone().all(|o| penetration_depth(b, o) <= CONTACT_TOL)
}

/// Where each block comes to rest if dropped straight down onto whatever
/// lies beneath it, taking blocks from the lowest up.
pub fn landed_positions(scene: &Scene) -> Vec<Vector3<f64>> {
    let mut order: Vec<usize> = (0..scene.len()).collect();
    order.sort_by(|&i, &j| scene.blocks[i].bottom().total_cmp(&scene.blocks[j].bottom()).then(i.cmp(&j)));
    let footprints: Vec<_> = scene.blocks.iter().map(Block::footprint).collect();
    let mut tops = vec![0.0; scene.len()];
    let mut out = vec![Vector3::zeros(); scene.len()];
    for (k, &i) in order.iter().enumerate() {
        let b = &scene.blocks[i];
        let floor = order[..k]
            .iter()
            .filter(|&&j| {
                scene.blocks[j].top() <= b.bottom() + CONTACT_TOL
                    && geom::intersection(&footprints[i], &footprints[j]).1 > 1e-9
            })
            .map(|&j| tops[j])
            .fold(0.0, f64::max);
        out[i] = Vector3::new(b.position.x, b.position.y, floor + b.dims.z / 2.0);
        tops[i] = floor + b.dims.z;
    }
    out
}

pub fn perturb_scene(scene: &Scene, sigma: f64, seed: u64) -> Result<Scene> {
    let mut rng = crate::seeds::seeded_rng(seed);
    perturb_scene_with(scene, sigma, PerturbAxes::All, &mut rng).map(|(s, _)| s)
}

/// Runs the perturbed simulations with the given trial indices. Trial `i`
/// draws from its own stream of `seed`, so any split of the index range
/// reproduces the same per-trial outcomes.
pub fn run_trials(
    scene: &Scene,
    sigma: f64,
    seed: u64,
    indices: std::ops::Range<usize>,
    axes: PerturbAxes,
    config: &SimConfig,
) -> Result<Vec<TrialOutcome>> {
    check_sigma(sigma)?;
    config.validate()?;
    indices
        .into_par_iter()
        .map(|index| {
            let tag = |e| Error::RiskTrial {
                index,
                source: Box::new(e),
            };
            let mut rng = stream_rng(seed, index as u64);
            let (perturbed, attempts) = perturb_scene_with(scene, sigma, axes, &mut rng).map_err(tag)?;
            let out = simulate(&perturbed, config).map_err(tag)?;
            let max_displacement = landed_positions(&perturbed)
                .iter()
                .zip(&out.final_poses)
                .map(|(p, pose)| (pose.position - p).norm())
                .fold(0.0, f64::max);
            Ok(TrialOutcome {
                index,
                fell: max_displacement > config.fall_threshold,
                max_displacement,
                attempts,
            })
        })
        .collect()
}

impl RiskEstimate {
    pub fn from_outcomes(outcomes: &[TrialOutcome], sigma: f64, seed: u64) -> Self {
        let fell_count = outcomes.iter().filter(|o| o.fell).count();
        let n = outcomes.len();
        RiskEstimate {
            risk: fell_count as f64 / n as f64,
            n,
            sigma,
            fell_count,
            seed,
        }
    }
}

/// Fraction of `n` perturbed simulations of `scene` in which it falls.
pub fn estimate_risk(scene: &Scene, sigma: f64, n: usize, seed: u64, config: &SimConfig) -> Result<RiskEstimate> {
    estimate_risk_with(scene, sigma, n, seed, config, PerturbAxes::All).map(|(r, _)| r)
}

/// As [`estimate_risk`], also returning every trial outcome.
pub fn estimate_risk_with(
    scene: &Scene,
    sigma: f64,
    n: usize,
    seed: u64,
    config: &SimConfig,
    axes: PerturbAxes,
) -> Result<(RiskEstimate, Vec<TrialOutcome>)> {
    if n == 0 {
        return Err(Error::Validation("simulation count must be at least 1".into()));
    }
    let outcomes = run_trials(scene, sigma, seed, 0..n, axes, config)?;
    Ok((RiskEstimate::from_outcomes(&outcomes, sigma, seed), outcomes))
}

/// Writes `trial,fell,max_displacement` rows.
pub fn write_outcomes_csv<W: Write>(outcomes: &[TrialOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "fell", "max_displacement"])?;
    for o in outcomes {
        w.write_record([o.index.to_string(), o.fell.to_string(), o.max_displacement.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}
