//! Randomized initial states.

use nalgebra::Vector3;
use rand::seq::index;
use rand::Rng;

use super::{Block, BucketVariant, Color, ScatterTemplate, Scene, StateA, TrialSpec};
use crate::error::{Error, Result};
use crate::geom;
use crate::seeds::seeded_rng;

const MAX_PLACEMENT_TRIES: usize = 2_000;

/// Blocks in the bucket-trial array.
pub const BUCKET_TOTAL: usize = 20;
/// Blocks that carry the target color and go into the bucket.
pub const BUCKET_MOVED: usize = 5;
/// Centre-to-centre spacing of the 10x2 array.
pub const BUCKET_GRID_PITCH: f64 = 1.25;

/// Scatters unit cubes flat on the ground, uniformly over the workspace with
/// uniform yaw. Each block is resampled until it overlaps none of the blocks
/// placed before it.
pub fn sample_scattered_state(template: &ScatterTemplate, seed: u64) -> Result<Scene> {
    let colors = template.block_colors()?;
    let [w, h] = template.workspace;
    if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
        return Err(Error::Validation(format!("workspace must be positive, got {w}x{h}")));
    }
    let capacity = || Error::Capacity {
        count: template.count,
        w,
        h,
    };
    let mut rng = seeded_rng(seed);
    let mut blocks: Vec<Block> = Vec::with_capacity(template.count);
    for (i, color) in colors.into_iter().enumerate() {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let yaw = rng.random_range(0.0..std::f64::consts::PI);
            let mut b = Block::cube(format!("s{i:02}"), 0.0, 0.0, 0.5).with_color(color);
            b.yaw = yaw;
            let hx = b.world_extent(0) / 2.0;
            let hy = b.world_extent(1) / 2.0;
            if hx * 2.0 > w || hy * 2.0 > h {
                continue;
            }
            b.position.x = rng.random_range(-w / 2.0 + hx..=w / 2.0 - hx);
            b.position.y = rng.random_range(-h / 2.0 + hy..=h / 2.0 - hy);
            let fp = b.footprint();
            if blocks
                .iter()
                .all(|o| geom::overlap_depth(&fp, &o.footprint()) <= 0.0)
            {
                placed = Some(b);
                break;
            }
        }
        blocks.push(placed.ok_or_else(capacity)?);
    }
    Scene::new(blocks)
}

fn grid_position(k: usize) -> Vector3<f64> {
    let (col, row) = (k % 10, k / 10);
    Vector3::new(
        (col as f64 - 4.5) * BUCKET_GRID_PITCH,
        -6.0 + row as f64 * BUCKET_GRID_PITCH,
        0.5,
    )
}

/// Default bucket contents for each variant.
///
/// The easy bucket is close to the array and its blocks lie flat; the hard
/// bucket is farther away and packed in two layers.
pub fn bucket_target(variant: BucketVariant) -> Scene {
    let c = variant.color();
    let blocks = match variant {
        BucketVariant::Easy => vec![
            Block::cube("bucket0", 3.0, 0.0, 0.5),
            Block::cube("bucket1", 4.0, 0.0, 0.5),
            Block::cube("bucket2", 5.0, 0.0, 0.5),
            Block::cube("bucket3", 3.5, 1.0, 0.5),
            Block::cube("bucket4", 4.5, 1.0, 0.5),
        ],
        BucketVariant::Hard => vec![
            Block::cube("bucket0", 5.0, 5.0, 0.5),
            Block::cube("bucket1", 6.0, 5.0, 0.5),
            Block::cube("bucket2", 7.0, 5.0, 0.5),
            Block::cube("bucket3", 5.5, 5.0, 1.5),
            Block::cube("bucket4", 6.5, 5.0, 1.5),
        ],
    };
    Scene {
        blocks: blocks.into_iter().map(|b| b.with_color(c)).collect(),
    }
}

/// One bucket trial with the default bucket layout.
pub fn sample_bucket_trial(variant: BucketVariant, seed: u64) -> Result<TrialSpec> {
    sample_bucket_trial_with_target(variant, &bucket_target(variant), seed)
}

/// Lines up 20 blocks in a fixed-order 10x2 array and colors 5 of them,
/// chosen at random, with the variant's color. The target state keeps the
/// other 15 blocks where they are and puts the colored ones at the poses of
/// `target`.
pub fn sample_bucket_trial_with_target(
    variant: BucketVariant,
    target: &Scene,
    seed: u64,
) -> Result<TrialSpec> {
    let color = variant.color();
    if target.len() != BUCKET_MOVED || target.blocks.iter().any(|b| b.color != color) {
        return Err(Error::Infeasible(format!(
            "bucket target must hold exactly {BUCKET_MOVED} {color} blocks"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut chosen = index::sample(&mut rng, BUCKET_TOTAL, BUCKET_MOVED).into_vec();
    chosen.sort_unstable();

    let array: Vec<Block> = (0..BUCKET_TOTAL)
        .map(|k| {
            let p = grid_position(k);
            let c = if chosen.contains(&k) { color } else { Color::Natural };
            Block::cube(format!("g{k:02}"), p.x, p.y, p.z).with_color(c)
        })
        .collect();
    let mut b_blocks: Vec<Block> = array
        .iter()
        .filter(|b| b.color == Color::Natural)
        .cloned()
        .collect();
    b_blocks.extend(target.blocks.iter().cloned());

    let id = match variant {
        BucketVariant::Easy => "bucket-E",
        BucketVariant::Hard => "bucket-H",
    };
    TrialSpec::new(id, StateA::Fixed(Scene::new(array)?), Scene::new(b_blocks)?)
}
