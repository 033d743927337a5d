#![allow(dead_code)]

use std::collections::BTreeMap;

use blockplan::assign::total_distance;
use blockplan::scene::{Block, Color, Scene, StateA, TrialSpec};
use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;

pub const COLORS: [Color; 3] = [Color::Natural, Color::Red, Color::Blue];

pub fn tower(n: usize) -> Scene {
    Scene::new((0..n).map(|i| Block::cube(format!("t{i}"), 0.0, 0.0, 0.5 + i as f64)).collect()).unwrap()
}

pub fn line(n: usize) -> Scene {
    Scene::new((0..n).map(|i| Block::cube(format!("l{i}"), i as f64, 0.0, 0.5)).collect()).unwrap()
}

pub fn lone_cube() -> Scene {
    Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5)]).unwrap()
}

/// Ground cubes on distinct cells of a jittered grid with random yaw.
pub fn ground_scene<R: Rng>(rng: &mut R, prefix: &str, colors: &[Color]) -> Scene {
    let mut cells: Vec<(i32, i32)> = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).collect();
    cells.shuffle(rng);
    let blocks = colors
        .iter()
        .zip(cells)
        .enumerate()
        .map(|(k, (&c, (i, j)))| {
            let mut b = Block::cube(
                format!("{prefix}{k}"),
                2.0 * i as f64 + rng.random_range(-0.2..0.2),
                2.0 * j as f64 + rng.random_range(-0.2..0.2),
                0.5,
            )
            .with_color(c);
            b.yaw = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            b
        })
        .collect();
    Scene::new(blocks).unwrap()
}

/// Smallest total distance over every color-respecting bijection, enumerated
/// by brute force and summed with the library's reference summation.
pub fn brute_force_min(a: &Scene, b: &Scene) -> f64 {
    let a_ids: Vec<&Block> = a.blocks.iter().collect();
    let mut used = vec![false; b.len()];
    let mut pairs = BTreeMap::new();
    let mut best = f64::INFINITY;
    fn recurse(
        k: usize,
        a_ids: &[&Block],
        a: &Scene,
        b: &Scene,
        used: &mut Vec<bool>,
        pairs: &mut BTreeMap<String, String>,
        best: &mut f64,
    ) {
        if k == a_ids.len() {
            *best = best.min(total_distance(a, b, pairs));
            return;
        }
        for j in 0..b.len() {
            if used[j] || b.blocks[j].color != a_ids[k].color {
                continue;
            }
            used[j] = true;
            pairs.insert(a_ids[k].id.clone(), b.blocks[j].id.clone());
            recurse(k + 1, a_ids, a, b, used, pairs, best);
            pairs.remove(&a_ids[k].id);
            used[j] = false;
        }
    }
    recurse(0, &a_ids, a, b, &mut used, &mut pairs, &mut best);
    best
}

/// Random stacks of cubes: `columns` x positions, each a column whose levels
/// are shifted sideways by up to 0.3 relative to the level below.
pub fn random_stacks<R: Rng>(rng: &mut R, count: usize, prefix: &str) -> Scene {
    let columns = rng.random_range(1..=count.clamp(1, 4));
    let mut heights = vec![0usize; columns];
    for k in 0..count {
        heights[if k < columns { k } else { rng.random_range(0..columns) }] += 1;
    }
    let mut blocks = Vec::with_capacity(count);
    let mut colors: Vec<Color> = (0..count).map(|_| COLORS[rng.random_range(0..COLORS.len())]).collect();
    colors.shuffle(rng);
    for (c, &h) in heights.iter().enumerate() {
        let mut x = 3.0 * c as f64;
        for level in 0..h {
            if level > 0 {
                x += rng.random_range(-0.3..0.3);
            }
            let k = blocks.len();
            blocks.push(Block::cube(format!("{prefix}{k:02}"), x, 0.0, level as f64 + 0.5).with_color(colors[k]));
        }
    }
    Scene::new(blocks).unwrap()
}

/// A feasible trial with up to `max_blocks` blocks. Some columns of B may
/// already stand in A (bottom levels only); every other block starts on the
/// ground away from B.
pub fn random_trial<R: Rng>(rng: &mut R, max_blocks: usize) -> TrialSpec {
    let n = rng.random_range(1..=max_blocks);
    let b = random_stacks(rng, n, "b");
    let mut a_blocks = Vec::new();
    let mut rest = Vec::new();
    for blk in &b.blocks {
        // keep ground-level blocks in place half the time, never anything
        // above a moved block
        let keep = blk.bottom() < 1e-9 && rng.random_bool(0.5);
        if keep {
            let mut kept = blk.clone();
            kept.id = format!("a{}", blk.id);
            a_blocks.push(kept);
        } else {
            rest.push(blk.color);
        }
    }
    let scattered = ground_scene(rng, "s", &rest).translated(Vector3::new(0.0, 5.0, 0.0));
    a_blocks.extend(scattered.blocks);
    let a = Scene::new(a_blocks).unwrap();
    TrialSpec::new("random", StateA::Fixed(a), b).unwrap()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
