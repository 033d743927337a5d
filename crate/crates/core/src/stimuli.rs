//! The bundled 24-trial stimulus suite.
//!
//! Twelve matched pairs, each with an easy (`E`) and a hard (`H`) member built
//! from the same blocks. The coordinates are a hand-made reconstruction of
//! the kinds of structures used in block-building difficulty studies, not
//! measured originals.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scene::{bucket_target, trials_to_json, Block, BucketVariant, Color, ScatterTemplate, Scene, StateA, TrialSpec};

pub const PAIR_COUNT: usize = 12;
/// Workspace of the scattered initial states.
pub const SCATTER_WORKSPACE: [f64; 2] = [12.0, 8.0];
/// Pair whose members humans rate alike; excluded from rank-order checks.
pub const NULL_PAIR: usize = 11;

/// The suite as shipped in `data/stimuli/trials.json`.
pub const TRIALS_JSON: &str = include_str!("../data/stimuli/trials.json");
pub const STIMULI_README: &str = include_str!("../data/stimuli/README.md");

/// Trial id of a pair member, e.g. `7H`.
pub fn trial_id(pair: usize, hard: bool) -> String {
    format!("{pair}{}", if hard { 'H' } else { 'E' })
}

/// `(easy, hard)` ids for pairs 1 to 12.
pub fn pair_ids() -> Vec<(String, String)> {
    (1..=PAIR_COUNT).map(|k| (trial_id(k, false), trial_id(k, true))).collect()
}

fn cube(i: usize, x: f64, y: f64, level: usize, color: Color) -> Block {
    Block::cube(format!("b{i:02}"), x, y, level as f64 + 0.5).with_color(color)
}

/// Builds a scene from `(x, y, level)` triples; `colors` cycles.
fn scene(cells: &[(f64, f64, usize)], colors: &[Color]) -> Scene {
    let blocks = cells
        .iter()
        .enumerate()
        .map(|(i, &(x, y, l))| cube(i, x, y, l, colors[i % colors.len()]))
        .collect();
    Scene::new(blocks).expect("bundled scene is valid")
}

fn line(n: usize) -> Vec<(f64, f64, usize)> {
    (0..n).map(|i| (i as f64 - (n - 1) as f64 / 2.0, 0.0, 0)).collect()
}

/// Column of `n` cubes whose level `l` is shifted by `shift(l)` along x.
fn column(n: usize, x: f64, shift: impl Fn(usize) -> f64) -> Vec<(f64, f64, usize)> {
    (0..n).map(|l| (x + shift(l), 0.0, l)).collect()
}

fn tower(n: usize) -> Vec<(f64, f64, usize)> {
    column(n, 0.0, |_| 0.0)
}

/// Scatter of the blocks of `target`, one color per block or one shared color.
fn scatter(target: &Scene) -> StateA {
    let mut colors: Vec<Color> = target.blocks.iter().map(|b| b.color).collect();
    if colors.iter().all(|c| *c == colors[0]) {
        colors.truncate(1);
    }
    StateA::Scatter(ScatterTemplate {
        count: target.len(),
        colors,
        workspace: SCATTER_WORKSPACE,
    })
}

fn trial(pair: usize, hard: bool, a: StateA, b: Scene) -> TrialSpec {
    TrialSpec::new(trial_id(pair, hard), a, b).expect("bundled trial is valid")
}

/// Both members of a pair whose initial state is a scatter of the target's blocks.
fn scattered_pair(pair: usize, easy: Scene, hard: Scene) -> [TrialSpec; 2] {
    [
        trial(pair, false, scatter(&easy), easy),
        trial(pair, true, scatter(&hard), hard),
    ]
}

/// Builds the 24 trials in pair order, easy member first.
pub fn bundled_trials() -> Vec<TrialSpec> {
    let n = [Color::Natural];
    let rb = [Color::Red, Color::Blue];
    let gy = [Color::Green, Color::Yellow];
    let mut out = Vec::with_capacity(2 * PAIR_COUNT);

    // 1: three in a row or three high
    out.extend(scattered_pair(1, scene(&line(3), &n), scene(&tower(3), &n)));

    // 2: flat square or a four-block tower
    let square = [(-0.5, -0.5, 0), (0.5, -0.5, 0), (-0.5, 0.5, 0), (0.5, 0.5, 0)];
    out.extend(scattered_pair(2, scene(&square, &n), scene(&tower(4), &n)));

    // 3: stepped pyramid or a six-block tower
    let pyramid = [(-1.0, 0.0, 0), (0.0, 0.0, 0), (1.0, 0.0, 0), (-0.5, 0.0, 1), (0.5, 0.0, 1), (0.0, 0.0, 2)];
    out.extend(scattered_pair(3, scene(&pyramid, &n), scene(&tower(6), &n)));

    // 4: three short towers or two leaning ones
    let short: Vec<_> = [-2.0, 0.0, 2.0].iter().flat_map(|&x| column(2, x, |_| 0.0)).collect();
    let mut leaning = column(3, -2.0, |l| -0.25 * l as f64);
    leaning.extend(column(3, 2.0, |l| 0.25 * l as f64));
    out.extend(scattered_pair(4, scene(&short, &n), scene(&leaning, &n)));

    // 5: a row of five or an overhanging staircase
    let stairs = column(5, -0.3, |l| 0.15 * l as f64);
    out.extend(scattered_pair(5, scene(&line(5), &n), scene(&stairs, &n)));

    // 6: a ring of eight on the ground or corner posts bridged by lintels
    // that carry a roof
    let ring: Vec<_> = [(-1.0, -1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)]
        .iter()
        .map(|&(x, y)| (x, y, 0))
        .collect();
    let d = 0.9;
    let bridged = [
        (-d, -d, 0),
        (d, -d, 0),
        (-d, d, 0),
        (d, d, 0),
        (0.0, -d, 1),
        (0.0, d, 1),
        (0.0, 0.0, 2),
        (0.0, 0.0, 3),
    ];
    out.extend(scattered_pair(6, scene(&ring, &n), scene(&bridged, &n)));

    // 7: ten in a row or ten high
    out.extend(scattered_pair(7, scene(&line(10), &n), scene(&tower(10), &n)));

    // 8: two towers of four or an arch
    let mut twin = column(4, -1.5, |_| 0.0);
    twin.extend(column(4, 1.5, |_| 0.0));
    let mut arch = column(3, -d, |_| 0.0);
    arch.extend(column(3, d, |_| 0.0));
    arch.extend([(0.0, 0.0, 3), (0.0, 0.0, 4)]);
    out.extend(scattered_pair(8, scene(&twin, &n), scene(&arch, &n)));

    // 9: take a tower down into a row, or build the row up into a tower
    let (row5, tower5) = (scene(&line(5), &n), scene(&tower(5), &n));
    out.push(trial(9, false, StateA::Fixed(tower5.clone()), row5.clone()));
    out.push(trial(9, true, StateA::Fixed(row5), tower5));

    // 10: two colors in a row or in a wobbling tower
    let wobble = column(6, 0.0, |l| if l % 2 == 0 { -0.1 } else { 0.1 });
    out.extend(scattered_pair(10, scene(&line(6), &rb), scene(&wobble, &rb)));

    // 11: an alternating ten-block tower built from a scatter or by
    // re-sorting a banded tower
    let alternating = scene(&tower(10), &gy);
    let banded: Vec<Block> = (0..10)
        .map(|l| cube(l, -3.0, 0.0, l, if l < 5 { Color::Green } else { Color::Yellow }))
        .collect();
    let banded = Scene::new(banded).expect("bundled scene is valid");
    let shifted = alternating.translated(nalgebra::Vector3::new(3.0, 0.0, 0.0));
    out.push(trial(11, false, scatter(&alternating), alternating.clone()));
    out.push(trial(11, true, StateA::Fixed(banded), shifted));

    // 12: five blocks of one color into a near, flat bucket or a far, stacked one
    for (hard, v) in [(false, BucketVariant::Easy), (true, BucketVariant::Hard)] {
        out.push(trial(12, hard, StateA::Bucket(v), bucket_target(v)));
    }
    out
}

/// Parses the shipped suite.
pub fn load_bundled() -> Result<Vec<TrialSpec>> {
    crate::scene::trials_from_json(TRIALS_JSON)
}

/// Writes `trials.json` and `README.md` into `dir`, creating it if needed.
pub fn write_bundled(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("trials.json", trials_to_json(&bundled_trials()) + "\n"),
        ("README.md", STIMULI_README.to_string()),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_builder() {
        assert_eq!(TRIALS_JSON, trials_to_json(&bundled_trials()) + "\n");
        assert_eq!(load_bundled().unwrap(), bundled_trials());
    }

    #[test]
    fn ids_in_pair_order() {
        let ids: Vec<String> = bundled_trials().into_iter().map(|t| t.id).collect();
        let expected: Vec<String> = pair_ids().into_iter().flat_map(|(e, h)| [e, h]).collect();
        assert_eq!(ids, expected);
    }
}
