//! Blocks, scenes, support graphs and trial definitions.

mod io;
mod sample;
mod support;

use std::collections::HashSet;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point2};

pub use io::{
    load_scene, load_trials, save_scene, save_trials, scene_from_json, scene_to_json,
    trials_from_json, trials_to_json,
};
pub use sample::{
    bucket_target, sample_bucket_trial, sample_bucket_trial_with_target, sample_scattered_state,
    BUCKET_GRID_PITCH, BUCKET_MOVED, BUCKET_TOTAL,
};
pub use support::{extract_support_graph, SupportGraph};

/// Contact tolerance in block units, used for support detection and for the
/// interpenetration check.
pub const CONTACT_TOL: f64 = 0.02;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    #[default]
    Natural,
    Red,
    Blue,
    Green,
    Yellow,
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Color::Natural => "natural",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
        };
        f.write_str(s)
    }
}

/// A yaw-rotated box. Lengths are in block units (the canonical cube has edge 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub dims: Vector3<f64>,
    /// Centre of the box.
    pub position: Vector3<f64>,
    /// Rotation about the vertical axis, radians.
    pub yaw: f64,
    pub color: Color,
    pub mass: f64,
}

impl Block {
    /// Unit cube with unit mass resting on the ground at `(x, y)`.
    pub fn cube(id: impl Into<String>, x: f64, y: f64, z: f64) -> Self {
        Block {
            id: id.into(),
            dims: Vector3::new(1.0, 1.0, 1.0),
            position: Vector3::new(x, y, z),
            yaw: 0.0,
            color: Color::Natural,
            mass: 1.0,
        }
    }

    pub fn with_color(mut self, color: Color) -> Self {
        self.color = color;
        self
    }

    pub fn bottom(&self) -> f64 {
        self.position.z - self.dims.z / 2.0
    }

    pub fn top(&self) -> f64 {
        self.position.z + self.dims.z / 2.0
    }

    pub fn footprint(&self) -> [Point2; 4] {
        geom::rect_corners(
            Point2::new(self.position.x, self.position.y),
            self.dims.x,
            self.dims.y,
            self.yaw,
        )
    }

    /// Extent of the box along world axis `axis` (0 = x, 1 = y, 2 = z).
    pub fn world_extent(&self, axis: usize) -> f64 {
        let (s, c) = self.yaw.sin_cos();
        match axis {
            0 => c.abs() * self.dims.x + s.abs() * self.dims.y,
            1 => s.abs() * self.dims.x + c.abs() * self.dims.y,
            _ => self.dims.z,
        }
    }

    fn horizontal_radius(&self) -> f64 {
        0.5 * (self.dims.x * self.dims.x + self.dims.y * self.dims.y).sqrt()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidBlock {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return Err(Error::Validation("block with empty id".into()));
        }
        let finite = self.dims.iter().chain(self.position.iter()).all(|v| v.is_finite())
            && self.yaw.is_finite()
            && self.mass.is_finite();
        if !finite {
            return bad("non-finite value");
        }
        if self.dims.iter().any(|&d| d <= 0.0) {
            return bad("dimensions must be strictly positive");
        }
        if self.mass <= 0.0 {
            return bad("mass must be strictly positive");
        }
        Ok(())
    }
}

/// Penetration depth of two yaw-only boxes: the smaller of their vertical
/// overlap and their footprint overlap. Negative means separated.
pub fn penetration_depth(a: &Block, b: &Block) -> f64 {
    let vertical = a.top().min(b.top()) - a.bottom().max(b.bottom());
    if vertical <= 0.0 {
        return vertical;
    }
    let dx = a.position.x - b.position.x;
    let dy = a.position.y - b.position.y;
    let reach = a.horizontal_radius() + b.horizontal_radius();
    if dx * dx + dy * dy > reach * reach {
        return -(dx * dx + dy * dy).sqrt() + reach;
    }
    vertical.min(geom::overlap_depth(&a.footprint(), &b.footprint()))
}

/// A full world state: blocks above an implicit ground plane at height 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub blocks: Vec<Block>,
}

impl Scene {
    /// Builds a scene and checks every scene invariant.
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let scene = Scene { blocks };
        scene.validate()?;
        Ok(scene)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    /// Highest top face in the scene (0 for an empty scene).
    pub fn max_height(&self) -> f64 {
        self.blocks.iter().map(Block::top).fold(0.0, f64::max)
    }

    pub fn colors(&self) -> Vec<Color> {
        let mut c: Vec<Color> = self.blocks.iter().map(|b| b.color).collect();
        c.sort();
        c
    }

    pub fn translated(&self, offset: Vector3<f64>) -> Scene {
        Scene {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    position: b.position + offset,
                    ..b.clone()
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for b in &self.blocks {
            b.check()?;
            if !seen.insert(b.id.as_str()) {
                return Err(Error::InvalidBlock {
                    id: b.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            if b.bottom() < -CONTACT_TOL {
                return Err(Error::InvalidBlock {
                    id: b.id.clone(),
                    reason: format!("extends {:.4} below the ground", -b.bottom()),
                });
            }
        }
        if let Some((i, j, depth)) = self.first_interpenetration(CONTACT_TOL) {
            return Err(Error::Interpenetration {
                a: self.blocks[i].id.clone(),
                b: self.blocks[j].id.clone(),
                depth,
            });
        }
        Ok(())
    }

    /// First pair (in index order) whose penetration depth exceeds `tol`.
    pub fn first_interpenetration(&self, tol: f64) -> Option<(usize, usize, f64)> {
        let n = self.blocks.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = penetration_depth(&self.blocks[i], &self.blocks[j]);
                if d > tol {
                    return Some((i, j, d));
                }
            }
        }
        None
    }
}

/// Random scatter of unit cubes lying flat in a workspace centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterTemplate {
    pub count: usize,
    /// One color per block, or a single color shared by all blocks.
    pub colors: Vec<Color>,
    /// Width (x) and depth (y) of the workspace.
    pub workspace: [f64; 2],
}

impl ScatterTemplate {
    pub fn block_colors(&self) -> Result<Vec<Color>> {
        match self.colors.len() {
            n if n == self.count => Ok(self.colors.clone()),
            1 => Ok(vec![self.colors[0]; self.count]),
            0 if self.count == 0 => Ok(Vec::new()),
            n => Err(Error::Validation(format!(
                "scatter template lists {n} colors for {} blocks",
                self.count
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketVariant {
    Easy,
    Hard,
}

impl BucketVariant {
    pub fn color(self) -> Color {
        match self {
            BucketVariant::Easy => Color::Blue,
            BucketVariant::Hard => Color::Red,
        }
    }
}

/// Initial state of a trial.
#[derive(Debug, Clone, PartialEq)]
pub enum StateA {
    Fixed(Scene),
    Scatter(ScatterTemplate),
    /// The 10x2 array abstraction of a bucket trial; which blocks carry the
    /// target color is drawn per sample.
    Bucket(BucketVariant),
}

/// One reconfiguration task: build `state_b` starting from `state_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub id: String,
    pub state_a: StateA,
    pub state_b: Scene,
}

impl TrialSpec {
    pub fn new(id: impl Into<String>, state_a: StateA, state_b: Scene) -> Result<Self> {
        let t = TrialSpec {
            id: id.into(),
            state_a,
            state_b,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.state_b.validate()?;
        let b_colors = self.state_b.colors();
        match &self.state_a {
            StateA::Fixed(a) => {
                a.validate()?;
                check_color_multisets(&a.colors(), &b_colors)
            }
            StateA::Scatter(t) => {
                let mut a = t.block_colors()?;
                a.sort();
                check_color_multisets(&a, &b_colors)
            }
            StateA::Bucket(v) => {
                if b_colors.len() != BUCKET_MOVED || b_colors.iter().any(|c| *c != v.color()) {
                    return Err(Error::Infeasible(format!(
                        "bucket trial target must hold exactly {BUCKET_MOVED} {} blocks",
                        v.color()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Concrete (A, B) pair for one effort sample.
    ///
    /// Fixed initial states ignore the seed. Bucket trials return the full
    /// 20-block target: the colored blocks at the bucket poses of `state_b`
    /// plus the untouched natural blocks.
    pub fn realize(&self, sample_seed: u64) -> Result<(Scene, Scene)> {
        match &self.state_a {
            StateA::Fixed(a) => Ok((a.clone(), self.state_b.clone())),
            StateA::Scatter(t) => Ok((sample_scattered_state(t, sample_seed)?, self.state_b.clone())),
            StateA::Bucket(v) => {
                let t = sample_bucket_trial_with_target(*v, &self.state_b, sample_seed)?;
                match t.state_a {
                    StateA::Fixed(a) => Ok((a, t.state_b)),
                    _ => unreachable!("bucket sampling yields a fixed scene"),
                }
            }
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self.state_a, StateA::Fixed(_))
    }
}

pub(crate) fn check_color_multisets(a: &[Color], b: &[Color]) -> Result<()> {
    if a == b {
        return Ok(());
    }
    let count = |v: &[Color], c: Color| v.iter().filter(|x| **x == c).count();
    let mut all: Vec<Color> = a.iter().chain(b.iter()).copied().collect();
    all.sort();
    all.dedup();
    let diffs: Vec<String> = all
        .into_iter()
        .filter_map(|c| {
            let (na, nb) = (count(a, c), count(b, c));
            (na != nb).then(|| format!("{c}: {na} in A vs {nb} in B"))
        })
        .collect();
    Err(Error::Infeasible(diffs.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resting_cube_geometry() {
        let s = Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.blocks[0].bottom(), 0.0);
        assert_eq!(s.max_height(), 1.0);
    }

    #[test]
    fn shared_center_is_interpenetration_naming_both() {
        let err = Scene::new(vec![
            Block::cube("left", 0.0, 0.0, 0.5),
            Block::cube("right", 0.0, 0.0, 0.5),
        ])
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("left") && msg.contains("right"), "{msg}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Scene::new(vec![
            Block::cube("a", 0.0, 0.0, 0.5),
            Block::cube("a", 3.0, 0.0, 0.5),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn bad_block_fields_rejected() {
        let mut b = Block::cube("z", 0.0, 0.0, 0.5);
        b.dims.y = 0.0;
        assert!(Scene::new(vec![b]).is_err());
        let mut b = Block::cube("m", 0.0, 0.0, 0.5);
        b.mass = -1.0;
        assert!(Scene::new(vec![b]).is_err());
        let b = Block::cube("low", 0.0, 0.0, 0.4);
        assert!(Scene::new(vec![b]).is_err());
    }

    #[test]
    fn touching_blocks_are_valid() {
        Scene::new(vec![
            Block::cube("a", 0.0, 0.0, 0.5),
            Block::cube("b", 1.0, 0.0, 0.5),
            Block::cube("c", 0.0, 0.0, 1.5),
            // slight resting penetration within tolerance
            Block::cube("d", 1.0, 0.0, 1.49),
        ])
        .unwrap();
    }

    #[test]
    fn rotated_penetration() {
        let a = Block::cube("a", 0.0, 0.0, 0.5);
        let mut b = Block::cube("b", 1.2, 0.0, 0.5);
        b.yaw = std::f64::consts::FRAC_PI_4;
        // diamond corner reaches x = 1.2 - 0.7071 = 0.4929 < 0.5
        let d = penetration_depth(&a, &b);
        assert!(d > 0.0 && d < 0.01, "{d}");
        assert!((a.world_extent(0) - 1.0).abs() < 1e-12);
        assert!((b.world_extent(0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn color_mismatch_lists_colors() {
        let a = Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5).with_color(Color::Green)]).unwrap();
        let b = Scene::new(vec![Block::cube("b", 0.0, 0.0, 0.5).with_color(Color::Yellow)]).unwrap();
        let err = TrialSpec::new("t", StateA::Fixed(a), b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("green") && msg.contains("yellow"), "{msg}");
    }
}
