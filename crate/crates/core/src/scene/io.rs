//! JSON scene and trial files.
//!
//! ```text
//! Scene         = {"blocks":[{"id","dims":[x,y,z],"pos":[x,y,z],"yaw","color","mass"}]}
//! ScatterTemplate = {"scatter":{"count","colors":[...],"workspace":[w,h]}}
//! TrialSpec     = {"id","stateA":Scene|ScatterTemplate|{"bucket":{"variant"}},"stateB":Scene}
//! ```
//!
//! Unknown fields are rejected everywhere.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Block, BucketVariant, Color, ScatterTemplate, Scene, StateA, TrialSpec};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockRecord {
    id: String,
    dims: [f64; 3],
    pos: [f64; 3],
    yaw: f64,
    color: Color,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneRecord {
    blocks: Vec<BlockRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScatterRecord {
    scatter: ScatterTemplate,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketInner {
    variant: BucketVariant,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketRecord {
    bucket: BucketInner,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialRecord {
    id: String,
    #[serde(rename = "stateA")]
    state_a: Value,
    #[serde(rename = "stateB")]
    state_b: Value,
}

#[derive(Serialize)]
struct TrialOut {
    id: String,
    #[serde(rename = "stateA")]
    state_a: Value,
    #[serde(rename = "stateB")]
    state_b: Value,
}

impl From<&Block> for BlockRecord {
    fn from(b: &Block) -> Self {
        BlockRecord {
            id: b.id.clone(),
            dims: [b.dims.x, b.dims.y, b.dims.z],
            pos: [b.position.x, b.position.y, b.position.z],
            yaw: b.yaw,
            color: b.color,
            mass: b.mass,
        }
    }
}

impl From<BlockRecord> for Block {
    fn from(r: BlockRecord) -> Self {
        Block {
            id: r.id,
            dims: Vector3::from(r.dims),
            position: Vector3::from(r.pos),
            yaw: r.yaw,
            color: r.color,
            mass: r.mass,
        }
    }
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn scene_to_value(scene: &Scene) -> Value {
    let rec = SceneRecord {
        blocks: scene.blocks.iter().map(BlockRecord::from).collect(),
    };
    serde_json::to_value(rec).expect("scene serializes")
}

fn scene_from_value(v: Value) -> Result<Scene> {
    let rec: SceneRecord = serde_json::from_value(v).map_err(parse_err)?;
    Scene::new(rec.blocks.into_iter().map(Block::from).collect())
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(&scene_to_value(scene)).expect("scene serializes")
}

pub fn scene_from_json(text: &str) -> Result<Scene> {
    let v: Value = serde_json::from_str(text).map_err(parse_err)?;
    scene_from_value(v)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene_from_json(&text)
}

pub fn save_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene_to_json(scene) + "\n").map_err(|e| Error::io(path, e))
}

fn state_a_from_value(v: Value) -> Result<StateA> {
    let key = v
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .ok_or_else(|| Error::Parse("stateA must be a JSON object".into()))?;
    match key.as_str() {
        "scatter" => {
            let r: ScatterRecord = serde_json::from_value(v).map_err(parse_err)?;
            Ok(StateA::Scatter(r.scatter))
        }
        "bucket" => {
            let r: BucketRecord = serde_json::from_value(v).map_err(parse_err)?;
            Ok(StateA::Bucket(r.bucket.variant))
        }
        _ => Ok(StateA::Fixed(scene_from_value(v)?)),
    }
}

fn state_a_to_value(a: &StateA) -> Value {
    match a {
        StateA::Fixed(s) => scene_to_value(s),
        StateA::Scatter(t) => serde_json::to_value(ScatterRecord { scatter: t.clone() }).unwrap(),
        StateA::Bucket(v) => serde_json::to_value(BucketRecord {
            bucket: BucketInner { variant: *v },
        })
        .unwrap(),
    }
}

fn trial_from_value(v: Value) -> Result<TrialSpec> {
    let rec: TrialRecord = serde_json::from_value(v).map_err(parse_err)?;
    let id = rec.id;
    let wrap = |e: Error| Error::Trial {
        id: id.clone(),
        source: Box::new(e),
    };
    let a = state_a_from_value(rec.state_a).map_err(wrap)?;
    let b = scene_from_value(rec.state_b).map_err(wrap)?;
    TrialSpec::new(id.clone(), a, b).map_err(wrap)
}

pub fn trial_to_value(t: &TrialSpec) -> Value {
    serde_json::to_value(TrialOut {
        id: t.id.clone(),
        state_a: state_a_to_value(&t.state_a),
        state_b: scene_to_value(&t.state_b),
    })
    .expect("trial serializes")
}

/// Parses either a single trial object or an array of trials.
pub fn trials_from_json(text: &str) -> Result<Vec<TrialSpec>> {
    let v: Value = serde_json::from_str(text).map_err(parse_err)?;
    match v {
        Value::Array(items) => items.into_iter().map(trial_from_value).collect(),
        other => Ok(vec![trial_from_value(other)?]),
    }
}

pub fn trials_to_json(trials: &[TrialSpec]) -> String {
    let arr = Value::Array(trials.iter().map(trial_to_value).collect());
    serde_json::to_string_pretty(&arr).expect("trials serialize")
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<TrialSpec>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trials_from_json(&text)
}

pub fn save_trials(path: impl AsRef<Path>, trials: &[TrialSpec]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trials_to_json(trials) + "\n").map_err(|e| Error::io(path, e))
}
