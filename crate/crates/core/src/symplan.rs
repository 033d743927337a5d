//! Symbolic Grasp/Place planning that builds the target state bottom-up.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::assign::Assignment;
use crate::error::{Error, Result};
use crate::scene::{extract_support_graph, Block, Scene, SupportGraph, CONTACT_TOL};

/// A block is left alone when its target is this close (block units).
pub const MOVE_POSITION_TOL: f64 = 0.05;
/// ... and its yaw differs by at most this much (radians, modulo box symmetry).
pub const MOVE_YAW_TOL: f64 = 0.05;

/// Where a placed block comes to rest, in B-frame ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlaceTarget {
    Ground,
    Blocks(Vec<String>),
}

impl Serialize for PlaceTarget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PlaceTarget::Ground => s.serialize_str("ground"),
            PlaceTarget::Blocks(ids) => ids.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PlaceTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            Ids(Vec<String>),
        }
        match Repr::deserialize(d)? {
            Repr::Word(w) if w == "ground" => Ok(PlaceTarget::Ground),
            Repr::Word(w) => Err(de::Error::custom(format!("unknown place target `{w}`"))),
            Repr::Ids(ids) => Ok(PlaceTarget::Blocks(ids)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Action {
    Grasp { subject: String },
    Place { subject: String, target: PlaceTarget },
}

impl Action {
    pub fn subject(&self) -> &str {
        match self {
            Action::Grasp { subject } | Action::Place { subject, .. } => subject,
        }
    }
}

/// A single block transport: A-frame id and the B-frame id it becomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transport {
    pub subject: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicPlan {
    pub actions: Vec<Action>,
    /// A-frame ids of every block that needs transporting.
    pub moved_blocks: BTreeSet<String>,
    /// The transports in execution order.
    pub transports: Vec<Transport>,
}

impl SymbolicPlan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.actions).expect("plan serializes")
    }
}

/// Yaw difference modulo the footprint's rotational symmetry.
pub fn yaw_distance(a: &Block, b: &Block) -> f64 {
    let square = (a.dims.x - a.dims.y).abs() < 1e-9 && (b.dims.x - b.dims.y).abs() < 1e-9;
    let period = if square { FRAC_PI_2 } else { PI };
    let d = (b.yaw - a.yaw).rem_euclid(period);
    d.min(period - d)
}

/// True when block `a` must be transported to reach pose `b`.
pub fn needs_move(a: &Block, b: &Block) -> bool {
    (a.position - b.position).norm() > MOVE_POSITION_TOL || yaw_distance(a, b) > MOVE_YAW_TOL
}

fn check_assignment(a: &Scene, b: &Scene, asg: &Assignment) -> Result<()> {
    if asg.len() != a.len() || asg.len() != b.len() {
        return Err(Error::Planning(format!(
            "assignment covers {} pairs for {} A and {} B blocks",
            asg.len(),
            a.len(),
            b.len()
        )));
    }
    let mut targets = HashSet::new();
    for (ia, ib) in &asg.pairs {
        let (Some(x), Some(y)) = (a.get(ia), b.get(ib)) else {
            return Err(Error::Planning(format!("assignment pair {ia} -> {ib} names unknown blocks")));
        };
        if x.color != y.color {
            return Err(Error::Planning(format!("assignment pairs {ia} and {ib} of different colors")));
        }
        if !targets.insert(ib.as_str()) {
            return Err(Error::Planning(format!("B block {ib} assigned twice")));
        }
    }
    Ok(())
}

/// Orders the blocks that need moving so B is built from the ground up.
///
/// Moved blocks are sorted by the height of their target base, ties by B id;
/// since a supporter's base is always strictly below the block it carries,
/// that order is topological in B's support graph. Each moved block yields a
/// Grasp followed by a Place.
pub fn plan_symbolic(state_a: &Scene, state_b: &Scene, assignment: &Assignment) -> Result<SymbolicPlan> {
    check_assignment(state_a, state_b, assignment)?;
    let graph = extract_support_graph(state_b, CONTACT_TOL).map_err(|e| match e {
        Error::SupportCycle { .. } => Error::Planning(e.to_string()),
        other => other,
    })?;

    let mut moves: Vec<(&Block, &str)> = Vec::new();
    for (ia, ib) in &assignment.pairs {
        let a = state_a.get(ia).expect("checked");
        let b = state_b.get(ib).expect("checked");
        if needs_move(a, b) {
            moves.push((b, ia.as_str()));
        }
    }
    moves.sort_by(|(x, _), (y, _)| x.bottom().total_cmp(&y.bottom()).then_with(|| x.id.cmp(&y.id)));

    let moved_b: HashSet<&str> = moves.iter().map(|(b, _)| b.id.as_str()).collect();
    let mut in_place: HashSet<&str> = state_b
        .blocks
        .iter()
        .map(|b| b.id.as_str())
        .filter(|id| !moved_b.contains(id))
        .collect();

    let mut actions = Vec::with_capacity(2 * moves.len());
    let mut transports = Vec::with_capacity(moves.len());
    for (b, subject) in &moves {
        let j = state_b.index_of(&b.id).expect("block of B");
        let target = place_target(&graph, j);
        if let PlaceTarget::Blocks(ids) = &target {
            if let Some(missing) = ids.iter().find(|s| !in_place.contains(s.as_str())) {
                return Err(Error::Planning(format!(
                    "{} would be placed before its supporter {missing}",
                    b.id
                )));
            }
        }
        actions.push(Action::Grasp {
            subject: subject.to_string(),
        });
        actions.push(Action::Place {
            subject: subject.to_string(),
            target,
        });
        transports.push(Transport {
            subject: subject.to_string(),
            target: b.id.clone(),
        });
        in_place.insert(b.id.as_str());
    }

    Ok(SymbolicPlan {
        actions,
        moved_blocks: moves.iter().map(|(_, a)| a.to_string()).collect(),
        transports,
    })
}

fn place_target(graph: &SupportGraph, j: usize) -> PlaceTarget {
    let mut ids: Vec<String> = graph.supporters(j).map(|i| graph.ids[i].clone()).collect();
    if ids.is_empty() {
        PlaceTarget::Ground
    } else {
        ids.sort();
        PlaceTarget::Blocks(ids)
    }
}

/// Checks that actions alternate Grasp(b)/Place(b) and that every Place names
/// supporters that are already in position. Supporters are B-frame ids; an
/// id counts as in position if its block is not moved by the plan or has been
/// placed earlier. `b_of` maps A ids to B ids.
pub fn verify_plan(
    plan: &SymbolicPlan,
    state_b: &Scene,
    b_of: &BTreeMap<String, String>,
) -> Result<()> {
    if plan.actions.len() != 2 * plan.moved_blocks.len() {
        return Err(Error::Planning("plan length is not twice the moved-block count".into()));
    }
    let graph = extract_support_graph(state_b, CONTACT_TOL)?;
    let moved_b: HashSet<&str> = plan
        .moved_blocks
        .iter()
        .map(|a| b_of[a].as_str())
        .collect();
    let mut in_place: HashSet<&str> = state_b
        .blocks
        .iter()
        .map(|b| b.id.as_str())
        .filter(|id| !moved_b.contains(id))
        .collect();
    for pair in plan.actions.chunks(2) {
        let (Action::Grasp { subject: g }, Action::Place { subject: p, target }) = (&pair[0], &pair[1])
        else {
            return Err(Error::Planning("actions do not alternate grasp/place".into()));
        };
        if g != p {
            return Err(Error::Planning(format!("grasped {g} but placed {p}")));
        }
        let b_id = b_of[p].as_str();
        let j = state_b.index_of(b_id).expect("B id");
        let expected = place_target(&graph, j);
        if &expected != target {
            return Err(Error::Planning(format!("{p} placed on {target:?}, expected {expected:?}")));
        }
        if let PlaceTarget::Blocks(ids) = target {
            if let Some(m) = ids.iter().find(|s| !in_place.contains(s.as_str())) {
                return Err(Error::Planning(format!("{p} placed before supporter {m}")));
            }
        }
        in_place.insert(b_id);
    }
    Ok(())
}

/// Teleports each transported block to its target pose, in plan order.
pub fn execute_abstract(state_a: &Scene, state_b: &Scene, plan: &SymbolicPlan) -> Scene {
    let mut world = state_a.clone();
    for t in &plan.transports {
        let target = state_b.get(&t.target).expect("target in B");
        let i = world.index_of(&t.subject).expect("subject in A");
        world.blocks[i].position = target.position;
        world.blocks[i].yaw = target.yaw;
    }
    world
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::assign_blocks;

    fn scene(blocks: Vec<Block>) -> Scene {
        Scene::new(blocks).unwrap()
    }

    #[test]
    fn nothing_to_move() {
        let s = scene(vec![Block::cube("a", 0.0, 0.0, 0.5), Block::cube("b", 0.0, 0.0, 1.5)]);
        let asg = assign_blocks(&s, &s).unwrap();
        let plan = plan_symbolic(&s, &s, &asg).unwrap();
        assert!(plan.is_empty());
        assert!(plan.moved_blocks.is_empty());
    }

    #[test]
    fn two_cube_tower() {
        let a = scene(vec![Block::cube("x", 4.0, 0.0, 0.5), Block::cube("y", -4.0, 3.0, 0.5)]);
        let b = scene(vec![Block::cube("base", 0.0, 0.0, 0.5), Block::cube("top", 0.0, 0.0, 1.5)]);
        let asg = assign_blocks(&a, &b).unwrap();
        let plan = plan_symbolic(&a, &b, &asg).unwrap();
        assert_eq!(plan.len(), 4);
        let base_subject = asg.pairs.iter().find(|(_, v)| *v == "base").unwrap().0;
        assert_eq!(plan.actions[0], Action::Grasp { subject: base_subject.clone() });
        assert_eq!(
            plan.actions[1],
            Action::Place { subject: base_subject.clone(), target: PlaceTarget::Ground }
        );
        match &plan.actions[3] {
            Action::Place { target, .. } => assert_eq!(target, &PlaceTarget::Blocks(vec!["base".into()])),
            other => panic!("{other:?}"),
        }
        verify_plan(&plan, &b, &asg.pairs).unwrap();
        let done = execute_abstract(&a, &b, &plan);
        for (ia, ib) in &asg.pairs {
            assert_eq!(done.get(ia).unwrap().position, b.get(ib).unwrap().position);
        }
    }

    #[test]
    fn unmoved_blocks_are_skipped() {
        let a = scene(vec![Block::cube("a", 0.0, 0.0, 0.5), Block::cube("b", 5.0, 0.0, 0.5)]);
        let b = scene(vec![Block::cube("a", 0.0, 0.0, 0.5), Block::cube("b", 0.02, 0.0, 1.5)]);
        let asg = assign_blocks(&a, &b).unwrap();
        let plan = plan_symbolic(&a, &b, &asg).unwrap();
        assert_eq!(plan.len(), 2);
        verify_plan(&plan, &b, &asg.pairs).unwrap();
    }

    #[test]
    fn yaw_symmetry() {
        let a = Block::cube("a", 0.0, 0.0, 0.5);
        let mut b = a.clone();
        b.yaw = FRAC_PI_2;
        assert!(yaw_distance(&a, &b) < 1e-12);
        assert!(!needs_move(&a, &b));
        b.yaw = 0.3;
        assert!(needs_move(&a, &b));
    }

    #[test]
    fn serialization_format() {
        let plan = SymbolicPlan {
            actions: vec![
                Action::Grasp { subject: "a".into() },
                Action::Place { subject: "a".into(), target: PlaceTarget::Ground },
                Action::Grasp { subject: "b".into() },
                Action::Place { subject: "b".into(), target: PlaceTarget::Blocks(vec!["A".into()]) },
            ],
            moved_blocks: ["a".to_string(), "b".to_string()].into(),
            transports: vec![],
        };
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(v[0], serde_json::json!({"kind": "grasp", "subject": "a"}));
        assert_eq!(v[1], serde_json::json!({"kind": "place", "subject": "a", "target": "ground"}));
        assert_eq!(v[3]["target"], serde_json::json!(["A"]));
        let back: Vec<Action> = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan.actions);
    }

    #[test]
    fn bad_assignment_rejected() {
        let a = scene(vec![Block::cube("a", 0.0, 0.0, 0.5)]);
        let asg = Assignment { pairs: [("a".into(), "zz".into())].into(), total_distance: 0.0 };
        assert!(matches!(plan_symbolic(&a, &a, &asg), Err(Error::Planning(_))));
    }
}
