use crate::error::{Error, Result};
use crate::geom;

use super::Scene;

/// Directed "supports" relation over the blocks of a scene.
///
/// Node indices follow the block order of the scene the graph was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGraph {
    pub ids: Vec<String>,
    /// `(supporter, supported)` index pairs, sorted.
    pub edges: Vec<(usize, usize)>,
    pub ground: Vec<bool>,
}

impl SupportGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn supporters(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(_, j)| *j == node)
            .map(|(i, _)| *i)
    }

    pub fn supported_by(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(i, _)| *i == node)
            .map(|(_, j)| *j)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// Kahn's algorithm; smallest ready index first. `None` if there is a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let order = self.kahn();
        (order.len() == self.len()).then_some(order)
    }

    fn kahn(&self) -> Vec<usize> {
        let n = self.len();
        let mut indegree = vec![0usize; n];
        for &(_, j) in &self.edges {
            indegree[j] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for j in self.supported_by(i) {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        order
    }

    /// Every block transitively resting on `node`, excluding `node` itself.
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![node];
        let mut out = Vec::new();
        while let Some(i) = stack.pop() {
            for j in self.supported_by(i) {
                if !seen[j] {
                    seen[j] = true;
                    out.push(j);
                    stack.push(j);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Builds the support graph: `i -> j` when the top face of `i` is within `tol`
/// of the bottom face of `j` and their footprints overlap with positive area.
pub fn extract_support_graph(scene: &Scene, tol: f64) -> Result<SupportGraph> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("support tolerance must be positive, got {tol}")));
    }
    let n = scene.len();
    let footprints: Vec<_> = scene.blocks.iter().map(|b| b.footprint()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (bi, bj) = (&scene.blocks[i], &scene.blocks[j]);
            if (bi.top() - bj.bottom()).abs() > tol {
                continue;
            }
            let (_, area) = geom::intersection(&footprints[i], &footprints[j]);
            if area > 1e-9 {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    let ground: Vec<bool> = scene.blocks.iter().map(|b| b.bottom().abs() <= tol).collect();
    let graph = SupportGraph {
        ids: scene.blocks.iter().map(|b| b.id.clone()).collect(),
        edges,
        ground,
    };

    let order = graph.kahn();
    if order.len() < n {
        let mut in_order = vec![false; n];
        for &i in &order {
            in_order[i] = true;
        }
        let ids = (0..n)
            .filter(|&i| !in_order[i])
            .map(|i| graph.ids[i].clone())
            .collect();
        return Err(Error::SupportCycle { ids });
    }
    for j in 0..n {
        if !graph.ground[j] && graph.supporters(j).next().is_none() {
            return Err(Error::Unsupported {
                id: graph.ids[j].clone(),
            });
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Block, CONTACT_TOL};
    use nalgebra::Vector3;

    #[test]
    fn single_cube() {
        let s = Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5)]).unwrap();
        let g = extract_support_graph(&s, CONTACT_TOL).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.ground, vec![true]);
    }

    #[test]
    fn three_tower_chain() {
        let s = Scene::new(vec![
            Block::cube("b1", 0.0, 0.0, 0.5),
            Block::cube("b2", 0.0, 0.0, 1.5),
            Block::cube("b3", 0.0, 0.0, 2.5),
        ])
        .unwrap();
        let g = extract_support_graph(&s, CONTACT_TOL).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.ground, vec![true, false, false]);
        assert_eq!(g.descendants(0), vec![1, 2]);
    }

    #[test]
    fn beam_on_two_pillars() {
        // pillars at x = -1 and x = 1; beam 3 long centred at x = 0 spans [-1.5, 1.5]
        let beam = Block {
            id: "beam".into(),
            dims: Vector3::new(3.0, 1.0, 0.5),
            position: Vector3::new(0.0, 0.0, 1.25),
            yaw: 0.0,
            color: Default::default(),
            mass: 1.5,
        };
        let s = Scene::new(vec![
            Block::cube("p1", -1.0, 0.0, 0.5),
            Block::cube("p2", 1.0, 0.0, 0.5),
            beam,
        ])
        .unwrap();
        let g = extract_support_graph(&s, CONTACT_TOL).unwrap();
        assert_eq!(g.supporters(2).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn edge_contact_is_not_support() {
        // the upper block only touches the lower one along an edge
        let s = Scene::new(vec![
            Block::cube("a", 0.0, 0.0, 0.5),
            Block::cube("b", 1.0, 0.0, 0.5),
            Block::cube("c", 2.0, 0.0, 1.5),
        ]);
        let err = extract_support_graph(&s.unwrap(), CONTACT_TOL).unwrap_err();
        assert!(matches!(err, Error::Unsupported { .. }));
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let s = Scene::default();
        assert!(extract_support_graph(&s, 0.0).is_err());
    }
}
