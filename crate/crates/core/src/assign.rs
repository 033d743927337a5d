//! Minimum-distance, color-respecting matching of A blocks to B blocks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scene::{check_color_multisets, Block, Scene};

/// One-to-one mapping from A-block ids to B-block ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: BTreeMap<String, String>,
    /// Sum of centre-to-centre distances, accumulated in A-id order.
    pub total_distance: f64,
}

impl Assignment {
    pub fn target_of(&self, a_id: &str) -> Option<&str> {
        self.pairs.get(a_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn distance(a: &Block, b: &Block) -> f64 {
    (a.position - b.position).norm()
}

/// Sums pair distances in A-id order; the reference summation for every total.
pub fn total_distance(a: &Scene, b: &Scene, pairs: &BTreeMap<String, String>) -> f64 {
    pairs
        .iter()
        .map(|(ia, ib)| {
            distance(
                a.get(ia).expect("pair refers to an A block"),
                b.get(ib).expect("pair refers to a B block"),
            )
        })
        .sum()
}

/// Finds the color-respecting bijection minimizing total Euclidean distance
/// between block centres (yaw is ignored).
///
/// Color-mismatched pairs get a sentinel cost above any feasible total, so the
/// Hungarian solution never uses them. Among equal-cost optima the pairing
/// that is lexicographically smallest by sorted (A id, B id) wins.
pub fn assign_blocks(state_a: &Scene, state_b: &Scene) -> Result<Assignment> {
    check_color_multisets(&state_a.colors(), &state_b.colors())?;
    let mut a: Vec<&Block> = state_a.blocks.iter().collect();
    let mut b: Vec<&Block> = state_b.blocks.iter().collect();
    a.sort_by(|x, y| x.id.cmp(&y.id));
    b.sort_by(|x, y| x.id.cmp(&y.id));
    let n = a.len();

    let feasible = |i: usize, j: usize| a[i].color == b[j].color;
    let max_row: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| feasible(i, j))
                .map(|j| distance(a[i], b[j]))
                .fold(0.0, f64::max)
        })
        .sum();
    let sentinel = 1.0 + 2.0 * max_row;
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if feasible(i, j) { distance(a[i], b[j]) } else { sentinel })
                .collect()
        })
        .collect();

    let (_, optimum) = hungarian(&cost);
    if optimum >= sentinel {
        return Err(Error::Infeasible("no color-respecting assignment".into()));
    }
    let tol = 1e-9 * (1.0 + optimum);

    // Fix rows in order, taking the smallest column that still admits an optimum.
    let mut col_of = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut fixed = 0.0;
    for i in 0..n {
        let free_cols: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
        let mut chosen = None;
        for &j in &free_cols {
            if !feasible(i, j) {
                continue;
            }
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let sub: Vec<Vec<f64>> = ((i + 1)..n)
                .map(|r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let (_, rest) = hungarian(&sub);
            if fixed + cost[i][j] + rest <= optimum + tol {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.ok_or_else(|| {
            Error::Infeasible(format!("no optimal partner found for block `{}`", a[i].id))
        })?;
        col_of[i] = j;
        used[j] = true;
        fixed += cost[i][j];
    }

    let pairs: BTreeMap<String, String> = (0..n)
        .map(|i| (a[i].id.clone(), b[col_of[i]].id.clone()))
        .collect();
    let total_distance = total_distance(state_a, state_b, &pairs);
    Ok(Assignment {
        pairs,
        total_distance,
    })
}

/// Dense O(n^3) Hungarian algorithm (shortest augmenting paths with
/// potentials). Returns the column for each row and the optimal cost.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][row_to_col[i]]).sum();
    (row_to_col, total)
}
