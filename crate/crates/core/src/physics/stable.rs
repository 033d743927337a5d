use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geom::{self, Point2};
use crate::scene::{extract_support_graph, Scene, CONTACT_TOL};

fn check_axis_aligned(scene: &Scene) -> Result<()> {
    for b in &scene.blocks {
        let turns = b.yaw / FRAC_PI_2;
        if (turns - turns.round()).abs() > 1e-9 {
            return Err(Error::UnsupportedInput(format!(
                "block `{}` has yaw {} which is not a multiple of 90 degrees",
                b.id, b.yaw
            )));
        }
    }
    Ok(())
}

/// Smallest signed distance, over all blocks `j`, between the horizontal
/// centre of mass of `j` with everything it carries and the boundary of the
/// convex hull of the contacts holding that group up. Positive means every
/// group is statically supported.
pub fn stability_margin(scene: &Scene) -> Result<f64> {
    check_axis_aligned(scene)?;
    let graph = extract_support_graph(scene, CONTACT_TOL)?;
    let n = scene.len();
    let footprints: Vec<[Point2; 4]> = scene.blocks.iter().map(|b| b.footprint()).collect();

    let mut margin = f64::INFINITY;
    for j in 0..n {
        let mut group = vec![false; n];
        group[j] = true;
        for d in graph.descendants(j) {
            group[d] = true;
        }

        let (mut mass, mut moment) = (0.0, Point2::zeros());
        let mut contact_points: Vec<Point2> = Vec::new();
        for u in (0..n).filter(|&u| group[u]) {
            let b = &scene.blocks[u];
            mass += b.mass;
            moment += Point2::new(b.position.x, b.position.y) * b.mass;
            if graph.ground[u] {
                contact_points.extend_from_slice(&footprints[u]);
            }
            for s in graph.supporters(u).filter(|&s| !group[s]) {
                let (poly, _) = geom::intersection(&footprints[s], &footprints[u]);
                contact_points.extend(poly);
            }
        }
        let hull = geom::convex_hull(&contact_points);
        margin = margin.min(geom::signed_distance_inside(&hull, &(moment / mass)));
    }
    Ok(margin)
}

/// True when every block group's centre of mass lies strictly inside its
/// support region. Only axis-aligned scenes are accepted.
pub fn static_stable(scene: &Scene) -> Result<bool> {
    Ok(stability_margin(scene)? > 0.0)
}
