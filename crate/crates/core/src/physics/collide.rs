//! Narrow phase for boxes against the ground and against each other.

use nalgebra::{Matrix3, Vector3};

use super::world::Body;

/// Contacts are generated for features closer than this (speculative margin).
pub(crate) const MARGIN: f64 = 0.1;
/// An edge axis must beat the best face axis by this much to be used.
const EDGE_PREFERENCE: f64 = 5e-3;
/// A face of the second box must beat the first box's best face by this much,
/// which keeps the reference face from flipping between steps.
const FACE_PREFERENCE: f64 = 1e-3;
/// Clipped contact points closer than this are merged.
const MERGE_DISTANCE: f64 = 1e-3;

/// Raw geometric contact. `normal` points from `b` (or the ground) toward
/// `a`; `separation` is negative when the features overlap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Manifold {
    pub a: usize,
    pub b: Option<usize>,
    pub normal: Vector3<f64>,
    pub point_a: Vector3<f64>,
    pub point_b: Vector3<f64>,
    pub separation: f64,
}

pub(crate) fn box_ground(index: usize, body: &Body, out: &mut Vec<Manifold>) {
    let r = body.rotation();
    for corner in corners(&body.half) {
        let p = body.position + r * corner;
        if p.z < MARGIN {
            out.push(Manifold {
                a: index,
                b: None,
                normal: Vector3::z(),
                point_a: p,
                point_b: Vector3::new(p.x, p.y, 0.0),
                separation: p.z,
            });
        }
    }
}

fn corners(h: &Vector3<f64>) -> [Vector3<f64>; 8] {
    let mut out = [Vector3::zeros(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        let s = |bit: usize| if i & (1 << bit) == 0 { -1.0 } else { 1.0 };
        *c = Vector3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z);
    }
    out
}

struct Obb {
    center: Vector3<f64>,
    axes: Matrix3<f64>,
    half: Vector3<f64>,
}

impl Obb {
    fn of(body: &Body) -> Self {
        Obb {
            center: body.position,
            axes: body.rotation(),
            half: body.half,
        }
    }

    fn axis(&self, i: usize) -> Vector3<f64> {
        self.axes.column(i).into_owned()
    }

    fn radius_along(&self, l: &Vector3<f64>) -> f64 {
        (0..3).map(|i| self.half[i] * self.axis(i).dot(l).abs()).sum()
    }
}

enum Feature {
    FaceA(usize),
    FaceB(usize),
    Edge(usize, usize),
}

/// Separating-axis test over the 15 candidate axes followed by manifold
/// generation: face-face contacts clip the incident face against the
/// reference face, edge-edge contacts use the closest points of the edges.
pub(crate) fn box_box(ia: usize, a: &Body, ib: usize, b: &Body, out: &mut Vec<Manifold>) {
    let (oa, ob) = (Obb::of(a), Obb::of(b));
    let d = ob.center - oa.center;
    let sep_along = |l: &Vector3<f64>| d.dot(l).abs() - oa.radius_along(l) - ob.radius_along(l);

    let mut best_face = (f64::NEG_INFINITY, Feature::FaceA(0));
    for i in 0..3 {
        let s = sep_along(&oa.axis(i));
        if s > MARGIN {
            return;
        }
        if s > best_face.0 {
            best_face = (s, Feature::FaceA(i));
        }
    }
    for i in 0..3 {
        let s = sep_along(&ob.axis(i));
        if s > MARGIN {
            return;
        }
        if s > best_face.0 + FACE_PREFERENCE {
            best_face = (s, Feature::FaceB(i));
        }
    }
    let mut best_edge: Option<(f64, usize, usize)> = None;
    for i in 0..3 {
        for j in 0..3 {
            let c = oa.axis(i).cross(&ob.axis(j));
            let n = c.norm();
            if n < 1e-6 {
                continue;
            }
            let s = sep_along(&(c / n));
            if s > MARGIN {
                return;
            }
            if best_edge.is_none_or(|(bs, _, _)| s > bs) {
                best_edge = Some((s, i, j));
            }
        }
    }

    let feature = match best_edge {
        Some((s, i, j)) if s > best_face.0 + EDGE_PREFERENCE => Feature::Edge(i, j),
        _ => best_face.1,
    };
    match feature {
        // reference face on A: B is incident, so B plays the role of `a`
        Feature::FaceA(k) => face_contact(&oa, ia, &ob, ib, k, out),
        Feature::FaceB(k) => face_contact(&ob, ib, &oa, ia, k, out),
        Feature::Edge(i, j) => edge_contact(&oa, ia, &ob, ib, i, j, out),
    }
}

fn face_contact(r: &Obb, ir: usize, inc: &Obb, ii: usize, k: usize, out: &mut Vec<Manifold>) {
    let mut n = r.axis(k);
    if (inc.center - r.center).dot(&n) < 0.0 {
        n = -n;
    }
    let face_center = r.center + n * r.half[k];

    // incident face: the one most anti-parallel to n
    let j = (0..3)
        .max_by(|&x, &y| inc.axis(x).dot(&n).abs().total_cmp(&inc.axis(y).dot(&n).abs()))
        .expect("three axes");
    let sj = if inc.axis(j).dot(&n) > 0.0 { -1.0 } else { 1.0 };
    let ic = inc.center + inc.axis(j) * (sj * inc.half[j]);
    let (u, v) = ((j + 1) % 3, (j + 2) % 3);
    let (eu, ev) = (inc.axis(u) * inc.half[u], inc.axis(v) * inc.half[v]);
    let mut poly = vec![ic + eu + ev, ic - eu + ev, ic - eu - ev, ic + eu - ev];

    for m in [(k + 1) % 3, (k + 2) % 3] {
        let axis = r.axis(m);
        for sign in [1.0, -1.0] {
            let plane_n = axis * sign;
            let offset = plane_n.dot(&r.center) + r.half[m];
            poly = clip_polygon(&poly, &plane_n, offset);
            if poly.is_empty() {
                return;
            }
        }
    }
    let mut kept: Vec<Vector3<f64>> = Vec::with_capacity(poly.len());
    for p in poly {
        if kept.iter().all(|q| (q - p).norm() > MERGE_DISTANCE) {
            kept.push(p);
        }
    }
    for p in kept {
        let sep = (p - face_center).dot(&n);
        if sep < MARGIN {
            out.push(Manifold {
                a: ii,
                b: Some(ir),
                normal: n,
                point_a: p,
                point_b: p - n * sep,
                separation: sep,
            });
        }
    }
}

/// Keeps the part of `poly` with `plane_n · p <= offset`.
fn clip_polygon(poly: &[Vector3<f64>], plane_n: &Vector3<f64>, offset: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let dp = plane_n.dot(&p) - offset;
        let dq = plane_n.dot(&q) - offset;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp <= 0.0) != (dq <= 0.0) {
            out.push(p + (q - p) * (dp / (dp - dq)));
        }
    }
    out
}

fn edge_contact(a: &Obb, ia: usize, b: &Obb, ib: usize, i: usize, j: usize, out: &mut Vec<Manifold>) {
    let mut l = a.axis(i).cross(&b.axis(j)).normalize();
    if (b.center - a.center).dot(&l) < 0.0 {
        l = -l;
    }
    // the edge of each box nearest the other box
    let edge_point = |o: &Obb, along: usize, toward: &Vector3<f64>| {
        let mut p = o.center;
        for m in 0..3 {
            if m != along {
                let s = if o.axis(m).dot(toward) > 0.0 { 1.0 } else { -1.0 };
                p += o.axis(m) * (s * o.half[m]);
            }
        }
        p
    };
    let pa = edge_point(a, i, &l);
    let pb = edge_point(b, j, &(-l));
    let (da, db) = (a.axis(i), b.axis(j));
    let (ha, hb) = (a.half[i], b.half[j]);

    // closest points of the two edge segments
    let r = pa - pb;
    let c = da.dot(&db);
    let denom = 1.0 - c * c;
    let (e, f) = (da.dot(&r), db.dot(&r));
    let mut s = if denom > 1e-12 { (c * f - e) / denom } else { 0.0 };
    s = s.clamp(-ha, ha);
    let t = (f + c * s).clamp(-hb, hb);
    let s = (c * t - e).clamp(-ha, ha);
    let qa = pa + da * s;
    let qb = pb + db * t;

    // normal from b toward a
    let n = -l;
    out.push(Manifold {
        a: ia,
        b: Some(ib),
        normal: n,
        point_a: qa,
        point_b: qb,
        separation: (qa - qb).dot(&n),
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn cube(x: f64, y: f64, z: f64) -> Body {
        Body::new("c", Vector3::new(1.0, 1.0, 1.0), 1.0, Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    #[test]
    fn resting_cube_touches_ground_at_four_corners() {
        let mut out = Vec::new();
        box_ground(0, &cube(0.0, 0.0, 0.5), &mut out);
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|m| m.separation.abs() < 1e-12));
    }

    #[test]
    fn stacked_cubes_give_four_face_contacts() {
        let mut out = Vec::new();
        box_box(0, &cube(0.0, 0.0, 0.5), 1, &cube(0.3, 0.0, 1.5), &mut out);
        assert_eq!(out.len(), 4);
        for m in &out {
            assert!(m.separation.abs() < 1e-12);
            assert!((m.normal.z.abs() - 1.0).abs() < 1e-12);
            // the upper block is pushed upward
            let upper_is_a = m.a == 1;
            assert_eq!(upper_is_a, m.normal.z > 0.0);
        }
        let xs: Vec<f64> = out.iter().map(|m| m.point_a.x).collect();
        assert!(xs.iter().all(|x| (-0.2 - 1e-12..=0.5 + 1e-12).contains(x)));
    }

    #[test]
    fn distant_boxes_have_no_contact() {
        let mut out = Vec::new();
        box_box(0, &cube(0.0, 0.0, 0.5), 1, &cube(3.0, 0.0, 0.5), &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn crossed_edges() {
        // a cube rotated 45 degrees about x, resting edge-down on a cube rotated 45 degrees about y
        let lower = Body::new(
            "l",
            Vector3::new(1.0, 1.0, 1.0),
            1.0,
            Vector3::zeros(),
            UnitQuaternion::from_euler_angles(0.0, std::f64::consts::FRAC_PI_4, 0.0),
        );
        let h = 2.0f64.sqrt() / 2.0;
        let upper = Body::new(
            "u",
            Vector3::new(1.0, 1.0, 1.0),
            1.0,
            Vector3::new(0.0, 0.0, 2.0 * h - 0.01),
            UnitQuaternion::from_euler_angles(std::f64::consts::FRAC_PI_4, 0.0, 0.0),
        );
        let mut out = Vec::new();
        box_box(0, &lower, 1, &upper, &mut out);
        assert_eq!(out.len(), 1);
        let m = out[0];
        assert!((m.separation + 0.01).abs() < 1e-9, "{}", m.separation);
        assert_eq!(m.a, 0);
        assert!((m.normal.z + 1.0).abs() < 1e-9);
    }
}
