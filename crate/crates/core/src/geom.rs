//! Planar geometry used for footprints and support regions.

use nalgebra::Vector2;

pub type Point2 = Vector2<f64>;

/// Corners of a `width x depth` rectangle centred at `center`, rotated by `yaw`,
/// in counter-clockwise order.
pub fn rect_corners(center: Point2, width: f64, depth: f64, yaw: f64) -> [Point2; 4] {
    let (s, c) = yaw.sin_cos();
    let u = Point2::new(c, s) * (width / 2.0);
    let v = Point2::new(-s, c) * (depth / 2.0);
    [
        center - u - v,
        center + u - v,
        center + u + v,
        center - u + v,
    ]
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed area (positive for counter-clockwise polygons).
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let m = input.len();
        for k in 0..m {
            let p = input[k];
            let q = input[(k + 1) % m];
            let dp = cross(&a, &b, &p);
            let dq = cross(&a, &b, &q);
            if dp >= 0.0 {
                output.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                output.push(p + (q - p) * t);
            }
        }
    }
    output
}

/// Intersection polygon of two convex CCW polygons, with its area.
pub fn intersection(a: &[Point2], b: &[Point2]) -> (Vec<Point2>, f64) {
    let poly = clip_convex(a, b);
    let area = signed_area(&poly).abs();
    (poly, area)
}

/// Penetration depth of two convex polygons along their best separating axis.
///
/// Positive values are overlaps, negative values are gaps.
pub fn overlap_depth(a: &[Point2], b: &[Point2]) -> f64 {
    min_translation(a, b).1
}

/// Best separating axis of two convex polygons, oriented so that moving `a`
/// along it by the returned depth removes the overlap.
pub fn min_translation(a: &[Point2], b: &[Point2]) -> (Point2, f64) {
    let mut best = (Point2::zeros(), f64::INFINITY);
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let len = e.norm();
            if len < 1e-12 {
                continue;
            }
            let axis = Point2::new(-e.y, e.x) / len;
            let (amin, amax) = project(a, &axis);
            let (bmin, bmax) = project(b, &axis);
            let depth = amax.min(bmax) - amin.max(bmin);
            if depth < best.1 {
                let toward_a = if amin + amax >= bmin + bmax { axis } else { -axis };
                best = (toward_a, depth);
            }
        }
    }
    best
}

fn project(poly: &[Point2], axis: &Point2) -> (f64, f64) {
    poly.iter()
        .map(|p| p.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        })
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance from `p` to the boundary of a convex CCW polygon:
/// positive inside, negative outside. Degenerate hulls (points or segments)
/// have no interior, so every point gets a non-positive value.
pub fn signed_distance_inside(hull: &[Point2], p: &Point2) -> f64 {
    match hull.len() {
        0 => f64::NEG_INFINITY,
        1 => -(p - hull[0]).norm(),
        2 => -segment_distance(p, &hull[0], &hull[1]),
        n => {
            let mut inside = f64::INFINITY;
            let mut outside = false;
            for i in 0..n {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let e = b - a;
                let d = cross(&a, &b, p) / e.norm();
                if d < 0.0 {
                    outside = true;
                }
                inside = inside.min(d);
            }
            if outside {
                let mut best = f64::INFINITY;
                for i in 0..n {
                    best = best.min(segment_distance(p, &hull[i], &hull[(i + 1) % n]));
                }
                -best
            } else {
                inside
            }
        }
    }
}

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 < 1e-24 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&e) / len2).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(cx: f64, cy: f64) -> [Point2; 4] {
        rect_corners(Point2::new(cx, cy), 1.0, 1.0, 0.0)
    }

    #[test]
    fn clipping_two_offset_squares() {
        let (poly, area) = intersection(&unit_square(0.0, 0.0), &unit_square(0.5, 0.25));
        assert!((area - 0.5 * 0.75).abs() < 1e-12);
        assert!(poly.len() >= 4);
    }

    #[test]
    fn touching_squares_have_zero_area_and_depth() {
        let (_, area) = intersection(&unit_square(0.0, 0.0), &unit_square(1.0, 0.0));
        assert!(area.abs() < 1e-12);
        assert!(overlap_depth(&unit_square(0.0, 0.0), &unit_square(1.0, 0.0)).abs() < 1e-12);
        assert!(overlap_depth(&unit_square(0.0, 0.0), &unit_square(1.5, 0.0)) < -0.49);
    }

    #[test]
    fn rotated_square_depth() {
        let a = unit_square(0.0, 0.0);
        let b = rect_corners(Point2::new(1.1, 0.0), 1.0, 1.0, std::f64::consts::FRAC_PI_4);
        // diamond reaches 1.1 - sqrt(2)/2 = 0.393 < 0.5
        let d = overlap_depth(&a, &b);
        assert!((d - (0.5 - (1.1 - std::f64::consts::FRAC_1_SQRT_2))).abs() < 1e-9);
    }

    #[test]
    fn hull_and_distance() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(2.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((signed_distance_inside(&hull, &Point2::new(1.0, 0.5)) - 0.5).abs() < 1e-12);
        assert!((signed_distance_inside(&hull, &Point2::new(3.0, 0.5)) + 1.0).abs() < 1e-12);
        let seg = convex_hull(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]);
        assert!(signed_distance_inside(&seg, &Point2::new(0.5, 0.0)) <= 0.0);
    }
}
