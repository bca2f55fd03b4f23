//! Small planar geometry toolbox shared by the simulator, renderer, and
//! task metrics.

use crate::spatial::Vec2;

/// Convex hull via Andrew's monotone chain, counter-clockwise, no
/// collinear points kept. Returns fewer than 3 points for degenerate input.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * n);
    for &p in pts.iter().chain(pts.iter().rev()) {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if (b - a).cross(p - b) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.pop(); // last point repeats the first
    // The chain visits the sorted extremes twice; halfway markers are
    // implicit, so dedup any duplicated turning point.
    hull.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if hull.len() < 3 {
        return hull;
    }
    hull
}

/// Signed area of a polygon (positive when counter-clockwise), shoelace rule.
pub fn polygon_signed_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.cross(b);
    }
    acc / 2.0
}

/// Point-in-polygon by even-odd ray crossing; boundary points count as
/// inside within floating-point resolution of the crossing test.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            if p.x < a.x + t * (b.x - a.x) {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

/// Distance from `p` to the nearest point of a polyline.
pub fn point_polyline_distance(p: Vec2, polyline: &[Vec2]) -> f64 {
    match polyline.len() {
        0 => f64::INFINITY,
        1 => p.dist(polyline[0]),
        _ => polyline
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Total length of a polyline.
pub fn polyline_length(polyline: &[Vec2]) -> f64 {
    polyline.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Point at arclength `s` along the polyline, clamped to its ends.
pub fn polyline_point_at(polyline: &[Vec2], s: f64) -> Vec2 {
    assert!(!polyline.is_empty());
    if s <= 0.0 {
        return polyline[0];
    }
    let mut remaining = s;
    for w in polyline.windows(2) {
        let seg = w[0].dist(w[1]);
        if remaining <= seg && seg > 0.0 {
            return w[0] + (w[1] - w[0]).scale(remaining / seg);
        }
        remaining -= seg;
    }
    *polyline.last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let mut pts = square();
        pts.push(Vec2::new(0.5, 0.5));
        pts.push(Vec2::new(0.25, 0.75));
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((polygon_signed_area(&hull).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_of_collinear_points_is_degenerate() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)];
        let hull = convex_hull(&pts);
        assert!(hull.len() < 3);
    }

    #[test]
    fn point_in_polygon_basics() {
        let sq = square();
        assert!(point_in_polygon(Vec2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Vec2::new(1.5, 0.5), &sq));
    }

    #[test]
    fn segment_distance() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(2.0, 0.0);
        assert!((point_segment_distance(Vec2::new(1.0, 1.0), a, b) - 1.0).abs() < 1e-12);
        assert!((point_segment_distance(Vec2::new(-1.0, 0.0), a, b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polyline_arclength_walk() {
        let line = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        assert!((polyline_length(&line) - 2.0).abs() < 1e-12);
        let p = polyline_point_at(&line, 1.5);
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12);
    }
}
