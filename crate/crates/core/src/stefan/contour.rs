//! Marching-squares extraction of ∂Ω and small planar-polygon utilities.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ValueFunctionGrid;
use crate::error::{Error, Result};

/// Closed, counterclockwise contour of the continuation region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolyline {
    pub points: Vec<[f64; 2]>,
}

impl BoundaryPolyline {
    /// Enclosed area (positive for counterclockwise order).
    pub fn area(&self) -> f64 {
        polygon_area(&self.points)
    }

    /// Relative area gap to the convex hull.
    pub fn convexity_defect(&self) -> f64 {
        convexity_defect(&self.points)
    }
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Signed, distance-like field whose zero level is the free boundary.
///
/// Near ∂Ω the value function vanishes quadratically, so inside Ω the field is
/// `−√(−V)`. Outside nodes next to Ω get the linear extrapolation of the two
/// nearest inside values along each grid axis (averaged over axes); nodes
/// farther out get a positive constant.
pub(super) fn boundary_field(v: &Array2<f64>, mask: &Array2<bool>) -> Array2<f64> {
    let (n1, n2) = v.dim();
    let mut phi = Array2::from_elem((n1, n2), f64::NAN);
    for ((i, j), &m) in mask.indexed_iter() {
        if m {
            phi[[i, j]] = -(-v[[i, j]]).sqrt();
        }
    }
    let inside = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < n1 && (j as usize) < n2 && mask[[i as usize, j as usize]]
    };
    let mut far = 0.0f64;
    let mut pending = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if mask[[i, j]] {
                continue;
            }
            let (mut sum, mut count) = (0.0, 0);
            for (d1, d2) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (ai, aj) = (i as isize - d1, j as isize - d2);
                if !inside(ai, aj) {
                    continue;
                }
                let pa = phi[[ai as usize, aj as usize]];
                let ext = if inside(ai - d1, aj - d2) {
                    2.0 * pa - phi[[(ai - d1) as usize, (aj - d2) as usize]]
                } else {
                    -pa
                };
                sum += ext.max(0.0);
                count += 1;
            }
            if count > 0 {
                let val = sum / count as f64;
                phi[[i, j]] = val;
                far = far.max(val);
            } else {
                pending.push((i, j));
            }
        }
    }
    let far = if far > 0.0 { 2.0 * far } else { 1.0 };
    for (i, j) in pending {
        phi[[i, j]] = far;
    }
    phi
}

/// Marching-squares contour of the zero level of the boundary field.
/// Only the loop enclosing the largest area is returned.
pub fn extract_boundary(grid: &ValueFunctionGrid) -> Result<BoundaryPolyline> {
    let spec = &grid.spec;
    let [c1, c2] = spec.n_cells;
    let mask = &grid.omega_mask;
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyOmega);
    }
    if mask.indexed_iter().any(|((i, j), &m)| m && (i == 0 || j == 0 || i == c1 || j == c2)) {
        return Err(Error::OmegaTouchesBoundary);
    }

    let phi = grid.boundary_field();
    let f = |i: usize, j: usize| phi[[i, j]];
    let flat = |i: usize, j: usize| i * (c2 + 1) + j;

    let mut points: HashMap<EdgeKey, [f64; 2]> = HashMap::new();
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();

    for i in 0..c1 {
        for j in 0..c2 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals = corners.map(|(a, b)| f(a, b));
            let inside = corners.map(|(a, b)| mask[[a, b]]);
            if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                continue;
            }
            // edge k joins corner k and corner k+1
            let mut crossing = [None; 4];
            for k in 0..4 {
                let l = (k + 1) % 4;
                if inside[k] != inside[l] {
                    let (ca, cb) = (corners[k], corners[l]);
                    let key = edge_key(flat(ca.0, ca.1), flat(cb.0, cb.1));
                    let t = vals[k] / (vals[k] - vals[l]);
                    let pa = spec.coord(ca.0, ca.1);
                    let pb = spec.coord(cb.0, cb.1);
                    points.entry(key).or_insert([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                    crossing[k] = Some(key);
                }
            }
            let cut: Vec<EdgeKey> = crossing.iter().flatten().copied().collect();
            if cut.len() == 2 {
                segments.push((cut[0], cut[1]));
                continue;
            }
            // saddle: separate the corners that are disconnected at the centre
            let centre_inside = vals.iter().sum::<f64>() < 0.0;
            for k in 0..4 {
                if inside[k] != centre_inside {
                    let before = crossing[(k + 3) % 4].expect("saddle edge");
                    let after = crossing[k].expect("saddle edge");
                    segments.push((before, after));
                }
            }
        }
    }

    let loops = link_segments(&segments);
    let best = loops
        .into_iter()
        .map(|keys| keys.iter().map(|k| points[k]).collect::<Vec<_>>())
        .max_by(|a, b| polygon_area(a).abs().total_cmp(&polygon_area(b).abs()))
        .ok_or(Error::EmptyOmega)?;

    let mut pts = best;
    if polygon_area(&pts) < 0.0 {
        pts.reverse();
    }
    pts.push(pts[0]);
    Ok(BoundaryPolyline { points: pts })
}

fn link_segments(segments: &[(EdgeKey, EdgeKey)]) -> Vec<Vec<EdgeKey>> {
    let mut by_key: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_key.entry(a).or_default().push(s);
        by_key.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut chain = vec![first];
        while cur != first {
            chain.push(cur);
            let next = by_key[&cur].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (a, b) = segments[s];
            cur = if a == cur { b } else { a };
        }
        loops.push(chain);
    }
    loops
}

/// Signed shoelace area; the closing edge is implied.
pub fn polygon_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..n {
        let p = points[k];
        let q = points[(k + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Counterclockwise convex hull (monotone chain), not closed.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// `(area(hull) − area(polygon)) / area(polygon)`.
pub fn convexity_defect(points: &[[f64; 2]]) -> f64 {
    let area = polygon_area(points).abs();
    if area == 0.0 {
        return 0.0;
    }
    (polygon_area(&convex_hull(points)).abs() - area) / area
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let c = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

fn directed(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .map(|&p| {
            if b.len() == 1 {
                return point_segment_distance(p, b[0], b[0]);
            }
            b.windows(2).map(|s| point_segment_distance(p, s[0], s[1])).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines, measured vertex-to-segment in
/// both directions. Pass closed polylines to compare closed curves.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stefan::GridSpec;
    use approx::assert_relative_eq;

    fn spec() -> GridSpec {
        GridSpec { half_width: [1.0, 1.0], n_cells: [32, 32], dt: 1.0, stationarity_tol: 1.0, max_steps: 1 }
    }

    #[test]
    fn single_node_gives_diamond() {
        let mut v = Array2::zeros((33, 33));
        v[[16, 16]] = -1.0;
        let grid = ValueFunctionGrid::from_values(spec(), v, 1.0).unwrap();
        let poly = extract_boundary(&grid).unwrap();
        assert_eq!(poly.points.len(), 5);
        assert_eq!(poly.points[0], poly.points[4]);
        assert!(poly.area() > 0.0);
        let h = spec().dx()[0];
        for p in &poly.points {
            assert_relative_eq!(p[0].abs() + p[1].abs(), 0.5 * h, epsilon = 1e-9);
        }
    }

    #[test]
    fn empty_and_edge_cases() {
        let grid = ValueFunctionGrid::from_values(spec(), Array2::zeros((33, 33)), 1.0).unwrap();
        assert_eq!(extract_boundary(&grid).unwrap_err(), Error::EmptyOmega);
        let mut v = Array2::zeros((33, 33));
        v[[0, 5]] = -1.0;
        let grid = ValueFunctionGrid::from_values(spec(), v, 1.0).unwrap();
        assert_eq!(extract_boundary(&grid).unwrap_err(), Error::OmegaTouchesBoundary);
    }

    #[test]
    fn hull_and_defect() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_relative_eq!(polygon_area(&square), 1.0);
        assert_eq!(convex_hull(&square).len(), 4);
        assert_relative_eq!(convexity_defect(&square), 0.0);
        // square with a notch cut from the top edge
        let notched = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.5], [0.0, 1.0]];
        assert_relative_eq!(convexity_defect(&notched), 0.25 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn hausdorff_of_offset_squares() {
        let a = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        let b: Vec<[f64; 2]> = a.iter().map(|p| [p[0] + 0.1, p[1]]).collect();
        assert_relative_eq!(hausdorff_distance(&a, &b), 0.1, epsilon = 1e-12);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }
}
