//! Incremental Bowyer–Watson triangulation of scattered plane points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `a, b, c`.
fn in_circle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

impl Triangulation {
    /// Triangulates the convex hull of `points`. Cocircular ties are resolved
    /// by treating on-circle points as outside, which keeps the insertion
    /// cavity star-shaped.
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::Triangulation(format!("need at least 3 points, got {n}")));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Triangulation("non-finite coordinates".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let area_tol = 1e-12 * extent * extent;
        let non_collinear = (2..n).any(|k| orient(points[0], points[1], points[k]).abs() > area_tol)
            || (1..n).any(|j| (j + 1..n).any(|k| orient(points[0], points[j], points[k]).abs() > area_tol));
        if extent == 0.0 || !non_collinear {
            return Err(Error::Triangulation("all points are collinear".into()));
        }

        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let big = 20.0 * extent;
        let mut pts = points.to_vec();
        pts.push([mid[0] - 2.0 * big, mid[1] - big]);
        pts.push([mid[0] + 2.0 * big, mid[1] - big]);
        pts.push([mid[0], mid[1] + 2.0 * big]);
        let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

        for i in 0..n {
            let p = pts[i];
            let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
                .into_iter()
                .partition(|t| in_circle(pts[t[0]], pts[t[1]], pts[t[2]], p) > 0.0);
            tris = keep;
            // cavity boundary: edges of bad triangles not shared with another bad triangle
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for t in &bad {
                for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    if let Some(pos) = edges.iter().position(|&(a, b)| a == e.1 && b == e.0) {
                        edges.swap_remove(pos);
                    } else {
                        edges.push(e);
                    }
                }
            }
            for (a, b) in edges {
                tris.push([a, b, i]);
            }
        }
        tris.retain(|t| t.iter().all(|&v| v < n));
        pts.truncate(n);
        let mut tri = Triangulation { points: pts, triangles: tris };
        tri.fill_hull();
        Ok(tri)
    }

    /// Adds triangles in concave pockets of the outer boundary left by the
    /// finite enclosing triangle, so the union of triangles is the hull.
    fn fill_hull(&mut self) {
        loop {
            let boundary = self.boundary_loop();
            let m = boundary.len();
            if m < 3 {
                return;
            }
            let mut added = false;
            for k in 0..m {
                let (a, b, c) = (boundary[k], boundary[(k + 1) % m], boundary[(k + 2) % m]);
                let o = orient(self.points[a], self.points[b], self.points[c]);
                if o < 0.0 {
                    let tri = [a, c, b];
                    let empty = (0..self.points.len()).all(|v| {
                        tri.contains(&v) || !self.strictly_inside(tri, self.points[v])
                    });
                    if empty {
                        self.triangles.push(tri);
                        added = true;
                        break;
                    }
                }
            }
            if !added {
                return;
            }
        }
    }

    fn strictly_inside(&self, t: [usize; 3], p: [f64; 2]) -> bool {
        let [a, b, c] = t.map(|i| self.points[i]);
        orient(a, b, p) > 0.0 && orient(b, c, p) > 0.0 && orient(c, a, p) > 0.0
    }

    /// Outer boundary vertices in counter-clockwise order.
    fn boundary_loop(&self) -> Vec<usize> {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if let Some(pos) = edges.iter().position(|&(a, b)| a == e.1 && b == e.0) {
                    edges.swap_remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        if edges.is_empty() {
            return Vec::new();
        }
        let mut loop_ = vec![edges[0].0];
        let mut cur = edges[0].1;
        while cur != loop_[0] && loop_.len() <= edges.len() {
            loop_.push(cur);
            match edges.iter().find(|e| e.0 == cur) {
                Some(e) => cur = e.1,
                None => break,
            }
        }
        loop_
    }

    /// Containing triangle and barycentric weights, or `None` outside the hull.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let eps = 1e-12;
        for (k, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|i| self.points[i]);
            let area = orient(a, b, c);
            if area <= 0.0 {
                continue;
            }
            let w0 = orient(b, c, p) / area;
            let w1 = orient(c, a, p) / area;
            let w2 = orient(a, b, p) / area;
            if w0 >= -eps && w1 >= -eps && w2 >= -eps {
                let w = [w0.max(0.0), w1.max(0.0), w2.max(0.0)];
                let s = w[0] + w[1] + w[2];
                return Some((k, [w[0] / s, w[1] / s, w[2] / s]));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_area(t: &Triangulation) -> f64 {
        t.triangles
            .iter()
            .map(|tr| orient(t.points[tr[0]], t.points[tr[1]], t.points[tr[2]]) / 2.0)
            .sum()
    }

    #[test]
    fn square_grid_covers_hull() {
        // cocircular 4×4 lattice
        let pts: Vec<[f64; 2]> = (0..16).map(|i| [(i % 4) as f64, (i / 4) as f64]).collect();
        let t = Triangulation::new(&pts).unwrap();
        assert_eq!(t.triangles.len(), 18);
        assert!((total_area(&t) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn delaunay_property_holds() {
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let f = i as f64;
                [(f * 0.7368).sin() * 3.0, (f * 1.3791).cos() * 2.0 + 0.01 * f]
            })
            .collect();
        let t = Triangulation::new(&pts).unwrap();
        for tr in &t.triangles {
            let [a, b, c] = tr.map(|i| t.points[i]);
            for (v, p) in t.points.iter().enumerate() {
                if !tr.contains(&v) {
                    // pocket triangles may violate it; accept tiny tolerance only
                    assert!(in_circle(a, b, c, *p) <= 1e-9, "point {v} inside circumcircle");
                }
            }
        }
    }

    #[test]
    fn collinear_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(Triangulation::new(&pts), Err(Error::Triangulation(_))));
    }

    #[test]
    fn locate_inside_and_outside() {
        let t = Triangulation::new(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (_, w) = t.locate([0.25, 0.25]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(t.locate([0.8, 0.8]).is_none());
    }
}
