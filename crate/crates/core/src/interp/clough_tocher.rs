//! C¹ piecewise-cubic Clough–Tocher interpolant on a triangulation.
//!
//! Each triangle is split at its centroid into three cubic Bézier patches.
//! Vertex gradients come from a weighted least-squares plane through the
//! one-ring neighbors; cross-boundary continuity uses the centroid of the
//! adjacent triangle, with a fixed −1/2 on hull edges.

use super::delaunay::{Location, Triangulation};

/// Geometry-only part of the interpolant, reusable across value sets.
#[derive(Debug, Clone)]
pub struct CloughTocher {
    tri: Triangulation,
    /// Per vertex: (neighbor, coefficient vector) such that
    /// ∇f ≈ Σ c_j (f_j − f_i).
    gradient_ops: Vec<Vec<(usize, [f64; 2])>>,
    /// Per triangle, the edge-continuity factors.
    edge_factors: Vec<[f64; 3]>,
}

impl CloughTocher {
    pub fn new(tri: Triangulation) -> Self {
        let rings = tri.vertex_neighbors();
        let gradient_ops = rings
            .iter()
            .enumerate()
            .map(|(i, ring)| gradient_operator(&tri, i, ring))
            .collect();
        let edge_factors = (0..tri.triangles.len()).map(|t| edge_factors(&tri, t)).collect();
        Self { tri, gradient_ops, edge_factors }
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn gradients(&self, values: &[f64]) -> Vec<[f64; 2]> {
        self.gradient_ops
            .iter()
            .enumerate()
            .map(|(i, op)| {
                op.iter().fold([0.0, 0.0], |g, (j, c)| {
                    let dz = values[*j] - values[i];
                    [g[0] + c[0] * dz, g[1] + c[1] * dz]
                })
            })
            .collect()
    }

    /// Evaluates at a located point, given vertex values and gradients.
    pub fn evaluate(&self, loc: &Location, values: &[f64], grads: &[[f64; 2]]) -> f64 {
        let t = self.tri.triangles[loc.triangle];
        let [p1, p2, p3] = self.tri.vertices(loc.triangle);
        let (f1, f2, f3) = (values[t[0]], values[t[1]], values[t[2]]);
        let (g1, g2, g3) = (grads[t[0]], grads[t[1]], grads[t[2]]);
        let e12 = [p2.x - p1.x, p2.y - p1.y];
        let e23 = [p3.x - p2.x, p3.y - p2.y];
        let e31 = [p1.x - p3.x, p1.y - p3.y];
        let dot = |g: [f64; 2], e: [f64; 2]| g[0] * e[0] + g[1] * e[1];

        let df12 = dot(g1, e12);
        let df21 = -dot(g2, e12);
        let df23 = dot(g2, e23);
        let df32 = -dot(g3, e23);
        let df31 = dot(g3, e31);
        let df13 = -dot(g1, e31);

        let c3000 = f1;
        let c2100 = (df12 + 3.0 * c3000) / 3.0;
        let c2010 = (df13 + 3.0 * c3000) / 3.0;
        let c0300 = f2;
        let c1200 = (df21 + 3.0 * c0300) / 3.0;
        let c0210 = (df23 + 3.0 * c0300) / 3.0;
        let c0030 = f3;
        let c1020 = (df31 + 3.0 * c0030) / 3.0;
        let c0120 = (df32 + 3.0 * c0030) / 3.0;

        let c2001 = (c2100 + c2010 + c3000) / 3.0;
        let c0201 = (c1200 + c0300 + c0210) / 3.0;
        let c0021 = (c1020 + c0120 + c0030) / 3.0;

        let g = self.edge_factors[loc.triangle];
        let c0111 = (g[0] * (-c0300 + 3.0 * c0210 - 3.0 * c0120 + c0030)
            + (-c0300 + 2.0 * c0210 - c0120 + c0021 + c0201))
            / 2.0;
        let c1011 = (g[1] * (-c0030 + 3.0 * c1020 - 3.0 * c2010 + c3000)
            + (-c0030 + 2.0 * c1020 - c2010 + c2001 + c0021))
            / 2.0;
        let c1101 = (g[2] * (-c3000 + 3.0 * c2100 - 3.0 * c1200 + c0300)
            + (-c3000 + 2.0 * c2100 - c1200 + c2001 + c0201))
            / 2.0;

        let c1002 = (c1101 + c1011 + c2001) / 3.0;
        let c0102 = (c1101 + c0111 + c0201) / 3.0;
        let c0012 = (c1011 + c0111 + c0021) / 3.0;
        let c0003 = (c1002 + c0102 + c0012) / 3.0;

        // barycentric coordinates within the micro-triangle
        let b = loc.bary;
        let m = b[0].min(b[1]).min(b[2]);
        let (b1, b2, b3, b4) = (b[0] - m, b[1] - m, b[2] - m, 3.0 * m);

        b1.powi(3) * c3000
            + 3.0 * b1 * b1 * b2 * c2100
            + 3.0 * b1 * b1 * b3 * c2010
            + 3.0 * b1 * b1 * b4 * c2001
            + 3.0 * b1 * b2 * b2 * c1200
            + 6.0 * b1 * b2 * b4 * c1101
            + 3.0 * b1 * b3 * b3 * c1020
            + 6.0 * b1 * b3 * b4 * c1011
            + 3.0 * b1 * b4 * b4 * c1002
            + b2.powi(3) * c0300
            + 3.0 * b2 * b2 * b3 * c0210
            + 3.0 * b2 * b2 * b4 * c0201
            + 3.0 * b2 * b3 * b3 * c0120
            + 6.0 * b2 * b3 * b4 * c0111
            + 3.0 * b2 * b4 * b4 * c0102
            + b3.powi(3) * c0030
            + 3.0 * b3 * b3 * b4 * c0021
            + 3.0 * b3 * b4 * b4 * c0012
            + b4.powi(3) * c0003
    }
}

fn gradient_operator(tri: &Triangulation, i: usize, ring: &[usize]) -> Vec<(usize, [f64; 2])> {
    let p = tri.points[i];
    let mut m = [[0.0; 2]; 2];
    let offsets: Vec<(usize, f64, f64, f64)> = ring
        .iter()
        .map(|&j| {
            let (dx, dy) = (tri.points[j].x - p.x, tri.points[j].y - p.y);
            (j, dx, dy, 1.0 / (dx * dx + dy * dy))
        })
        .collect();
    for &(_, dx, dy, w) in &offsets {
        m[0][0] += w * dx * dx;
        m[0][1] += w * dx * dy;
        m[1][1] += w * dy * dy;
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    let scale = m[0][0] + m[1][1];
    if !(det > 1e-12 * scale * scale) {
        return Vec::new();
    }
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[0][1] / det, m[0][0] / det]];
    offsets
        .into_iter()
        .map(|(j, dx, dy, w)| (j, [w * (inv[0][0] * dx + inv[0][1] * dy), w * (inv[1][0] * dx + inv[1][1] * dy)]))
        .collect()
}

fn edge_factors(tri: &Triangulation, t: usize) -> [f64; 3] {
    let mut g = [-0.5; 3];
    for (k, slot) in g.iter_mut().enumerate() {
        let Some(other) = tri.neighbors[t][k] else { continue };
        let [a, b, c] = tri.vertices(other);
        let centroid = crate::Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        let c = tri.barycentric(t, centroid);
        *slot = match k {
            0 => (2.0 * c[2] + c[1] - 1.0) / (2.0 - 3.0 * c[2] - 3.0 * c[1]),
            1 => (2.0 * c[0] + c[2] - 1.0) / (2.0 - 3.0 * c[0] - 3.0 * c[2]),
            _ => (2.0 * c[1] + c[0] - 1.0) / (2.0 - 3.0 * c[1] - 3.0 * c[0]),
        };
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;
    use rand::{RngExt, SeedableRng};

    fn setup(n: usize) -> (CloughTocher, Vec<Point>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)).collect();
        (CloughTocher::new(Triangulation::new(&pts).unwrap()), pts)
    }

    fn eval_at(ct: &CloughTocher, values: &[f64], q: Point) -> Option<f64> {
        let grads = ct.gradients(values);
        (0..ct.tri.triangles.len()).find_map(|t| {
            let bary = ct.tri.barycentric(t, q);
            bary.iter().all(|b| *b >= 0.0).then(|| ct.evaluate(&Location { triangle: t, bary }, values, &grads))
        })
    }

    #[test]
    fn reproduces_linear_fields() {
        let (ct, pts) = setup(40);
        let f = |p: Point| 2.0 + 0.5 * p.x - 1.5 * p.y;
        let values: Vec<f64> = pts.iter().map(|p| f(*p)).collect();
        let mut checked = 0;
        for k in 0..100 {
            let q = Point::new(0.1 * k as f64, 5.0 + 0.03 * k as f64);
            if let Some(v) = eval_at(&ct, &values, q) {
                assert!((v - f(q)).abs() < 1e-9, "at {q:?}: {v} vs {}", f(q));
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn interpolates_vertices() {
        let (ct, pts) = setup(30);
        let values: Vec<f64> = pts.iter().map(|p| (p.x * 0.7).sin() + p.y * p.y * 0.1).collect();
        for (i, p) in pts.iter().enumerate() {
            let v = eval_at(&ct, &values, *p).unwrap();
            assert!((v - values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn continuous_across_edges() {
        let (ct, pts) = setup(30);
        let values: Vec<f64> = pts.iter().map(|p| (p.x * 0.5).cos() * p.y).collect();
        let grads = ct.gradients(&values);
        for (t, nb) in ct.tri.neighbors.iter().enumerate() {
            for other in nb.iter().flatten() {
                let [a, b, c] = ct.tri.vertices(t);
                let shared: Vec<Point> = [a, b, c].into_iter().filter(|p| ct.tri.vertices(*other).contains(p)).collect();
                let mid = shared[0].lerp(shared[1], 0.37);
                let v1 = ct.evaluate(&Location { triangle: t, bary: ct.tri.barycentric(t, mid) }, &values, &grads);
                let v2 = ct.evaluate(&Location { triangle: *other, bary: ct.tri.barycentric(*other, mid) }, &values, &grads);
                assert!((v1 - v2).abs() < 1e-9);
            }
        }
    }
}
