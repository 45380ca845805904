//! Bowyer–Watson Delaunay triangulation with a convex-hull repair pass.

use crate::grid::GridSpec;
use crate::Point;

use super::InterpError;

/// Triangles are counter-clockwise. `neighbors[t][k]` is the triangle across
/// the edge opposite vertex `k`, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub neighbors: Vec<[Option<usize>; 3]>,
}

/// Containing triangle and barycentric weights of a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `a, b, c`.
fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

impl Triangulation {
    /// Triangulates distinct points. Fails with fewer than three points or
    /// when all points are collinear.
    pub fn new(points: &[Point]) -> Result<Self, InterpError> {
        let n = points.len();
        if n < 3 {
            return Err(InterpError::Infeasible(format!("triangulation needs 3 points, got {n}")));
        }
        // work in a unit box around the origin
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let span = (xmax - xmin).max(ymax - ymin);
        if !(span > 0.0) {
            return Err(InterpError::Infeasible("all sample points coincide".into()));
        }
        let cx = 0.5 * (xmin + xmax);
        let cy = 0.5 * (ymin + ymax);
        let mut work: Vec<Point> = points.iter().map(|p| Point::new((p.x - cx) / span, (p.y - cy) / span)).collect();

        let big = 1.0e3;
        work.push(Point::new(0.0, 4.0 * big));
        work.push(Point::new(-4.0 * big, -2.0 * big));
        work.push(Point::new(4.0 * big, -2.0 * big));
        let mut tris: Vec<[usize; 3]> = vec![[n + 1, n + 2, n]];

        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (i, &p) in work.iter().enumerate().take(n) {
            edges.clear();
            let mut keep = Vec::with_capacity(tris.len() + 2);
            for t in tris.drain(..) {
                if incircle(work[t[0]], work[t[1]], work[t[2]], p) > 0.0 {
                    for k in 0..3 {
                        edges.push((t[k], t[(k + 1) % 3]));
                    }
                } else {
                    keep.push(t);
                }
            }
            tris = keep;
            // cavity boundary: directed edges whose reverse is not also present
            for &(a, b) in &edges {
                if !edges.contains(&(b, a)) {
                    tris.push([a, b, i]);
                }
            }
        }
        tris.retain(|t| t.iter().all(|&v| v < n));
        let mut tris: Vec<[usize; 3]> = tris.into_iter().filter(|t| cross(work[t[0]], work[t[1]], work[t[2]]) > 0.0).collect();
        if tris.is_empty() {
            return Err(InterpError::Infeasible("sample points are collinear".into()));
        }
        convexify(&work[..n], &mut tris);
        tris.sort_unstable();
        let neighbors = adjacency(&tris);
        Ok(Self { points: points.to_vec(), triangles: tris, neighbors })
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.vertices(t);
        let det = cross(a, b, c);
        let b1 = cross(a, p, c) / det;
        let b2 = cross(a, b, p) / det;
        [1.0 - b1 - b2, b1, b2]
    }

    /// Locates every cell center of `spec`; `None` outside the hull.
    pub fn locate_grid(&self, spec: &GridSpec) -> Vec<Option<Location>> {
        let mut out: Vec<Option<Location>> = vec![None; spec.len()];
        let e = spec.extent;
        let (dx, dy) = (spec.dx(), spec.dy());
        let tol = -1e-12;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.vertices(t);
            let lo_x = a.x.min(b.x).min(c.x);
            let hi_x = a.x.max(b.x).max(c.x);
            let lo_y = a.y.min(b.y).min(c.y);
            let hi_y = a.y.max(b.y).max(c.y);
            let i0 = (((lo_x - e.xmin) / dx - 0.5).floor().max(0.0)) as usize;
            let i1 = (((hi_x - e.xmin) / dx - 0.5).ceil().max(0.0) as usize).min(spec.nx - 1);
            let j0 = (((lo_y - e.ymin) / dy - 0.5).floor().max(0.0)) as usize;
            let j1 = (((hi_y - e.ymin) / dy - 0.5).ceil().max(0.0) as usize).min(spec.ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let idx = spec.index(i, j);
                    if out[idx].is_some() {
                        continue;
                    }
                    let bary = self.barycentric(t, spec.cell_center(i, j));
                    if bary.iter().all(|w| *w >= tol) {
                        out[idx] = Some(Location { triangle: t, bary });
                    }
                }
            }
        }
        out
    }

    /// Distinct vertices sharing an edge with `v`, per vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.points.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Fills reflex pockets left on the boundary after removing the enclosing
/// triangle, so the triangulation covers the convex hull.
fn convexify(points: &[Point], tris: &mut Vec<[usize; 3]>) {
    loop {
        let boundary = boundary_edges(tris);
        let mut next = std::collections::BTreeMap::new();
        for &(a, b) in &boundary {
            next.insert(a, b);
        }
        let mut added = false;
        for &(a, b) in &boundary {
            let Some(&c) = next.get(&b) else { continue };
            if c == a || cross(points[a], points[b], points[c]) >= 0.0 {
                continue;
            }
            // ear a-b-c lies outside; skip if another boundary vertex is inside it
            let (p, q, r) = (points[a], points[c], points[b]);
            let blocked = next.keys().any(|&v| {
                v != a && v != b && v != c && {
                    let s = points[v];
                    cross(p, q, s) >= 0.0 && cross(q, r, s) >= 0.0 && cross(r, p, s) >= 0.0
                }
            });
            if !blocked {
                tris.push([a, c, b]);
                added = true;
                break;
            }
        }
        if !added {
            return;
        }
    }
}

/// Directed edges (interior on the left) that belong to one triangle only.
fn boundary_edges(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut directed = std::collections::BTreeSet::new();
    for t in tris {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    directed.iter().filter(|(a, b)| !directed.contains(&(*b, *a))).copied().collect()
}

fn adjacency(tris: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut by_edge = std::collections::HashMap::new();
    for (ti, t) in tris.iter().enumerate() {
        for k in 0..3 {
            by_edge.insert((t[(k + 1) % 3], t[(k + 2) % 3]), ti);
        }
    }
    tris.iter()
        .map(|t| {
            let mut nb = [None; 3];
            for (k, slot) in nb.iter_mut().enumerate() {
                *slot = by_edge.get(&(t[(k + 2) % 3], t[(k + 1) % 3])).copied();
            }
            nb
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Extent;
    use rand::{RngExt, SeedableRng};

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point::new(rng.random::<f64>() * 100.0, rng.random::<f64>() * 50.0)).collect()
    }

    fn hull_area(points: &[Point]) -> f64 {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut hull: Vec<Point> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        let mut area = 0.0;
        for i in 0..hull.len() {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            area += a.x * b.y - b.x * a.y;
        }
        0.5 * area
    }

    #[test]
    fn covers_hull_and_is_delaunay() {
        for seed in 0..5 {
            let pts = random_points(200, seed);
            let tri = Triangulation::new(&pts).unwrap();
            let area: f64 = (0..tri.triangles.len()).map(|t| {
                let [a, b, c] = tri.vertices(t);
                0.5 * cross(a, b, c)
            }).sum();
            assert!((area - hull_area(&pts)).abs() < 1e-9 * area, "seed {seed}");
            assert_eq!(tri.triangles.len(), 2 * pts.len() - 2 - hull_vertex_count(&tri));
            for t in &tri.triangles {
                let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
                let violations = (0..pts.len())
                    .filter(|v| !t.contains(v) && incircle(a, b, c, pts[*v]) > 1e-3)
                    .count();
                assert_eq!(violations, 0, "triangle {t:?}");
            }
        }
    }

    fn hull_vertex_count(tri: &Triangulation) -> usize {
        let b = boundary_edges(&tri.triangles);
        b.len()
    }

    #[test]
    fn neighbors_are_symmetric() {
        let tri = Triangulation::new(&random_points(60, 9)).unwrap();
        for (t, nb) in tri.neighbors.iter().enumerate() {
            for other in nb.iter().flatten() {
                assert!(tri.neighbors[*other].contains(&Some(t)));
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Triangulation::new(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).is_err());
        let line: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(Triangulation::new(&line).is_err());
    }

    #[test]
    fn square_lattice() {
        let pts: Vec<Point> = (0..25).map(|k| Point::new((k % 5) as f64, (k / 5) as f64)).collect();
        let tri = Triangulation::new(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 32);
    }

    #[test]
    fn grid_location_inside_hull() {
        let pts = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
        let tri = Triangulation::new(&pts).unwrap();
        let spec = GridSpec::new(Extent::from_size(10.0, 10.0).unwrap(), 10, 10).unwrap();
        let located = tri.locate_grid(&spec);
        // centers (i+0.5, j+0.5) are inside when i + j + 1 <= 10
        for j in 0..10 {
            for i in 0..10 {
                assert_eq!(located[spec.index(i, j)].is_some(), i + j <= 9, "cell {i},{j}");
            }
        }
    }
}
