use std::collections::HashMap;

use super::delaunay::{Triangulation, NONE};
use super::{coord, signed_area, Contour, GeometryError, Point2, PointCloud2};
use crate::Scalar;

/// Delaunay triangulation of a cloud, reusable across alpha values.
#[derive(Debug, Clone)]
pub struct AlphaComplex<T> {
    points: Vec<Point2<T>>,
    tri: Triangulation,
    radii: Vec<f64>,
}

impl<T: Scalar> AlphaComplex<T> {
    pub fn new(cloud: &PointCloud2<T>) -> Result<Self, GeometryError> {
        if cloud.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if let Some(bad) = cloud.points.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::DegenerateInput(format!("non-finite point {bad:?}")));
        }
        let mut points = cloud.points.clone();
        points.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap().then(a.z.partial_cmp(&b.z).unwrap()));
        points.dedup();
        if points.len() < 3 {
            return Err(GeometryError::DegenerateInput(format!(
                "need at least 3 distinct points, got {}",
                points.len()
            )));
        }
        let tri = Triangulation::new(points.iter().map(|&p| coord(p)).collect());
        if tri.triangles.is_empty() {
            return Err(GeometryError::DegenerateInput("all points are collinear".into()));
        }
        let radii = (0..tri.triangles.len()).map(|t| tri.circumradius(t)).collect();
        Ok(Self { points, tri, radii })
    }

    /// Smallest alpha that keeps at least one triangle.
    pub fn min_alpha(&self) -> f64 {
        self.radii.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Median distance from each point to its nearest neighbour.
    pub fn median_spacing(&self) -> f64 {
        let mut nn = vec![f64::INFINITY; self.points.len()];
        for t in &self.tri.triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let (p, q) = (self.tri.points[a], self.tri.points[b]);
                let d = (p.x - q.x).hypot(p.y - q.y);
                nn[a] = nn[a].min(d);
                nn[b] = nn[b].min(d);
            }
        }
        nn.retain(|d| d.is_finite());
        nn.sort_by(f64::total_cmp);
        nn[nn.len() / 2]
    }

    /// Boundary of the largest region kept at `alpha`, counterclockwise.
    pub fn contour(&self, alpha: T) -> Result<Contour<T>, GeometryError> {
        let alpha = alpha.to_f64_lossy();
        if !(alpha > 0.0) {
            return Err(GeometryError::DegenerateInput(format!("alpha must be positive, got {alpha}")));
        }
        let kept: Vec<bool> = self.radii.iter().map(|&r| r <= alpha).collect();
        if !kept.iter().any(|&k| k) {
            return Err(GeometryError::NoBoundary { min_alpha: self.min_alpha() });
        }

        let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (t, v) in self.tri.triangles.iter().enumerate() {
            if !kept[t] {
                continue;
            }
            for i in 0..3 {
                let u = self.tri.neighbors[t][i];
                if u == NONE || !kept[u] {
                    let e = (v[(i + 1) % 3], v[(i + 2) % 3]);
                    outgoing.entry(e.0).or_default().push(edges.len());
                    edges.push(e);
                }
            }
        }

        let mut used = vec![false; edges.len()];
        let mut best: Option<(T, Vec<Point2<T>>)> = None;
        for start in 0..edges.len() {
            if used[start] {
                continue;
            }
            let mut ring = Vec::new();
            let mut e = start;
            loop {
                used[e] = true;
                let (a, b) = edges[e];
                ring.push(a);
                let back = self.points[a] - self.points[b];
                // Leave `b` along the unused edge with the smallest clockwise turn from b->a.
                let next = outgoing[&b]
                    .iter()
                    .copied()
                    .filter(|&f| !used[f] || f == start)
                    .max_by(|&f, &g| {
                        let ccw = |f: usize| {
                            let w = self.points[edges[f].1] - self.points[b];
                            let ang = back.cross(w).to_f64_lossy().atan2(back.dot(w).to_f64_lossy());
                            if ang <= 0.0 { ang + std::f64::consts::TAU } else { ang }
                        };
                        ccw(f).total_cmp(&ccw(g))
                    });
                match next {
                    Some(f) if f != start => e = f,
                    _ => break,
                }
            }
            for ring in split_at_repeats(&ring) {
                if ring.len() < 3 {
                    continue;
                }
                let ring: Vec<_> = ring.iter().map(|&v| self.points[v]).collect();
                let area = signed_area(&ring);
                if area > T::zero() && best.as_ref().is_none_or(|(a, _)| area > *a) {
                    best = Some((area, ring));
                }
            }
        }
        let (_, ring) = best.ok_or(GeometryError::NoBoundary { min_alpha: self.min_alpha() })?;
        Contour::new(ring)
    }
}

/// Cuts a closed walk into loops that each visit a vertex once.
fn split_at_repeats(walk: &[usize]) -> Vec<Vec<usize>> {
    let mut loops = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(walk.len());
    let mut at: HashMap<usize, usize> = HashMap::new();
    for &v in walk {
        if let Some(&k) = at.get(&v) {
            let sub: Vec<usize> = stack.drain(k..).collect();
            for u in &sub {
                at.remove(u);
            }
            loops.push(sub);
        }
        at.insert(v, stack.len());
        stack.push(v);
    }
    loops.push(stack);
    loops
}

/// Alpha-shape boundary of a cloud (triangles with circumradius at most `alpha`).
pub fn alpha_shape<T: Scalar>(cloud: &PointCloud2<T>, alpha: T) -> Result<Contour<T>, GeometryError> {
    AlphaComplex::new(cloud)?.contour(alpha)
}

/// Three times the median nearest-neighbour spacing.
pub fn default_alpha<T: Scalar>(cloud: &PointCloud2<T>) -> Result<T, GeometryError> {
    Ok(T::lit(3.0 * AlphaComplex::new(cloud)?.median_spacing()))
}
