//! Sweep-insertion Delaunay triangulation with exact predicates.

use robust::{incircle, orient2d, Coord};

pub(crate) const NONE: usize = usize::MAX;

/// Counterclockwise triangles over `points`; edge `i` of a triangle is the one
/// opposite its vertex `i`, and `neighbors[t][i]` is the triangle across it.
#[derive(Debug, Clone)]
pub(crate) struct Triangulation {
    pub points: Vec<Coord<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub neighbors: Vec<[usize; 3]>,
}

impl Triangulation {
    /// Triangulates distinct points. Returns no triangles when they are all collinear.
    pub fn new(points: Vec<Coord<f64>>) -> Self {
        let mut tri = Self {
            points,
            triangles: Vec::new(),
            neighbors: Vec::new(),
        };
        tri.sweep();
        tri.legalize();
        tri
    }

    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(self.points[a], self.points[b], self.points[c])
    }

    fn push(&mut self, t: [usize; 3]) -> usize {
        self.triangles.push(t);
        self.neighbors.push([NONE; 3]);
        self.triangles.len() - 1
    }

    fn link(&mut self, t: usize, i: usize, u: usize, j: usize) {
        self.neighbors[t][i] = u;
        self.neighbors[u][j] = t;
    }

    fn sweep(&mut self) {
        let n = self.points.len();
        if n < 3 {
            return;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (p, q) = (self.points[a], self.points[b]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        });

        let (a0, a1) = (order[0], order[1]);
        let Some(k) = (2..n).find(|&k| self.orient(a0, a1, order[k]) != 0.0) else {
            return;
        };
        let apex = order[k];
        // Points before `apex` in sweep order are collinear and sorted along their line.
        let line = &order[..k];
        let left = self.orient(a0, a1, apex) > 0.0;

        // hull[j] -> hull[j + 1] is a counterclockwise hull edge owned by hull_edge[j].
        let mut hull: Vec<usize> = Vec::new();
        let mut hull_edge: Vec<(usize, usize)> = Vec::new();
        let mut prev = NONE;
        let fan: Vec<usize> = if left {
            line.to_vec()
        } else {
            line.iter().rev().copied().collect()
        };
        for w in fan.windows(2) {
            // [w0, w1, apex] is counterclockwise; edge 2 is w0 -> w1 on the hull.
            let t = self.push([w[0], w[1], apex]);
            if prev != NONE {
                self.link(t, 1, prev, 0);
            }
            hull.push(w[0]);
            hull_edge.push((t, 2));
            prev = t;
        }
        let first = 0;
        let last = prev;
        hull.push(*fan.last().unwrap());
        hull_edge.push((last, 0));
        hull.push(apex);
        hull_edge.push((first, 1));

        for &p in &order[k + 1..] {
            let m = hull.len();
            let visible: Vec<bool> = (0..m)
                .map(|j| self.orient(hull[j], hull[(j + 1) % m], p) < 0.0)
                .collect();
            let Some(start) = (0..m).find(|&j| visible[j] && !visible[(j + m - 1) % m]) else {
                continue;
            };
            let mut count = 0;
            while visible[(start + count) % m] {
                count += 1;
            }
            let mut prev = NONE;
            let mut first = NONE;
            for c in 0..count {
                let j = (start + c) % m;
                let (a, b) = (hull[j], hull[(j + 1) % m]);
                let (owner, edge) = hull_edge[j];
                let t = self.push([b, a, p]);
                self.link(t, 2, owner, edge);
                if prev != NONE {
                    self.link(prev, 1, t, 0);
                } else {
                    first = t;
                }
                prev = t;
            }
            // Replace hull[start+1 .. start+count) by p.
            let end = (start + count) % m;
            let mut new_hull = Vec::with_capacity(m + 2 - count);
            let mut new_edge = Vec::with_capacity(m + 2 - count);
            let mut j = end;
            loop {
                new_hull.push(hull[j]);
                new_edge.push(hull_edge[j]);
                j = (j + 1) % m;
                if j == start {
                    break;
                }
            }
            new_hull.push(hull[start]);
            new_edge.push((first, 0));
            new_hull.push(p);
            new_edge.push((prev, 1));
            hull = new_hull;
            hull_edge = new_edge;
        }
    }

    fn legalize(&mut self) {
        let mut stack: Vec<(usize, usize)> = (0..self.triangles.len())
            .flat_map(|t| (0..3).map(move |i| (t, i)))
            .collect();
        while let Some((t, i)) = stack.pop() {
            let u = self.neighbors[t][i];
            if u == NONE {
                continue;
            }
            let Some(j) = (0..3).find(|&j| self.neighbors[u][j] == t) else {
                continue;
            };
            let [p, q, r] = rotate(self.triangles[t], i);
            let d = self.triangles[u][j];
            let pts = &self.points;
            if incircle(pts[p], pts[q], pts[r], pts[d]) <= 0.0 {
                continue;
            }
            let n_rp = self.neighbors[t][(i + 1) % 3];
            let n_pq = self.neighbors[t][(i + 2) % 3];
            // u = [d, r, q] after rotation.
            let n_qd = self.neighbors[u][(j + 1) % 3];
            let n_dr = self.neighbors[u][(j + 2) % 3];

            self.triangles[t] = [p, q, d];
            self.neighbors[t] = [n_qd, u, n_pq];
            self.triangles[u] = [p, d, r];
            self.neighbors[u] = [n_dr, n_rp, t];
            self.relink(n_qd, u, t);
            self.relink(n_rp, t, u);
            stack.extend([(t, 0), (t, 2), (u, 0), (u, 1)]);
        }
    }

    fn relink(&mut self, t: usize, from: usize, to: usize) {
        if t == NONE {
            return;
        }
        for n in &mut self.neighbors[t] {
            if *n == from {
                *n = to;
                return;
            }
        }
    }

    pub fn circumradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.points[v]);
        let ab = (b.x - a.x).hypot(b.y - a.y);
        let bc = (c.x - b.x).hypot(c.y - b.y);
        let ca = (a.x - c.x).hypot(a.y - c.y);
        let twice_area = orient2d(a, b, c);
        if twice_area <= 0.0 {
            return f64::INFINITY;
        }
        ab * bc * ca / (2.0 * twice_area)
    }
}

fn rotate(t: [usize; 3], i: usize) -> [usize; 3] {
    [t[i], t[(i + 1) % 3], t[(i + 2) % 3]]
}
