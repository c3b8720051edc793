use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{Item, Scene};
use crate::declutter::ItemId;
use crate::geometry::{CloudLabel, Point2, PointCloud2};

/// Spacing of sampled surface points (m).
pub const POINT_SPACING: f64 = 0.01;
/// Side faces are seen only through gaps wider than this (m).
pub const SIDE_VISIBILITY_GAP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of per-coordinate Gaussian noise (m).
    pub point_sigma: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn exact() -> Self {
        Self {
            point_sigma: 0.0,
            dropout_prob: 0.0,
            seed: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.point_sigma >= 0.0 && (0.0..=1.0).contains(&self.dropout_prob)
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::exact()
    }
}

/// Segmented point clouds as seen from the aisle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub target: PointCloud2<f64>,
    /// One cloud per non-target item.
    pub adjacent: Vec<(ItemId, PointCloud2<f64>)>,
    pub shelf: PointCloud2<f64>,
}

impl Observation {
    pub fn adjacent_points(&self) -> PointCloud2<f64> {
        let pts = self.adjacent.iter().flat_map(|(_, c)| c.points.iter().copied()).collect();
        PointCloud2::new(pts, CloudLabel::Adjacent)
    }
}

/// Whether the left and right side faces of `item` are visible.
pub fn visible_flanks(scene: &Scene, item: &Item) -> (bool, bool) {
    let b = item.aabb();
    let mut left = b.min.y;
    let mut right = scene.shelf.width - b.max.y;
    for o in scene.items.iter().filter(|o| o.id != item.id) {
        let ob = o.aabb();
        if ob.overlap_z(&b) <= 0.0 {
            continue;
        }
        if ob.max.y <= b.min.y + 1e-12 {
            left = left.min(b.min.y - ob.max.y);
        } else if ob.min.y >= b.max.y - 1e-12 {
            right = right.min(ob.min.y - b.max.y);
        }
    }
    (left > SIDE_VISIBILITY_GAP, right > SIDE_VISIBILITY_GAP)
}

fn surface_points(scene: &Scene, item: &Item) -> Vec<Point2<f64>> {
    let s = POINT_SPACING;
    let contour = item.contour();
    let mut pts = Vec::new();
    for (a, b) in contour.edges() {
        let n = ((a.distance(b) / s).ceil() as usize).max(1);
        for k in 0..n {
            pts.push(a + (b - a) * (k as f64 / n as f64));
        }
    }
    let bx = item.aabb();
    let (ny, nz) = ((bx.width() / s).floor() as usize, (bx.height() / s).floor() as usize);
    for i in 1..ny {
        for j in 1..nz {
            let p = Point2::new(bx.min.y + bx.width() * i as f64 / ny as f64, bx.min.z + bx.height() * j as f64 / nz as f64);
            if contour.contains(p) && contour.boundary_distance(p) >= s / 2.0 {
                pts.push(p);
            }
        }
    }
    // Side faces project onto the vertical flanks; sample them between the edge points.
    let (left, right) = visible_flanks(scene, item);
    let r = item.corner_radius.unwrap_or(0.0);
    for (visible, y) in [(left, bx.min.y), (right, bx.max.y)] {
        if !visible {
            continue;
        }
        let (z0, z1) = (bx.min.z + r, bx.max.z - r);
        let n = (((z1 - z0) / s).ceil() as usize).max(1);
        for k in 0..n {
            pts.push(Point2::new(y, z0 + (z1 - z0) * (k as f64 + 0.5) / n as f64));
        }
    }
    pts
}

/// Samples every item's aisle-facing outline and applies noise and dropout.
pub fn observe(scene: &Scene, noise: &NoiseConfig, round: u64) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let normal = Normal::new(0.0, noise.point_sigma.max(0.0)).expect("finite sigma");
    let perturb = |pts: Vec<Point2<f64>>, rng: &mut ChaCha8Rng| -> Vec<Point2<f64>> {
        pts.into_iter()
            .filter_map(|p| {
                if noise.dropout_prob > 0.0 && rng.random_bool(noise.dropout_prob) {
                    return None;
                }
                if noise.point_sigma > 0.0 {
                    Some(Point2::new(p.y + normal.sample(rng), p.z + normal.sample(rng)))
                } else {
                    Some(p)
                }
            })
            .collect()
    };
    let mut target = PointCloud2::new(Vec::new(), CloudLabel::Target);
    let mut adjacent = Vec::new();
    for item in &scene.items {
        let pts = perturb(surface_points(scene, item), &mut rng);
        if item.id == scene.target_id {
            target.points = pts;
        } else {
            adjacent.push((item.id, PointCloud2::new(pts, CloudLabel::Adjacent)));
        }
    }
    let open = scene.shelf.opening();
    let wall = [
        (open.min, Point2::new(open.max.y, open.min.z)),
        (open.min, Point2::new(open.min.y, open.max.z)),
        (Point2::new(open.max.y, open.min.z), open.max),
        (Point2::new(open.min.y, open.max.z), open.max),
    ];
    let mut shelf_pts = Vec::new();
    for (a, b) in wall {
        let n = (a.distance(b) / POINT_SPACING).ceil() as usize;
        shelf_pts.extend((0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)));
    }
    let shelf = PointCloud2::new(perturb(shelf_pts, &mut rng), CloudLabel::Shelf);
    Observation {
        target,
        adjacent,
        shelf,
    }
}
