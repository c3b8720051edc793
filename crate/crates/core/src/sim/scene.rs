use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Triangular};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::declutter::{ItemId, ItemState};
use crate::geometry::{Aabb2, Contour, Point2};
use crate::planner::ShelfSpec;

pub const SCENE_SCHEMA: u32 = 1;
const MAX_ATTEMPTS: usize = 100;
const CORNER_SEGMENTS: usize = 8;

/// Item extent distributions as (min, median, max).
pub const ITEM_DEPTH_CM: ExtentDist = ExtentDist::new(6.0, 14.0, 29.0);
pub const ITEM_WIDTH_CM: ExtentDist = ExtentDist::new(14.0, 23.0, 41.0);
pub const ITEM_HEIGHT_CM: ExtentDist = ExtentDist::new(12.0, 24.0, 41.0);
pub const ITEM_WEIGHT_G: ExtentDist = ExtentDist::new(900.0, 1825.0, 3098.0);

/// Triangular distribution described by its support and median.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtentDist {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl ExtentDist {
    pub const fn new(min: f64, median: f64, max: f64) -> Self {
        Self { min, median, max }
    }

    /// Mode of the triangular distribution on `[min, max]` with this median.
    pub fn mode(&self) -> f64 {
        let (a, b, m) = (self.min, self.max, self.median);
        if m >= (a + b) / 2.0 {
            a + 2.0 * (m - a).powi(2) / (b - a)
        } else {
            b - 2.0 * (b - m).powi(2) / (b - a)
        }
    }

    fn distribution(&self) -> Triangular<f64> {
        Triangular::new(self.min, self.max, self.mode()).expect("valid triangular parameters")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ShelfChoice {
    Bottom,
    Center,
    Top,
}

impl ShelfChoice {
    pub const ALL: [Self; 3] = [Self::Bottom, Self::Center, Self::Top];

    pub fn spec(self) -> ShelfSpec<f64> {
        let (width, height, depth, platform_height) = match self {
            Self::Bottom => (0.91, 0.42, 0.47, 0.60),
            Self::Center => (0.91, 0.48, 0.56, 0.83),
            Self::Top => (0.91, 0.42, 0.56, 1.46),
        };
        ShelfSpec {
            width,
            height,
            depth,
            platform_height,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bottom => "bottom",
            Self::Center => "center",
            Self::Top => "top",
        }
    }
}

impl std::str::FromStr for ShelfChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bottom" => Ok(Self::Bottom),
            "center" => Ok(Self::Center),
            "top" => Ok(Self::Top),
            _ => Err(format!("unknown shelf {s:?}; expected bottom, center or top")),
        }
    }
}

/// A physical item. `y`, `z` locate the center of its yz footprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: ItemId,
    /// Width along y and height along z (m).
    pub extent_yz: [f64; 2],
    pub depth_x: f64,
    /// kg
    pub weight: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_radius: Option<f64>,
}

impl Item {
    pub fn aabb(&self) -> Aabb2<f64> {
        Aabb2::from_center(Point2::new(self.y, self.z), self.extent_yz[0] / 2.0, self.extent_yz[1] / 2.0)
    }

    pub fn state(&self) -> ItemState<f64> {
        ItemState {
            id: self.id,
            size: Point2::new(self.extent_yz[0], self.extent_yz[1]),
            y: self.y,
            z: self.z,
            weight: self.weight,
        }
    }

    /// The item outline, counterclockwise.
    pub fn contour(&self) -> Contour<f64> {
        let b = self.aabb();
        let r = self
            .corner_radius
            .unwrap_or(0.0)
            .min(b.width() / 2.0)
            .min(b.height() / 2.0);
        if r <= 0.0 {
            return Contour::rectangle(&b);
        }
        let corners = [
            (Point2::new(b.max.y - r, b.min.z + r), -0.25),
            (Point2::new(b.max.y - r, b.max.z - r), 0.0),
            (Point2::new(b.min.y + r, b.max.z - r), 0.25),
            (Point2::new(b.min.y + r, b.min.z + r), 0.5),
        ];
        let mut v = Vec::with_capacity(4 * (CORNER_SEGMENTS + 1));
        for (c, start) in corners {
            for k in 0..=CORNER_SEGMENTS {
                let a = std::f64::consts::TAU * (start + 0.25 * k as f64 / CORNER_SEGMENTS as f64);
                v.push(Point2::new(c.y + r * a.cos(), c.z + r * a.sin()));
            }
        }
        Contour::new(v).expect("rounded rectangle is a valid contour")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShelfFile {
    w: f64,
    h: f64,
    d: f64,
    platform: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    schema: u32,
    shelf: ShelfFile,
    items: Vec<Item>,
    target_id: ItemId,
    seed: u64,
}

/// The simulated world: a shelf with items resting on its platform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub shelf: ShelfSpec<f64>,
    pub items: Vec<Item>,
    pub target_id: ItemId,
    pub seed: u64,
}

impl TryFrom<SceneFile> for Scene {
    type Error = String;
    fn try_from(f: SceneFile) -> Result<Self, String> {
        if f.schema != SCENE_SCHEMA {
            return Err(format!("unsupported schema {}; expected {SCENE_SCHEMA}", f.schema));
        }
        let scene = Scene {
            shelf: ShelfSpec {
                width: f.shelf.w,
                height: f.shelf.h,
                depth: f.shelf.d,
                platform_height: f.shelf.platform,
            },
            items: f.items,
            target_id: f.target_id,
            seed: f.seed,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        SceneFile {
            schema: SCENE_SCHEMA,
            shelf: ShelfFile {
                w: s.shelf.width,
                h: s.shelf.height,
                d: s.shelf.depth,
                platform: s.shelf.platform_height,
            },
            items: s.items,
            target_id: s.target_id,
            seed: s.seed,
        }
    }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn target(&self) -> Result<&Item, SimError> {
        self.item(self.target_id).ok_or(SimError::MissingItem(self.target_id))
    }

    pub fn states(&self) -> Vec<ItemState<f64>> {
        self.items.iter().map(Item::state).collect()
    }

    /// Largest pairwise AABB penetration (non-positive when nothing overlaps).
    pub fn max_overlap(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, a) in self.items.iter().enumerate() {
            for b in &self.items[i + 1..] {
                worst = worst.max(a.aabb().penetration(&b.aabb()));
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.shelf.is_valid() {
            return Err(format!("shelf dimensions must be positive: {:?}", self.shelf));
        }
        if self.items.is_empty() {
            return Err("scene has no items".into());
        }
        if self.item(self.target_id).is_none() {
            return Err(format!("target_id {} matches no item", self.target_id));
        }
        let open = self.shelf.opening();
        for (k, it) in self.items.iter().enumerate() {
            let ok = it.extent_yz.iter().all(|v| v.is_finite() && *v > 0.0)
                && it.depth_x.is_finite()
                && it.depth_x > 0.0
                && it.y.is_finite()
                && it.z.is_finite();
            if !ok {
                return Err(format!("items[{k}] (id {}) has non-positive or non-finite geometry", it.id));
            }
            let b = it.aabb();
            let tol = 1e-9;
            if b.min.y < open.min.y - tol || b.max.y > open.max.y + tol || b.min.z < open.min.z - tol || b.max.z > open.max.z + tol {
                return Err(format!("items[{k}] (id {}) lies outside the shelf opening", it.id));
            }
            if self.items[..k].iter().any(|o| o.id == it.id) {
                return Err(format!("items[{k}] repeats id {}", it.id));
            }
        }
        if self.max_overlap() > 1e-9 {
            return Err("items overlap".into());
        }
        Ok(())
    }
}

/// Width, height and depth (m) and weight (kg) of one random item.
pub fn sample_item_dims<R: Rng>(rng: &mut R) -> ([f64; 2], f64, f64) {
    let w = ITEM_WIDTH_CM.distribution().sample(rng) / 100.0;
    let h = ITEM_HEIGHT_CM.distribution().sample(rng) / 100.0;
    let d = ITEM_DEPTH_CM.distribution().sample(rng) / 100.0;
    let m = ITEM_WEIGHT_G.distribution().sample(rng) / 1000.0;
    ([w, h], d, m)
}

/// A random scene on the chosen shelf. Cluttered scenes hold a target with a
/// flush neighbor on each side; with probability 1/2 the row is pushed against
/// one wall and the neighbor on that side is left out.
pub fn generate_scene(seed: u64, choice: ShelfChoice, clutter: bool) -> Result<Scene, SimError> {
    let shelf = choice.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let dims: Vec<_> = (0..if clutter { 3 } else { 1 }).map(|_| sample_item_dims(&mut rng)).collect();
        if dims.iter().any(|(e, _, _)| e[1] > shelf.height) {
            continue;
        }
        let item = |id: ItemId, k: usize, y0: f64| {
            let (e, d, m) = dims[k];
            Item {
                id,
                extent_yz: e,
                depth_x: d,
                weight: m,
                y: y0 + e[0] / 2.0,
                z: shelf.platform_height + e[1] / 2.0,
                corner_radius: None,
            }
        };
        if !clutter {
            let w = dims[0].0[0];
            let y0 = rng.random_range(0.0..=(shelf.width - w));
            return Ok(Scene {
                shelf,
                items: vec![item(1, 0, y0)],
                target_id: 1,
                seed,
            });
        }
        // Items 0, 1, 2 are left neighbor, target, right neighbor.
        let aligned = rng.random_bool(0.5);
        let wall_left = rng.random_bool(0.5);
        let keep: Vec<usize> = match (aligned, wall_left) {
            (false, _) => vec![0, 1, 2],
            (true, true) => vec![1, 2],
            (true, false) => vec![0, 1],
        };
        let total: f64 = keep.iter().map(|&k| dims[k].0[0]).sum();
        if total > shelf.width {
            continue;
        }
        let mut y = match (aligned, wall_left) {
            (false, _) => rng.random_range(0.0..=(shelf.width - total)),
            (true, true) => 0.0,
            (true, false) => shelf.width - total,
        };
        let mut items = Vec::new();
        for &k in &keep {
            items.push(item(k as ItemId + 1, k, y));
            y += dims[k].0[0];
        }
        if let Some(last) = items.last_mut() {
            // Absorb rounding so the row never pokes through the right wall.
            let over = last.y + last.extent_yz[0] / 2.0 - shelf.width;
            if over > 0.0 {
                for it in &mut items {
                    it.y -= over;
                }
            }
        }
        return Ok(Scene {
            shelf,
            items,
            target_id: 2,
            seed,
        });
    }
    Err(SimError::Unpackable {
        seed,
        attempts: MAX_ATTEMPTS,
    })
}
