//! Role assignment around the target and the lateral packing problem that
//! clears room for both effectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb2, Point2};
use crate::linalg::Mat;
use crate::planner::{EffectorGeom, ShelfSpec};
use crate::qp::{solve_qp, QpError, QpProblem, QpStatus};
use crate::wrench::ContactPair;
use crate::Scalar;

pub type ItemId = u32;

/// Feasibility slack for the packing constraints (m).
const PACK_TOL: f64 = 1e-9;
const NOOP_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeclutterError {
    #[error("target item {0} is not in the scene")]
    TargetMissing(ItemId),
    #[error("no packing clears both effector slots")]
    Infeasible,
    #[error("invalid scene: {0}")]
    InvalidInput(String),
    #[error("packing solver failed: {0}")]
    Solver(String),
}

impl From<QpError> for DeclutterError {
    fn from(e: QpError) -> Self {
        Self::Solver(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    LeftNeighbor,
    RightNeighbor,
    LeftHeight,
    RightHeight,
    LeftEffector,
    RightEffector,
}

impl Role {
    pub const fn short(self) -> &'static str {
        match self {
            Self::Target => "t",
            Self::LeftNeighbor => "ln",
            Self::RightNeighbor => "rn",
            Self::LeftHeight => "lh",
            Self::RightHeight => "rh",
            Self::LeftEffector => "le",
            Self::RightEffector => "re",
        }
    }
}

/// An item's yz footprint; only `y` changes during a trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemState<T> {
    pub id: ItemId,
    /// Width along y and height along z.
    pub size: Point2<T>,
    pub y: T,
    pub z: T,
    pub weight: T,
}

impl<T: Scalar> ItemState<T> {
    pub fn aabb(&self) -> Aabb2<T> {
        self.aabb_at(self.y)
    }

    pub fn aabb_at(&self, y: T) -> Aabb2<T> {
        let h = T::lit(0.5);
        Aabb2::from_center(Point2::new(y, self.z), self.size.y * h, self.size.z * h)
    }

    fn z_span(&self) -> (T, T) {
        let b = self.aabb();
        (b.min.z, b.max.z)
    }
}

/// The target and the items that matter for clearing room around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState<T> {
    pub target: ItemState<T>,
    pub left_neighbor: Option<ItemState<T>>,
    pub right_neighbor: Option<ItemState<T>>,
    pub left_height: Option<ItemState<T>>,
    pub right_height: Option<ItemState<T>>,
    pub effector: EffectorGeom<T>,
    /// Extra room kept free on the outer side of each effector disk (m).
    pub slot_margin: T,
    pub shelf: ShelfSpec<T>,
    pub rng_seed: u64,
}

impl<T: Scalar> SceneState<T> {
    pub fn role(&self, role: Role) -> Option<&ItemState<T>> {
        match role {
            Role::Target => Some(&self.target),
            Role::LeftNeighbor => self.left_neighbor.as_ref(),
            Role::RightNeighbor => self.right_neighbor.as_ref(),
            Role::LeftHeight => self.left_height.as_ref(),
            Role::RightHeight => self.right_height.as_ref(),
            Role::LeftEffector | Role::RightEffector => None,
        }
    }

    pub fn without(&self, role: Role) -> Self {
        let mut s = self.clone();
        match role {
            Role::LeftNeighbor => s.left_neighbor = None,
            Role::RightNeighbor => s.right_neighbor = None,
            Role::LeftHeight => s.left_height = None,
            Role::RightHeight => s.right_height = None,
            _ => {}
        }
        s
    }

    /// Effector slots for `pair`: each disk's box, widened outward by the margin.
    pub fn effector_slots(&self, pair: &ContactPair<T>) -> [Aabb2<T>; 2] {
        let mut l = self.effector.disk_box(pair.c_l, pair.n_l);
        let mut r = self.effector.disk_box(pair.c_r, pair.n_r);
        l.min.y = l.min.y - self.slot_margin;
        r.max.y = r.max.y + self.slot_margin;
        [l, r]
    }
}

/// Picks the target's neighbours and the nearest items at effector height.
pub fn assign_roles<T: Scalar>(
    items: &[ItemState<T>],
    target_id: ItemId,
    ee_height: T,
    shelf: ShelfSpec<T>,
    effector: EffectorGeom<T>,
) -> Result<SceneState<T>, DeclutterError> {
    let target = *items
        .iter()
        .find(|i| i.id == target_id)
        .ok_or(DeclutterError::TargetMissing(target_id))?;
    let (tz0, tz1) = target.z_span();
    let others = || items.iter().filter(|i| i.id != target_id);
    let overlaps = |i: &&ItemState<T>| {
        let (z0, z1) = i.z_span();
        z0.max(tz0) < z1.min(tz1)
    };
    let at_height = |i: &&ItemState<T>| {
        let (z0, z1) = i.z_span();
        z0 <= ee_height && ee_height <= z1
    };
    let nearest_left = |pick: &dyn Fn(&&ItemState<T>) -> bool| {
        others()
            .filter(|i| i.y < target.y)
            .filter(|i| pick(i))
            .max_by(|a, b| a.y.partial_cmp(&b.y).unwrap())
            .copied()
    };
    let nearest_right = |pick: &dyn Fn(&&ItemState<T>) -> bool| {
        others()
            .filter(|i| i.y > target.y)
            .filter(|i| pick(i))
            .min_by(|a, b| a.y.partial_cmp(&b.y).unwrap())
            .copied()
    };
    Ok(SceneState {
        target,
        left_neighbor: nearest_left(&overlaps),
        right_neighbor: nearest_right(&overlaps),
        left_height: nearest_left(&at_height),
        right_height: nearest_right(&at_height),
        effector,
        slot_margin: T::lit(0.005),
        shelf,
        rng_seed: 0,
    })
}

/// Per-role cost weights and preferred positions; unset roles use the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclutterWeights<T> {
    pub weights: BTreeMap<Role, T>,
    /// Preferred center `y`; defaults to the current position.
    pub targets: BTreeMap<Role, T>,
}

impl<T: Scalar> Default for DeclutterWeights<T> {
    fn default() -> Self {
        Self {
            weights: BTreeMap::from([(Role::Target, T::lit(4.0))]),
            targets: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> DeclutterWeights<T> {
    pub fn uniform() -> Self {
        Self {
            weights: BTreeMap::from([(Role::Target, T::one())]),
            targets: BTreeMap::new(),
        }
    }

    fn weight(&self, role: Role) -> T {
        match role {
            Role::LeftEffector | Role::RightEffector => T::zero(),
            _ => self.weights.get(&role).copied().unwrap_or_else(T::one),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclutterPlan<T> {
    /// Lateral displacement of every present role, effector slots included.
    pub displacements: BTreeMap<Role, T>,
    pub cost: T,
    pub static_entity: Role,
    pub is_noop: bool,
    /// Displacement per physical item.
    pub moves: Vec<(ItemId, T)>,
}

impl<T: Scalar> DeclutterPlan<T> {
    pub fn noop(scene: &SceneState<T>) -> Self {
        let vars = Variables::new(scene, &DeclutterWeights::default());
        let x: Vec<T> = vars.items.iter().map(|v| v.item.y).collect();
        vars.plan(&x, Role::Target, T::zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Center,
    Right,
}

struct Var<T> {
    roles: Vec<Role>,
    item: ItemState<T>,
    side: Side,
    weight: T,
    preferred: T,
}

/// A box whose center is `x[var] + offset`.
struct Body<T> {
    var: usize,
    offset: T,
    half_w: T,
    z: (T, T),
    role: Role,
}

struct Variables<T> {
    items: Vec<Var<T>>,
    bodies: Vec<Body<T>>,
}

impl<T: Scalar> Variables<T> {
    fn new(scene: &SceneState<T>, weights: &DeclutterWeights<T>) -> Self {
        let mut items: Vec<Var<T>> = Vec::new();
        let roles = [
            (Role::Target, Side::Center),
            (Role::LeftNeighbor, Side::Left),
            (Role::RightNeighbor, Side::Right),
            (Role::LeftHeight, Side::Left),
            (Role::RightHeight, Side::Right),
        ];
        for (role, side) in roles {
            let Some(item) = scene.role(role) else { continue };
            let w = weights.weight(role);
            let pref = weights.targets.get(&role).copied();
            if let Some(v) = items.iter_mut().find(|v| v.item.id == item.id) {
                v.roles.push(role);
                v.weight = v.weight.max(w);
                if let Some(p) = pref {
                    v.preferred = p;
                }
                continue;
            }
            items.push(Var {
                roles: vec![role],
                item: *item,
                side,
                weight: w,
                preferred: pref.unwrap_or(item.y),
            });
        }
        let h = T::lit(0.5);
        let bodies: Vec<Body<T>> = items
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let b = v.item.aabb();
                Body {
                    var: k,
                    offset: T::zero(),
                    half_w: b.width() * h,
                    z: (b.min.z, b.max.z),
                    role: v.roles[0],
                }
            })
            .collect();
        Self { items, bodies }
    }

    fn with_slots(mut self, slots: [Aabb2<T>; 2]) -> Self {
        let t = self.items[0].item.y;
        let h = T::lit(0.5);
        for (slot, role) in slots.iter().zip([Role::LeftEffector, Role::RightEffector]) {
            self.bodies.push(Body {
                var: 0,
                offset: slot.center().y - t,
                half_w: slot.width() * h,
                z: (slot.min.z, slot.max.z),
                role,
            });
        }
        self
    }

    fn rank(&self, b: &Body<T>) -> (u8, T) {
        let y = self.items[b.var].item.y + b.offset;
        match b.role {
            Role::LeftEffector => (1, y),
            Role::Target => (2, y),
            Role::RightEffector => (3, y),
            _ if self.items[b.var].side == Side::Left => (0, y),
            _ => (4, y),
        }
    }

    /// Rows `a·x <= b` for containment, ordering and one-sided motion.
    fn constraints(&self, shelf: &ShelfSpec<T>) -> (Vec<Vec<T>>, Vec<T>) {
        let n = self.items.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let unit = |k: usize, s: T| {
            let mut r = vec![T::zero(); n];
            r[k] = s;
            r
        };
        for b in &self.bodies {
            rows.push(unit(b.var, -T::one()));
            rhs.push(b.offset - b.half_w);
            rows.push(unit(b.var, T::one()));
            rhs.push(shelf.width - b.half_w - b.offset);
        }
        let mut order: Vec<&Body<T>> = self.bodies.iter().collect();
        order.sort_by(|a, b| {
            let (ra, rb) = (self.rank(a), self.rank(b));
            ra.0.cmp(&rb.0).then(ra.1.partial_cmp(&rb.1).unwrap())
        });
        for (i, a) in order.iter().enumerate() {
            for b in &order[i + 1..] {
                if a.var == b.var || a.z.0.max(b.z.0) >= a.z.1.min(b.z.1) {
                    continue;
                }
                // a left of b: x_a + off_a + hw_a <= x_b + off_b - hw_b
                let mut r = vec![T::zero(); n];
                r[a.var] = T::one();
                r[b.var] = r[b.var] - T::one();
                rows.push(r);
                rhs.push(b.offset - a.offset - a.half_w - b.half_w);
            }
        }
        for (k, v) in self.items.iter().enumerate() {
            match v.side {
                Side::Left => {
                    rows.push(unit(k, T::one()));
                    rhs.push(v.item.y);
                }
                Side::Right => {
                    rows.push(unit(k, -T::one()));
                    rhs.push(-v.item.y);
                }
                Side::Center => {}
            }
        }
        (rows, rhs)
    }

    fn cost(&self, x: &[T]) -> T {
        self.items
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.weight * (xi - v.preferred).powi(2))
            .sum()
    }

    fn plan(&self, x: &[T], k: Role, cost: T) -> DeclutterPlan<T> {
        let mut displacements = BTreeMap::new();
        let mut moves = Vec::new();
        for (v, &xi) in self.items.iter().zip(x) {
            let d = xi - v.item.y;
            for &r in &v.roles {
                displacements.insert(r, d);
            }
            moves.push((v.item.id, d));
        }
        let dt = displacements[&Role::Target];
        displacements.insert(Role::LeftEffector, dt);
        displacements.insert(Role::RightEffector, dt);
        let is_noop = displacements.values().all(|d| d.abs() <= T::lit(NOOP_TOL));
        DeclutterPlan {
            displacements,
            cost,
            static_entity: k,
            is_noop,
            moves,
        }
    }
}

/// Cheapest lateral repacking that clears both effector slots for `pair`,
/// holding one of the target or the effector-height items still.
pub fn plan_declutter<T: Scalar>(
    pair: &ContactPair<T>,
    scene: &SceneState<T>,
    weights: &DeclutterWeights<T>,
) -> Result<DeclutterPlan<T>, DeclutterError> {
    if !scene.shelf.is_valid() {
        return Err(DeclutterError::InvalidInput(format!("bad shelf {:?}", scene.shelf)));
    }
    if weights.weights.values().any(|w| !(*w >= T::zero())) {
        return Err(DeclutterError::InvalidInput("weights must be nonnegative".into()));
    }
    let vars = Variables::new(scene, weights).with_slots(scene.effector_slots(pair));
    let (rows, rhs) = vars.constraints(&scene.shelf);
    let n = vars.items.len();
    let x0: Vec<T> = vars.items.iter().map(|v| v.item.y).collect();
    let tol = T::lit(PACK_TOL);
    let feasible_now = rows
        .iter()
        .zip(&rhs)
        .all(|(r, &b)| r.iter().zip(&x0).map(|(&a, &x)| a * x).sum::<T>() <= b + tol);
    if feasible_now {
        return Ok(vars.plan(&x0, Role::Target, T::zero()));
    }

    let two = T::lit(2.0);
    let hessian = Mat::diagonal(&vars.items.iter().map(|v| two * v.weight).collect::<Vec<_>>());
    let linear: Vec<T> = vars.items.iter().map(|v| -two * v.weight * v.preferred).collect();
    let ineq = Mat::from_rows(n, &rows);
    let mut best: Option<(T, Vec<T>, Role)> = None;
    for k in [Role::Target, Role::LeftHeight, Role::RightHeight] {
        let mut problem = QpProblem::new(hessian.clone(), linear.clone())
            .with_inequalities(ineq.clone(), rhs.clone());
        if let Some(kv) = vars.items.iter().position(|v| v.roles.contains(&k)) {
            let mut row = vec![T::zero(); n];
            row[kv] = T::one();
            problem = problem.with_equalities(Mat::from_rows(n, &[row]), vec![x0[kv]]);
        }
        let sol = solve_qp(&problem)?;
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => continue,
            QpStatus::MaxIterations => {
                return Err(DeclutterError::Solver("packing QP hit its iteration cap".into()))
            }
        }
        let mut x = sol.x;
        for (k2, v) in vars.items.iter().enumerate() {
            match v.side {
                Side::Left => x[k2] = x[k2].min(x0[k2]),
                Side::Right => x[k2] = x[k2].max(x0[k2]),
                Side::Center => {}
            }
            if v.roles.contains(&k) {
                x[k2] = x0[k2];
            }
        }
        let cost = vars.cost(&x);
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, x, k));
        }
    }
    let (cost, x, k) = best.ok_or(DeclutterError::Infeasible)?;
    Ok(vars.plan(&x, k, cost))
}

/// Boxes of every entity after applying `plan`, keyed by role.
pub fn displaced_boxes<T: Scalar>(
    pair: &ContactPair<T>,
    scene: &SceneState<T>,
    plan: &DeclutterPlan<T>,
) -> BTreeMap<Role, Aabb2<T>> {
    let mut out = BTreeMap::new();
    for role in [
        Role::Target,
        Role::LeftNeighbor,
        Role::RightNeighbor,
        Role::LeftHeight,
        Role::RightHeight,
    ] {
        if let Some(item) = scene.role(role) {
            out.insert(role, item.aabb_at(item.y + plan.displacements[&role]));
        }
    }
    let [l, r] = scene.effector_slots(pair);
    let dt = plan.displacements[&Role::Target];
    out.insert(Role::LeftEffector, l.translated(dt, T::zero()));
    out.insert(Role::RightEffector, r.translated(dt, T::zero()));
    out
}
