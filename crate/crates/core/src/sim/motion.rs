use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::SimError;
use crate::declutter::{DeclutterPlan, ItemId};

/// Cumulative push (and insertion-depth) fractions of the four nudges.
pub const NUDGE_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

const CONTACT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One nudge: insert beside the item on `side`, push it to `push_target_y`, retract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NudgeCommand {
    pub side: Side,
    pub insertion_z: f64,
    /// Fraction of half the item depth the effector is inserted.
    pub insertion_depth_fraction: f64,
    pub push_target_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NudgeRecord {
    pub item_id: ItemId,
    pub command: NudgeCommand,
    pub from_y: f64,
    pub to_y: f64,
    /// The push stopped short at a wall.
    pub blocked: bool,
    /// Every item's `y` after this nudge.
    pub positions: Vec<(ItemId, f64)>,
}

/// Executes the plan as four progressively larger nudges per moved item.
/// Pushed items shove whatever they touch; walls stop a chain.
pub fn run_nudge(scene: &Scene, plan: &DeclutterPlan<f64>) -> Result<(Scene, Vec<NudgeRecord>), SimError> {
    if plan.is_noop {
        return Err(SimError::NoopPlan);
    }
    let mut scene = scene.clone();
    let mut movers: Vec<(usize, f64)> = Vec::new();
    for &(id, d) in &plan.moves {
        let k = scene.items.iter().position(|i| i.id == id).ok_or(SimError::MissingItem(id))?;
        if d != 0.0 {
            movers.push((k, d));
        }
    }
    // Outer items first so a push does not run into an item about to leave.
    movers.sort_by(|a, b| {
        let key = |&(k, d): &(usize, f64)| {
            let y = scene.items[k].y;
            (d > 0.0, if d < 0.0 { y } else { -y })
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });

    let mut log = Vec::new();
    for (k, d) in movers {
        let start = scene.items[k].y;
        for f in NUDGE_FRACTIONS {
            let goal = start + f * d;
            let from = scene.items[k].y;
            let want = goal - from;
            let dir = want.signum();
            let got = push(&mut scene, k, want.abs(), dir);
            let item = &scene.items[k];
            let blocked = got < want.abs() - 1e-12;
            log.push(NudgeRecord {
                item_id: item.id,
                command: NudgeCommand {
                    side: if d < 0.0 { Side::Right } else { Side::Left },
                    insertion_z: item.z,
                    insertion_depth_fraction: f,
                    push_target_y: goal,
                },
                from_y: from,
                to_y: item.y,
                blocked,
                positions: scene.items.iter().map(|i| (i.id, i.y)).collect(),
            });
            if blocked {
                break;
            }
        }
    }
    Ok((scene, log))
}

/// Moves item `k` up to `amount` along `dir`, shoving touched items; returns the travel.
fn push(scene: &mut Scene, k: usize, amount: f64, dir: f64) -> f64 {
    if amount <= 0.0 {
        return 0.0;
    }
    let t = travel(scene, k, amount, dir);
    let mut disp = vec![0.0; scene.items.len()];
    spread(scene, k, t, dir, &mut disp);
    for (it, d) in scene.items.iter_mut().zip(&disp) {
        it.y += dir * d;
    }
    t
}

/// Items touched first when `k` moves along `dir`, with their gaps.
fn blockers(scene: &Scene, k: usize, dir: f64) -> Vec<(usize, f64)> {
    let b = scene.items[k].aabb();
    scene
        .items
        .iter()
        .enumerate()
        .filter(|&(j, o)| j != k && o.aabb().overlap_z(&b) > 0.0)
        .filter_map(|(j, o)| {
            let ob = o.aabb();
            let gap = if dir < 0.0 { b.min.y - ob.max.y } else { ob.min.y - b.max.y };
            (gap >= -1e-9).then_some((j, gap.max(0.0)))
        })
        .collect()
}

fn travel(scene: &Scene, k: usize, amount: f64, dir: f64) -> f64 {
    let b = scene.items[k].aabb();
    let wall = if dir < 0.0 { b.min.y } else { scene.shelf.width - b.max.y };
    let mut t = amount.min(wall.max(0.0));
    for (j, gap) in blockers(scene, k, dir) {
        if gap < t - CONTACT_TOL {
            t = t.min(gap + travel(scene, j, t - gap, dir));
        }
    }
    t
}

fn spread(scene: &Scene, k: usize, t: f64, dir: f64, disp: &mut [f64]) {
    if t <= disp[k] {
        return;
    }
    disp[k] = t;
    for (j, gap) in blockers(scene, k, dir) {
        if gap < t {
            spread(scene, j, t - gap, dir, disp);
        }
    }
}
