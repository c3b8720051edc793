use serde::{Deserialize, Serialize};

use super::motion::{run_nudge, NudgeRecord};
use super::observe::{observe, NoiseConfig, Observation};
use super::scene::Scene;
use crate::declutter::{assign_roles, plan_declutter, DeclutterPlan, DeclutterWeights, ItemId, ItemState};
use crate::geometry::{compute_aabb, contact_from_chord, Aabb2, Point2};
use crate::planner::{
    normalized_quality, rank_plans, search_grasps, EffectorGeom, GraspSearch, PlanChoice, PlanOptions,
    PlannerError, ShelfSpec,
};
use crate::wrench::{ContactPair, GraspParams, Quality};

const CLEARANCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickConfig {
    pub grasp: GraspParams<f64>,
    pub plan: PlanOptions<f64>,
    pub effector: EffectorGeom<f64>,
    pub weights: DeclutterWeights<f64>,
    /// Extra room kept free beside each effector disk (m).
    pub slot_margin: f64,
    pub noise: NoiseConfig,
    /// Plan and execute declutter moves; when false, grasp the best grasp at once.
    pub declutter: bool,
}

impl Default for PickConfig {
    fn default() -> Self {
        Self {
            grasp: GraspParams::default(),
            plan: PlanOptions::default(),
            effector: EffectorGeom::default(),
            weights: DeclutterWeights::default(),
            slot_margin: 0.005,
            noise: NoiseConfig::exact(),
            declutter: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspStage {
    Approach,
    Closure,
    Extraction,
}

impl GraspStage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Approach => "approach",
            Self::Closure => "closure",
            Self::Extraction => "extraction",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrialOutcome {
    Success,
    GraspFailed { stage: GraspStage },
    DeclutterFailed,
    /// No grasp candidate survived any observation.
    Infeasible,
}

impl TrialOutcome {
    pub fn name(self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::GraspFailed { .. } => "grasp_failed",
            Self::DeclutterFailed => "declutter_failed",
            Self::Infeasible => "infeasible",
        }
    }

    pub fn is_success(self) -> bool {
        self == Self::Success
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum PickEvent {
    Observe {
        round: u64,
        target_points: usize,
        adjacent_points: usize,
    },
    NoGrasp {
        round: u64,
    },
    Plan {
        round: u64,
        candidates: usize,
        feasible_plans: usize,
        pair: ContactPair<f64>,
        quality: Quality<f64>,
        heuristic: Quality<f64>,
        declutter: Option<DeclutterPlan<f64>>,
    },
    Nudge(NudgeRecord),
    Stuck {
        round: u64,
    },
    Grasp {
        pair: ContactPair<f64>,
        effector_centers: [Point2<f64>; 2],
        effector_radius: f64,
        failed: Option<GraspStage>,
        positions: Vec<(ItemId, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    /// Declutter rounds executed.
    pub nudges_executed: usize,
    /// Re-observations after finding no grasp.
    pub retries: usize,
    pub scene: Scene,
    pub log: Vec<PickEvent>,
}

impl TrialResult {
    pub fn nudge_records(&self) -> impl Iterator<Item = &NudgeRecord> {
        self.log.iter().filter_map(|e| match e {
            PickEvent::Nudge(r) => Some(r),
            _ => None,
        })
    }
}

/// Item boxes as estimated from an observation, clamped to the known shelf.
pub fn estimate_items(obs: &Observation, target_id: ItemId, shelf: &ShelfSpec<f64>) -> Vec<ItemState<f64>> {
    let open = shelf.opening();
    let clamp = |b: Aabb2<f64>| {
        Aabb2::new(
            Point2::new(b.min.y.clamp(open.min.y, open.max.y), b.min.z.clamp(open.min.z, open.max.z)),
            Point2::new(b.max.y.clamp(open.min.y, open.max.y), b.max.z.clamp(open.min.z, open.max.z)),
        )
    };
    std::iter::once((target_id, &obs.target))
        .chain(obs.adjacent.iter().map(|(id, c)| (*id, c)))
        .filter_map(|(id, cloud)| {
            let b = clamp(compute_aabb(cloud).ok()?);
            Some(ItemState {
                id,
                size: Point2::new(b.width(), b.height()),
                y: b.center().y,
                z: b.center().z,
                weight: 0.0,
            })
        })
        .collect()
}

/// Grasp search on the observed target plus ranked grasp/declutter plans.
pub fn plan_pick(
    obs: &Observation,
    shelf: &ShelfSpec<f64>,
    target_id: ItemId,
    config: &PickConfig,
) -> Result<(GraspSearch<f64>, Vec<PlanChoice<f64>>), PlannerError> {
    let search = search_grasps(&obs.target, shelf, &config.effector, &config.grasp, &config.plan)?;
    let candidates = search.candidates();
    if candidates.is_empty() {
        return Ok((search, Vec::new()));
    }
    let items = estimate_items(obs, target_id, shelf);
    let choices = candidates
        .into_iter()
        .map(|grasp| {
            let declutter = if config.declutter {
                let ee_height = (grasp.pair.c_l.z + grasp.pair.c_r.z) / 2.0;
                assign_roles(&items, target_id, ee_height, *shelf, config.effector)
                    .ok()
                    .and_then(|mut state| {
                        state.slot_margin = config.slot_margin;
                        plan_declutter(&grasp.pair, &state, &config.weights).ok()
                    })
            } else {
                Some(DeclutterPlan {
                    displacements: Default::default(),
                    cost: 0.0,
                    static_entity: crate::declutter::Role::Target,
                    is_noop: true,
                    moves: Vec::new(),
                })
            };
            PlanChoice { grasp, declutter }
        })
        .collect();
    Ok((search, rank_plans(choices)?))
}

/// Executes a grasp at `pair` (planned on an observation) against the true scene.
pub fn run_grasp(scene: &Scene, pair: &ContactPair<f64>, config: &PickConfig) -> Result<(), GraspStage> {
    let target = scene.target().map_err(|_| GraspStage::Closure)?;
    let others: Vec<Aabb2<f64>> = scene.items.iter().filter(|i| i.id != target.id).map(|i| i.aabb()).collect();
    let ee = &config.effector;
    let open = scene.shelf.opening();
    let contacts = [(pair.c_l, pair.n_l), (pair.c_r, pair.n_r)];

    for &(c, n) in &contacts {
        let center = ee.center(c, n);
        let disk = ee.disk_box(c, n);
        let inside = disk.min.y >= open.min.y - CLEARANCE_TOL
            && disk.max.y <= open.max.y + CLEARANCE_TOL
            && disk.min.z >= open.min.z - CLEARANCE_TOL
            && disk.max.z <= open.max.z + CLEARANCE_TOL;
        if !inside || others.iter().any(|b| b.distance(center) < ee.radius - CLEARANCE_TOL) {
            return Err(GraspStage::Approach);
        }
    }

    let truth = target.contour();
    let true_box = target.aabb();
    let d = (pair.c_r - pair.c_l).normalized();
    let reach = true_box.width() + true_box.height() + pair.c_l.distance(pair.c_r);
    let actual = contact_from_chord(&truth, pair.c_l - d * reach, pair.c_r + d * reach, config.plan.min_separation)
        .map_err(|_| GraspStage::Closure)?;
    if actual.c_l.y >= actual.c_r.y {
        return Err(GraspStage::Closure);
    }
    match normalized_quality(&actual, &true_box, &config.plan.disturbance, &config.grasp) {
        Ok(q) if q.is_finite() => {}
        _ => return Err(GraspStage::Closure),
    }

    let mut corridor = vec![true_box];
    corridor.extend(contacts.iter().map(|&(c, n)| ee.disk_box(c, n)));
    let blocked = corridor
        .iter()
        .any(|a| others.iter().any(|b| a.penetration(b) > CLEARANCE_TOL));
    if blocked {
        return Err(GraspStage::Extraction);
    }
    Ok(())
}

/// The pick loop: observe, plan, and either nudge and start over or grasp.
pub fn run_pick(scene: &Scene, target_id: ItemId, i_max: usize, config: &PickConfig) -> TrialResult {
    let mut state = scene.clone();
    state.target_id = target_id;
    let mut noise = config.noise;
    noise.seed = noise.seed.wrapping_add(scene.seed.wrapping_mul(0xD134_2543_DE82_EF95));
    let mut log = Vec::new();
    let (mut i, mut round, mut retries, mut nudges) = (1usize, 0u64, 0usize, 0usize);

    let outcome = loop {
        round += 1;
        let obs = observe(&state, &noise, round);
        log.push(PickEvent::Observe {
            round,
            target_points: obs.target.len(),
            adjacent_points: obs.adjacent.iter().map(|(_, c)| c.len()).sum(),
        });
        let ranked = match plan_pick(&obs, &state.shelf, target_id, config) {
            Ok((_, ranked)) => ranked,
            Err(e) => {
                log::debug!("planning failed in round {round}: {e}");
                Vec::new()
            }
        };
        let Some(best) = ranked.first().cloned() else {
            log.push(PickEvent::NoGrasp { round });
            if i <= i_max {
                retries += 1;
                i += 1;
                continue;
            }
            break TrialOutcome::Infeasible;
        };
        log.push(PickEvent::Plan {
            round,
            candidates: ranked.len(),
            feasible_plans: ranked.iter().filter(|c| c.declutter.is_some()).count(),
            pair: best.grasp.pair,
            quality: best.grasp.quality,
            heuristic: best.grasp.heuristic,
            declutter: best.declutter.clone(),
        });
        let Some(plan) = best.declutter else {
            break TrialOutcome::DeclutterFailed;
        };
        if !plan.is_noop && i <= i_max {
            let (next, records) = run_nudge(&state, &plan).expect("plan moves observed items");
            let moved = records.iter().any(|r| (r.to_y - r.from_y).abs() > 1e-12);
            log.extend(records.into_iter().map(PickEvent::Nudge));
            nudges += 1;
            i += 1;
            if moved {
                state = next;
                continue;
            }
            log.push(PickEvent::Stuck { round });
        }
        let result = run_grasp(&state, &best.grasp.pair, config);
        log.push(PickEvent::Grasp {
            pair: best.grasp.pair,
            effector_centers: [
                config.effector.center(best.grasp.pair.c_l, best.grasp.pair.n_l),
                config.effector.center(best.grasp.pair.c_r, best.grasp.pair.n_r),
            ],
            effector_radius: config.effector.radius,
            failed: result.err(),
            positions: state.items.iter().map(|it| (it.id, it.y)).collect(),
        });
        break match result {
            Ok(()) => TrialOutcome::Success,
            Err(_) if nudges > 0 && !plan.is_noop => TrialOutcome::DeclutterFailed,
            Err(stage) => TrialOutcome::GraspFailed { stage },
        };
    };
    TrialResult {
        outcome,
        nudges_executed: nudges,
        retries,
        scene: scene.clone(),
        log,
    }
}
