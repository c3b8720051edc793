//! Deterministic quasi-static shelf simulator: scene generation, synthetic
//! observation, nudging, grasp execution and the full pick loop.
//!
//! The simulator works in `f64` throughout.

mod motion;
mod observe;
mod pick;
mod scene;

use thiserror::Error;

pub use motion::{run_nudge, NudgeCommand, NudgeRecord, Side, NUDGE_FRACTIONS};
pub use observe::{observe, visible_flanks, NoiseConfig, Observation, POINT_SPACING, SIDE_VISIBILITY_GAP};
pub use pick::{
    estimate_items, plan_pick,
    run_grasp, run_pick, GraspStage, PickConfig, PickEvent, TrialOutcome, TrialResult,
};
pub use scene::{
    generate_scene, sample_item_dims, ExtentDist, Item, Scene, ShelfChoice, ITEM_DEPTH_CM, ITEM_HEIGHT_CM,
    ITEM_WEIGHT_G, ITEM_WIDTH_CM, SCENE_SCHEMA,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not pack a scene for seed {seed} after {attempts} attempts")]
    Unpackable { seed: u64, attempts: usize },
    #[error("item {0} is not in the scene")]
    MissingItem(u32),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("the plan moves nothing")]
    NoopPlan,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
