//! Planar bimanual grasp and declutter planning for shelf picking.
//!
//! Geometry, the QP solver, the wrench model, the grasp planner and the
//! declutter planner are generic over the scalar type. The simulator in
//! [`sim`] works in `f64`.

pub mod declutter;
pub mod geometry;
pub mod linalg;
pub mod planner;
pub mod qp;
mod scalar;
pub mod sim;
pub mod wrench;

pub use scalar::Scalar;

pub type DPoint2 = geometry::Point2<f64>;
pub type DAabb2 = geometry::Aabb2<f64>;
pub type DContour = geometry::Contour<f64>;
pub type DPointCloud2 = geometry::PointCloud2<f64>;
pub type DQpProblem = qp::QpProblem<f64>;
pub type DQpSolution = qp::QpSolution<f64>;
pub type DContactPair = wrench::ContactPair<f64>;
pub type DDisturbanceSet = wrench::DisturbanceSet<f64>;
pub type DGraspParams = wrench::GraspParams<f64>;
pub type DQuality = wrench::Quality<f64>;
pub type DShelfSpec = planner::ShelfSpec<f64>;
pub type DGraspCandidate = planner::GraspCandidate<f64>;
pub type DSceneState = declutter::SceneState<f64>;
pub type DDeclutterPlan = declutter::DeclutterPlan<f64>;

pub type FPoint2 = geometry::Point2<f32>;
pub type FAabb2 = geometry::Aabb2<f32>;
pub type FContour = geometry::Contour<f32>;
pub type FPointCloud2 = geometry::PointCloud2<f32>;
pub type FQpProblem = qp::QpProblem<f32>;
pub type FQpSolution = qp::QpSolution<f32>;
pub type FContactPair = wrench::ContactPair<f32>;
pub type FDisturbanceSet = wrench::DisturbanceSet<f32>;
pub type FGraspParams = wrench::GraspParams<f32>;
pub type FQuality = wrench::Quality<f32>;
pub type FShelfSpec = planner::ShelfSpec<f32>;
pub type FGraspCandidate = planner::GraspCandidate<f32>;
pub type FSceneState = declutter::SceneState<f32>;
pub type FDeclutterPlan = declutter::DeclutterPlan<f32>;
