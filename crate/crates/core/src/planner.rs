//! Grasp candidate enumeration over chords of the target's bounding box, and
//! ranking of grasp/declutter plan pairs.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::declutter::DeclutterPlan;
use crate::geometry::{
    alpha_shape, compute_aabb, contact_from_chord, default_alpha, Aabb2, Contour, GeometryError, Point2,
    PointCloud2, DEFAULT_MIN_SEPARATION,
};
use crate::wrench::{grasp_quality, ContactPair, DisturbanceSet, GraspParams, Quality, WrenchError};
use crate::Scalar;

/// How far an effector disk may overlap the fitted contour before the grasp is
/// considered blocked (m). Absorbs the jaggedness of contours fit to noisy points.
pub const CONTOUR_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Wrench(#[from] WrenchError),
    #[error("nothing to rank")]
    EmptyInput,
}

/// Rectangular shelf opening; `y` runs from the left wall at 0 to `width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShelfSpec<T> {
    pub width: T,
    pub height: T,
    pub depth: T,
    pub platform_height: T,
}

impl<T: Scalar> ShelfSpec<T> {
    pub fn opening(&self) -> Aabb2<T> {
        Aabb2::new(
            Point2::new(T::zero(), self.platform_height),
            Point2::new(self.width, self.platform_height + self.height),
        )
    }

    pub fn is_valid(&self) -> bool {
        [self.width, self.height, self.depth, self.platform_height]
            .iter()
            .all(|v| v.is_finite() && *v > T::zero())
    }
}

/// End effector cross-section, modelled as a disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectorGeom<T> {
    pub radius: T,
    /// Distance from the contact to the disk center, against the contact normal.
    pub approach_offset: T,
}

impl<T: Scalar> EffectorGeom<T> {
    pub fn new(radius: T) -> Self {
        Self {
            radius,
            approach_offset: radius,
        }
    }

    /// Disk center for a contact at `c` with inward normal `n`.
    pub fn center(&self, c: Point2<T>, n: Point2<T>) -> Point2<T> {
        c - n * self.approach_offset
    }

    pub fn disk_box(&self, c: Point2<T>, n: Point2<T>) -> Aabb2<T> {
        Aabb2::from_center(self.center(c, n), self.radius, self.radius)
    }
}

impl<T: Scalar> Default for EffectorGeom<T> {
    fn default() -> Self {
        Self::new(T::lit(0.03))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraspCandidate<T> {
    /// Contacts in shelf coordinates.
    pub pair: ContactPair<T>,
    pub quality: Quality<T>,
    pub heuristic: Quality<T>,
    pub reachable: bool,
    /// `|ĉ_lz| + |ĉ_rz|`, the normalized contact heights' distance from mid-height.
    pub center_offset: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions<T> {
    pub disturbance: DisturbanceSet<T>,
    /// Chord endpoints per vertical box edge.
    pub chords_per_side: usize,
    /// Alpha-shape radius; `None` picks it from the point spacing.
    pub alpha: Option<T>,
    pub min_separation: T,
    /// Chord endpoints sit this fraction of the box width outside the box.
    pub chord_margin: T,
}

impl<T: Scalar> Default for PlanOptions<T> {
    fn default() -> Self {
        Self {
            disturbance: DisturbanceSet::default(),
            chords_per_side: 21,
            alpha: None,
            min_separation: T::lit(DEFAULT_MIN_SEPARATION),
            chord_margin: T::lit(0.01),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordOutcome {
    Miss,
    Tangent,
    Unreachable,
    NoClosure,
    Accepted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChordEvaluation<T> {
    pub p_l: Point2<T>,
    pub p_r: Point2<T>,
    pub outcome: ChordOutcome,
    pub candidate: Option<GraspCandidate<T>>,
}

/// Everything the planner derived from one cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraspSearch<T> {
    pub contour: Contour<T>,
    pub item_box: Aabb2<T>,
    pub chords: Vec<ChordEvaluation<T>>,
}

impl<T: Scalar> GraspSearch<T> {
    pub fn candidates(&self) -> Vec<GraspCandidate<T>> {
        self.chords
            .iter()
            .filter(|c| c.outcome == ChordOutcome::Accepted)
            .filter_map(|c| c.candidate)
            .collect()
    }
}

/// Grasp candidates with finite quality and reachable effectors, with defaults.
pub fn plan_grasps<T: Scalar>(
    cloud: &PointCloud2<T>,
    shelf: &ShelfSpec<T>,
    ee: &EffectorGeom<T>,
    params: &GraspParams<T>,
) -> Result<Vec<GraspCandidate<T>>, PlannerError> {
    Ok(search_grasps(cloud, shelf, ee, params, &PlanOptions::default())?.candidates())
}

/// Scores every chord between the vertical edges of the cloud's box.
pub fn search_grasps<T: Scalar>(
    cloud: &PointCloud2<T>,
    shelf: &ShelfSpec<T>,
    ee: &EffectorGeom<T>,
    params: &GraspParams<T>,
    opts: &PlanOptions<T>,
) -> Result<GraspSearch<T>, PlannerError> {
    params.validate()?;
    opts.disturbance.validate()?;
    let alpha = match opts.alpha {
        Some(a) => a,
        None => default_alpha(cloud)?,
    };
    let contour = alpha_shape(cloud, alpha)?;
    let item_box = compute_aabb(cloud)?;
    let n = opts.chords_per_side;
    let margin = item_box.width() * opts.chord_margin;
    let heights: Vec<T> = (0..n)
        .map(|k| item_box.min.z + item_box.height() * T::lit((k + 1) as f64 / (n + 1) as f64))
        .collect();
    let chords: Vec<(Point2<T>, Point2<T>)> = heights
        .iter()
        .flat_map(|&zl| {
            heights.iter().map(move |&zr| {
                (
                    Point2::new(item_box.min.y - margin, zl),
                    Point2::new(item_box.max.y + margin, zr),
                )
            })
        })
        .collect();
    let chords = chords
        .into_par_iter()
        .map(|(p_l, p_r)| evaluate_chord(&contour, &item_box, p_l, p_r, shelf, ee, params, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GraspSearch {
        contour,
        item_box,
        chords,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_chord<T: Scalar>(
    contour: &Contour<T>,
    item_box: &Aabb2<T>,
    p_l: Point2<T>,
    p_r: Point2<T>,
    shelf: &ShelfSpec<T>,
    ee: &EffectorGeom<T>,
    params: &GraspParams<T>,
    opts: &PlanOptions<T>,
) -> Result<ChordEvaluation<T>, WrenchError> {
    let done = |outcome, candidate| {
        Ok(ChordEvaluation {
            p_l,
            p_r,
            outcome,
            candidate,
        })
    };
    let pair = match contact_from_chord(contour, p_l, p_r, opts.min_separation) {
        Ok(pair) if pair.c_l.y < pair.c_r.y => pair,
        Ok(_) | Err(GeometryError::TangentChord { .. }) => return done(ChordOutcome::Tangent, None),
        Err(_) => return done(ChordOutcome::Miss, None),
    };
    let reachable = is_reachable(&pair, shelf, ee, contour);
    let heuristic = center_heuristic(&pair, item_box);
    let mut candidate = GraspCandidate {
        pair,
        quality: Quality::Infinite,
        heuristic,
        reachable,
        center_offset: center_offset(&pair, item_box),
    };
    if !reachable {
        return done(ChordOutcome::Unreachable, Some(candidate));
    }
    candidate.quality = normalized_quality(&pair, item_box, &opts.disturbance, params)?;
    if !candidate.quality.is_finite() || !heuristic.is_finite() {
        return done(ChordOutcome::NoClosure, Some(candidate));
    }
    done(ChordOutcome::Accepted, Some(candidate))
}

/// Grasp quality with contacts expressed about the box center in half-widths.
pub fn normalized_quality<T: Scalar>(
    pair: &ContactPair<T>,
    item_box: &Aabb2<T>,
    set: &DisturbanceSet<T>,
    params: &GraspParams<T>,
) -> Result<Quality<T>, WrenchError> {
    let half = item_box.width() * T::lit(0.5);
    grasp_quality(&pair.normalized(item_box.center(), half), set, params)
}

/// Both effector disks fit in the shelf opening without cutting into `contour`.
pub fn is_reachable<T: Scalar>(
    pair: &ContactPair<T>,
    shelf: &ShelfSpec<T>,
    ee: &EffectorGeom<T>,
    contour: &Contour<T>,
) -> bool {
    let open = shelf.opening();
    let tol = T::lit(CONTOUR_TOLERANCE);
    [(pair.c_l, pair.n_l), (pair.c_r, pair.n_r)].iter().all(|&(c, n)| {
        let disk = ee.disk_box(c, n);
        let inside = disk.min.y >= open.min.y
            && disk.max.y <= open.max.y
            && disk.min.z >= open.min.z
            && disk.max.z <= open.max.z;
        let center = ee.center(c, n);
        let dist = contour.boundary_distance(center);
        let overlaps = dist < ee.radius - tol || (dist > tol && contour.contains(center));
        inside && !overlaps
    })
}

fn normalized_heights<T: Scalar>(pair: &ContactPair<T>, item_box: &Aabb2<T>) -> [T; 2] {
    let (mid, half) = (item_box.center().z, item_box.height() * T::lit(0.5));
    [(pair.c_l.z - mid) / half, (pair.c_r.z - mid) / half]
}

fn center_offset<T: Scalar>(pair: &ContactPair<T>, item_box: &Aabb2<T>) -> T {
    normalized_heights(pair, item_box).iter().map(|c| c.abs()).sum()
}

/// `Σ -ln(1 - ĉ_z⁴)` over both contacts; infinite as a contact nears the top or bottom.
pub fn center_heuristic<T: Scalar>(pair: &ContactPair<T>, item_box: &Aabb2<T>) -> Quality<T> {
    let mut h = T::zero();
    for c in normalized_heights(pair, item_box) {
        if !(c.abs() < T::one() - T::lit(1e-9)) {
            return Quality::Infinite;
        }
        h = h - (T::one() - c.powi(4)).ln();
    }
    Quality::Finite(h)
}

/// A grasp with its declutter plan; `declutter` is `None` when packing failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlanChoice<T> {
    pub grasp: GraspCandidate<T>,
    pub declutter: Option<DeclutterPlan<T>>,
}

/// Orders plans best first: no-op before decluttering, then smaller declutter
/// cost, then grasps near the best cost by `h_g · l_g`, the rest by `l_g`.
/// Plans whose declutter failed go last.
pub fn rank_plans<T: Scalar>(mut plans: Vec<PlanChoice<T>>) -> Result<Vec<PlanChoice<T>>, PlannerError> {
    if plans.is_empty() {
        return Err(PlannerError::EmptyInput);
    }
    let best = plans
        .iter()
        .map(|p| p.grasp.quality.to_float())
        .fold(T::infinity(), T::min);
    let key = |p: &PlanChoice<T>| {
        let l_g = p.grasp.quality.to_float();
        let (failed, declutters, l_d) = match &p.declutter {
            None => (true, true, T::infinity()),
            Some(d) if d.is_noop => (false, false, T::zero()),
            Some(d) => (false, true, d.cost),
        };
        let near_best = l_g <= best * T::lit(1.5);
        let score = if near_best {
            p.grasp.heuristic.to_float() * l_g
        } else {
            l_g
        };
        (failed, declutters, l_d, !near_best, score, l_g, p.grasp.center_offset)
    };
    plans.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.cmp(&kb.1))
            .then(cmp_t(ka.2, kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(cmp_t(ka.4, kb.4))
            .then(cmp_t(ka.5, kb.5))
            .then(cmp_t(ka.6, kb.6))
            .then_with(|| cmp_coords(&a.grasp.pair, &b.grasp.pair))
    });
    Ok(plans)
}

fn cmp_t<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

fn cmp_coords<T: Scalar>(a: &ContactPair<T>, b: &ContactPair<T>) -> Ordering {
    let ka = [a.c_l.y, a.c_l.z, a.c_r.y, a.c_r.z];
    let kb = [b.c_l.y, b.c_l.z, b.c_r.y, b.c_r.z];
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| cmp_t(*x, *y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
