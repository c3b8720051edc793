use shelfpick::declutter::DeclutterPlan;
use shelfpick::geometry::{Aabb2, CloudLabel, GeometryError, Point2, PointCloud2};
use shelfpick::planner::*;
use shelfpick::wrench::{ContactPair, GraspParams, Quality};
use std::collections::BTreeMap;

fn p(y: f64, z: f64) -> Point2<f64> {
    Point2::new(y, z)
}

fn center_shelf() -> ShelfSpec<f64> {
    ShelfSpec {
        width: 0.91,
        height: 0.48,
        depth: 0.56,
        platform_height: 0.83,
    }
}

fn rectangle_cloud(min: Point2<f64>, w: f64, h: f64, step: f64) -> PointCloud2<f64> {
    let (nw, nh) = ((w / step).round() as usize, (h / step).round() as usize);
    let pts = (0..=nw)
        .flat_map(|i| (0..=nh).map(move |j| p(min.y + w * i as f64 / nw as f64, min.z + h * j as f64 / nh as f64)))
        .collect();
    PointCloud2::new(pts, CloudLabel::Target)
}

fn mid_rectangle() -> PointCloud2<f64> {
    let s = center_shelf();
    rectangle_cloud(p(s.width / 2.0 - 0.1, s.platform_height + 0.05), 0.2, 0.3, 0.005)
}

#[test]
fn rectangle_has_force_closure_candidates() {
    let params = GraspParams::default();
    let c = plan_grasps(&mid_rectangle(), &center_shelf(), &EffectorGeom::default(), &params).unwrap();
    assert!(!c.is_empty());
    let half_cone = params.mu.atan();
    for g in &c {
        assert!(g.reachable && g.quality.is_finite() && g.heuristic.is_finite());
        let chord = (g.pair.c_r - g.pair.c_l).normalized();
        let ang = |n: Point2<f64>, d: Point2<f64>| n.cross(d).atan2(n.dot(d)).abs();
        assert!(ang(g.pair.n_l, chord) < half_cone);
        assert!(ang(g.pair.n_r, -chord) < half_cone);
    }
}

#[test]
fn two_point_cloud_is_degenerate() {
    let cloud = PointCloud2::target(vec![p(0.4, 0.9), p(0.5, 0.9)]);
    let r = plan_grasps(&cloud, &center_shelf(), &EffectorGeom::default(), &GraspParams::default());
    assert!(matches!(r, Err(PlannerError::Geometry(GeometryError::DegenerateInput(_)))));
}

#[test]
fn item_against_the_wall_leaves_no_room_for_the_left_effector() {
    let s = center_shelf();
    let cloud = rectangle_cloud(p(0.001, s.platform_height + 0.05), 0.2, 0.3, 0.005);
    let search = search_grasps(
        &cloud,
        &s,
        &EffectorGeom::default(),
        &GraspParams::default(),
        &PlanOptions::default(),
    )
    .unwrap();
    assert!(search.candidates().is_empty());
    assert!(search.chords.iter().any(|c| c.outcome == ChordOutcome::Unreachable));
}

#[test]
fn candidates_translate_rigidly_along_y() {
    let (s, ee, params) = (center_shelf(), EffectorGeom::default(), GraspParams::default());
    let base = plan_grasps(&mid_rectangle(), &s, &ee, &params).unwrap();
    let shifted = plan_grasps(&mid_rectangle().translated(p(0.07, 0.0)), &s, &ee, &params).unwrap();
    assert_eq!(base.len(), shifted.len());
    for (a, b) in base.iter().zip(&shifted) {
        assert!((a.pair.c_l.y + 0.07 - b.pair.c_l.y).abs() < 1e-9);
        assert!((a.pair.c_r.z - b.pair.c_r.z).abs() < 1e-9);
        let (qa, qb) = (a.quality.finite().unwrap(), b.quality.finite().unwrap());
        assert!((qa - qb).abs() < 1e-9);
    }
}

fn pair_at(zl: f64, zr: f64) -> ContactPair<f64> {
    ContactPair {
        c_l: p(-0.1, zl),
        c_r: p(0.1, zr),
        n_l: p(1.0, 0.0),
        n_r: p(-1.0, 0.0),
    }
}

#[test]
fn center_heuristic_values() {
    let item = Aabb2::new(p(-0.1, -1.0), p(0.1, 1.0));
    assert_eq!(center_heuristic(&pair_at(0.0, 0.0), &item), Quality::Finite(0.0));
    let h = center_heuristic(&pair_at(0.5, -0.5), &item).finite().unwrap();
    assert!((h - (-2.0 * (1.0f64 - 0.0625).ln())).abs() < 1e-15);
    assert!((h - 0.1291).abs() < 5e-5);
    assert_eq!(center_heuristic(&pair_at(1.0, 0.0), &item), Quality::Infinite);
    assert_eq!(center_heuristic(&pair_at(0.0, -1.0 + 1e-12), &item), Quality::Infinite);
}

#[test]
fn reachability_examples() {
    let s = center_shelf();
    let item = Aabb2::new(p(0.35, 0.9), p(0.55, 1.1));
    let contour = shelfpick::geometry::Contour::rectangle(&item);
    let mid = ContactPair {
        c_l: p(0.35, 1.0),
        c_r: p(0.55, 1.0),
        n_l: p(1.0, 0.0),
        n_r: p(-1.0, 0.0),
    };
    assert!(is_reachable(&mid, &s, &EffectorGeom::default(), &contour));

    // Disk center 0.01 from the left wall.
    let wall_item = Aabb2::new(p(0.04, 0.9), p(0.24, 1.1));
    let wall = ContactPair {
        c_l: p(0.04, 1.0),
        c_r: p(0.24, 1.0),
        ..mid
    };
    assert!(!is_reachable(&wall, &s, &EffectorGeom::default(), &shelfpick::geometry::Contour::rectangle(&wall_item)));

    let point = EffectorGeom::new(0.0);
    let flush = ContactPair {
        c_l: p(0.0, 1.0),
        c_r: p(0.2, 1.0),
        ..mid
    };
    let flush_item = shelfpick::geometry::Contour::rectangle(&Aabb2::new(p(0.0, 0.9), p(0.2, 1.1)));
    assert!(is_reachable(&flush, &s, &point, &flush_item));
}

fn candidate(l_g: f64, h_g: f64) -> GraspCandidate<f64> {
    GraspCandidate {
        pair: pair_at(0.0, 0.0),
        quality: Quality::Finite(l_g),
        heuristic: Quality::Finite(h_g),
        reachable: true,
        center_offset: 0.0,
    }
}

fn plan(cost: f64) -> DeclutterPlan<f64> {
    DeclutterPlan {
        displacements: BTreeMap::new(),
        cost,
        static_entity: shelfpick::declutter::Role::Target,
        is_noop: cost == 0.0,
        moves: Vec::new(),
    }
}

fn choice(l_g: f64, h_g: f64, l_d: Option<f64>) -> PlanChoice<f64> {
    PlanChoice {
        grasp: candidate(l_g, h_g),
        declutter: l_d.map(plan),
    }
}

#[test]
fn noop_outranks_declutter() {
    let r = rank_plans(vec![choice(2.0, 0.0, Some(0.1)), choice(5.0, 0.0, Some(0.0))]).unwrap();
    assert_eq!(r[0].grasp.quality, Quality::Finite(5.0));
}

#[test]
fn cheaper_declutter_first() {
    let r = rank_plans(vec![choice(2.0, 0.0, Some(2.0)), choice(2.0, 0.0, Some(1.0))]).unwrap();
    assert_eq!(r[0].declutter.as_ref().unwrap().cost, 1.0);
}

#[test]
fn near_best_grasps_use_the_heuristic() {
    let r = rank_plans(vec![choice(2.0, 0.3, Some(0.0)), choice(2.5, 0.1, Some(0.0))]).unwrap();
    assert_eq!(r[0].grasp.quality, Quality::Finite(2.5));
    // Outside 150% of the best, plain cost decides.
    let r = rank_plans(vec![choice(2.0, 0.3, Some(0.0)), choice(3.5, 0.01, Some(0.0)), choice(3.2, 0.5, Some(0.0))]).unwrap();
    let order: Vec<_> = r.iter().map(|c| c.grasp.quality.to_float()).collect();
    assert_eq!(order, vec![2.0, 3.2, 3.5]);
}

#[test]
fn failed_declutter_goes_last_and_empty_is_an_error() {
    let r = rank_plans(vec![choice(2.0, 0.0, None), choice(9.0, 0.0, Some(5.0))]).unwrap();
    assert!(r[1].declutter.is_none());
    assert_eq!(rank_plans::<f64>(vec![]), Err(PlannerError::EmptyInput));
}

#[test]
fn ties_break_on_cost_then_centering_then_coordinates() {
    let mut a = choice(2.0, 0.0, Some(0.0));
    let mut b = choice(2.0, 0.0, Some(0.0));
    a.grasp.center_offset = 0.4;
    b.grasp.center_offset = 0.2;
    let r = rank_plans(vec![a.clone(), b.clone()]).unwrap();
    assert_eq!(r[0].grasp.center_offset, 0.2);
    a.grasp.center_offset = 0.2;
    a.grasp.pair.c_l.z = 0.05;
    let r = rank_plans(vec![a, b]).unwrap();
    assert_eq!(r[0].grasp.pair.c_l.z, 0.0);
}
