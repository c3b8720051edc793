use std::collections::BTreeMap;

use shelfpick::declutter::{DeclutterPlan, ItemId, Role};
use shelfpick::geometry::Aabb2;
use shelfpick::sim::*;

const PLAT: f64 = 0.83;

fn box_item(id: ItemId, y0: f64, w: f64, h: f64) -> Item {
    Item {
        id,
        extent_yz: [w, h],
        depth_x: 0.14,
        weight: 1.5,
        y: y0 + w / 2.0,
        z: PLAT + h / 2.0,
        corner_radius: None,
    }
}

fn scene(items: Vec<Item>, target_id: ItemId) -> Scene {
    let s = Scene {
        shelf: ShelfChoice::Center.spec(),
        items,
        target_id,
        seed: 7,
    };
    s.validate().unwrap();
    s
}

fn moves(m: Vec<(ItemId, f64)>) -> DeclutterPlan<f64> {
    DeclutterPlan {
        displacements: BTreeMap::new(),
        cost: m.iter().map(|(_, d)| d * d).sum(),
        static_entity: Role::Target,
        is_noop: false,
        moves: m,
    }
}

/// Target flush between two neighbors, with room on both outer sides.
fn occluded() -> Scene {
    scene(
        vec![
            box_item(1, 0.20, 0.18, 0.25),
            box_item(2, 0.38, 0.16, 0.20),
            box_item(3, 0.54, 0.20, 0.30),
        ],
        2,
    )
}

fn assert_no_overlap(s: &Scene, positions: &[(ItemId, f64)]) {
    let boxes: Vec<Aabb2<f64>> = positions
        .iter()
        .map(|&(id, y)| {
            let mut it = s.item(id).unwrap().clone();
            it.y = y;
            it.aabb()
        })
        .collect();
    for (i, a) in boxes.iter().enumerate() {
        assert!(a.min.y >= -1e-9 && a.max.y <= s.shelf.width + 1e-9);
        for b in &boxes[i + 1..] {
            assert!(a.penetration(b) <= 1e-9, "{a:?} {b:?}");
        }
    }
}

#[test]
fn generated_scenes_are_deterministic_and_valid() {
    for seed in 0..200 {
        let choice = ShelfChoice::ALL[seed as usize % 3];
        let a = generate_scene(seed, choice, true).unwrap();
        let b = generate_scene(seed, choice, true).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        a.validate().unwrap();
        assert_eq!(a.shelf, choice.spec());
        assert!(a.items.len() == 2 || a.items.len() == 3);
        assert_eq!(a.target_id, 2);
        let t = a.target().unwrap().aabb();
        let flush = a.items.iter().filter(|i| i.id != 2).all(|i| {
            let b = i.aabb();
            (b.max.y - t.min.y).abs() < 1e-9 || (b.min.y - t.max.y).abs() < 1e-9
        });
        assert!(flush);
        if a.items.len() == 2 {
            let wall = t.min.y.abs() < 1e-9 || (t.max.y - a.shelf.width).abs() < 1e-9;
            assert!(wall);
        }
    }
}

#[test]
fn uncluttered_scene_has_single_target() {
    for seed in 0..50 {
        let s = generate_scene(seed, ShelfChoice::Bottom, false).unwrap();
        assert_eq!(s.items.len(), 1);
        assert_eq!(s.items[0].id, s.target_id);
    }
}

#[test]
fn shelf_specs() {
    let cases = [
        (ShelfChoice::Bottom, [0.91, 0.42, 0.47, 0.60]),
        (ShelfChoice::Center, [0.91, 0.48, 0.56, 0.83]),
        (ShelfChoice::Top, [0.91, 0.42, 0.56, 1.46]),
    ];
    for (c, v) in cases {
        let s = c.spec();
        assert_eq!([s.width, s.height, s.depth, s.platform_height], v);
        assert_eq!(c.name().parse::<ShelfChoice>().unwrap(), c);
    }
}

#[test]
fn item_extents_follow_table() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut w: Vec<f64> = (0..1000).map(|_| sample_item_dims(&mut rng).0[0] * 100.0).collect();
    w.sort_by(f64::total_cmp);
    let median = (w[499] + w[500]) / 2.0;
    for (got, want) in [(w[0], 14.0), (median, 23.0), (w[999], 41.0)] {
        assert!((got - want).abs() <= 0.1 * want, "{got} vs {want}");
    }
}

#[test]
fn scene_json_round_trip_and_rejections() {
    let s = occluded();
    let text = s.to_json();
    assert!(text.contains("\"schema\": 1"));
    assert_eq!(Scene::from_json(&text).unwrap(), s);
    let unknown = text.replacen("\"seed\"", "\"colour\": 1, \"seed\"", 1);
    assert!(Scene::from_json(&unknown).unwrap_err().to_string().contains("colour"));
    let schema = text.replacen("\"schema\": 1", "\"schema\": 2", 1);
    assert!(Scene::from_json(&schema).is_err());
    let overlapping = text.replacen("\"y\": 0.46", "\"y\": 0.40", 1);
    assert!(Scene::from_json(&overlapping).is_err());
    assert!(Scene::from_json("").is_err());
}

#[test]
fn exact_observation_lies_on_items() {
    let mut s = occluded();
    s.items[2].corner_radius = Some(0.03);
    let obs = observe(&s, &NoiseConfig::exact(), 1);
    assert!(!obs.target.is_empty());
    assert_eq!(obs.adjacent.len(), 2);
    for (id, cloud) in std::iter::once((2, &obs.target)).chain(obs.adjacent.iter().map(|(i, c)| (*i, c))) {
        let c = s.item(id).unwrap().contour();
        for &p in &cloud.points {
            assert!(c.contains(p) || c.boundary_distance(p) <= 1e-12, "{p:?}");
        }
    }
    let open = s.shelf.opening();
    for p in &obs.shelf.points {
        let d = (p.y - open.min.y).abs().min((p.y - open.max.y).abs()).min((p.z - open.min.z).abs()).min((p.z - open.max.z).abs());
        assert!(d <= 1e-12);
    }
}

#[test]
fn noisy_observation_is_seeded() {
    let s = occluded();
    let noise = NoiseConfig {
        point_sigma: 0.003,
        dropout_prob: 0.1,
        seed: 11,
    };
    assert_eq!(observe(&s, &noise, 1), observe(&s, &noise, 1));
    assert_ne!(observe(&s, &noise, 1), observe(&s, &noise, 2));
    let exact = observe(&s, &NoiseConfig::exact(), 1);
    assert!(observe(&s, &noise, 1).target.len() < exact.target.len());
}

#[test]
fn flush_neighbors_hide_flanks() {
    let s = occluded();
    assert_eq!(visible_flanks(&s, s.item(2).unwrap()), (false, false));
    assert_eq!(visible_flanks(&s, s.item(1).unwrap()), (true, false));
    assert_eq!(visible_flanks(&s, s.item(3).unwrap()), (false, true));

    let on_left_face = |s: &Scene| {
        let t = s.target().unwrap().aabb();
        observe(s, &NoiseConfig::exact(), 1).target.points.iter().filter(|p| (p.y - t.min.y).abs() < 1e-12).count()
    };
    let mut open = s.clone();
    open.items[0].y -= 0.05;
    assert_eq!(visible_flanks(&open, open.item(2).unwrap()), (true, false));
    assert!(on_left_face(&open) > on_left_face(&s));
}

#[test]
fn nudge_into_free_space_reaches_target() {
    let s = scene(vec![box_item(1, 0.05, 0.20, 0.25), box_item(2, 0.25, 0.20, 0.20)], 2);
    let (after, records) = run_nudge(&s, &moves(vec![(1, -0.04)])).unwrap();
    assert_eq!(records.len(), NUDGE_FRACTIONS.len());
    let y = after.item(1).unwrap().y;
    assert!((y - (s.item(1).unwrap().y - 0.04)).abs() <= 0.005);
    assert_eq!(after.item(2).unwrap().y, s.item(2).unwrap().y);
    let mut gap = 0.0;
    for r in &records {
        assert!(!r.blocked);
        let g = s.item(2).unwrap().aabb().min.y - (r.to_y + 0.10);
        assert!(g >= gap - 1e-12);
        gap = g;
        assert_no_overlap(&s, &r.positions);
    }
}

#[test]
fn nudge_stops_at_wall() {
    let s = scene(vec![box_item(1, 0.01, 0.20, 0.25), box_item(2, 0.21, 0.20, 0.20)], 2);
    let (after, records) = run_nudge(&s, &moves(vec![(1, -0.04)])).unwrap();
    let achieved = after.item(1).unwrap().y - s.item(1).unwrap().y;
    assert!((achieved.abs() - 0.01).abs() < 1e-12);
    assert!(records.iter().any(|r| r.blocked));
    assert!(after.item(1).unwrap().aabb().min.y.abs() < 1e-12);
}

#[test]
fn nudge_pushes_contacted_items() {
    let s = scene(
        vec![box_item(1, 0.10, 0.20, 0.25), box_item(2, 0.30, 0.20, 0.20), box_item(3, 0.55, 0.20, 0.20)],
        3,
    );
    let (after, records) = run_nudge(&s, &moves(vec![(2, -0.06)])).unwrap();
    assert!((after.item(2).unwrap().y - (s.item(2).unwrap().y - 0.06)).abs() < 1e-9);
    assert!((after.item(1).unwrap().y - (s.item(1).unwrap().y - 0.06)).abs() < 1e-9);
    for r in &records {
        assert_no_overlap(&s, &r.positions);
    }
    after.validate().unwrap();

    let (after, _) = run_nudge(&s, &moves(vec![(2, -0.20)])).unwrap();
    assert!(after.item(1).unwrap().aabb().min.y.abs() < 1e-12);
    assert!((after.item(2).unwrap().aabb().min.y - 0.20).abs() < 1e-12);
}

#[test]
fn noop_plan_is_rejected() {
    let s = occluded();
    let mut plan = moves(Vec::new());
    plan.is_noop = true;
    assert!(matches!(run_nudge(&s, &plan), Err(SimError::NoopPlan)));
    assert!(matches!(run_nudge(&s, &moves(vec![(9, 0.1)])), Err(SimError::MissingItem(9))));
}

#[test]
fn grasp_on_free_item_succeeds() {
    let s = scene(vec![box_item(1, 0.30, 0.20, 0.24)], 1);
    let cfg = PickConfig::default();
    let obs = observe(&s, &cfg.noise, 1);
    let (_, ranked) = plan_pick(&obs, &s.shelf, 1, &cfg).unwrap();
    assert!(!ranked.is_empty());
    assert_eq!(run_grasp(&s, &ranked[0].grasp.pair, &cfg), Ok(()));
}

#[test]
fn neighbor_in_approach_disk_fails_approach() {
    let mut s = scene(vec![box_item(1, 0.30, 0.20, 0.24)], 1);
    let cfg = PickConfig::default();
    let obs = observe(&s, &cfg.noise, 1);
    let (_, ranked) = plan_pick(&obs, &s.shelf, 1, &cfg).unwrap();
    let pair = ranked[0].grasp.pair;
    let center = cfg.effector.center(pair.c_l, pair.n_l);
    let right_face = center.y - cfg.effector.radius + 0.005;
    s.items.push(box_item(2, right_face - 0.15, 0.15, 0.40));
    s.validate().unwrap();
    assert_eq!(run_grasp(&s, &pair, &cfg), Err(GraspStage::Approach));
}

#[test]
fn flush_neighbors_block_grasp() {
    let s = occluded();
    let cfg = PickConfig::default();
    let t = s.target().unwrap().aabb();
    let z = t.center().z;
    let pair = shelfpick::wrench::ContactPair {
        c_l: shelfpick::geometry::Point2::new(t.min.y, z),
        c_r: shelfpick::geometry::Point2::new(t.max.y, z),
        n_l: shelfpick::geometry::Point2::new(1.0, 0.0),
        n_r: shelfpick::geometry::Point2::new(-1.0, 0.0),
    };
    assert_eq!(run_grasp(&s, &pair, &cfg), Err(GraspStage::Approach));
}

#[test]
fn pick_uncluttered_succeeds_without_nudges() {
    let s = scene(vec![box_item(1, 0.40, 0.22, 0.20)], 1);
    let r = run_pick(&s, 1, 3, &PickConfig::default());
    assert_eq!(r.outcome, TrialOutcome::Success);
    assert_eq!(r.nudges_executed, 0);
    assert_eq!(r.retries, 0);
}

#[test]
fn pick_occluded_needs_nudges() {
    let s = occluded();
    let r = run_pick(&s, 2, 3, &PickConfig::default());
    assert_eq!(r.outcome, TrialOutcome::Success, "{:?}", r.log);
    assert!(r.nudges_executed >= 1 && r.nudges_executed <= 3);
    for rec in r.nudge_records() {
        assert_no_overlap(&s, &rec.positions);
    }
    let again = run_pick(&s, 2, 3, &PickConfig::default());
    assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn pick_with_no_budget_grasps_at_once() {
    let r = run_pick(&occluded(), 2, 0, &PickConfig::default());
    assert!(matches!(r.outcome, TrialOutcome::GraspFailed { .. }), "{:?}", r.outcome);
    assert_eq!(r.nudges_executed, 0);
    assert!(r.log.iter().any(|e| matches!(e, PickEvent::Grasp { .. })));
}

#[test]
fn ablation_skips_declutter() {
    let cfg = PickConfig {
        declutter: false,
        ..PickConfig::default()
    };
    let r = run_pick(&occluded(), 2, 3, &cfg);
    assert_eq!(r.nudges_executed, 0);
    assert!(matches!(r.outcome, TrialOutcome::GraspFailed { .. }));
}

#[test]
fn packed_shelf_cannot_be_decluttered() {
    let s = scene(
        vec![box_item(1, 0.0, 0.30, 0.25), box_item(2, 0.30, 0.31, 0.20), box_item(3, 0.61, 0.30, 0.30)],
        2,
    );
    let r = run_pick(&s, 2, 3, &PickConfig::default());
    assert_eq!(r.outcome, TrialOutcome::DeclutterFailed);
    assert_eq!(r.nudges_executed, 0);
}
