//! Oracles and scene builders shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shelfpick::declutter::*;
use shelfpick::geometry::{Aabb2, Point2};
use shelfpick::linalg::Mat;
use shelfpick::planner::{EffectorGeom, ShelfSpec};
use shelfpick::qp::QpProblem;
use shelfpick::wrench::ContactPair;

pub const PLAT: f64 = 0.83;

pub fn shelf() -> ShelfSpec<f64> {
    ShelfSpec {
        width: 0.91,
        height: 0.48,
        depth: 0.56,
        platform_height: PLAT,
    }
}

pub fn item(id: ItemId, y0: f64, y1: f64, h: f64) -> ItemState<f64> {
    ItemState {
        id,
        size: Point2::new(y1 - y0, h),
        y: (y0 + y1) / 2.0,
        z: PLAT + h / 2.0,
        weight: 1.0,
    }
}

/// Horizontal contacts on the target's side faces at height `z`.
pub fn face_pair(t: &ItemState<f64>, z: f64) -> ContactPair<f64> {
    let b = t.aabb();
    ContactPair {
        c_l: Point2::new(b.min.y, z),
        c_r: Point2::new(b.max.y, z),
        n_l: Point2::new(1.0, 0.0),
        n_r: Point2::new(-1.0, 0.0),
    }
}

pub fn scene(items: &[ItemState<f64>], target: ItemId, ee_z: f64) -> SceneState<f64> {
    assign_roles(items, target, ee_z, shelf(), EffectorGeom::default()).unwrap()
}

/// Two to five items with random gaps; the target is picked at random.
pub fn random_scene(rng: &mut ChaCha8Rng) -> (SceneState<f64>, ContactPair<f64>) {
    let n = rng.random_range(2..=5usize);
    let widths: Vec<f64> = (0..n).map(|_| rng.random_range(0.06..0.22)).collect();
    let heights: Vec<f64> = (0..n).map(|_| rng.random_range(0.08..0.35)).collect();
    let free = shelf().width - widths.iter().sum::<f64>();
    let mut gaps: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = gaps.iter().sum();
    let scale = free * rng.random_range(0.3..1.0) / total;
    gaps.iter_mut().for_each(|g| *g *= scale);
    let mut y = gaps[0];
    let items: Vec<_> = (0..n)
        .map(|k| {
            let it = item(k as ItemId, y, y + widths[k], heights[k]);
            y += widths[k] + gaps[k + 1];
            it
        })
        .collect();
    let t = rng.random_range(0..n);
    let ee_z = PLAT + heights[t] * rng.random_range(0.3..0.7);
    let s = scene(&items, t as ItemId, ee_z);
    let pair = face_pair(&s.target, ee_z);
    (s, pair)
}

/// Asserts the packing constraints on a plan: containment, non-overlap, one-sided moves.
pub fn check_plan(pair: &ContactPair<f64>, s: &SceneState<f64>, plan: &DeclutterPlan<f64>) {
    let boxes = displaced_boxes(pair, s, plan);
    let open = s.shelf.opening();
    for b in boxes.values() {
        assert!(b.min.y >= open.min.y - 1e-9 && b.max.y <= open.max.y + 1e-9);
    }
    let roles: Vec<_> = boxes.keys().copied().collect();
    for (i, &a) in roles.iter().enumerate() {
        for &b in &roles[i + 1..] {
            if exempt(a, b) || same_item(s, a, b) {
                continue;
            }
            assert!(boxes[&a].penetration(&boxes[&b]) <= 1e-9, "{a:?} overlaps {b:?}");
        }
    }
    for (role, sign) in [
        (Role::LeftNeighbor, -1.0),
        (Role::LeftHeight, -1.0),
        (Role::RightNeighbor, 1.0),
        (Role::RightHeight, 1.0),
    ] {
        if let Some(d) = plan.displacements.get(&role) {
            assert!(d * sign >= 0.0, "{role:?} moved the wrong way by {d}");
        }
    }
    assert!(plan.displacements.get(&plan.static_entity).is_none_or(|d| d.abs() <= 1e-9));
    assert_eq!(plan.is_noop, plan.displacements.values().all(|d| d.abs() <= 1e-6));
}

pub fn exempt(a: Role, b: Role) -> bool {
    let slot = |r| matches!(r, Role::LeftEffector | Role::RightEffector);
    (slot(a) || a == Role::Target) && (slot(b) || b == Role::Target)
}

pub fn same_item(s: &SceneState<f64>, a: Role, b: Role) -> bool {
    matches!((s.role(a), s.role(b)), (Some(x), Some(y)) if x.id == y.id)
}

/// One physical item or effector slot, positioned as `y = base + d`.
struct Body {
    role: Role,
    var: usize,
    offset: f64,
    half_w: f64,
    z: (f64, f64),
}

/// Minimum packing cost by exhaustive 1 mm search over every entity's position,
/// refined around the best point at finer steps. `None` if nothing is feasible.
pub fn grid_oracle(pair: &ContactPair<f64>, s: &SceneState<f64>, w: &DeclutterWeights<f64>) -> Option<f64> {
    let roles = [Role::Target, Role::LeftNeighbor, Role::RightNeighbor, Role::LeftHeight, Role::RightHeight];
    let mut vars: Vec<(ItemState<f64>, f64, i8)> = Vec::new();
    let mut bodies = Vec::new();
    for role in roles {
        let Some(it) = s.role(role) else { continue };
        let weight = w.weights.get(&role).copied().unwrap_or(1.0);
        let side = match role {
            Role::Target => 0,
            Role::LeftNeighbor | Role::LeftHeight => -1,
            _ => 1,
        };
        let var = match vars.iter().position(|v| v.0.id == it.id) {
            Some(k) => {
                vars[k].1 = vars[k].1.max(weight);
                k
            }
            None => {
                vars.push((*it, weight, side));
                vars.len() - 1
            }
        };
        let b = it.aabb();
        bodies.push(Body { role, var, offset: 0.0, half_w: b.width() / 2.0, z: (b.min.z, b.max.z) });
    }
    let [l, r]: [Aabb2<f64>; 2] = s.effector_slots(pair);
    for (slot, role) in [(l, Role::LeftEffector), (r, Role::RightEffector)] {
        bodies.push(Body {
            role,
            var: 0,
            offset: slot.center().y - s.target.y,
            half_w: slot.width() / 2.0,
            z: (slot.min.z, slot.max.z),
        });
    }
    let y0: Vec<f64> = vars.iter().map(|v| v.0.y).collect();
    let width = s.shelf.width;

    let feasible = |y: &[f64], only: &dyn Fn(usize) -> bool| {
        for b in &bodies {
            if !only(b.var) {
                continue;
            }
            let c = y[b.var] + b.offset;
            if c - b.half_w < -1e-12 || c + b.half_w > width + 1e-12 {
                return false;
            }
        }
        for (i, a) in bodies.iter().enumerate() {
            for b in &bodies[i + 1..] {
                if a.var == b.var || exempt(a.role, b.role) || !(only(a.var) || only(b.var)) {
                    continue;
                }
                if a.z.0.max(b.z.0) >= a.z.1.min(b.z.1) {
                    continue;
                }
                let gap = (y[a.var] + a.offset - y[b.var] - b.offset).abs() - a.half_w - b.half_w;
                if gap < -1e-12 {
                    return false;
                }
            }
        }
        true
    };
    let cost = |y: &[f64]| -> f64 { vars.iter().zip(y).map(|(v, yi)| v.1 * (yi - v.0.y).powi(2)).sum() };

    // Given the target, each side only interacts with itself and the target.
    let sides: [Vec<usize>; 2] = [
        (0..vars.len()).filter(|&k| vars[k].2 < 0).collect(),
        (0..vars.len()).filter(|&k| vars[k].2 > 0).collect(),
    ];
    // Candidate positions for var k: steps of `h` from its start, within `[lo, hi]` and one-sided.
    let positions = |k: usize, center: f64, h: f64, span: f64| -> Vec<f64> {
        let n = (span / h).round() as i64;
        (-n..=n)
            .map(|i| center + i as f64 * h)
            .filter(|&y| y >= 0.0 && y <= width)
            .filter(|&y| match vars[k].2 {
                -1 => y <= y0[k],
                1 => y >= y0[k],
                _ => true,
            })
            .collect()
    };
    let search = |fixed: Option<usize>, centers: &[f64], h: f64, span: f64| -> Option<(f64, Vec<f64>)> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        let t_pos = if fixed == Some(0) { vec![y0[0]] } else { positions(0, centers[0], h, span) };
        for &yt in &t_pos {
            let mut y = centers.to_vec();
            y[0] = yt;
            let mut ok = true;
            for side in &sides {
                let mut side_best: Option<(f64, Vec<f64>)> = None;
                let choices: Vec<Vec<f64>> = side
                    .iter()
                    .map(|&k| if fixed == Some(k) { vec![y0[k]] } else { positions(k, centers[k], h, span) })
                    .collect();
                let mut idx = vec![0usize; side.len()];
                loop {
                    let mut trial = y.clone();
                    for (j, &k) in side.iter().enumerate() {
                        trial[k] = choices[j][idx[j]];
                    }
                    if feasible(&trial, &|v| side.contains(&v)) {
                        let c: f64 = side.iter().map(|&k| vars[k].1 * (trial[k] - y0[k]).powi(2)).sum();
                        if side_best.as_ref().is_none_or(|(b, _)| c < *b) {
                            side_best = Some((c, trial.clone()));
                        }
                    }
                    let mut j = 0;
                    while j < idx.len() {
                        idx[j] += 1;
                        if idx[j] < choices[j].len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == idx.len() {
                        break;
                    }
                }
                match side_best {
                    Some((_, t)) => side.iter().for_each(|&k| y[k] = t[k]),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && feasible(&y, &|_| true) {
                let c = cost(&y);
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, y));
                }
            }
        }
        best
    };

    let statics = [Role::Target, Role::LeftHeight, Role::RightHeight];
    let mut overall: Option<f64> = None;
    for k in statics {
        let fixed = if k == Role::Target {
            Some(0)
        } else {
            s.role(k).map(|it| vars.iter().position(|v| v.0.id == it.id).unwrap())
        };
        let Some((_, mut y)) = search(fixed, &y0, 1e-3, width) else { continue };
        let mut h = 1e-3;
        while h > 1e-7 {
            let span = 2.0 * h;
            h /= 10.0;
            if let Some((_, better)) = search(fixed, &y, h, span) {
                y = better;
            }
        }
        let c = cost(&y);
        overall = Some(overall.map_or(c, |o: f64| o.min(c)));
    }
    overall
}

/// Random convex QP in 2..=6 variables with a dense, rank-deficient or zero
/// Hessian. A box keeps it bounded; the extra inequalities are loose or tight
/// around a random point, so about half the problems are infeasible.
pub fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem<f64> {
    let n = rng.random_range(2..=6usize);
    let (rank, ridge) = match rng.random_range(0..3) {
        0 => (n, 0.1),
        1 => (rng.random_range(1..n), 0.0),
        _ => (0, 0.0),
    };
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let h = Mat::from_fn(n, n, |i, j| {
        let d: f64 = (0..rank).map(|k| b[i][k] * b[j][k]).sum();
        if i == j {
            d + ridge
        } else {
            d
        }
    });
    let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let dot = |r: &[f64]| r.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();

    let m_eq = rng.random_range(0..n.min(3));
    let a: Vec<Vec<f64>> = (0..m_eq).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let b_eq: Vec<f64> = a.iter().map(|r| dot(r)).collect();

    let mut c = Vec::new();
    let mut d = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; n];
            row[i] = sign;
            c.push(row);
            d.push(5.0);
        }
    }
    let tight = rng.random_bool(0.5);
    for _ in 0..rng.random_range(1..=6) {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let slack = if tight { rng.random_range(-1.0..0.3) } else { rng.random_range(0.0..1.0) };
        d.push(dot(&row) + slack);
        c.push(row);
    }
    QpProblem::new(h, g)
        .with_equalities(Mat::from_rows(n, &a), b_eq)
        .with_inequalities(Mat::from_rows(n, &c), d)
}

/// Feasibility of `Ax = b, Cx <= d` by the simplex method.
pub fn lp_feasible(p: &QpProblem<f64>) -> bool {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..p.dim()).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let expr = |row: &[f64]| vars.iter().copied().zip(row.iter().copied()).collect::<Vec<_>>();
    for r in 0..p.eq_matrix.rows() {
        lp.add_constraint(expr(p.eq_matrix.row(r)), ComparisonOp::Eq, p.eq_rhs[r]);
    }
    for r in 0..p.ineq_matrix.rows() {
        lp.add_constraint(expr(p.ineq_matrix.row(r)), ComparisonOp::Le, p.ineq_rhs[r]);
    }
    match lp.solve() {
        Ok(_) => true,
        Err(minilp::Error::Infeasible) => false,
        Err(e) => panic!("feasibility LP failed: {e}"),
    }
}

/// Contacts on either side of the origin with normals tilted off the chord by
/// random angles, and whether both normals lie strictly inside the friction
/// cone about the chord. `None` when an angle is within 1e-3 rad of the cone edge.
pub fn cone_pair(rng: &mut ChaCha8Rng, mu: f64) -> Option<(ContactPair<f64>, bool)> {
    let p = Point2::new;
    let c_l = p(rng.random_range(-1.0..-0.2), rng.random_range(-1.0..1.0));
    let c_r = p(rng.random_range(0.2..1.0), rng.random_range(-1.0..1.0));
    let chord = (c_r - c_l).normalized();
    let (al, ar): (f64, f64) = (rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
    let rot = |v: Point2<f64>, a: f64| p(v.y * a.cos() - v.z * a.sin(), v.y * a.sin() + v.z * a.cos());
    let half = mu.atan();
    if (al.abs() - half).abs() < 1e-3 || (ar.abs() - half).abs() < 1e-3 {
        return None;
    }
    let pair = ContactPair {
        c_l,
        c_r,
        n_l: rot(chord, al),
        n_r: rot(-chord, ar),
    };
    Some((pair, al.abs() < half && ar.abs() < half))
}
