use std::fmt::Write;

use shelfpick::declutter::ItemId;
use shelfpick::planner::{GraspSearch, PlanChoice};
use shelfpick::sim::{observe, plan_pick, PickConfig, Scene};

use crate::Failure;

pub struct PlanReport {
    pub search: GraspSearch<f64>,
    pub ranked: Vec<PlanChoice<f64>>,
}

/// Observes the scene once and plans grasps and declutter moves for `target_id`.
pub fn plan_scene(scene: &Scene, target_id: ItemId, config: &PickConfig) -> Result<PlanReport, Failure> {
    let mut scene = scene.clone();
    if scene.item(target_id).is_none() {
        return Err(Failure::Input(anyhow::anyhow!("target {target_id} is not in the scene")));
    }
    scene.target_id = target_id;
    let obs = observe(&scene, &config.noise, 1);
    let (search, ranked) =
        plan_pick(&obs, &scene.shelf, target_id, config).map_err(|e| Failure::Infeasible(format!("planning failed: {e}")))?;
    Ok(PlanReport { search, ranked })
}

impl PlanReport {
    pub fn feasible(&self) -> Result<&PlanChoice<f64>, Failure> {
        let best = self.ranked.first().ok_or_else(|| Failure::Infeasible("no grasp candidates".into()))?;
        if best.declutter.is_none() {
            return Err(Failure::Infeasible("declutter infeasible for all candidates".into()));
        }
        Ok(best)
    }

    /// Ranked candidates as a table; the first `top` rows are listed.
    pub fn table(&self, top: usize) -> String {
        let mut out = String::new();
        let accepted = self.ranked.len();
        let _ = writeln!(out, "{} chords, {} candidates", self.search.chords.len(), accepted);
        let _ = writeln!(
            out,
            "  {:>4} {:>17} {:>17} {:>10} {:>10} {:>12}  moves",
            "rank", "c_l (y, z)", "c_r (y, z)", "l_g", "h_g", "l_d"
        );
        for (k, c) in self.ranked.iter().take(top).enumerate() {
            let p = &c.grasp.pair;
            let (ld, moves) = match &c.declutter {
                None => ("infeasible".to_string(), String::new()),
                Some(d) if d.is_noop => (format!("{:.6}", d.cost), "none".into()),
                Some(d) => (
                    format!("{:.6}", d.cost),
                    d.moves
                        .iter()
                        .filter(|(_, dy)| dy.abs() > 1e-6)
                        .map(|(id, dy)| format!("{id}:{dy:+.4}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                ),
            };
            let _ = writeln!(
                out,
                "{} {:>4} {:>8.4},{:>8.4} {:>8.4},{:>8.4} {:>10} {:>10} {:>12}  {}",
                if k == 0 { '*' } else { ' ' },
                k + 1,
                p.c_l.y,
                p.c_l.z,
                p.c_r.y,
                p.c_r.z,
                fmt_q(c.grasp.quality.to_float()),
                fmt_q(c.grasp.heuristic.to_float()),
                ld,
                moves
            );
        }
        if accepted > top {
            let _ = writeln!(out, "  ... {} more", accepted - top);
        }
        out
    }
}

fn fmt_q(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "inf".into()
    }
}
