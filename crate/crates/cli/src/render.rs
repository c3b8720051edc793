use std::fmt::Write;

use shelfpick::declutter::ItemId;
use shelfpick::geometry::{Aabb2, Point2};
use shelfpick::planner::{ChordOutcome, GraspSearch};
use shelfpick::sim::{PickEvent, Scene, TrialResult};
use shelfpick::wrench::ContactPair;

pub const DEFAULT_PX_PER_M: f64 = 1000.0;
const MARGIN: f64 = 0.03;
const REJECTED: &str = "#d62728";
const ACCEPTED: &str = "#17becf";

struct Canvas {
    ppm: f64,
    view: Aabb2<f64>,
    body: String,
}

impl Canvas {
    fn new(scene: &Scene, ppm: f64) -> Self {
        let o = scene.shelf.opening();
        let view = Aabb2::new(
            Point2::new(o.min.y - MARGIN, o.min.z - MARGIN),
            Point2::new(o.max.y + MARGIN, o.max.z + MARGIN),
        );
        Self {
            ppm,
            view,
            body: String::new(),
        }
    }

    fn x(&self, y: f64) -> f64 {
        (y - self.view.min.y) * self.ppm
    }

    fn y(&self, z: f64) -> f64 {
        (self.view.max.z - z) * self.ppm
    }

    fn rect(&mut self, b: &Aabb2<f64>, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" {style}/>"#,
            self.x(b.min.y),
            self.y(b.max.z),
            b.width() * self.ppm,
            b.height() * self.ppm
        );
    }

    fn polygon(&mut self, pts: &[Point2<f64>], style: &str) {
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", self.x(p.y), self.y(p.z))).collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
    }

    fn line(&mut self, a: Point2<f64>, b: Point2<f64>, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" {style}/>"#,
            self.x(a.y),
            self.y(a.z),
            self.x(b.y),
            self.y(b.z)
        );
    }

    fn circle(&mut self, c: Point2<f64>, r: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" {style}/>"#,
            self.x(c.y),
            self.y(c.z),
            r * self.ppm
        );
    }

    fn text(&mut self, p: Point2<f64>, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.3}" y="{:.3}" font-family="monospace" font-size="{:.1}">{}</text>"#,
            self.x(p.y),
            self.y(p.z),
            0.015 * self.ppm,
            escape(s)
        );
    }

    fn arrow(&mut self, a: Point2<f64>, b: Point2<f64>) {
        self.line(a, b, r##"stroke="#2ca02c" stroke-width="3" marker-end="url(#head)""##);
    }

    fn finish(self) -> String {
        let (w, h) = (self.view.width() * self.ppm, self.view.height() * self.ppm);
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
                "\n",
                r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#2ca02c"/></marker></defs>"##,
                "\n",
                r#"<rect width="100%" height="100%" fill="white"/>"#,
                "\n{body}</svg>\n"
            ),
            w = w,
            h = h,
            body = self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_scene(c: &mut Canvas, scene: &Scene, positions: Option<&[(ItemId, f64)]>) {
    c.rect(&scene.shelf.opening(), r#"fill="none" stroke="black" stroke-width="2""#);
    for item in &scene.items {
        let mut item = item.clone();
        if let Some(&(_, y)) = positions.and_then(|p| p.iter().find(|(id, _)| *id == item.id)) {
            item.y = y;
        }
        let fill = if item.id == scene.target_id { "#f4c542" } else { "#9db4c0" };
        c.rect(
            &item.aabb(),
            &format!(r#"fill="{fill}" fill-opacity="0.5" stroke="black" stroke-width="1" data-item="{}""#, item.id),
        );
        if item.corner_radius.is_some() {
            c.polygon(item.contour().vertices(), r##"fill="none" stroke="#333" stroke-width="1""##);
        }
        let b = item.aabb();
        c.text(Point2::new(b.min.y + 0.005, b.max.z - 0.02), &item.id.to_string());
    }
}

fn draw_pair(c: &mut Canvas, pair: &ContactPair<f64>) {
    c.line(pair.c_l, pair.c_r, &format!(r#"stroke="{ACCEPTED}" stroke-width="3""#));
    for p in [pair.c_l, pair.c_r] {
        c.circle(p, 0.004, "fill=\"black\"");
    }
}

/// The scene, optionally with a grasp search: fitted contour, chords colored
/// by acceptance, and the chosen pair.
pub fn render_scene(scene: &Scene, search: Option<&GraspSearch<f64>>, best: Option<&ContactPair<f64>>, ppm: f64) -> String {
    let mut c = Canvas::new(scene, ppm);
    draw_scene(&mut c, scene, None);
    if let Some(s) = search {
        for ch in &s.chords {
            let color = if ch.outcome == ChordOutcome::Accepted { ACCEPTED } else { REJECTED };
            c.line(ch.p_l, ch.p_r, &format!(r#"stroke="{color}" stroke-width="0.6" stroke-opacity="0.6""#));
        }
        c.polygon(s.contour.vertices(), r#"fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="4 2""#);
    }
    if let Some(p) = best {
        draw_pair(&mut c, p);
    }
    c.finish()
}

/// One frame per nudge, then the approach and extraction frames.
pub fn render_trial(trial: &TrialResult, ppm: f64) -> Vec<String> {
    let scene = &trial.scene;
    let mut frames = Vec::new();
    let mut last: Vec<(ItemId, f64)> = scene.items.iter().map(|i| (i.id, i.y)).collect();
    let records: Vec<_> = trial.nudge_records().collect();
    for (k, rec) in records.iter().enumerate() {
        let mut c = Canvas::new(scene, ppm);
        draw_scene(&mut c, scene, Some(&rec.positions));
        let z = rec.command.insertion_z;
        c.arrow(Point2::new(rec.from_y, z), Point2::new(rec.to_y, z));
        let note = format!(
            "nudge {}/{}: item {} {:+.4} m{}",
            k + 1,
            records.len(),
            rec.item_id,
            rec.to_y - rec.from_y,
            if rec.blocked { " (blocked)" } else { "" }
        );
        c.text(Point2::new(scene.shelf.opening().min.y, scene.shelf.opening().max.z + 0.01), &note);
        frames.push(c.finish());
        last = rec.positions.clone();
    }
    let grasp = trial.log.iter().rev().find_map(|e| match e {
        PickEvent::Grasp {
            pair,
            effector_centers,
            effector_radius,
            failed,
            positions,
        } => Some((pair, effector_centers, *effector_radius, failed, positions)),
        _ => None,
    });
    let top = Point2::new(scene.shelf.opening().min.y, scene.shelf.opening().max.z + 0.01);
    for stage in ["approach", "extract"] {
        let mut c = Canvas::new(scene, ppm);
        match grasp {
            Some((pair, centers, r, failed, positions)) => {
                draw_scene(&mut c, scene, Some(positions));
                for &ctr in centers {
                    c.circle(ctr, r, r##"fill="#7f7f7f" fill-opacity="0.5" stroke="black""##);
                }
                draw_pair(&mut c, pair);
                if stage == "extract" {
                    let t = scene.target().map(|t| t.extent_yz).unwrap_or([0.0, 0.0]);
                    let ty = positions.iter().find(|(id, _)| *id == scene.target_id).map(|p| p.1).unwrap_or(0.0);
                    let tz = scene.target().map(|t| t.z).unwrap_or(0.0);
                    let mut corridor = Aabb2::from_center(Point2::new(ty, tz), t[0] / 2.0, t[1] / 2.0);
                    for ctr in centers {
                        corridor.min.y = corridor.min.y.min(ctr.y - r);
                        corridor.max.y = corridor.max.y.max(ctr.y + r);
                    }
                    c.rect(&corridor, r##"fill="none" stroke="#ff7f0e" stroke-width="2" stroke-dasharray="6 3""##);
                }
                let verdict = failed.map_or("ok".to_string(), |s| format!("failed at {}", s.name()));
                c.text(top, &format!("{stage}: {verdict}; outcome {}", trial.outcome.name()));
            }
            None => {
                draw_scene(&mut c, scene, Some(&last));
                c.text(top, &format!("{stage}: no grasp attempted; outcome {}", trial.outcome.name()));
            }
        }
        frames.push(c.finish());
    }
    frames
}
