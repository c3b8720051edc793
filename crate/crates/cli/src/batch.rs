use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shelfpick::sim::{generate_scene, run_pick, NoiseConfig, PickEvent, ShelfChoice, TrialOutcome};

use crate::Tuning;

fn default_shelves() -> Vec<ShelfChoice> {
    ShelfChoice::ALL.to_vec()
}

fn default_i_max() -> usize {
    3
}

fn yes() -> bool {
    true
}

/// One batch: seeds `seed_start..seed_start + trials`, shelves assigned round robin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    #[serde(default)]
    pub seed_start: u64,
    pub trials: u64,
    #[serde(default = "default_shelves")]
    pub shelves: Vec<ShelfChoice>,
    #[serde(default)]
    pub clutter: bool,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default = "yes")]
    pub declutter: bool,
    pub mu: Option<f64>,
    pub n_max: Option<f64>,
    pub tau_max: Option<f64>,
    pub sigma_samples: Option<f64>,
}

impl BatchConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        anyhow::ensure!(!cfg.shelves.is_empty(), "shelves must not be empty");
        Ok(cfg)
    }

    pub fn tuning(&self) -> Tuning {
        Tuning {
            mu: self.mu,
            n_max: self.n_max,
            tau_max: self.tau_max,
            sigma_samples: self.sigma_samples,
        }
    }

    pub fn shelf_for(&self, seed: u64) -> ShelfChoice {
        self.shelves[((seed - self.seed_start) % self.shelves.len() as u64) as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub shelf: ShelfChoice,
    pub items: usize,
    pub outcome: String,
    pub stage: String,
    pub nudges: usize,
    pub retries: usize,
    /// Quality of the last planned grasp; "inf" when infinite, empty when none was planned.
    pub quality: String,
    pub heuristic: String,
    pub declutter_cost: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: usize,
    pub success: usize,
    pub grasp_failed: usize,
    pub declutter_failed: usize,
    pub infeasible: usize,
    pub retries: usize,
    pub nudges: usize,
}

impl Tally {
    fn add(&mut self, row: &TrialRow) {
        self.trials += 1;
        match row.outcome.as_str() {
            "success" => self.success += 1,
            "grasp_failed" => self.grasp_failed += 1,
            "declutter_failed" => self.declutter_failed += 1,
            _ => self.infeasible += 1,
        }
        self.retries += row.retries;
        self.nudges += row.nudges;
    }

    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.success as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub config: BatchConfig,
    pub per_shelf: Vec<(ShelfChoice, Tally)>,
    pub total: Tally,
    pub rows: Vec<TrialRow>,
    pub truncated: bool,
}

impl BatchReport {
    /// Fixed-width summary, one line per shelf plus a total.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<8} {:>6} {:>8} {:>13} {:>17} {:>11} {:>8} {:>7}\n",
            "shelf", "trials", "success", "grasp_failed", "declutter_failed", "infeasible", "retries", "nudges"
        );
        let line = |name: &str, t: &Tally| {
            format!(
                "{:<8} {:>6} {:>8} {:>13} {:>17} {:>11} {:>8} {:>7}\n",
                name, t.trials, t.success, t.grasp_failed, t.declutter_failed, t.infeasible, t.retries, t.nudges
            )
        };
        for (shelf, t) in &self.per_shelf {
            out += &line(shelf.name(), t);
        }
        out += &line("total", &self.total);
        out += &format!("success rate {:.1}%\n", 100.0 * self.total.success_rate());
        if self.truncated {
            out += &format!("truncated after {} of {} trials\n", self.total.trials, self.config.trials);
        }
        out
    }
}

fn fmt_opt(v: Option<String>) -> String {
    v.unwrap_or_default()
}

/// Runs one seeded trial of the batch.
pub fn run_trial(config: &BatchConfig, seed: u64) -> anyhow::Result<TrialRow> {
    let shelf = config.shelf_for(seed);
    let scene = generate_scene(seed, shelf, config.clutter)?;
    let noise = NoiseConfig {
        point_sigma: config.noise_sigma,
        dropout_prob: config.dropout,
        seed: config.noise_seed,
    };
    let pick = config.tuning().config(noise, config.declutter)?;
    let result = run_pick(&scene, scene.target_id, config.i_max, &pick);
    let last_plan = result.log.iter().rev().find_map(|e| match e {
        PickEvent::Plan {
            quality,
            heuristic,
            declutter,
            ..
        } => Some((quality, heuristic, declutter)),
        _ => None,
    });
    Ok(TrialRow {
        seed,
        shelf,
        items: scene.items.len(),
        outcome: result.outcome.name().to_string(),
        stage: match result.outcome {
            TrialOutcome::GraspFailed { stage } => stage.name().to_string(),
            _ => String::new(),
        },
        nudges: result.nudges_executed,
        retries: result.retries,
        quality: fmt_opt(last_plan.map(|p| p.0.to_string())),
        heuristic: fmt_opt(last_plan.map(|p| p.1.to_string())),
        declutter_cost: fmt_opt(last_plan.and_then(|p| p.2.as_ref()).map(|d| d.cost.to_string())),
    })
}

/// Runs the batch, handing each row to `sink` in seed order. Stops between
/// chunks once `interrupt` is set.
pub fn run_batch(
    config: &BatchConfig,
    interrupt: &AtomicBool,
    mut sink: impl FnMut(&TrialRow) -> anyhow::Result<()>,
) -> anyhow::Result<BatchReport> {
    anyhow::ensure!(!config.shelves.is_empty(), "shelves must not be empty");
    let seeds: Vec<u64> = (0..config.trials).map(|k| config.seed_start + k).collect();
    let chunk = rayon::current_num_threads().max(1) * 4;
    let mut rows = Vec::with_capacity(seeds.len());
    let mut truncated = false;
    for group in seeds.chunks(chunk) {
        if interrupt.load(Ordering::SeqCst) {
            truncated = true;
            break;
        }
        let done: Vec<TrialRow> = group
            .par_iter()
            .map(|&s| run_trial(config, s))
            .collect::<anyhow::Result<_>>()?;
        for row in done {
            sink(&row)?;
            rows.push(row);
        }
    }
    let mut per_shelf: Vec<(ShelfChoice, Tally)> = Vec::new();
    let mut total = Tally::default();
    for row in &rows {
        total.add(row);
        match per_shelf.iter_mut().find(|(s, _)| *s == row.shelf) {
            Some((_, t)) => t.add(row),
            None => {
                let mut t = Tally::default();
                t.add(row);
                per_shelf.push((row.shelf, t));
            }
        }
    }
    per_shelf.sort_by_key(|(s, _)| *s);
    Ok(BatchReport {
        config: config.clone(),
        per_shelf,
        total,
        rows,
        truncated,
    })
}

/// Runs the batch and streams the CSV to `out`, ending with a marker line if interrupted.
pub fn write_csv<W: Write>(config: &BatchConfig, interrupt: &AtomicBool, out: W) -> anyhow::Result<BatchReport> {
    let mut w = csv::Writer::from_writer(out);
    let report = run_batch(config, interrupt, |row| {
        w.serialize(row)?;
        w.flush()?;
        Ok(())
    })?;
    if report.rows.is_empty() {
        w.write_record([
            "seed", "shelf", "items", "outcome", "stage", "nudges", "retries", "quality", "heuristic", "declutter_cost",
        ])?;
    }
    let mut inner = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    if report.truncated {
        writeln!(inner, "# truncated after {} of {} trials", report.rows.len(), config.trials)?;
    }
    inner.flush().context("flushing csv")?;
    Ok(report)
}
