//! Run artifacts: the full record of a seeded simulation and its on-disk
//! forms.
//!
//! A run emits three files:
//!
//! - `record.json` — the complete [`RunRecord`]; parses back bit-exactly
//!   (actions are stored as F-bit masks, floats survive JSON round-trips).
//! - `trace.csv` — one row per traced round and player with the columns
//!   `t,player,action_bitmask,regret_so_far,nash_distance,welfare,in_um`.
//! - `snapshots.csv` — per traced round and player, the policy scores and
//!   marginals (`t,player,g0..,q0..`).
//!
//! CSV floats are printed with 17 significant digits so that re-parsing
//! reproduces the exact f64 values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::analysis::RegretTrace;
use crate::error::{Error, Result};
use crate::game::GameFile;

/// State of one traced round: everything needed to replay analysis offline.
/// Scores and marginals are those of the policies the round was played from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// Played action per player, as F-bit masks.
    pub actions: Vec<Action>,
    /// Realized per-facility rewards (0 marker on unused facilities).
    pub realized_rewards: Vec<f64>,
    /// Per-player per-facility cumulative scores.
    pub scores: Vec<Vec<f64>>,
    /// Per-player per-facility inclusion probabilities.
    pub marginals: Vec<Vec<f64>>,
    /// Per-player best-in-hindsight regret accumulated through this round.
    pub regret_so_far: Vec<f64>,
    /// Exact expected welfare of the played joint policy.
    pub welfare: f64,
    /// Per-player ‖ω_i − δ_{a*_i}‖₁ when a reference equilibrium is tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash_distance: Option<Vec<f64>>,
    /// Score-gap absorption flag when a reference equilibrium is tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_absorption: Option<bool>,
}

/// Final per-player regret accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretSummary {
    /// Expectation-over-policies regret (the primary definition).
    pub expected: RegretTrace,
    /// Realized cumulative reward Σ_t Σ_{f∈a_i^t} R^f (diagnostic).
    pub realized_cumulative: f64,
    /// best_value − realized_cumulative (diagnostic variant).
    pub realized_regret: f64,
}

/// Seeded trajectory of one simulation run. Carries its game definition so
/// the artifact can be re-analyzed without the original config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub game: GameFile,
    pub seed: u64,
    pub horizon: usize,
    /// Rows are kept for rounds with `t % trace_every == 0`.
    pub trace_every: usize,
    /// Reference equilibrium per player, when one is tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nash: Option<Vec<Action>>,
    /// Margin M of the tracked absorption set, when applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub regrets: Vec<RegretSummary>,
    pub average_welfare: f64,
}

/// Format a float with 17 significant digits (lossless for f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRACE_HEADER: &str = "t,player,action_bitmask,regret_so_far,nash_distance,welfare,in_um";

impl RunRecord {
    /// The pinned-schema trace CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for row in &self.rows {
            for (player, action) in row.actions.iter().enumerate() {
                let nash = row
                    .nash_distance
                    .as_ref()
                    .map(|d| fmt_f64(d[player]))
                    .unwrap_or_default();
                let in_um = row.in_absorption.map(|b| b.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.t,
                    player,
                    action.bitmask(),
                    fmt_f64(row.regret_so_far[player]),
                    nash,
                    fmt_f64(row.welfare),
                    in_um,
                ));
            }
        }
        out
    }

    /// Policy snapshots CSV: `t,player,g0..g{F-1},q0..q{F-1}`.
    pub fn snapshots_csv(&self) -> String {
        let f_count = self.rows.first().map(|r| r.scores[0].len()).unwrap_or(0);
        let mut header = String::from("t,player");
        for f in 0..f_count {
            header.push_str(&format!(",g{f}"));
        }
        for f in 0..f_count {
            header.push_str(&format!(",q{f}"));
        }
        let mut out = header;
        out.push('\n');
        for row in &self.rows {
            for player in 0..row.actions.len() {
                out.push_str(&format!("{},{}", row.t, player));
                for g in &row.scores[player] {
                    out.push(',');
                    out.push_str(&fmt_f64(*g));
                }
                for q in &row.marginals[player] {
                    out.push(',');
                    out.push_str(&fmt_f64(*q));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::parse("record", e.to_string()))
    }

    /// Write `record.json`, `trace.csv`, and `snapshots.csv` under `dir`.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let write = |name: &str, contents: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))
        };
        write("record.json", self.to_json())?;
        write("trace.csv", self.trace_csv())?;
        write("snapshots.csv", self.snapshots_csv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&json)
    }
}
