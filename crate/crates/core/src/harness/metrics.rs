use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Difficulty, HarnessError, Result};

/// One judged episode, as stored in a records file (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub phase: u32,
    pub completed: bool,
    pub success: bool,
    pub steps: usize,
    pub final_answer: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DifficultyStats {
    pub total: usize,
    pub completed: usize,
    pub successful: usize,
    pub tcr: f64,
    pub tsr: f64,
    pub mean_steps: Option<f64>,
}

impl DifficultyStats {
    fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a TaskOutcome>) -> DifficultyStats {
        let mut s = DifficultyStats::default();
        let mut steps = 0usize;
        for o in outcomes {
            s.total += 1;
            s.completed += usize::from(o.completed);
            if o.success {
                s.successful += 1;
                steps += o.steps;
            }
        }
        if s.total > 0 {
            s.tcr = 100.0 * s.completed as f64 / s.total as f64;
            s.tsr = 100.0 * s.successful as f64 / s.total as f64;
        }
        s.mean_steps = (s.successful > 0).then(|| steps as f64 / s.successful as f64);
        s
    }
}

/// Completion rate, success rate and mean steps over successful episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub overall: DifficultyStats,
    pub by_difficulty: BTreeMap<Difficulty, DifficultyStats>,
}

impl MetricsReport {
    pub fn tcr(&self) -> f64 {
        self.overall.tcr
    }

    pub fn tsr(&self) -> f64 {
        self.overall.tsr
    }

    pub fn mean_steps(&self) -> Option<f64> {
        self.overall.mean_steps
    }

    /// `key=value` lines, one per figure, in a fixed order.
    pub fn key_values(&self, prefix: &str) -> String {
        let mut out = String::new();
        let mut put = |scope: &str, s: &DifficultyStats| {
            let steps = s.mean_steps.map_or("na".to_owned(), |m| format!("{m:.4}"));
            out.push_str(&format!(
                "{prefix}{scope}.total={}\n{prefix}{scope}.tcr={:.4}\n{prefix}{scope}.tsr={:.4}\n{prefix}{scope}.steps={steps}\n",
                s.total, s.tcr, s.tsr
            ));
        };
        put("all", &self.overall);
        for (d, s) in &self.by_difficulty {
            put(&d.to_string(), s);
        }
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>5} {:>8} {:>8} {:>7}", "split", "n", "TCR%", "TSR%", "steps")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, s: &DifficultyStats| {
            let steps = s.mean_steps.map_or("-".to_owned(), |m| format!("{m:.2}"));
            writeln!(f, "{name:<8} {:>5} {:>8.1} {:>8.1} {steps:>7}", s.total, s.tcr, s.tsr)
        };
        for (d, s) in &self.by_difficulty {
            row(f, &d.to_string(), s)?;
        }
        row(f, "all", &self.overall)
    }
}

pub fn compute_metrics(outcomes: &[TaskOutcome]) -> Result<MetricsReport> {
    if outcomes.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let mut groups: BTreeMap<Difficulty, Vec<&TaskOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(o.difficulty).or_default().push(o);
    }
    Ok(MetricsReport {
        overall: DifficultyStats::from_outcomes(outcomes),
        by_difficulty: groups
            .into_iter()
            .map(|(d, os)| (d, DifficultyStats::from_outcomes(os)))
            .collect(),
    })
}

pub fn write_outcomes<W: Write>(mut w: W, outcomes: &[TaskOutcome]) -> Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_outcomes<R: BufRead>(r: R) -> Result<Vec<TaskOutcome>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
