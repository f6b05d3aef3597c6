use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentCell;
use super::scenario::ScenarioId;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn push(&mut self, cell: ExperimentCell) {
        self.cells.push(cell);
    }

    /// Perception labels in order of first appearance.
    pub fn rows(&self) -> Vec<&str> {
        let mut rows: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&c.perception.as_str()) {
                rows.push(&c.perception);
            }
        }
        rows
    }

    pub fn scenarios(&self) -> Vec<ScenarioId> {
        let mut ids: Vec<ScenarioId> = self.cells.iter().map(|c| c.scenario).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn cell(&self, perception: &str, scenario: ScenarioId) -> Option<&ExperimentCell> {
        self.cells
            .iter()
            .find(|c| c.perception == perception && c.scenario == scenario)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Success-rate table: one row per perception source, two columns per
    /// scenario with the share of runs whose minimum distance fell below
    /// 1 m and the share that stayed at or above it.
    pub fn render_table(&self) -> String {
        let scenarios = self.scenarios();
        let rows = self.rows();
        let label_w = rows.iter().map(|r| r.len()).max().unwrap_or(0).max("perception".len());
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "perception");
        for s in &scenarios {
            let _ = write!(out, " | {:>8} {:>8}", format!("{s} <1m"), format!("{s} >=1m"));
        }
        out.push('\n');
        let _ = write!(out, "{}", "-".repeat(label_w));
        for _ in &scenarios {
            out.push_str(&format!("-+-{}", "-".repeat(17)));
        }
        out.push('\n');
        for r in rows {
            let _ = write!(out, "{r:<label_w$}");
            for s in &scenarios {
                match self.cell(r, *s) {
                    Some(c) if c.n_aborted == c.n_runs => {
                        let _ = write!(out, " | {:>8} {:>8}", "n/a", "n/a");
                    }
                    Some(c) => {
                        let _ = write!(
                            out,
                            " | {:>7.1}% {:>7.1}%",
                            100.0 * c.frac_below_1m,
                            100.0 * c.frac_at_least_1m
                        );
                    }
                    None => {
                        let _ = write!(out, " | {:>8} {:>8}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(p: &str, s: ScenarioId, below: f64) -> ExperimentCell {
        ExperimentCell {
            scenario: s,
            perception: p.into(),
            baseline: p == "ground_truth",
            grid: None,
            base_seed: 0,
            n_runs: 10,
            n_aborted: 0,
            n_below_1m: (below * 10.0) as usize,
            n_collisions: 0,
            frac_below_1m: below,
            frac_at_least_1m: 1.0 - below,
            runs: vec![],
            aborted: vec![],
        }
    }

    #[test]
    fn table_layout() {
        let mut r = ExperimentReport::default();
        r.push(cell("ground_truth", ScenarioId::Tc1, 0.0));
        r.push(cell("camera", ScenarioId::Tc2, 0.25));
        r.push(cell("camera", ScenarioId::Tc1, 0.1));
        let t = r.render_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("TC1 <1m") && lines[0].contains("TC2 >=1m"));
        assert!(lines[2].starts_with("ground_truth"));
        assert!(lines[2].contains("0.0%") && lines[2].contains("100.0%"));
        assert!(lines[2].trim_end().ends_with('-'));
        assert!(lines[3].contains("25.0%") && lines[3].contains("75.0%"));
    }

    #[test]
    fn json_round_trip() {
        let mut r = ExperimentReport::default();
        r.push(cell("camera", ScenarioId::Tc3, 0.5));
        assert_eq!(ExperimentReport::from_json(&r.to_json()).unwrap(), r);
    }
}
