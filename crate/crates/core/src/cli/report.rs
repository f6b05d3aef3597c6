use std::fmt::Write as _;
use std::path::PathBuf;

use super::args::{Context, ReportArgs};
use super::error::CliError;
use super::manifest::Outputs;
use super::simulate::{REPORT_JSON, REPORT_TXT};
use crate::pem::GridSpec;
use crate::sim::{ExperimentCell, ExperimentReport};

const MIN_DISTANCE_BIN_M: f64 = 0.5;
const MIN_DISTANCE_BINS: usize = 40;
const FREQUENCY_BINS: usize = 10;
const INTERVAL_BIN_S: f64 = 0.5;

/// Merges reports in input order. Repeated (scenario, perception) cells are an
/// error; cells of models on different grids are refused unless
/// `allow_mixed_grids`, and then noted in the report's warnings.
pub fn merge_reports(reports: Vec<ExperimentReport>, allow_mixed_grids: bool) -> Result<ExperimentReport, CliError> {
    let mut merged = ExperimentReport::default();
    for r in reports {
        merged.warnings.extend(r.warnings);
        for c in r.cells {
            if merged.cell(&c.perception, c.scenario).is_some() {
                return Err(CliError::Data(format!(
                    "cell ({}, {}) appears in more than one input",
                    c.scenario, c.perception
                )));
            }
            merged.push(c);
        }
    }
    let mut grids: Vec<(GridSpec, String)> = Vec::new();
    for c in &merged.cells {
        if let Some(g) = c.grid {
            if !grids.iter().any(|(h, _)| *h == g) {
                grids.push((g, c.perception.clone()));
            }
        }
    }
    if grids.len() > 1 {
        let list = grids
            .iter()
            .map(|(g, p)| format!("{p}: {}deg/{}m/{}m", g.sector_width_deg, g.ring_depth_m, g.max_radius_m))
            .collect::<Vec<_>>()
            .join("; ");
        if !allow_mixed_grids {
            return Err(CliError::Data(format!(
                "inputs mix models on different grids ({list}); pass --allow-mixed-grids to merge anyway"
            )));
        }
        merged.warnings.push(format!("models use different grids ({list})"));
    }
    Ok(merged)
}

/// `(lo, hi, count)` with a final open bin when `open_last`.
fn histogram(values: &[f64], width: f64, n_bins: usize, open_last: bool) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let k = ((v / width) + 1e-9).floor().max(0.0) as usize;
        counts[k.min(n_bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let hi = if open_last && k == n_bins - 1 {
                f64::INFINITY
            } else {
                (k + 1) as f64 * width
            };
            (k as f64 * width, hi, c)
        })
        .collect()
}

fn histogram_csv(cells: &[ExperimentCell], metric: &str, values: impl Fn(&ExperimentCell) -> Vec<f64>) -> String {
    let mut s = String::from("scenario,perception,bin_lo,bin_hi,count\n");
    for c in cells {
        let v = values(c);
        let bins = match metric {
            "min_distance" => histogram(&v, MIN_DISTANCE_BIN_M, MIN_DISTANCE_BINS, true),
            "detection_frequency" => histogram(&v, 1.0 / FREQUENCY_BINS as f64, FREQUENCY_BINS, false),
            _ => {
                let max = v.iter().copied().fold(0.0, f64::max);
                histogram(&v, INTERVAL_BIN_S, (max / INTERVAL_BIN_S + 1e-9).floor() as usize + 1, false)
            }
        };
        for (lo, hi, n) in bins {
            let _ = writeln!(s, "{},{},{lo},{hi},{n}", c.scenario, c.perception);
        }
    }
    s
}

/// One row per completed run, for scatter plots of the metrics.
pub fn runs_csv(cells: &[ExperimentCell]) -> String {
    let mut s = String::from(
        "scenario,perception,seed,end,min_distance,relative_detection_frequency,max_non_detection_interval\n",
    );
    for c in cells {
        for r in &c.runs {
            let end = serde_json::to_value(r.end).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let (f, i) = match r.metrics {
                Some(m) => (m.relative_detection_frequency.to_string(), m.max_non_detection_interval.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(s, "{},{},{},{end},{},{f},{i}", c.scenario, c.perception, r.seed, r.min_distance);
        }
    }
    s
}

pub fn report(ctx: &Context, a: &ReportArgs) -> Result<(), CliError> {
    if a.input.is_empty() {
        return Err(CliError::Usage("report needs at least one --input".into()));
    }
    let mut out = Outputs::create(ctx)?;
    let result = (|| {
        let mut reports = Vec::new();
        for input in &a.input {
            let path: PathBuf = if input.is_dir() { input.join(REPORT_JSON) } else { input.clone() };
            out.input(&path)?;
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io_at(&path, e))?;
            reports.push(
                ExperimentReport::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
            );
        }
        let merged = merge_reports(reports, a.allow_mixed_grids.unwrap_or(false))?;
        let table = merged.render_table();
        out.write(REPORT_JSON, merged.to_json().as_bytes())?;
        out.write(REPORT_TXT, table.as_bytes())?;
        out.write("runs.csv", runs_csv(&merged.cells).as_bytes())?;
        out.write(
            "hist_min_distance.csv",
            histogram_csv(&merged.cells, "min_distance", |c| c.min_distances()).as_bytes(),
        )?;
        out.write(
            "hist_detection_frequency.csv",
            histogram_csv(&merged.cells, "detection_frequency", |c| c.detection_frequencies()).as_bytes(),
        )?;
        out.write(
            "hist_max_non_detection_interval.csv",
            histogram_csv(&merged.cells, "max_non_detection_interval", |c| c.max_non_detection_intervals()).as_bytes(),
        )?;
        print!("{table}");
        Ok(())
    })();
    out.finish(ctx, result.as_ref().err())?;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.3, 0.1 + 0.2, 1.0, 0.95], 0.1, 10, false);
        assert_eq!(h[0].2, 1);
        assert_eq!(h[3].2, 2);
        assert_eq!(h[9].2, 2);
        let h = histogram(&[25.0, 0.49], 0.5, 40, true);
        assert_eq!(h[39], (19.5, f64::INFINITY, 1));
        assert_eq!(h[0].2, 1);
    }
}
