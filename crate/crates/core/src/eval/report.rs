use super::run::TrialReport;
use super::EvalError;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Per-scenario percentages over non-excluded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub trials: usize,
    pub excluded: usize,
    pub pf: Option<f64>,
    pub tcr: Option<f64>,
    pub sgh: Option<f64>,
}

impl SummaryRow {
    pub fn from_trials(scenario: &str, trials: &[TrialReport]) -> Self {
        let scored: Vec<&TrialReport> = trials.iter().filter(|t| !t.excluded).collect();
        let pct = |f: &dyn Fn(&TrialReport) -> Option<f64>| {
            let v: Vec<f64> = scored.iter().filter_map(|t| f(t)).collect();
            (!v.is_empty()).then(|| 100.0 * v.iter().sum::<f64>() / v.len() as f64)
        };
        Self {
            scenario: scenario.to_string(),
            trials: trials.len(),
            excluded: trials.len() - scored.len(),
            pf: pct(&|t| t.pf.map(f64::from)),
            tcr: pct(&|t| t.tcr.map(f64::from)),
            sgh: pct(&|t| t.sgh),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SummaryRow>,
    pub trials: Vec<TrialReport>,
}

/// Whole percentages print as integers, others with one decimal; a
/// missing value (all trials excluded) prints as `-`.
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(p) => {
            let r = (p * 10.0).round() / 10.0;
            if r.fract() == 0.0 { format!("{r:.0}") } else { format!("{r:.1}") }
        }
    }
}

/// Fixed-width results table: scenario id, then PF, TCR and SGH percentages.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let w = rows.iter().map(|r| r.scenario.len()).max().unwrap_or(0).max(4);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w$}  {:>6}  {:>7}  {:>7}", "Exp.", "PF (%)", "TCR (%)", "SGH (%)");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>7}  {:>7}",
            r.scenario,
            format_percent(r.pf),
            format_percent(r.tcr),
            format_percent(r.sgh)
        );
    }
    out
}

impl SuiteReport {
    pub fn table(&self) -> String {
        render_table(&self.rows)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes `report.json`, `table.txt` and the trace files.
    pub fn write(&self, dir: &Path, traces: &[(String, String)]) -> Result<(), EvalError> {
        let io = |e: std::io::Error| EvalError::Io(e.to_string());
        std::fs::create_dir_all(dir.join("traces")).map_err(io)?;
        std::fs::write(dir.join("report.json"), self.to_json_string()).map_err(io)?;
        std::fs::write(dir.join("table.txt"), self.table()).map_err(io)?;
        for (rel, body) in traces {
            std::fs::write(dir.join(rel), body).map_err(io)?;
        }
        Ok(())
    }
}
