use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{read_history, read_history_meta};
use crate::error::{Error, Result};
use crate::solvers::ConvergenceRecord;

use super::CompareArgs;

#[derive(Clone, Debug, PartialEq)]
pub struct HistorySummary {
    pub label: String,
    pub path: PathBuf,
    /// Tolerance used for `iters_to_tolerance`, if any was known.
    pub eps: Option<f64>,
    pub iterations: usize,
    /// First iteration with scaled gradient-map norm `≤ eps`; the last
    /// iteration when no tolerance is known.
    pub iters_to_tolerance: Option<usize>,
    pub final_objective: f64,
    pub final_gradmap_norm_scaled: f64,
    pub total_line_search: usize,
    /// `(φ_final − φ*) / |φ*|` when a reference is given.
    pub relative_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<HistorySummary>,
    pub reference_objective: Option<f64>,
    pub warnings: Vec<String>,
}

fn meta_value(meta: &Option<Vec<(String, String)>>, key: &str) -> Option<String> {
    meta.as_ref()?.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone())
}

fn best_objective(records: &[ConvergenceRecord]) -> f64 {
    records.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min)
}

pub fn compare(
    histories: &[PathBuf],
    eps: Option<f64>,
    reference: Option<&Path>,
) -> Result<CompareReport> {
    if histories.len() < 2 {
        return Err(Error::invalid(format!(
            "compare needs at least two histories, got {}",
            histories.len()
        )));
    }
    let mut warnings = Vec::new();
    let reference_objective = match reference {
        Some(path) => Some(best_objective(&read_history(path)?)),
        None => None,
    };
    let mut rows = Vec::with_capacity(histories.len());
    let mut run_eps = Vec::new();
    for path in histories {
        let records = read_history(path)?;
        let last = records
            .last()
            .ok_or_else(|| Error::format(path, "history has no records"))?;
        let meta = read_history_meta(path)?;
        let label = meta_value(&meta, "solver").unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string())
        });
        let own_eps = match meta_value(&meta, "eps") {
            Some(text) => Some(
                text.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("bad eps {text:?} in metadata")))?,
            ),
            None => None,
        };
        run_eps.push(own_eps);
        let tol = eps.or(own_eps);
        let iters_to_tolerance = match tol {
            Some(t) => records.iter().find(|r| r.gradmap_norm_scaled <= t).map(|r| r.iter),
            None => Some(last.iter),
        };
        let relative_gap = reference_objective.map(|star| (last.objective - star) / star.abs());
        rows.push(HistorySummary {
            label,
            path: path.clone(),
            eps: tol,
            iterations: last.iter,
            iters_to_tolerance,
            final_objective: last.objective,
            final_gradmap_norm_scaled: last.gradmap_norm_scaled,
            total_line_search: records.iter().map(|r| r.line_search_count).sum(),
            relative_gap,
        });
    }
    let known: Vec<f64> = run_eps.iter().flatten().copied().collect();
    if known.windows(2).any(|w| w[0] != w[1]) {
        warnings.push(format!("histories were run with different tolerances: {known:?}"));
    }
    if known.len() != run_eps.len() && eps.is_none() {
        warnings.push("some histories have no tolerance metadata; pass --eps to compare them".into());
    }
    Ok(CompareReport {
        rows,
        reference_objective,
        warnings,
    })
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_else(|| "-".into())
}

pub fn format_summary(report: &CompareReport) -> String {
    let mut s = format!(
        "{:<12} {:>10} {:>14} {:>22} {:>14} {:>10}",
        "run", "iters", "iters_to_tol", "final_objective", "final_gradmap", "ls_trials"
    );
    if report.reference_objective.is_some() {
        s.push_str(&format!(" {:>12}", "rel_gap"));
    }
    s.push('\n');
    for r in &report.rows {
        s.push_str(&format!(
            "{:<12} {:>10} {:>14} {:>22.15e} {:>14.6e} {:>10}",
            r.label,
            r.iterations,
            opt_usize(r.iters_to_tolerance),
            r.final_objective,
            r.final_gradmap_norm_scaled,
            r.total_line_search
        ));
        if let Some(gap) = r.relative_gap {
            s.push_str(&format!(" {gap:>12.4e}"));
        }
        s.push('\n');
    }
    s
}

fn write_merged(histories: &[PathBuf], labels: &[String], reference: Option<f64>, path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["run", "iter", "objective", "gradmap_norm_scaled", "relative_gap", "line_search_count"])
        .map_err(to_err)?;
    for (h, label) in histories.iter().zip(labels) {
        for r in read_history(h)? {
            let gap = reference
                .map(|star| ((r.objective - star) / star.abs()).to_string())
                .unwrap_or_default();
            w.write_record([
                label.clone(),
                r.iter.to_string(),
                r.objective.to_string(),
                r.gradmap_norm_scaled.to_string(),
                gap,
                r.line_search_count.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(super) fn cmd_compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<CompareReport> {
    let report = compare(&args.histories, args.eps, args.reference.as_deref())?;
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    write!(out, "{}", format_summary(&report)).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(path) = &args.merged {
        let labels: Vec<String> = report.rows.iter().map(|r| r.label.clone()).collect();
        write_merged(&args.histories, &labels, report.reference_objective, path)?;
    }
    Ok(report)
}
