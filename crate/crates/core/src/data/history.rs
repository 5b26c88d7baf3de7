//! Convergence-history files: comma-separated, one row per accepted step,
//! empty fields where a column does not apply to the solver.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solvers::ConvergenceRecord;

use super::io::Metadata;

pub const HISTORY_HEADER: [&str; 7] = [
    "iter",
    "objective",
    "gradmap_norm_scaled",
    "step_or_Linv",
    "mu_k",
    "L_k",
    "line_search_count",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_history(records: &[ConvergenceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::invalid("refusing to write an empty history"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(HISTORY_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        // f64 Display is the shortest string that round-trips exactly.
        w.write_record([
            r.iter.to_string(),
            r.objective.to_string(),
            r.gradmap_norm_scaled.to_string(),
            r.step_or_linv.to_string(),
            opt(r.mu_k),
            opt(r.l_k),
            r.line_search_count.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>() != HISTORY_HEADER {
        return Err(Error::format(path, format!("unexpected history header {header:?}")));
    }
    let field = |s: &str, name: &str, line: usize| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad {name} {s:?}")))
    };
    let optional = |s: &str, name: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            field(s, name, line).map(Some)
        }
    };
    let mut out: Vec<ConvergenceRecord> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let iter: usize = row[0]
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad iter {:?}", &row[0])))?;
        if let Some(prev) = out.last() {
            if iter <= prev.iter {
                return Err(Error::format(
                    path,
                    format!("line {line}: iter {iter} does not follow {}", prev.iter),
                ));
            }
        }
        out.push(ConvergenceRecord {
            iter,
            objective: field(&row[1], "objective", line)?,
            gradmap_norm_scaled: field(&row[2], "gradmap_norm_scaled", line)?,
            step_or_linv: field(&row[3], "step_or_Linv", line)?,
            mu_k: optional(&row[4], "mu_k", line)?,
            l_k: optional(&row[5], "L_k", line)?,
            line_search_count: row[6].parse().map_err(|_| {
                Error::format(path, format!("line {line}: bad line_search_count {:?}", &row[6]))
            })?,
            theta: None,
        });
    }
    Ok(out)
}

/// Path of the `key=value` sidecar that accompanies a history file.
pub(crate) fn meta_path(history: &Path) -> PathBuf {
    let mut name = history.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Writes run settings (solver, eps, alpha, ...) next to a history file.
pub fn write_history_meta(history: impl AsRef<Path>, meta: &Metadata) -> Result<()> {
    let path = meta_path(history.as_ref());
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads the sidecar of a history file, if there is one.
pub fn read_history_meta(history: impl AsRef<Path>) -> Result<Option<Metadata>> {
    let path = meta_path(history.as_ref());
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::format(&path, format!("line {l:?} is not key=value")))
        })
        .collect::<Result<Metadata>>()
        .map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: usize, objective: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            iter,
            objective,
            gradmap_norm_scaled: objective / 7.0,
            step_or_linv: 0.1 + 0.2,
            mu_k: Some(1.0 / 3.0),
            l_k: None,
            line_search_count: 2,
            theta: None,
        }
    }

    #[test]
    fn single_record_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history(&[record(1, 2.5)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], HISTORY_HEADER.join(","));
        assert!(lines[1].contains(",,"), "empty L_k field: {}", lines[1]);
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let records: Vec<_> = (1..50)
            .map(|i| record(i, std::f64::consts::PI.powi(i as i32) * 1e-30))
            .collect();
        write_history(&records, &path).unwrap();
        assert_eq!(read_history(&path).unwrap(), records);
    }

    #[test]
    fn non_monotone_iter_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let text = format!("{}\n2,1,1,1,,,0\n2,1,1,1,,,0\n", HISTORY_HEADER.join(","));
        fs::write(&path, text).unwrap();
        assert!(matches!(read_history(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn empty_history_and_bad_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_history(&[], dir.path().join("h.csv")).is_err());
        let unwritable = dir.path().join("no/such/dir/h.csv");
        assert!(matches!(write_history(&[record(1, 1.0)], unwritable), Err(Error::Io { .. })));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        assert_eq!(read_history_meta(&path).unwrap(), None);
        let meta = vec![("solver".to_string(), "upn".to_string()), ("eps".into(), "1e-8".into())];
        write_history_meta(&path, &meta).unwrap();
        assert_eq!(read_history_meta(&path).unwrap(), Some(meta));
    }
}
