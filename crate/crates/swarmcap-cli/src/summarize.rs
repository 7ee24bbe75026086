//! Text summary of a results file: per-policy rows sorted by coverage time.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::execute::SummaryRow;

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Malformed {
        path: PathBuf,
        line: u64,
        source: csv::Error,
    },
}

/// Reads a `summary.csv` and renders the comparison table.
pub fn summarize(path: &Path, out: &mut dyn Write) -> Result<(), SummarizeError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => SummarizeError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => SummarizeError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            source: e,
        },
    })?;

    let mut rows: Vec<SummaryRow> = Vec::new();
    for record in reader.deserialize() {
        let row: SummaryRow = record.map_err(|e| SummarizeError::Malformed {
            path: path.to_path_buf(),
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or(rows.len() as u64 + 2),
            source: e,
        })?;
        rows.push(row);
    }

    rows.sort_by(|a, b| {
        a.tc_s
            .partial_cmp(&b.tc_s)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.policy.cmp(&b.policy))
            .then_with(|| param_of(a).partial_cmp(&param_of(b)).unwrap_or(std::cmp::Ordering::Equal))
    });

    writeln!(
        out,
        "{:<10} {:<10} {:>5} {:>6} {:>5}  {:<14} {:<13} {:<13} {:<15}",
        "policy", "param", "uavs", "speed", "runs", "tc_s", "ncc", "anc", "fairness"
    )
    .map_err(write_err(path))?;
    for row in &rows {
        let param = match (row.beta, row.f) {
            (Some(beta), _) => format!("beta={beta}"),
            (_, Some(f)) => format!("f={f}"),
            _ => String::new(),
        };
        writeln!(
            out,
            "{:<10} {:<10} {:>5} {:>6} {:>5}  {:<14} {:<13} {:<13} {:<15}",
            row.policy,
            param,
            row.n_uavs,
            row.speed_mps,
            row.runs,
            format!("{:.0} ± {:.0}", row.tc_s, row.tc_s_sem),
            format!("{:.2} ± {:.2}", row.ncc_mean, row.ncc_mean_sem),
            format!("{:.2} ± {:.2}", row.anc_mean, row.anc_mean_sem),
            format!("{:.3} ± {:.3}", row.fairness, row.fairness_sem),
        )
        .map_err(write_err(path))?;
    }
    Ok(())
}

fn param_of(row: &SummaryRow) -> f64 {
    row.beta.or(row.f).unwrap_or(0.0)
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> SummarizeError + '_ {
    move |source| SummarizeError::Io {
        path: path.to_path_buf(),
        source,
    }
}
