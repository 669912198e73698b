use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::CliError;
use crate::panel_synth::{DemandRow, PanelRow};

pub const PANEL_HEADER: [&str; 12] = [
    "worker_id",
    "market_id",
    "month_index",
    "treat",
    "post35",
    "post40",
    "fjobnum",
    "fjobearn",
    "fjobratio",
    "tenure",
    "us",
    "experienced",
];

pub const DEMAND_HEADER: [&str; 5] = ["market_id", "week_index", "postnum", "treat", "post"];

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Numeric(format!("{}: csv: {other:?}", path.display())),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_rows<T: DeserializeOwned>(
    path: &Path,
    header: &[&str],
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if found != header {
        let mismatched: Vec<String> = (0..found.len().max(header.len()))
            .filter(|&i| found.get(i).map(String::as_str) != header.get(i).copied())
            .map(|i| {
                format!(
                    "column {}: expected {}, found {}",
                    i + 1,
                    header.get(i).unwrap_or(&"<none>"),
                    found.get(i).map_or("<none>", String::as_str)
                )
            })
            .collect();
        return Err(CliError::Schema {
            path: path.display().to_string(),
            message: format!("expected header {}; {}", header.join(","), mismatched.join("; ")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<T>().enumerate() {
        // data rows are numbered from 1, excluding the header
        let row = i + 1;
        let bad = |message: String| CliError::Row { path: path.display().to_string(), row, message };
        let v = rec.map_err(|e| bad(e.to_string()))?;
        check(&v).map_err(bad)?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_panel_csv(path: &Path, rows: &[PanelRow]) -> Result<(), CliError> {
    write_rows(path, rows, &PANEL_HEADER)
}

/// Reads a worker-month panel, enforcing the exact header and row invariants.
pub fn ingest_panel_csv(path: &Path) -> Result<Vec<PanelRow>, CliError> {
    read_rows(path, &PANEL_HEADER, PanelRow::check)
}

pub fn write_demand_csv(path: &Path, rows: &[DemandRow]) -> Result<(), CliError> {
    write_rows(path, rows, &DEMAND_HEADER)
}

pub fn ingest_demand_csv(path: &Path) -> Result<Vec<DemandRow>, CliError> {
    read_rows(path, &DEMAND_HEADER, |r: &DemandRow| {
        if r.treat > 1 || r.post > 1 {
            Err(format!("treat and post must be 0/1, got {} and {}", r.treat, r.post))
        } else {
            Ok(())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_synth::{fixtures::config, generate_demand_series, generate_panel};

    #[test]
    fn panel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = generate_panel(&config((0.2, 0.4, 0.6), 30)).unwrap();
        let p = dir.path().join("panel.csv");
        write_panel_csv(&p, &rows).unwrap();
        assert_eq!(ingest_panel_csv(&p).unwrap(), rows);
        let first = std::fs::read_to_string(&p).unwrap();
        assert!(first.starts_with(&(PANEL_HEADER.join(",") + "\n")));
    }

    #[test]
    fn demand_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = generate_demand_series(&config((0.2, 0.4, 0.6), 30), 20).unwrap();
        let p = dir.path().join("demand.csv");
        write_demand_csv(&p, &rows).unwrap();
        assert_eq!(ingest_demand_csv(&p).unwrap(), rows);
    }

    #[test]
    fn earnings_without_jobs_rejected_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let body = format!("{}\n1,m,0,1,0,0,1,10.5,0.5,3,0,1\n1,m,1,1,0,0,0,5,0,4,0,1\n", PANEL_HEADER.join(","));
        std::fs::write(&p, body).unwrap();
        match ingest_panel_csv(&p).unwrap_err() {
            CliError::Row { row, message, .. } => {
                assert_eq!(row, 2);
                assert!(message.contains("fjobearn"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn post40_without_post35_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, format!("{}\n1,m,0,1,0,1,1,10.5,0.5,3,0,1\n", PANEL_HEADER.join(","))).unwrap();
        assert!(matches!(ingest_panel_csv(&p), Err(CliError::Row { row: 1, .. })));
    }

    #[test]
    fn shuffled_header_names_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("shuffled.csv");
        let mut h = PANEL_HEADER;
        h.swap(6, 7);
        std::fs::write(&p, format!("{}\n", h.join(","))).unwrap();
        match ingest_panel_csv(&p).unwrap_err() {
            CliError::Schema { message, .. } => {
                assert!(message.contains("column 7: expected fjobnum, found fjobearn"), "{message}");
                assert!(message.contains("column 8: expected fjobearn, found fjobnum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }
}
