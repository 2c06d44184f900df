use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::round::RoundMetrics;

pub const CSV_HEADER: &str =
    "round,pooling_ms,preprepare_ms,prepare_ms,commit_ms,sync_ms,consensus_ms,total_ms,ttf_ms,failed_tx,pool_tps,block_tps";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("missing header")]
    MissingHeader,
    #[error("column {index}: expected `{expected}`, found `{found}`")]
    Schema { index: usize, expected: String, found: String },
    #[error("line {line}: column `{column}` cannot be parsed from `{value}`")]
    Value { line: usize, column: String, value: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
}

pub fn to_csv_string(rows: &[RoundMetrics]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6}\n",
            r.round,
            r.pooling_ms,
            r.preprepare_ms,
            r.prepare_ms,
            r.commit_ms,
            r.sync_ms,
            r.consensus_ms,
            r.total_ms,
            r.ttf_ms,
            r.failed_tx,
            r.pool_tps,
            r.block_tps
        ));
    }
    s
}

pub fn write_csv(rows: &[RoundMetrics], path: &Path) -> Result<(), CsvError> {
    fs::write(path, to_csv_string(rows)).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<RoundMetrics>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(CsvError::MissingHeader)?;
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let found: Vec<&str> = header.split(',').collect();
    for i in 0..expected.len().max(found.len()) {
        let (e, f) = (expected.get(i), found.get(i));
        if e != f {
            return Err(CsvError::Schema {
                index: i,
                expected: e.unwrap_or(&"<none>").to_string(),
                found: f.unwrap_or(&"<none>").to_string(),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected.len() {
            return Err(CsvError::FieldCount {
                line: line_no,
                expected: expected.len(),
                found: fields.len(),
            });
        }
        let float = |k: usize| -> Result<f64, CsvError> {
            fields[k].parse().map_err(|_| CsvError::Value {
                line: line_no,
                column: expected[k].to_string(),
                value: fields[k].to_string(),
            })
        };
        let int = |k: usize| -> Result<u64, CsvError> {
            fields[k].parse().map_err(|_| CsvError::Value {
                line: line_no,
                column: expected[k].to_string(),
                value: fields[k].to_string(),
            })
        };
        rows.push(RoundMetrics {
            round: int(0)?,
            pooling_ms: float(1)?,
            preprepare_ms: float(2)?,
            prepare_ms: float(3)?,
            commit_ms: float(4)?,
            sync_ms: float(5)?,
            consensus_ms: float(6)?,
            total_ms: float(7)?,
            ttf_ms: float(8)?,
            failed_tx: int(9)?,
            pool_tps: float(10)?,
            block_tps: float(11)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<RoundMetrics>, CsvError> {
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_is_header_only() {
        assert_eq!(to_csv_string(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv_string(&[])).unwrap().is_empty());
    }

    #[test]
    fn schema_mismatch_names_column() {
        let bad = CSV_HEADER.replace("ttf_ms", "latency_ms");
        match parse_csv(&bad) {
            Err(CsvError::Schema { expected, found, .. }) => {
                assert_eq!(expected, "ttf_ms");
                assert_eq!(found, "latency_ms");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
