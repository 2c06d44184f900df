//! Per-round timing rows, derived throughput and latency, CSV export and
//! the descriptive statistics used by the analysis report.

mod csv;
mod round;
mod stats;

pub use self::csv::{parse_csv, read_csv, to_csv_string, write_csv, CsvError, CSV_HEADER};
pub use round::{compute_block_tps, compute_ttf, merge_node_rows, quantize_ms, MetricsError, PhaseTimings, RoundMetrics};
pub use stats::{
    five_number_summary, median, pct_change, pearson, pearson_matrix, ranks, spearman, Correlation,
    CorrelationMatrix, StatsError, SummaryStats,
};
