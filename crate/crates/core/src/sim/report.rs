//! Plain-text reports: per-run summaries, cross-run comparisons, the
//! correlation matrix and the topology table.

use std::fmt::{self, Write as _};

use crate::metrics::{
    five_number_summary, median, pct_change, pearson_matrix, CorrelationMatrix, RoundMetrics, StatsError, SummaryStats,
};
use crate::transport::{first_crossover, topology_table};

use super::harness::RunOutput;

type Column = (&'static str, fn(&RoundMetrics) -> f64);

/// Columns of the five-number summary table.
pub const SUMMARY_COLUMNS: [Column; 7] = [
    ("Pool TPS", |r| r.pool_tps),
    ("Block TPS", |r| r.block_tps),
    ("Pooling (ms)", |r| r.pooling_ms),
    ("Consensus (ms)", |r| r.consensus_ms),
    ("Sync (ms)", |r| r.sync_ms),
    ("Total (ms)", |r| r.total_ms),
    ("TTF (ms)", |r| r.ttf_ms),
];

/// Columns compared between deployments.
pub const CHANGE_COLUMNS: [Column; 6] = [
    ("Block TPS", |r| r.block_tps),
    ("Preprepare", |r| r.preprepare_ms),
    ("Prepare", |r| r.prepare_ms),
    ("Commit", |r| r.commit_ms),
    ("Sync", |r| r.sync_ms),
    ("Consensus", |r| r.consensus_ms),
];

/// Columns of the correlation matrix.
pub const CORRELATION_COLUMNS: [Column; 11] = [
    ("pooling_ms", |r| r.pooling_ms),
    ("preprepare_ms", |r| r.preprepare_ms),
    ("prepare_ms", |r| r.prepare_ms),
    ("commit_ms", |r| r.commit_ms),
    ("sync_ms", |r| r.sync_ms),
    ("consensus_ms", |r| r.consensus_ms),
    ("total_ms", |r| r.total_ms),
    ("ttf_ms", |r| r.ttf_ms),
    ("failed_tx", |r| r.failed_tx as f64),
    ("pool_tps", |r| r.pool_tps),
    ("block_tps", |r| r.block_tps),
];

pub fn column(rows: &[RoundMetrics], f: fn(&RoundMetrics) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

pub fn summarize(rows: &[RoundMetrics]) -> Result<Vec<(&'static str, SummaryStats)>, StatsError> {
    SUMMARY_COLUMNS
        .iter()
        .map(|(name, f)| five_number_summary(&column(rows, *f)).map(|s| (*name, s)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub from: String,
    pub to: String,
    /// Percentage change of the column medians; `None` when the earlier
    /// median is zero.
    pub changes: Vec<(&'static str, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub summaries: Vec<(String, Vec<(&'static str, SummaryStats)>)>,
    pub transitions: Vec<Transition>,
    pub correlation: Option<CorrelationMatrix>,
}

/// Summaries per run, median changes between consecutive runs and the
/// correlation matrix over every row of every run.
pub fn analyze(runs: &[(String, Vec<RoundMetrics>)]) -> Result<Analysis, StatsError> {
    let mut summaries = Vec::new();
    for (name, rows) in runs {
        summaries.push((name.clone(), summarize(rows)?));
    }
    let mut transitions = Vec::new();
    for pair in runs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut changes = Vec::new();
        for (name, f) in CHANGE_COLUMNS {
            let before = median(&column(&a.1, f))?;
            let after = median(&column(&b.1, f))?;
            changes.push((name, pct_change(before, after).ok()));
        }
        transitions.push(Transition {
            from: a.0.clone(),
            to: b.0.clone(),
            changes,
        });
    }
    let all: Vec<RoundMetrics> = runs.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    let columns: Vec<Vec<f64>> = CORRELATION_COLUMNS.iter().map(|(_, f)| column(&all, *f)).collect();
    let correlation = pearson_matrix(&columns).ok();
    Ok(Analysis {
        summaries,
        transitions,
        correlation,
    })
}

fn write_summary(f: &mut impl fmt::Write, stats: &[(&'static str, SummaryStats)]) -> fmt::Result {
    write!(f, "{:<8}", "")?;
    for (name, _) in stats {
        write!(f, "{name:>16}")?;
    }
    writeln!(f)?;
    type Row = (&'static str, fn(&SummaryStats) -> f64);
    let rows: [Row; 5] = [
        ("Min", |s| s.min),
        ("Q1", |s| s.q1),
        ("Median", |s| s.median),
        ("Q3", |s| s.q3),
        ("Max", |s| s.max),
    ];
    for (label, get) in rows {
        write!(f, "{label:<8}")?;
        for (_, s) in stats {
            write!(f, "{:>16.2}", get(s))?;
        }
        writeln!(f)?;
    }
    Ok(())
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Rows are per-round values taken from the node with the median consensus time.")?;
        for (name, stats) in &self.summaries {
            writeln!(f, "\nFive-number summary: {name}")?;
            write_summary(f, stats)?;
        }
        if !self.transitions.is_empty() {
            writeln!(f, "\nChange of medians between runs (%)")?;
            write!(f, "{:<32}", "")?;
            for (name, _) in CHANGE_COLUMNS {
                write!(f, "{name:>12}")?;
            }
            writeln!(f)?;
            for t in &self.transitions {
                write!(f, "{:<32}", format!("{} -> {}", t.from, t.to))?;
                for (_, c) in &t.changes {
                    match c {
                        Some(v) => write!(f, "{:>+12.2}", v)?,
                        None => write!(f, "{:>12}", "undef")?,
                    }
                }
                writeln!(f)?;
            }
        }
        if let Some(m) = &self.correlation {
            writeln!(f, "\nPearson correlation")?;
            write!(f, "{:<14}", "")?;
            for (name, _) in CORRELATION_COLUMNS {
                write!(f, "{:>9}", &name[..name.len().min(8)])?;
            }
            writeln!(f)?;
            for (i, (name, _)) in CORRELATION_COLUMNS.iter().enumerate() {
                write!(f, "{name:<14}")?;
                for j in 0..m.size {
                    write!(f, "{:>9}", m.get(i, j).to_string())?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Report written beside a simulation's CSV.
pub fn summary_report(out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# configuration");
    s.push_str(&out.config.echo());
    let _ = writeln!(
        s,
        "\nmode: {:?}\nrounds committed: {}\nhalted: {}\naborted attempts: {}",
        out.mode,
        out.rows.len(),
        out.halted(),
        out.master.records.iter().filter(|r| !matches!(r.outcome, Some(crate::master::RoundOutcome::Committed { .. }))).count()
    );
    if let Some(t) = out.steps {
        let _ = writeln!(s, "scheduler steps: {t}");
    }
    let _ = writeln!(s, "fraud injected: {}", out.injections.total_fraud());
    if !out.rows.is_empty() {
        match analyze(&[("run".to_string(), out.rows.clone())]) {
            Ok(a) => {
                let _ = write!(s, "\n{a}");
            }
            Err(e) => {
                let _ = writeln!(s, "\nanalysis unavailable: {e}");
            }
        }
    }
    s
}

pub fn topology_report(n_max: u64, brokers: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>12} {:>20}", "n", "p2p_edges", "broker_connections");
    for row in topology_table(n_max, brokers) {
        let mark = if row.crossover { "  <- first crossover" } else { "" };
        let _ = writeln!(s, "{:>6} {:>12} {:>20}{mark}", row.n, row.p2p_edges, row.broker_connections);
    }
    match first_crossover(brokers, n_max) {
        Some(n) => {
            let _ = writeln!(s, "\nbroker topology needs fewer connections from n = {n}");
        }
        None => {
            let _ = writeln!(s, "\nno crossover up to n = {n_max}");
        }
    }
    s
}
