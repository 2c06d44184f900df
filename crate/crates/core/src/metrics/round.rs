use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("duration must be positive, got {0} ms")]
    NonPositiveDuration(f64),
    #[error("no transactions to measure")]
    Empty,
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub pooling_ms: f64,
    pub preprepare_ms: f64,
    pub prepare_ms: f64,
    pub commit_ms: f64,
    pub sync_ms: f64,
    pub consensus_ms: f64,
    pub total_ms: f64,
    pub ttf_ms: f64,
    pub failed_tx: u64,
    pub pool_tps: f64,
    pub block_tps: f64,
}

/// Raw per-node measurements for one committed round.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub pooling_ms: f64,
    pub preprepare_ms: f64,
    pub prepare_ms: f64,
    pub commit_ms: f64,
    pub sync_ms: f64,
    pub ttf_ms: f64,
    /// Transactions verified while pooling, valid or not.
    pub verified: u64,
    pub failed: u64,
}

/// Rounds to the 6 decimals written to CSV, so every derived column is
/// computed from exactly the value a reader parses back.
pub fn quantize_ms(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn compute_block_tps(block_size: usize, consensus_ms: f64) -> Result<f64, MetricsError> {
    if consensus_ms <= 0.0 || consensus_ms.is_nan() {
        return Err(MetricsError::NonPositiveDuration(consensus_ms));
    }
    Ok(block_size as f64 * 1000.0 / consensus_ms)
}

/// Longest publish-to-commit latency among a block's transactions.
pub fn compute_ttf(commit_time_ms: f64, publish_times_ms: &[f64]) -> Result<f64, MetricsError> {
    publish_times_ms
        .iter()
        .map(|p| commit_time_ms - p)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
        .ok_or(MetricsError::Empty)
}

impl RoundMetrics {
    pub fn from_timings(round: u64, t: &PhaseTimings, block_size: usize) -> Result<Self, MetricsError> {
        let preprepare_ms = quantize_ms(t.preprepare_ms);
        let prepare_ms = quantize_ms(t.prepare_ms);
        let commit_ms = quantize_ms(t.commit_ms);
        let sync_ms = quantize_ms(t.sync_ms);
        let pooling_ms = quantize_ms(t.pooling_ms);
        let consensus_ms = quantize_ms(preprepare_ms + prepare_ms + commit_ms + sync_ms);
        let pool_tps = if pooling_ms > 0.0 {
            t.verified as f64 * 1000.0 / pooling_ms
        } else {
            0.0
        };
        Ok(Self {
            round,
            pooling_ms,
            preprepare_ms,
            prepare_ms,
            commit_ms,
            sync_ms,
            consensus_ms,
            total_ms: quantize_ms(pooling_ms + consensus_ms),
            ttf_ms: quantize_ms(t.ttf_ms),
            failed_tx: t.failed,
            pool_tps,
            block_tps: compute_block_tps(block_size, consensus_ms)?,
        })
    }
}

/// One row per round: the full row of the node whose consensus time is the
/// median for that round (lower middle for even counts). Taking a whole row
/// keeps each row internally consistent.
pub fn merge_node_rows(per_node: &[Vec<RoundMetrics>]) -> Vec<RoundMetrics> {
    let mut by_round: std::collections::BTreeMap<u64, Vec<RoundMetrics>> = Default::default();
    for rows in per_node {
        for r in rows {
            by_round.entry(r.round).or_default().push(*r);
        }
    }
    by_round
        .into_values()
        .map(|mut rows| {
            rows.sort_by(|a, b| a.consensus_ms.total_cmp(&b.consensus_ms));
            rows[(rows.len() - 1) / 2]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_tps_examples() {
        assert!((compute_block_tps(512, 496.28).unwrap() - 1031.67).abs() < 0.01);
        assert_eq!(compute_block_tps(512, 1000.0).unwrap(), 512.0);
        assert!((compute_block_tps(512, 504.06).unwrap() - 1015.75).abs() < 0.01);
        assert!(compute_block_tps(512, 0.0).is_err());
    }

    #[test]
    fn ttf_examples() {
        assert_eq!(compute_ttf(2200.0, &[0.0, 0.0]).unwrap(), 2200.0);
        assert_eq!(compute_ttf(1000.0, &[0.0, 500.0]).unwrap(), 1000.0);
        assert_eq!(compute_ttf(10.0, &[4.0]).unwrap(), 6.0);
        assert!(compute_ttf(1.0, &[]).is_err());
    }

    #[test]
    fn from_timings_is_additive() {
        let t = PhaseTimings {
            pooling_ms: 1756.6001234,
            preprepare_ms: 213.3333333,
            prepare_ms: 212.1111111,
            commit_ms: 27.7777777,
            sync_ms: 43.0123456,
            ttf_ms: 2196.29,
            verified: 716,
            failed: 204,
        };
        let r = RoundMetrics::from_timings(3, &t, 512).unwrap();
        let parts = r.preprepare_ms + r.prepare_ms + r.commit_ms + r.sync_ms;
        assert!((parts - r.consensus_ms).abs() < 1e-6);
        assert_eq!(r.block_tps, 512_000.0 / r.consensus_ms);
        assert!((r.total_ms - r.pooling_ms - r.consensus_ms).abs() < 1e-6);
    }

    #[test]
    fn merge_takes_median_consensus_row() {
        let row = |round, c: f64| RoundMetrics {
            round,
            pooling_ms: c,
            preprepare_ms: 0.0,
            prepare_ms: 0.0,
            commit_ms: 0.0,
            sync_ms: c,
            consensus_ms: c,
            total_ms: 2.0 * c,
            ttf_ms: c,
            failed_tx: 0,
            pool_tps: 0.0,
            block_tps: 512_000.0 / c,
        };
        let merged = merge_node_rows(&[vec![row(1, 30.0), row(2, 5.0)], vec![row(1, 10.0), row(2, 6.0)], vec![row(1, 20.0)]]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].consensus_ms, 20.0);
        assert_eq!(merged[1].consensus_ms, 5.0);
    }
}
