use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series is empty")]
    Empty,
    #[error("percentage change from zero")]
    ZeroBase,
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("column {index} has {len} samples, expected {expected}")]
    RaggedColumns { index: usize, len: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn sorted(series: &[f64]) -> Vec<f64> {
    let mut v = series.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn five_number_summary(series: &[f64]) -> Result<SummaryStats, StatsError> {
    if series.is_empty() {
        return Err(StatsError::Empty);
    }
    let v = sorted(series);
    Ok(SummaryStats {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

pub fn median(series: &[f64]) -> Result<f64, StatsError> {
    five_number_summary(series).map(|s| s.median)
}

pub fn pct_change(before: f64, after: f64) -> Result<f64, StatsError> {
    if before == 0.0 {
        return Err(StatsError::ZeroBase);
    }
    Ok((after - before) / before * 100.0)
}

/// Pearson r, or `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties share their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Correlation {
    Defined(f64),
    /// At least one of the two columns is constant.
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(v) => Some(v),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined(v) => write!(f, "{v:.3}"),
            Correlation::Undefined => f.write_str("undef"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub size: usize,
    pub entries: Vec<Correlation>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Correlation {
        self.entries[i * self.size + j]
    }
}

pub fn pearson_matrix(columns: &[Vec<f64>]) -> Result<CorrelationMatrix, StatsError> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    for (index, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(StatsError::RaggedColumns {
                index,
                len: c.len(),
                expected: n,
            });
        }
    }
    let size = columns.len();
    let mut entries = vec![Correlation::Undefined; size * size];
    for i in 0..size {
        for j in i..size {
            let c = match pearson(&columns[i], &columns[j]) {
                Some(_) if i == j => Correlation::Defined(1.0),
                Some(r) => Correlation::Defined(r),
                None => Correlation::Undefined,
            };
            entries[i * size + j] = c;
            entries[j * size + i] = c;
        }
    }
    Ok(CorrelationMatrix { size, entries })
}
