use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Fraud ratio per round range; rounds outside every range get ratio 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FraudSchedule {
    entries: Vec<(u64, u64, f64)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad fraud schedule entry `{entry}`: {reason}")]
pub struct ScheduleError {
    pub entry: String,
    pub reason: &'static str,
}

impl FraudSchedule {
    pub fn constant(ratio: f64) -> Self {
        Self {
            entries: vec![(1, u64::MAX, ratio)],
        }
    }

    /// `ratio` for rounds `1..=step`, doubling every `step` rounds up to
    /// `rounds`.
    pub fn doubling(start_ratio: f64, step: u64, rounds: u64) -> Self {
        let mut entries = Vec::new();
        let mut ratio = start_ratio;
        let mut first = 1;
        while first <= rounds {
            entries.push((first, (first + step - 1).min(rounds), ratio));
            ratio *= 2.0;
            first += step;
        }
        Self { entries }
    }

    /// The last matching entry wins.
    pub fn ratio_for(&self, round: u64) -> f64 {
        self.entries
            .iter()
            .rev()
            .find(|(a, b, _)| (*a..=*b).contains(&round))
            .map_or(0.0, |e| e.2)
    }
}

impl FromStr for FraudSchedule {
    type Err = ScheduleError;

    /// `start-end:ratio` entries separated by commas; `round:ratio` and
    /// `start-:ratio` (open ended) are accepted too.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for raw in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let err = |reason| ScheduleError {
                entry: raw.to_string(),
                reason,
            };
            let (range, ratio) = raw.split_once(':').ok_or(err("missing `:`"))?;
            let ratio: f64 = ratio.trim().parse().map_err(|_| err("ratio is not a number"))?;
            if !(ratio >= 0.0 && ratio.is_finite()) {
                return Err(err("ratio must be finite and non-negative"));
            }
            let parse_round = |v: &str| v.trim().parse::<u64>().map_err(|_| err("round is not an integer"));
            let (a, b) = match range.split_once('-') {
                Some((a, b)) if b.trim().is_empty() => (parse_round(a)?, u64::MAX),
                Some((a, b)) => (parse_round(a)?, parse_round(b)?),
                None => {
                    let r = parse_round(range)?;
                    (r, r)
                }
            };
            if a == 0 || b < a {
                return Err(err("range must satisfy 1 <= start <= end"));
            }
            entries.push((a, b, ratio));
        }
        Ok(Self { entries })
    }
}

impl fmt::Display for FraudSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(a, b, r)| {
                if *b == u64::MAX {
                    format!("{a}-:{r}")
                } else {
                    format!("{a}-{b}:{r}")
                }
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}
