//! Empirical p-values from observation histories and the nonparametric scan
//! statistics (Berk-Jones and Higher Criticism) with size normalization.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_connected, AttributedNetwork, Subgraph};

/// Per-node observation series of a common length T (counts per snapshot).
#[derive(Debug, Clone, Default)]
pub struct ObservationHistory {
    series: BTreeMap<String, Vec<f64>>,
    length: usize,
}

impl ObservationHistory {
    pub fn new(series: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut length = 0usize;
        for (node, values) in &series {
            if values.is_empty() {
                return Err(Error::input(format!(
                    "empty observation series for node `{node}`"
                )));
            }
            if length == 0 {
                length = values.len();
            } else if values.len() != length {
                return Err(Error::input(format!(
                    "observation series for node `{node}` has length {}, expected {length}",
                    values.len()
                )));
            }
            for v in values {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::input(format!(
                        "observation for node `{node}` is {v}, expected finite and >= 0"
                    )));
                }
            }
        }
        if length == 0 {
            return Err(Error::input("observation history has no nodes"));
        }
        Ok(ObservationHistory { series, length })
    }

    /// Number of snapshots T.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn series_for(&self, node: &str) -> Option<&[f64]> {
        self.series.get(node).map(Vec::as_slice)
    }

    /// Reads a CSV with header `node,t1,t2,...,tT` and one row per node.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open history {}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => {
                return Err(Error::input(format!("history {} is empty", path.display())));
            }
        };
        let columns = header.split(',').count();
        if columns < 2 || !header.starts_with("node") {
            return Err(Error::Parse {
                file: path.display().to_string(),
                line: 1,
                msg: "expected header `node,t1,t2,...`".to_string(),
            });
        }
        let mut series = BTreeMap::new();
        for (lineno, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let node = parts.next().unwrap_or("").trim().to_string();
            let values: Vec<f64> = parts
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        file: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("bad observation `{v}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != columns - 1 {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!(
                        "expected {} observations, got {}",
                        columns - 1,
                        values.len()
                    ),
                });
            }
            if series.insert(node.clone(), values).is_some() {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("duplicate history row for node `{node}`"),
                });
            }
        }
        Self::new(series)
    }
}

/// Which nonparametric scan statistic scores a subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatistic {
    #[serde(rename = "bj")]
    BerkJones,
    #[serde(rename = "hc")]
    HigherCriticism,
}

impl std::str::FromStr for ScanStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bj" => Ok(ScanStatistic::BerkJones),
            "hc" => Ok(ScanStatistic::HigherCriticism),
            other => Err(Error::input(format!(
                "unknown statistic `{other}`, expected bj|hc"
            ))),
        }
    }
}

impl std::fmt::Display for ScanStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanStatistic::BerkJones => write!(f, "bj"),
            ScanStatistic::HigherCriticism => write!(f, "hc"),
        }
    }
}

/// Significance level, statistic choice, and normalization switch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha: f64,
    pub statistic: ScanStatistic,
    pub normalize: bool,
}

impl ScanConfig {
    pub fn new(alpha: f64, statistic: ScanStatistic, normalize: bool) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::input(format!("alpha {alpha} outside (0,1)")));
        }
        Ok(ScanConfig {
            alpha,
            statistic,
            normalize,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha {} outside (0,1)", self.alpha)));
        }
        Ok(())
    }
}

/// Empirical p-values at snapshot `t` (1-based): for each node, the
/// proportion of its T observations at least as large as the one at `t`.
/// The comparison set includes the current snapshot, so values lie in
/// [1/T, 1] and never reach 0.
pub fn empirical_pvalues(history: &ObservationHistory, t: usize) -> Result<BTreeMap<String, f64>> {
    let len = history.length();
    if t == 0 || t > len {
        return Err(Error::input(format!(
            "snapshot index {t} out of range 1..={len}"
        )));
    }
    let mut out = BTreeMap::new();
    for (node, values) in &history.series {
        let current = values[t - 1];
        let count = values.iter().filter(|v| **v >= current).count();
        out.insert(node.clone(), count as f64 / len as f64);
    }
    Ok(out)
}

/// One-sided Kullback-Leibler divergence between observed proportion `a` and
/// expected proportion `b`: `a ln(a/b) + (1-a) ln((1-a)/(1-b))` when `a >= b`,
/// 0 otherwise, with the convention 0 ln 0 = 0.
pub fn kl_divergence(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !a.is_finite() {
        return Err(Error::input(format!(
            "observed proportion {a} outside [0,1]"
        )));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::input(format!(
            "expected proportion {b} outside (0,1)"
        )));
    }
    if a < b {
        return Ok(0.0);
    }
    let left = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    let right = if a == 1.0 {
        0.0
    } else {
        (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
    };
    Ok(left + right)
}

/// Berk-Jones statistic: `n * KL(n_alpha/n, alpha)`.
pub fn bj_score(alpha: f64, n_alpha: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::input(
            "Berk-Jones statistic undefined for an empty vertex count",
        ));
    }
    if n_alpha > n {
        return Err(Error::input(format!("n_alpha {n_alpha} exceeds n {n}")));
    }
    Ok(n as f64 * kl_divergence(n_alpha as f64 / n as f64, alpha)?)
}

/// Higher Criticism statistic: `(n_alpha - n alpha) / sqrt(n alpha (1-alpha))`.
/// May be negative when the subgraph is under-represented in small p-values.
pub fn hc_score(alpha: f64, n_alpha: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::input(
            "Higher Criticism statistic undefined for an empty vertex count",
        ));
    }
    if n_alpha > n {
        return Err(Error::input(format!("n_alpha {n_alpha} exceeds n {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha {alpha} outside (0,1)")));
    }
    let n = n as f64;
    Ok((n_alpha as f64 - n * alpha) / (n * alpha * (1.0 - alpha)).sqrt())
}

/// Raw statistic value from the anomalous count and the size.
pub fn statistic_value(cfg: &ScanConfig, n_alpha: usize, n: usize) -> Result<f64> {
    match cfg.statistic {
        ScanStatistic::BerkJones => bj_score(cfg.alpha, n_alpha, n),
        ScanStatistic::HigherCriticism => hc_score(cfg.alpha, n_alpha, n),
    }
}

/// Statistic value divided by the score of an all-anomalous subgraph of the
/// same size, so every size maps to a maximum of 1.
pub fn normalized_statistic_value(cfg: &ScanConfig, n_alpha: usize, n: usize) -> Result<f64> {
    let raw = statistic_value(cfg, n_alpha, n)?;
    let ceiling = statistic_value(cfg, n, n)?;
    Ok(raw / ceiling)
}

/// Scan score of a subgraph: counts nodes with p <= alpha, applies the
/// configured statistic, and optionally normalizes by the all-anomalous
/// ceiling for the subgraph's size. The empty subgraph scores 0.
pub fn scan_score(s: &Subgraph, net: &AttributedNetwork, cfg: &ScanConfig) -> Result<f64> {
    cfg.validate()?;
    if s.network_id() != net.network_id() {
        return Err(Error::contract(format!(
            "subgraph on `{}` scored against network `{}`",
            s.network_id(),
            net.network_id()
        )));
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    if !is_connected(s) {
        return Err(Error::contract(format!(
            "scan score requires a connected subgraph, got {}",
            s.describe()
        )));
    }
    let mut n_alpha = 0usize;
    for node in s.nodes() {
        let p = net.pvalue(node).ok_or_else(|| {
            Error::input(format!(
                "unknown node `{node}` in network `{}`",
                net.network_id()
            ))
        })?;
        if p <= cfg.alpha {
            n_alpha += 1;
        }
    }
    let n = s.node_count();
    if cfg.normalize {
        normalized_statistic_value(cfg, n_alpha, n)
    } else {
        statistic_value(cfg, n_alpha, n)
    }
}
