//! Alignment probabilities between a private network and the public network,
//! thresholding, and the alignment score Q.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, Subgraph};

/// Sparse alignment probabilities from one owner's nodes onto public nodes,
/// with the qualification threshold sigma. Probabilities are inputs; nothing
/// here learns them.
#[derive(Debug, Clone)]
pub struct AlignmentMap {
    owner_id: String,
    entries: BTreeMap<(String, String), f64>,
    sigma: f64,
}

impl AlignmentMap {
    pub fn new(
        owner_id: impl Into<String>,
        entries: BTreeMap<(String, String), f64>,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::input(format!("sigma {sigma} outside (0,1]")));
        }
        for ((private, public), p) in &entries {
            if !(0.0..=1.0).contains(p) || !p.is_finite() {
                return Err(Error::input(format!(
                    "alignment probability {p} for ({private}, {public}) outside [0,1]"
                )));
            }
        }
        Ok(AlignmentMap {
            owner_id: owner_id.into(),
            entries,
            sigma,
        })
    }

    /// Checks that every entry references an existing private and public node.
    pub fn validate_against(
        &self,
        owner_net: &AttributedNetwork,
        public_net: &AttributedNetwork,
    ) -> Result<()> {
        for (private, public) in self.entries.keys() {
            if !owner_net.contains_node(private) {
                return Err(Error::input(format!(
                    "alignment entry references unknown private node `{private}` of `{}`",
                    owner_net.network_id()
                )));
            }
            if !public_net.contains_node(public) {
                return Err(Error::input(format!(
                    "alignment entry references unknown public node `{public}` of `{}`",
                    public_net.network_id()
                )));
            }
        }
        Ok(())
    }

    pub fn owner_id(&self) -> &str {
        &self.owner_id
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn entries(&self) -> &BTreeMap<(String, String), f64> {
        &self.entries
    }

    pub fn probability(&self, private: &str, public: &str) -> Option<f64> {
        self.entries
            .get(&(private.to_string(), public.to_string()))
            .copied()
    }

    /// Same entries under a different threshold.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.owner_id.clone(), self.entries.clone(), sigma)
    }

    /// Loads `private<TAB>public<TAB>probability` lines; `#` starts a comment.
    pub fn from_file(
        owner_id: impl Into<String>,
        path: impl AsRef<Path>,
        sigma: f64,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| {
            Error::input(format!(
                "cannot open alignment file {}: {e}",
                path.display()
            ))
        })?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.split_whitespace();
            let (private, public, value) =
                match (parts.next(), parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), Some(p), None) => (a, b, p),
                    _ => {
                        return Err(Error::Parse {
                            file: path.display().to_string(),
                            line: lineno + 1,
                            msg: format!(
                                "expected `private<TAB>public<TAB>probability`, got `{body}`"
                            ),
                        })
                    }
                };
            let p: f64 = value.parse().map_err(|_| Error::Parse {
                file: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad probability `{value}`"),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("probability {p} outside [0,1]"),
                });
            }
            entries.insert((private.to_string(), public.to_string()), p);
        }
        Self::new(owner_id, entries, sigma)
    }

    /// Canonical serialization, entries in lexicographic key order.
    pub fn write_file<W: Write>(&self, mut out: W) -> Result<()> {
        for ((private, public), p) in &self.entries {
            writeln!(out, "{private}\t{public}\t{p}")?;
        }
        Ok(())
    }
}

/// Pairs whose probability reaches sigma (the binary alignment matrix as a
/// sparse pair list), in lexicographic order.
pub fn threshold_matrix(map: &AlignmentMap) -> Vec<(String, String)> {
    map.entries
        .iter()
        .filter(|(_, p)| **p >= map.sigma)
        .map(|(k, _)| k.clone())
        .collect()
}

/// Alignment score between a private subgraph and a public subgraph:
/// `N_sigma/N(S) + N_sigma/N(U)` where `N_sigma` counts node pairs
/// (one node from each side) whose probability reaches sigma. Either side
/// empty scores 0. Connectivity of the inputs is the caller's contract.
pub fn q_score(s: &Subgraph, u: &Subgraph, map: &AlignmentMap) -> f64 {
    if s.is_empty() || u.is_empty() {
        return 0.0;
    }
    let mut qualifying = 0usize;
    for ((private, public), p) in &map.entries {
        if *p >= map.sigma && s.contains(private) && u.contains(public) {
            qualifying += 1;
        }
    }
    qualifying as f64 / s.node_count() as f64 + qualifying as f64 / u.node_count() as f64
}
