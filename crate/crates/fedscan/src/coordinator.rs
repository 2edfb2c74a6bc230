//! Server-side aggregation: sorting participant reports, coalition
//! formation, partition scoring, and selection of the new public anomaly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, induced_subgraph, AttributedNetwork, Subgraph};

/// The only owner-to-server message: the owner's public anomaly node set and
/// two scalar scores. It never carries private node ids, edges, or p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantReport {
    pub owner_id: String,
    pub public_nodes: BTreeSet<String>,
    pub size: usize,
    pub q_value: f64,
    pub f_value: f64,
}

impl ParticipantReport {
    pub fn new(
        owner_id: impl Into<String>,
        public_nodes: BTreeSet<String>,
        q_value: f64,
        f_value: f64,
    ) -> Self {
        let size = public_nodes.len();
        ParticipantReport {
            owner_id: owner_id.into(),
            public_nodes,
            size,
            q_value,
            f_value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size != self.public_nodes.len() {
            return Err(Error::input(format!(
                "report from `{}` declares size {} but carries {} nodes",
                self.owner_id,
                self.size,
                self.public_nodes.len()
            )));
        }
        if !self.q_value.is_finite() || !self.f_value.is_finite() {
            return Err(Error::input(format!(
                "report from `{}` carries non-finite scores",
                self.owner_id
            )));
        }
        Ok(())
    }
}

/// Disjoint cover of the owners into coalitions, with the per-coalition and
/// total alignment errors. Coalitions are stored canonically: members sorted,
/// coalitions ordered by their first member.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub coalitions: Vec<Vec<String>>,
    pub per_coalition_error: Vec<f64>,
    pub total_error: f64,
}

impl Partition {
    fn from_groups(groups: Vec<Vec<String>>, reports: &[ParticipantReport]) -> Result<Self> {
        let mut tagged: Vec<(Vec<String>, f64)> = Vec::with_capacity(groups.len());
        for mut group in groups {
            group.sort();
            let err = coalition_error(&group, reports)?;
            tagged.push((group, err));
        }
        tagged.sort_by(|a, b| a.0.cmp(&b.0));
        let total_error = tagged.iter().map(|(_, e)| e).sum();
        let (coalitions, per_coalition_error) = tagged.into_iter().unzip();
        Ok(Partition {
            coalitions,
            per_coalition_error,
            total_error,
        })
    }
}

fn report_index(reports: &[ParticipantReport]) -> Result<BTreeMap<&str, &ParticipantReport>> {
    let mut map = BTreeMap::new();
    for r in reports {
        if map.insert(r.owner_id.as_str(), r).is_some() {
            return Err(Error::input(format!(
                "duplicate report for owner `{}`",
                r.owner_id
            )));
        }
    }
    Ok(map)
}

/// Error contributed by one coalition: each member adds
/// `(1 - size_i / size_C) * q_i`, the size-weighted share of its alignment
/// score that the coalition dilutes. Singletons contribute zero.
fn coalition_error(group: &[String], reports: &[ParticipantReport]) -> Result<f64> {
    let by_owner = report_index(reports)?;
    if group.len() <= 1 {
        return Ok(0.0);
    }
    let mut total = 0usize;
    for owner in group {
        let r = by_owner
            .get(owner.as_str())
            .ok_or_else(|| Error::input(format!("coalition references unknown owner `{owner}`")))?;
        if r.size == 0 {
            return Err(Error::input(format!(
                "owner `{owner}` reports an empty public anomaly inside a multi-owner coalition"
            )));
        }
        total += r.size;
    }
    let total = total as f64;
    let mut err = 0.0;
    for owner in group {
        let r = by_owner[owner.as_str()];
        err += (1.0 - r.size as f64 / total) * r.q_value;
    }
    Ok(err)
}

/// Step (s1): ascending report size, ties by owner id. Duplicate owners and
/// internally inconsistent reports are rejected.
pub fn sort_reports(reports: &[ParticipantReport]) -> Result<Vec<ParticipantReport>> {
    report_index(reports)?;
    for report in reports {
        report.validate()?;
    }
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| {
        a.size
            .cmp(&b.size)
            .then_with(|| a.owner_id.cmp(&b.owner_id))
    });
    Ok(sorted)
}

/// Total partition error of an owner grouping, which must cover each
/// reporting owner exactly once.
pub fn partition_error(grouping: &[Vec<String>], reports: &[ParticipantReport]) -> Result<f64> {
    let by_owner = report_index(reports)?;
    let mut seen = BTreeSet::new();
    for group in grouping {
        for owner in group {
            if !seen.insert(owner.as_str()) {
                return Err(Error::input(format!(
                    "owner `{owner}` appears in two coalitions"
                )));
            }
            if !by_owner.contains_key(owner.as_str()) {
                return Err(Error::input(format!(
                    "coalition references unknown owner `{owner}`"
                )));
            }
        }
    }
    if seen.len() != reports.len() {
        return Err(Error::input(format!(
            "grouping covers {} owners, expected {}",
            seen.len(),
            reports.len()
        )));
    }
    let mut total = 0.0;
    for group in grouping {
        total += coalition_error(group, reports)?;
    }
    Ok(total)
}

/// Step (s2): scan owners in ascending size order, growing one coalition at a
/// time. An owner joins while every member of the would-be coalition keeps
/// its relative alignment error `(1 - size_j / size_C)` within `theta`;
/// otherwise the coalition closes and the owner opens a new one. Owners with
/// empty public anomalies always stand alone. With `theta = 0` any join fails
/// and the result is the all-singleton partition.
pub fn form_partition(sorted_reports: &[ParticipantReport], theta: f64) -> Result<Partition> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::input(format!("theta {theta} outside [0,1]")));
    }
    for pair in sorted_reports.windows(2) {
        let order = pair[0]
            .size
            .cmp(&pair[1].size)
            .then_with(|| pair[0].owner_id.cmp(&pair[1].owner_id));
        if order == std::cmp::Ordering::Greater {
            return Err(Error::input("reports are not sorted by ascending size"));
        }
    }
    report_index(sorted_reports)?;

    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<&ParticipantReport> = Vec::new();
    for report in sorted_reports {
        if report.size == 0 {
            groups.push(vec![report.owner_id.clone()]);
            continue;
        }
        if current.is_empty() {
            current.push(report);
            continue;
        }
        let joined_total: usize = current.iter().map(|r| r.size).sum::<usize>() + report.size;
        let all_within = current
            .iter()
            .chain(std::iter::once(&report))
            .all(|r| 1.0 - r.size as f64 / joined_total as f64 <= theta);
        if all_within {
            current.push(report);
        } else {
            groups.push(current.iter().map(|r| r.owner_id.clone()).collect());
            current = vec![report];
        }
    }
    if !current.is_empty() {
        groups.push(current.iter().map(|r| r.owner_id.clone()).collect());
    }
    Partition::from_groups(groups, sorted_reports)
}

/// Step (s3): selects one coalition and unions its members' public anomalies
/// into the new public anomaly, induced on the public network. A
/// disconnected union resolves to the component covering the most reported
/// nodes (ties: larger, then lexicographically smaller).
///
/// Selection prefers the coalition with the largest total alignment score,
/// breaking ties by the smaller coalition error and then owner order. Taking
/// the minimum error alone would always hand the round to a singleton (a
/// lone owner dilutes nothing, so its error is exactly zero) and the public
/// anomaly could never grow past one owner's upload; the alignment mass is
/// what distinguishes an informative coalition from a degenerate one.
pub fn select_public_anomaly(
    partition: &Partition,
    reports: &[ParticipantReport],
    public_net: &AttributedNetwork,
) -> Result<Subgraph> {
    let by_owner = report_index(reports)?;
    let covered: usize = partition.coalitions.iter().map(Vec::len).sum();
    if covered != reports.len() {
        return Err(Error::input(format!(
            "partition covers {covered} owners, expected {}",
            reports.len()
        )));
    }
    if reports.iter().all(|r| r.public_nodes.is_empty()) {
        return Ok(public_net.empty_subgraph());
    }

    let mut best: Option<(usize, f64, f64)> = None; // (index, error, q_sum)
    for (i, group) in partition.coalitions.iter().enumerate() {
        let error = partition.per_coalition_error[i];
        let q_sum: f64 = group
            .iter()
            .map(|owner| {
                by_owner
                    .get(owner.as_str())
                    .map(|r| r.q_value)
                    .ok_or_else(|| {
                        Error::input(format!("partition references unknown owner `{owner}`"))
                    })
            })
            .sum::<Result<f64>>()?;
        let replace = match best {
            None => true,
            Some((_, best_err, best_q)) => {
                q_sum > best_q + 1e-15
                    || ((q_sum - best_q).abs() <= 1e-15 && error < best_err - 1e-15)
            }
        };
        if replace {
            best = Some((i, error, q_sum));
        }
    }
    let chosen = &partition.coalitions[best.expect("partition has at least one coalition").0];

    let mut union_nodes: BTreeSet<String> = BTreeSet::new();
    for owner in chosen {
        union_nodes.extend(by_owner[owner.as_str()].public_nodes.iter().cloned());
    }
    if union_nodes.is_empty() {
        return Ok(public_net.empty_subgraph());
    }
    let union = induced_subgraph(public_net, &union_nodes)?;
    let components = connected_components(&union);
    if components.len() <= 1 {
        return Ok(union);
    }
    let mut best_comp: Option<(usize, usize)> = None; // (index, membership count)
    for (i, comp) in components.iter().enumerate() {
        let membership: usize = chosen
            .iter()
            .map(|owner| {
                by_owner[owner.as_str()]
                    .public_nodes
                    .iter()
                    .filter(|n| comp.contains(n))
                    .count()
            })
            .sum();
        let replace = match best_comp {
            None => true,
            Some((bi, bm)) => {
                membership > bm
                    || (membership == bm && comp.node_count() > components[bi].node_count())
                // equal count and size: components are ordered by smallest
                // node id already, so the earlier one stays
            }
        };
        if replace {
            best_comp = Some((i, membership));
        }
    }
    Ok(components[best_comp.unwrap().0].clone())
}

/// Oracle: enumerates every set partition of the owners (at most 8, so at
/// most 4140 partitions) and returns the minimum-error one. Ties prefer
/// fewer coalitions, then lexicographic order. Partitions that put an
/// empty-anomaly owner into a multi-owner coalition are infeasible and
/// skipped.
pub fn brute_force_optimal_partition(reports: &[ParticipantReport]) -> Result<Partition> {
    let by_owner = report_index(reports)?;
    let owners: Vec<&str> = by_owner.keys().copied().collect();
    let n = owners.len();
    if n == 0 {
        return Err(Error::input("no reports to partition"));
    }
    if n > 8 {
        return Err(Error::input(format!(
            "brute-force partitioning capped at 8 owners, got {n}"
        )));
    }

    let mut assignment = vec![0usize; n];
    let mut best: Option<Partition> = None;
    enumerate_partitions(&mut assignment, 1, 1, &mut |assign, blocks| {
        let mut groups: Vec<Vec<String>> = vec![Vec::new(); blocks];
        for (i, &b) in assign.iter().enumerate() {
            groups[b].push(owners[i].to_string());
        }
        let partition = match Partition::from_groups(groups, reports) {
            Ok(p) => p,
            Err(_) => return, // infeasible: empty anomaly in a multi-owner coalition
        };
        let replace = match &best {
            None => true,
            Some(b) => {
                partition.total_error < b.total_error - 1e-15
                    || ((partition.total_error - b.total_error).abs() <= 1e-15
                        && (partition.coalitions.len() < b.coalitions.len()
                            || (partition.coalitions.len() == b.coalitions.len()
                                && partition.coalitions < b.coalitions)))
            }
        };
        if replace {
            best = Some(partition);
        }
    });
    best.ok_or_else(|| Error::input("no feasible partition"))
}

/// Restricted-growth-string enumeration of set partitions. `assignment[0]`
/// is fixed to block 0; position `i` may use blocks `0..=max_used`.
fn enumerate_partitions<F: FnMut(&[usize], usize)>(
    assignment: &mut Vec<usize>,
    pos: usize,
    blocks: usize,
    visit: &mut F,
) {
    if pos == assignment.len() {
        visit(assignment, blocks);
        return;
    }
    for b in 0..=blocks {
        assignment[pos] = b;
        let next_blocks = blocks.max(b + 1);
        enumerate_partitions(assignment, pos + 1, next_blocks, visit);
    }
    assignment[pos] = 0;
}
