//! Data-owner-side optimization: private anomaly detection given the public
//! anomaly, and the best public alignment of the detected subgraph.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentMap;
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, Subgraph};
use crate::stats::{normalized_statistic_value, ScanConfig};

/// Hard cap on exhaustive enumeration (2^14 subsets).
pub const MAX_EXACT_NODES: usize = 14;

/// How many consecutive objective-losing expansion steps the greedy search
/// tolerates before rolling back to its best state. Crossing one or two weak
/// nodes is often required to reunite an anomalous region split by noise.
const EXPANSION_PATIENCE: usize = 3;

const TIE_EPS: f64 = 1e-12;

/// Search knobs shared by both owner-side searches.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Upper bound on greedy expansions per search.
    pub max_restarts: usize,
    /// How many lowest-p-value nodes seed the greedy search.
    pub seed_pool_size: usize,
    /// Seeds the extra-restart sampling; fixed seed means identical output.
    pub rng_seed: u64,
    /// Exhaustive search is used when the searched network has at most this
    /// many nodes (0 disables the exact path).
    pub exact_threshold: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_restarts: 12,
            seed_pool_size: 6,
            rng_seed: 0,
            exact_threshold: 10,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_restarts == 0 {
            return Err(Error::input("max_restarts must be at least 1"));
        }
        if self.exact_threshold > MAX_EXACT_NODES {
            return Err(Error::input(format!(
                "exact_threshold {} exceeds the enumeration cap {MAX_EXACT_NODES}",
                self.exact_threshold
            )));
        }
        Ok(())
    }
}

/// Everything one participant holds: its private network, its alignment onto
/// the public network, scoring configuration, and the current round state.
/// A state never references another owner's data.
#[derive(Debug, Clone)]
pub struct OwnerState {
    pub owner_id: String,
    pub network: AttributedNetwork,
    pub alignment: AlignmentMap,
    pub scan_cfg: ScanConfig,
    pub lambda: f64,
    pub current_s: Subgraph,
    pub current_u_local: Subgraph,
    /// Qualifying alignment pairs as (private index, public node id).
    qualifying: Vec<(usize, String)>,
    /// Per-node flag for p <= alpha.
    anomalous: Vec<bool>,
}

impl OwnerState {
    pub fn new(
        network: AttributedNetwork,
        alignment: AlignmentMap,
        scan_cfg: ScanConfig,
        lambda: f64,
        public_net: &AttributedNetwork,
    ) -> Result<Self> {
        scan_cfg.validate()?;
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::input(format!(
                "lambda {lambda} must be finite and >= 0"
            )));
        }
        if alignment.owner_id() != network.network_id() {
            return Err(Error::input(format!(
                "alignment owner `{}` does not match network `{}`",
                alignment.owner_id(),
                network.network_id()
            )));
        }
        alignment.validate_against(&network, public_net)?;
        let sigma = alignment.sigma();
        let qualifying: Vec<(usize, String)> = alignment
            .entries()
            .iter()
            .filter(|(_, p)| **p >= sigma)
            .map(|((private, public), _)| (network.index_of(private).unwrap(), public.clone()))
            .collect();
        let anomalous = (0..network.node_count())
            .map(|i| network.pvalue_at(i) <= scan_cfg.alpha)
            .collect();
        let owner_id = network.network_id().to_string();
        let current_s = network.empty_subgraph();
        let current_u_local = public_net.empty_subgraph();
        Ok(OwnerState {
            owner_id,
            network,
            alignment,
            scan_cfg,
            lambda,
            current_s,
            current_u_local,
            qualifying,
            anomalous,
        })
    }

    /// Qualifying-pair count from each private node into the given public
    /// node set, plus that set's size.
    fn anchor_counts(&self, public_u: &Subgraph) -> (Vec<u32>, usize) {
        let mut counts = vec![0u32; self.network.node_count()];
        for (idx, public) in &self.qualifying {
            if public_u.contains(public) {
                counts[*idx] += 1;
            }
        }
        (counts, public_u.node_count())
    }

    /// Combined objective of an explicit subgraph under a fixed public U.
    pub fn objective_of(&self, s: &Subgraph, public_u: &Subgraph) -> Result<f64> {
        if s.is_empty() {
            return Ok(0.0);
        }
        let (anchors, u_size) = self.anchor_counts(public_u);
        let mut n_alpha = 0usize;
        let mut n_sigma = 0u64;
        for node in s.nodes() {
            let idx = self.network.index_of(node).ok_or_else(|| {
                Error::input(format!(
                    "unknown node `{node}` in network `{}`",
                    self.owner_id
                ))
            })?;
            if self.anomalous[idx] {
                n_alpha += 1;
            }
            n_sigma += u64::from(anchors[idx]);
        }
        objective_from_counts(
            &self.scan_cfg,
            self.lambda,
            s.node_count(),
            n_alpha,
            n_sigma,
            u_size,
        )
    }
}

/// The objective both searches maximize: size-normalized scan statistic plus
/// `lambda` times half the alignment score, so both terms peak at 1.
pub fn combined_objective(f: f64, q: f64, lambda: f64) -> f64 {
    f + lambda * (q / 2.0)
}

fn objective_from_counts(
    cfg: &ScanConfig,
    lambda: f64,
    n: usize,
    n_alpha: usize,
    n_sigma: u64,
    u_size: usize,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let f = normalized_statistic_value(cfg, n_alpha, n)?;
    let q = if u_size == 0 {
        0.0
    } else {
        n_sigma as f64 / n as f64 + n_sigma as f64 / u_size as f64
    };
    Ok(combined_objective(f, q, lambda))
}

/// Candidate subgraph held as sorted dense indices with its objective.
#[derive(Debug, Clone)]
struct Candidate {
    nodes: Vec<usize>,
    objective: f64,
}

/// Prefer higher objective, then more nodes, then lexicographically smaller
/// node set. The greedy search keeps larger sets on ties: the normalized
/// scan statistic is flat across all-anomalous subgraphs of any size, and
/// shrinking ties would collapse detection to single nodes.
fn better_candidate_grow(a: &Candidate, b: &Candidate) -> bool {
    if a.objective > b.objective + TIE_EPS {
        return true;
    }
    if a.objective < b.objective - TIE_EPS {
        return false;
    }
    match a.nodes.len().cmp(&b.nodes.len()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.nodes < b.nodes,
    }
}

/// Prefer higher objective, then fewer nodes, then lexicographic order.
fn better_candidate_shrink(a: &Candidate, b: &Candidate) -> bool {
    if a.objective > b.objective + TIE_EPS {
        return true;
    }
    if a.objective < b.objective - TIE_EPS {
        return false;
    }
    match a.nodes.len().cmp(&b.nodes.len()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.nodes < b.nodes,
    }
}

/// Step (c1): connected private subgraph maximizing the combined objective
/// under the broadcast public anomaly.
///
/// Exhaustive when the network is small enough, greedy seed-expansion with
/// pruning otherwise. If nothing strictly beats the incumbent `current_s`,
/// the incumbent is returned unchanged, which keeps the per-owner objective
/// non-decreasing across rounds. An empty result means no subgraph scored
/// above zero.
pub fn detect_private_anomaly(
    state: &OwnerState,
    public_u: &Subgraph,
    search: &SearchConfig,
) -> Result<Subgraph> {
    search.validate()?;
    let net = &state.network;
    let n = net.node_count();
    let (anchors, u_size) = state.anchor_counts(public_u);

    let incumbent_obj = state.objective_of(&state.current_s, public_u)?;

    let best = if n <= search.exact_threshold && n <= MAX_EXACT_NODES {
        let cfg = state.scan_cfg;
        let lambda = state.lambda;
        let anomalous = &state.anomalous;
        exhaustive_counts_argmax(net, |idxs| {
            let n_alpha = idxs.iter().filter(|&&i| anomalous[i]).count();
            let n_sigma: u64 = idxs.iter().map(|&i| u64::from(anchors[i])).sum();
            objective_from_counts(&cfg, lambda, idxs.len(), n_alpha, n_sigma, u_size)
        })?
    } else {
        greedy_private_search(state, &anchors, u_size, search)?
    };

    if best.objective > incumbent_obj + TIE_EPS {
        Ok(net.subgraph_from_indices(&best.nodes))
    } else {
        Ok(state.current_s.clone())
    }
}

fn greedy_private_search(
    state: &OwnerState,
    anchors: &[u32],
    u_size: usize,
    search: &SearchConfig,
) -> Result<Candidate> {
    let net = &state.network;
    let n = net.node_count();

    // Seed pool: lowest p-values first, then every node aligned into U,
    // then random fill if restarts remain.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        net.pvalue_at(a)
            .partial_cmp(&net.pvalue_at(b))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut seeds: Vec<usize> = Vec::new();
    let mut seeded = vec![false; n];
    for &idx in order.iter().take(search.seed_pool_size) {
        if !seeded[idx] {
            seeded[idx] = true;
            seeds.push(idx);
        }
    }
    let mut anchored: Vec<usize> = (0..n).filter(|&i| anchors[i] > 0 && !seeded[i]).collect();
    anchored.sort_by(|&a, &b| anchors[b].cmp(&anchors[a]).then(a.cmp(&b)));
    for idx in anchored {
        seeded[idx] = true;
        seeds.push(idx);
    }
    // every pool and qualifying seed runs; max_restarts only pads the list
    // with extra random seeds when it is short
    if seeds.len() < search.max_restarts {
        let mut rest: Vec<usize> = (0..n).filter(|&i| !seeded[i]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(search.rng_seed);
        rest.shuffle(&mut rng);
        for idx in rest {
            if seeds.len() >= search.max_restarts {
                break;
            }
            seeds.push(idx);
        }
    }

    let mut best = Candidate {
        nodes: Vec::new(),
        objective: 0.0,
    };
    for &seed in &seeds {
        let candidate = grow_and_prune(
            net,
            &state.scan_cfg,
            state.lambda,
            anchors,
            u_size,
            &state.anomalous,
            seed,
        )?;
        if candidate.objective > 0.0 && better_candidate_grow(&candidate, &best) {
            best = candidate;
        }
    }
    Ok(best)
}

fn grow_and_prune(
    net: &AttributedNetwork,
    cfg: &ScanConfig,
    lambda: f64,
    anchors: &[u32],
    u_size: usize,
    anomalous: &[bool],
    seed: usize,
) -> Result<Candidate> {
    let n = net.node_count();
    let mut in_s = vec![false; n];
    let mut members: Vec<usize> = vec![seed];
    in_s[seed] = true;
    let mut n_alpha = usize::from(anomalous[seed]);
    let mut n_sigma = u64::from(anchors[seed]);
    let mut obj = objective_from_counts(cfg, lambda, 1, n_alpha, n_sigma, u_size)?;

    // Expansion accepts flat moves (the normalized statistic does not change
    // while the subgraph stays all-anomalous, and stopping there would leave
    // the rest of an anomalous region undiscovered) and tolerates a short
    // run of losing moves, rolling back to the best prefix afterwards.
    let mut considered = vec![false; n];
    let mut best_obj = obj;
    let mut best_len = members.len();
    let mut dips = 0usize;
    loop {
        let mut frontier: Vec<usize> = Vec::new();
        for &u in &members {
            for &v in net.neighbors_of(u) {
                if !in_s[v] && !considered[v] {
                    considered[v] = true;
                    frontier.push(v);
                }
            }
        }
        for &v in &frontier {
            considered[v] = false;
        }
        frontier.sort_unstable();

        let mut best_delta = f64::NEG_INFINITY;
        let mut best_node = None;
        for &v in &frontier {
            let cand = objective_from_counts(
                cfg,
                lambda,
                members.len() + 1,
                n_alpha + usize::from(anomalous[v]),
                n_sigma + u64::from(anchors[v]),
                u_size,
            )?;
            let delta = cand - obj;
            if delta > best_delta + TIE_EPS {
                best_delta = delta;
                best_node = Some(v);
            }
        }
        let Some(v) = best_node else { break };
        in_s[v] = true;
        members.push(v);
        n_alpha += usize::from(anomalous[v]);
        n_sigma += u64::from(anchors[v]);
        obj = objective_from_counts(cfg, lambda, members.len(), n_alpha, n_sigma, u_size)?;
        if obj > best_obj + TIE_EPS {
            best_obj = obj;
            best_len = members.len();
            dips = 0;
        } else if dips == 0 && obj >= best_obj - TIE_EPS {
            // extend along a plateau, but only before any dip: after one,
            // a merely equal state must not displace the rollback point
            best_len = members.len();
        } else {
            dips += 1;
            if dips > EXPANSION_PATIENCE {
                break;
            }
        }
    }
    // roll back to the best prefix
    while members.len() > best_len {
        let v = members.pop().unwrap();
        in_s[v] = false;
        n_alpha -= usize::from(anomalous[v]);
        n_sigma -= u64::from(anchors[v]);
    }
    obj = objective_from_counts(cfg, lambda, members.len(), n_alpha, n_sigma, u_size)?;

    // Prune: drop any non-cut node whose removal strictly improves the
    // objective, best improvement first.
    loop {
        let mut best_delta = TIE_EPS;
        let mut best_node = None;
        for &v in &members {
            if members.len() > 1 && !removal_keeps_connected(net, &members, &in_s, v) {
                continue;
            }
            let cand = objective_from_counts(
                cfg,
                lambda,
                members.len() - 1,
                n_alpha - usize::from(anomalous[v]),
                n_sigma - u64::from(anchors[v]),
                u_size,
            )?;
            let delta = cand - obj;
            if delta > best_delta {
                best_delta = delta;
                best_node = Some(v);
            }
        }
        match best_node {
            Some(v) => {
                in_s[v] = false;
                members.retain(|&m| m != v);
                n_alpha -= usize::from(anomalous[v]);
                n_sigma -= u64::from(anchors[v]);
                obj = objective_from_counts(cfg, lambda, members.len(), n_alpha, n_sigma, u_size)?;
            }
            None => break,
        }
    }

    members.sort_unstable();
    Ok(Candidate {
        objective: obj,
        nodes: members,
    })
}

fn removal_keeps_connected(
    net: &AttributedNetwork,
    members: &[usize],
    in_s: &[bool],
    removed: usize,
) -> bool {
    let remaining = members.len() - 1;
    if remaining <= 1 {
        return true;
    }
    let start = *members.iter().find(|&&m| m != removed).unwrap();
    let mut seen = vec![false; in_s.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1usize;
    while let Some(u) = stack.pop() {
        for &v in net.neighbors_of(u) {
            if v != removed && in_s[v] && !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == remaining
}

/// Step (c2): connected public subgraph maximizing the alignment score for
/// the owner's current private anomaly.
///
/// The sigma-qualifying image of S seeds the search; disconnected image
/// components are kept as separate candidates and also joined with shortest
/// connector paths, then pruned while the score improves. Ties prefer fewer
/// nodes, so connectors survive only when the joined subgraph strictly beats
/// every component alone.
pub fn best_public_alignment(
    state: &OwnerState,
    public_net: &AttributedNetwork,
    search: &SearchConfig,
) -> Result<Subgraph> {
    search.validate()?;
    let s = &state.current_s;
    if s.is_empty() {
        return Ok(public_net.empty_subgraph());
    }
    let ns = s.node_count();

    // Qualifying-pair weight per public node.
    let mut weights = vec![0u32; public_net.node_count()];
    for (idx, public) in &state.qualifying {
        if s.contains(state.network.name_of(*idx)) {
            if let Some(b) = public_net.index_of(public) {
                weights[b] += 1;
            }
        }
    }

    if public_net.node_count() <= search.exact_threshold
        && public_net.node_count() <= MAX_EXACT_NODES
    {
        let best =
            exhaustive_counts_argmax(public_net, |idxs| Ok(q_from_weights(&weights, idxs, ns)))?;
        return Ok(public_net.subgraph_from_indices(&best.nodes));
    }

    let image: Vec<usize> = (0..weights.len()).filter(|&b| weights[b] > 0).collect();
    if image.is_empty() {
        return Ok(public_net.empty_subgraph());
    }

    let components = index_components(public_net, &image);
    let mut candidates: Vec<Candidate> = Vec::new();
    for comp in &components {
        candidates.push(prune_public(public_net, &weights, comp.clone(), ns));
    }
    if components.len() > 1 {
        if let Some(merged) = steiner_join(public_net, &components) {
            candidates.push(prune_public(public_net, &weights, merged, ns));
        }
    }

    let mut best: Option<Candidate> = None;
    for cand in candidates {
        let replace = match &best {
            None => true,
            Some(b) => better_candidate_shrink(&cand, b),
        };
        if replace {
            best = Some(cand);
        }
    }
    match best {
        Some(b) if b.objective > 0.0 => Ok(public_net.subgraph_from_indices(&b.nodes)),
        _ => Ok(public_net.empty_subgraph()),
    }
}

fn q_from_weights(weights: &[u32], members: &[usize], ns: usize) -> f64 {
    if members.is_empty() || ns == 0 {
        return 0.0;
    }
    let n_sigma: u64 = members.iter().map(|&b| u64::from(weights[b])).sum();
    n_sigma as f64 / ns as f64 + n_sigma as f64 / members.len() as f64
}

fn prune_public(
    net: &AttributedNetwork,
    weights: &[u32],
    mut members: Vec<usize>,
    ns: usize,
) -> Candidate {
    members.sort_unstable();
    let mut in_u = vec![false; net.node_count()];
    for &m in &members {
        in_u[m] = true;
    }
    let mut obj = q_from_weights(weights, &members, ns);
    loop {
        let mut best_delta = TIE_EPS;
        let mut best_node = None;
        for &v in &members {
            if members.len() > 1 && !removal_keeps_connected(net, &members, &in_u, v) {
                continue;
            }
            let trial: Vec<usize> = members.iter().copied().filter(|&m| m != v).collect();
            let delta = q_from_weights(weights, &trial, ns) - obj;
            if delta > best_delta {
                best_delta = delta;
                best_node = Some(v);
            }
        }
        match best_node {
            Some(v) => {
                in_u[v] = false;
                members.retain(|&m| m != v);
                obj = q_from_weights(weights, &members, ns);
            }
            None => break,
        }
    }
    Candidate {
        objective: obj,
        nodes: members,
    }
}

/// Connected components of an index set under the network adjacency,
/// ordered by smallest member.
fn index_components(net: &AttributedNetwork, indices: &[usize]) -> Vec<Vec<usize>> {
    let mut in_set = vec![false; net.node_count()];
    for &i in indices {
        in_set[i] = true;
    }
    let mut assigned = vec![false; net.node_count()];
    let mut components = Vec::new();
    for &start in indices {
        if assigned[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        assigned[start] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &v in net.neighbors_of(u) {
                if in_set[v] && !assigned[v] {
                    assigned[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Joins disconnected seed components with shortest connector paths, fewest
/// added nodes first. Returns None when the public graph cannot connect them.
fn steiner_join(net: &AttributedNetwork, components: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut groups: Vec<BTreeSet<usize>> = components
        .iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    while groups.len() > 1 {
        // BFS outward from the first group to the nearest node of any other.
        let mut dist = vec![usize::MAX; net.node_count()];
        let mut parent = vec![usize::MAX; net.node_count()];
        let mut queue = std::collections::VecDeque::new();
        for &u in groups[0].iter() {
            dist[u] = 0;
            queue.push_back(u);
        }
        let mut hit: Option<(usize, usize)> = None; // (group index, contact node)
        'bfs: while let Some(u) = queue.pop_front() {
            for &v in net.neighbors_of(u) {
                if dist[v] != usize::MAX {
                    continue;
                }
                dist[v] = dist[u] + 1;
                parent[v] = u;
                for (gi, g) in groups.iter().enumerate().skip(1) {
                    if g.contains(&v) {
                        hit = Some((gi, v));
                        break 'bfs;
                    }
                }
                queue.push_back(v);
            }
        }
        let (gi, contact) = hit?;
        let mut merged: BTreeSet<usize> = groups[0].clone();
        merged.extend(groups[gi].iter().copied());
        let mut cur = contact;
        while dist[cur] != 0 {
            merged.insert(cur);
            cur = parent[cur];
        }
        let keep: Vec<BTreeSet<usize>> = groups
            .drain(..)
            .enumerate()
            .filter(|(i, _)| *i != 0 && *i != gi)
            .map(|(_, g)| g)
            .collect();
        groups = Vec::with_capacity(keep.len() + 1);
        groups.push(merged);
        groups.extend(keep);
    }
    Some(groups.pop()?.into_iter().collect())
}

/// Enumerates every connected node subset (plus the empty set) of a small
/// network and returns the objective maximizer. Ties prefer the smaller node
/// count, then the lexicographically smaller node set.
pub fn exhaustive_connected_argmax<F>(
    net: &AttributedNetwork,
    mut objective: F,
    max_nodes: usize,
) -> Result<Subgraph>
where
    F: FnMut(&Subgraph) -> f64,
{
    let n = net.node_count();
    if n > max_nodes {
        return Err(Error::input(format!(
            "network `{}` has {n} nodes, above the requested cap {max_nodes}",
            net.network_id()
        )));
    }
    if n > MAX_EXACT_NODES {
        return Err(Error::input(format!(
            "network `{}` has {n} nodes, above the enumeration cap {MAX_EXACT_NODES}",
            net.network_id()
        )));
    }
    let best = exhaustive_counts_argmax(net, |idxs| {
        let sub = net.subgraph_from_indices(idxs);
        Ok(objective(&sub))
    })?;
    Ok(net.subgraph_from_indices(&best.nodes))
}

/// Mask enumeration over all connected subsets, empty set included, with the
/// documented tie ordering (smaller set, then lexicographic).
fn exhaustive_counts_argmax<F>(net: &AttributedNetwork, mut value: F) -> Result<Candidate>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let n = net.node_count();
    debug_assert!(n <= MAX_EXACT_NODES);
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            net.neighbors_of(i)
                .iter()
                .fold(0u32, |m, &j| m | (1u32 << j))
        })
        .collect();
    let mut best = Candidate {
        nodes: Vec::new(),
        objective: value(&[])?,
    };
    let mut scratch = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        if !mask_connected(mask, &adj) {
            continue;
        }
        scratch.clear();
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            scratch.push(v);
            m &= m - 1;
        }
        let obj = value(&scratch)?;
        let cand = Candidate {
            objective: obj,
            nodes: scratch.clone(),
        };
        if better_candidate_shrink(&cand, &best) {
            best = cand;
        }
    }
    Ok(best)
}

fn mask_connected(mask: u32, adj: &[u32]) -> bool {
    if mask == 0 {
        return true;
    }
    let start = mask.trailing_zeros() as usize;
    let mut seen = 1u32 << start;
    let mut frontier = seen;
    while frontier != 0 {
        let mut next = 0u32;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v] & mask;
        }
        next &= !seen;
        seen |= next;
        frontier = next;
    }
    seen == mask
}
