//! Synthetic scenarios with planted correlated anomalies, evaluation
//! metrics, and the on-disk bundle format.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentMap;
use crate::error::{Error, Result};
use crate::federation::{FederationConfig, NetworkFiles, OwnerFiles, OwnerInput, RunManifest};
use crate::graph::{AttributedNetwork, Subgraph};

/// Parameters of one synthetic scenario. Every owner gets a connected random
/// network with one planted connected anomaly, aligned onto one planted
/// connected public anomaly. Background p-values are uniform on (0,1].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub rng_seed: u64,
    pub n_owners: usize,
    pub nodes_per_owner: usize,
    pub public_nodes: usize,
    /// Extra random edges per node beyond the spanning tree.
    pub edge_density: f64,
    /// Forces pure tree topology, ignoring `edge_density`.
    #[serde(default)]
    pub tree: bool,
    pub planted_public_size: usize,
    pub planted_private_size: usize,
    /// P-value assigned to planted anomaly nodes.
    pub anomaly_p_low: f64,
    /// Probability value written for true anchor entries.
    pub alignment_true_prob: f64,
    /// Chance that a private node also gets one spurious high-confidence
    /// entry to a random public node.
    pub alignment_false_prob: f64,
    /// Fraction of each owner's nodes whose p-values are resampled.
    pub noise_fraction: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            rng_seed: 0,
            n_owners: 3,
            nodes_per_owner: 200,
            public_nodes: 100,
            edge_density: 0.5,
            tree: false,
            planted_public_size: 15,
            planted_private_size: 20,
            anomaly_p_low: 0.01,
            alignment_true_prob: 0.95,
            alignment_false_prob: 0.05,
            noise_fraction: 0.1,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_owners == 0 {
            return Err(Error::input("scenario needs at least one owner"));
        }
        if self.nodes_per_owner == 0 || self.public_nodes == 0 {
            return Err(Error::input("networks need at least one node"));
        }
        if self.planted_private_size > self.nodes_per_owner {
            return Err(Error::input(format!(
                "planted private size {} exceeds owner size {}",
                self.planted_private_size, self.nodes_per_owner
            )));
        }
        if self.planted_public_size > self.public_nodes {
            return Err(Error::input(format!(
                "planted public size {} exceeds public size {}",
                self.planted_public_size, self.public_nodes
            )));
        }
        if !(self.anomaly_p_low > 0.0 && self.anomaly_p_low <= 1.0) {
            return Err(Error::input("anomaly_p_low outside (0,1]"));
        }
        for (name, v) in [
            ("alignment_true_prob", self.alignment_true_prob),
            ("alignment_false_prob", self.alignment_false_prob),
            ("noise_fraction", self.noise_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{name} {v} outside [0,1]")));
            }
        }
        if self.edge_density < 0.0 || !self.edge_density.is_finite() {
            return Err(Error::input("edge_density must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| {
            Error::input(format!("cannot open scenario spec {}: {e}", path.display()))
        })?;
        let spec: ScenarioSpec = serde_json::from_reader(file)
            .map_err(|e| Error::input(format!("scenario spec {}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// What the generator planted: per-owner anomaly node sets, the public
/// anomaly node set, and the true anchor links (owner, private, public).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub owner_anomalies: BTreeMap<String, BTreeSet<String>>,
    pub public_anomaly: BTreeSet<String>,
    pub anchors: BTreeSet<(String, String, String)>,
}

/// A generated scenario, ready to run or to write as a bundle.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub public: AttributedNetwork,
    pub owners: Vec<OwnerInput>,
    pub truth: GroundTruth,
}

pub const PUBLIC_NETWORK_ID: &str = "public";

fn node_name(i: usize) -> String {
    format!("n{i:04}")
}

fn owner_name(i: usize) -> String {
    format!("owner{}", i + 1)
}

/// Uniform random labeled tree on `n` nodes (decoded from a random sequence).
fn random_tree_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
            let mut degree = vec![1usize; n];
            for &s in &seq {
                degree[s] += 1;
            }
            let mut leaves: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
            let mut edges = Vec::with_capacity(n - 1);
            for &s in &seq {
                let leaf = *leaves.iter().next().unwrap();
                leaves.remove(&leaf);
                edges.push((leaf.min(s), leaf.max(s)));
                degree[leaf] -= 1;
                degree[s] -= 1;
                if degree[s] == 1 {
                    leaves.insert(s);
                }
            }
            let mut rest = leaves.into_iter();
            let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
            edges.push((a.min(b), a.max(b)));
            edges
        }
    }
}

/// Connected random topology: a uniform spanning tree plus extra edges up to
/// the requested density.
fn random_connected_edges(
    n: usize,
    density: f64,
    tree: bool,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<(usize, usize)> {
    let mut edges: BTreeSet<(usize, usize)> = random_tree_edges(n, rng).into_iter().collect();
    if tree || n < 2 {
        return edges;
    }
    let target = (density * n as f64).floor() as usize;
    let mut added = 0usize;
    let mut attempts = 0usize;
    let max_attempts = target * 20 + 100;
    while added < target && attempts < max_attempts {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        if edges.insert((u.min(v), u.max(v))) {
            added += 1;
        }
    }
    edges
}

/// Random connected node subset of the requested size, grown from a random
/// start across the adjacency. Returned in growth order, so every prefix is
/// connected and consecutive entries are structurally close.
fn random_connected_subset(
    n: usize,
    size: usize,
    edges: &BTreeSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if size == 0 {
        return Vec::new();
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let start = rng.gen_range(0..n);
    let mut chosen = vec![start];
    let mut in_set = vec![false; n];
    in_set[start] = true;
    let mut frontier: Vec<usize> = adjacency[start].clone();
    frontier.sort_unstable();
    while chosen.len() < size {
        frontier.retain(|v| !in_set[*v]);
        frontier.dedup();
        if frontier.is_empty() {
            break;
        }
        let pick = frontier.remove(rng.gen_range(0..frontier.len()));
        in_set[pick] = true;
        chosen.push(pick);
        let mut extra = adjacency[pick].clone();
        extra.sort_unstable();
        frontier.extend(extra.into_iter().filter(|v| !in_set[*v]));
    }
    chosen
}

fn uniform_open_zero(rng: &mut ChaCha8Rng) -> f64 {
    // uniform on (0,1]
    1.0 - rng.gen::<f64>()
}

/// Generates a full scenario deterministically from the spec's seed.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // Public network: topology only, every p-value 1.
    let public_edges =
        random_connected_edges(spec.public_nodes, spec.edge_density, spec.tree, &mut rng);
    let planted_public = random_connected_subset(
        spec.public_nodes,
        spec.planted_public_size,
        &public_edges,
        &mut rng,
    );
    let public = AttributedNetwork::new(
        PUBLIC_NETWORK_ID,
        public_edges
            .iter()
            .map(|&(a, b)| (node_name(a), node_name(b)))
            .collect::<Vec<_>>(),
        (0..spec.public_nodes)
            .map(|i| (node_name(i), 1.0))
            .collect(),
    )?;
    // growth order: consecutive entries are structurally close
    let planted_public_names: Vec<String> = planted_public.iter().map(|&i| node_name(i)).collect();

    let mut truth = GroundTruth {
        public_anomaly: planted_public_names.iter().cloned().collect(),
        ..GroundTruth::default()
    };

    let mut owners = Vec::with_capacity(spec.n_owners);
    for o in 0..spec.n_owners {
        let owner_id = owner_name(o);
        let n = spec.nodes_per_owner;
        let edges = random_connected_edges(n, spec.edge_density, spec.tree, &mut rng);
        let planted = random_connected_subset(n, spec.planted_private_size, &edges, &mut rng);

        let mut pvalues: Vec<f64> = (0..n).map(|_| uniform_open_zero(&mut rng)).collect();
        for &i in &planted {
            pvalues[i] = spec.anomaly_p_low;
        }
        let noisy = (spec.noise_fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in order.iter().take(noisy) {
            pvalues[i] = uniform_open_zero(&mut rng);
        }

        // True anchors: planted private nodes onto planted public nodes in
        // matching growth order, so neighborhoods map onto neighborhoods the
        // way aligned networks do and every planted public node is covered
        // when the private anomaly is at least as large. Each private node
        // gets two consecutive candidate matches, keeping the per-public
        // anchor multiplicity nearly uniform; a skewed multiplicity would
        // make one doubly-anchored node outscore full coverage.
        let mut entries: BTreeMap<(String, String), f64> = BTreeMap::new();
        let m = planted_public_names.len();
        if m > 0 {
            for (k, &i) in planted.iter().enumerate() {
                let private = node_name(i);
                let mut partners = vec![k % m];
                if m > 1 {
                    partners.push((k + 1) % m);
                }
                for pi in partners {
                    let public_node = planted_public_names[pi].clone();
                    entries.insert(
                        (private.clone(), public_node.clone()),
                        spec.alignment_true_prob,
                    );
                    truth
                        .anchors
                        .insert((owner_id.clone(), private.clone(), public_node));
                }
            }
        }
        // Spurious confident entries anywhere in the graph.
        for i in 0..n {
            if rng.gen::<f64>() < spec.alignment_false_prob {
                let target = node_name(rng.gen_range(0..spec.public_nodes));
                entries
                    .entry((node_name(i), target))
                    .or_insert(spec.alignment_true_prob);
            }
        }

        let network = AttributedNetwork::new(
            owner_id.clone(),
            edges
                .iter()
                .map(|&(a, b)| (node_name(a), node_name(b)))
                .collect::<Vec<_>>(),
            (0..n).map(|i| (node_name(i), pvalues[i])).collect(),
        )?;
        let alignment = AlignmentMap::new(owner_id.clone(), entries, 0.8)?;
        truth
            .owner_anomalies
            .insert(owner_id, planted.iter().map(|&i| node_name(i)).collect());
        owners.push(OwnerInput { network, alignment });
    }

    Ok(Scenario {
        spec: spec.clone(),
        public,
        owners,
        truth,
    })
}

/// Detection quality over all owner nodes, micro-averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tpr: f64,
    pub fnr: f64,
    pub anchor_count: usize,
    /// Set when some rate had an empty denominator and was reported as 0.
    pub degenerate: bool,
}

impl MetricsReport {
    pub fn csv_header() -> &'static str {
        "precision,recall,f1,accuracy,tpr,fnr,anchor_count,degenerate"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.precision,
            self.recall,
            self.f1,
            self.accuracy,
            self.tpr,
            self.fnr,
            self.anchor_count,
            self.degenerate
        )
    }
}

/// Confusion-matrix metrics of detected anomaly subgraphs against the planted
/// truth, micro-averaged over every node of every owner listed in
/// `node_counts`. Owners absent from `detected` count as empty detections.
pub fn evaluate_metrics(
    detected: &BTreeMap<String, Subgraph>,
    truth: &BTreeMap<String, BTreeSet<String>>,
    node_counts: &BTreeMap<String, usize>,
) -> Result<MetricsReport> {
    for owner in detected.keys().chain(truth.keys()) {
        if !node_counts.contains_key(owner) {
            return Err(Error::input(format!("no node count for owner `{owner}`")));
        }
    }
    let empty_nodes = BTreeSet::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let total: usize = node_counts.values().sum();
    for owner in node_counts.keys() {
        let det = detected
            .get(owner)
            .map(|s| s.nodes())
            .unwrap_or(&empty_nodes);
        let tru = truth.get(owner).unwrap_or(&empty_nodes);
        tp += det.intersection(tru).count();
        fp += det.difference(tru).count();
        fn_ += tru.difference(det).count();
    }
    let tn = total - tp - fp - fn_;

    let mut degenerate = false;
    let mut rate = |num: usize, den: usize| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = rate(tp, tp + fp);
    let recall = rate(tp, tp + fn_);
    let fnr = rate(fn_, tp + fn_);
    let accuracy = rate(tp + tn, total);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        accuracy,
        tpr: recall,
        fnr,
        anchor_count: 0,
        degenerate,
    })
}

/// Counts true anchor triples recovered by the detection: the private node
/// must sit in the owner's final anomaly and the public node in the final
/// public anomaly.
pub fn anchor_count(
    final_s: &BTreeMap<String, Subgraph>,
    final_u: &Subgraph,
    truth_anchors: &BTreeSet<(String, String, String)>,
) -> usize {
    truth_anchors
        .iter()
        .filter(|(owner, private, public)| {
            final_u.contains(public)
                && final_s
                    .get(owner)
                    .map(|s| s.contains(private))
                    .unwrap_or(false)
        })
        .count()
}

/// File names inside a scenario bundle directory.
pub mod bundle {
    use super::*;

    pub const SCENARIO_FILE: &str = "scenario.json";
    pub const MANIFEST_FILE: &str = "run_manifest.json";
    pub const TRUTH_FILE: &str = "truth.tsv";

    fn edges_file(id: &str) -> String {
        format!("{id}.edges")
    }

    fn pvalues_file(id: &str) -> String {
        format!("{id}.pvalues")
    }

    fn alignment_file(id: &str) -> String {
        format!("{id}.align")
    }

    /// Writes the scenario as a directory of edge lists, p-value files,
    /// alignment files, the ground truth, the spec echo, and a ready-to-run
    /// manifest. Output bytes are deterministic.
    pub fn write_bundle(scenario: &Scenario, dir: &Path) -> Result<RunManifest> {
        std::fs::create_dir_all(dir)?;

        let spec_json = serde_json::to_vec_pretty(&scenario.spec)?;
        write_atomic(&dir.join(SCENARIO_FILE), &with_newline(spec_json))?;

        let mut buf = Vec::new();
        scenario.public.write_edge_list(&mut buf)?;
        write_atomic(&dir.join(edges_file(scenario.public.network_id())), &buf)?;
        let mut buf = Vec::new();
        scenario.public.write_pvalue_file(&mut buf)?;
        write_atomic(&dir.join(pvalues_file(scenario.public.network_id())), &buf)?;

        let mut owner_files = Vec::new();
        for owner in &scenario.owners {
            let id = owner.network.network_id();
            let mut buf = Vec::new();
            owner.network.write_edge_list(&mut buf)?;
            write_atomic(&dir.join(edges_file(id)), &buf)?;
            let mut buf = Vec::new();
            owner.network.write_pvalue_file(&mut buf)?;
            write_atomic(&dir.join(pvalues_file(id)), &buf)?;
            let mut buf = Vec::new();
            owner.alignment.write_file(&mut buf)?;
            write_atomic(&dir.join(alignment_file(id)), &buf)?;
            owner_files.push(OwnerFiles {
                owner_id: id.to_string(),
                edges: edges_file(id),
                pvalues: Some(pvalues_file(id)),
                history: None,
                snapshot: None,
                alignment: alignment_file(id),
            });
        }

        let mut buf = Vec::new();
        write_truth(&scenario.truth, scenario.public.network_id(), &mut buf)?;
        write_atomic(&dir.join(TRUTH_FILE), &buf)?;

        let manifest = RunManifest {
            config: FederationConfig {
                rng_seed: scenario.spec.rng_seed,
                ..FederationConfig::default()
            },
            public: NetworkFiles {
                network_id: scenario.public.network_id().to_string(),
                edges: edges_file(scenario.public.network_id()),
                pvalues: Some(pvalues_file(scenario.public.network_id())),
            },
            owners: owner_files,
            audit_log: None,
        };
        manifest.save(dir.join(MANIFEST_FILE))?;
        Ok(manifest)
    }

    fn with_newline(mut bytes: Vec<u8>) -> Vec<u8> {
        bytes.push(b'\n');
        bytes
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Ground truth rows: `owner<TAB>node` marks an anomaly node (the public
    /// network id marks public anomaly rows); `owner<TAB>private<TAB>public`
    /// marks a true anchor link.
    pub fn write_truth<W: Write>(truth: &GroundTruth, public_id: &str, mut out: W) -> Result<()> {
        for node in &truth.public_anomaly {
            writeln!(out, "{public_id}\t{node}")?;
        }
        for (owner, nodes) in &truth.owner_anomalies {
            for node in nodes {
                writeln!(out, "{owner}\t{node}")?;
            }
        }
        for (owner, private, public) in &truth.anchors {
            writeln!(out, "{owner}\t{private}\t{public}")?;
        }
        Ok(())
    }

    pub fn read_truth(path: &Path, public_id: &str) -> Result<GroundTruth> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open truth file {}: {e}", path.display())))?;
        let mut truth = GroundTruth::default();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            match fields.as_slice() {
                [owner, node] => {
                    if *owner == public_id {
                        truth.public_anomaly.insert(node.to_string());
                    } else {
                        truth
                            .owner_anomalies
                            .entry(owner.to_string())
                            .or_default()
                            .insert(node.to_string());
                    }
                }
                [owner, private, public] => {
                    truth.anchors.insert((
                        owner.to_string(),
                        private.to_string(),
                        public.to_string(),
                    ));
                }
                _ => {
                    return Err(Error::Parse {
                        file: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("expected 2 or 3 fields, got {}", fields.len()),
                    })
                }
            }
        }
        Ok(truth)
    }
}
