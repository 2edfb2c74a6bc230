//! The round loop between participants and the coordinator: broadcast the
//! public anomaly, detect locally, align publicly, aggregate, repeat until
//! the public anomaly stabilizes.
//!
//! Owner-to-coordinator traffic goes through an in-process bus holding the
//! wire encoding, so the privacy gate validates real serialized records
//! rather than in-memory objects.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{q_score, AlignmentMap};
use crate::coordinator::{form_partition, select_public_anomaly, sort_reports, ParticipantReport};
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, Subgraph};
use crate::participant::{
    best_public_alignment, combined_objective, detect_private_anomaly, OwnerState, SearchConfig,
};
use crate::stats::{empirical_pvalues, scan_score, ObservationHistory, ScanConfig, ScanStatistic};

/// Full configuration of a federation run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub statistic: ScanStatistic,
    pub max_rounds: usize,
    pub search: SearchConfig,
    pub rng_seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            alpha: 0.15,
            sigma: 0.8,
            lambda: 1.0,
            theta: 0.75,
            statistic: ScanStatistic::BerkJones,
            max_rounds: 20,
            search: SearchConfig::default(),
            rng_seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::input(format!("sigma {} outside (0,1)", self.sigma)));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::input(format!(
                "lambda {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::input(format!("theta {} outside [0,1]", self.theta)));
        }
        if self.max_rounds == 0 {
            return Err(Error::input("max_rounds must be at least 1"));
        }
        self.search.validate()
    }
}

/// One owner's inputs to a run.
#[derive(Debug, Clone)]
pub struct OwnerInput {
    pub network: AttributedNetwork,
    pub alignment: AlignmentMap,
}

/// Per-owner state recorded for one round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OwnerRound {
    pub s_nodes: BTreeSet<String>,
    pub f: f64,
    pub q: f64,
}

/// One round of the trace. `objective` is the best combined objective seen
/// up to and including this round; the raw per-round value is recoverable as
/// the sum of `f + lambda * q / 2` over the owners.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub u_nodes: BTreeSet<String>,
    pub owners: BTreeMap<String, OwnerRound>,
    pub objective: f64,
}

/// Outcome of a run: the per-round trace, convergence flag, and the
/// best-objective state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationResult {
    pub config: FederationConfig,
    pub rounds: Vec<RoundTrace>,
    pub converged: bool,
    pub final_u: Subgraph,
    pub final_s: BTreeMap<String, Subgraph>,
}

impl FederationResult {
    /// Canonical serialized form; identical inputs produce identical bytes.
    pub fn to_canonical_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

/// A finished run plus the message bus contents for auditing.
#[derive(Debug, Clone)]
pub struct FederationRun {
    pub result: FederationResult,
    pub message_log: Vec<String>,
}

/// Combined objective of a set of owner states against one public anomaly:
/// the sum over owners of `F(S_i) + lambda * Q(S_i, U) / 2`.
pub fn federation_objective(owners: &[OwnerState], public_u: &Subgraph) -> Result<f64> {
    let mut total = 0.0;
    for state in owners {
        let f = scan_score(&state.current_s, &state.network, &state.scan_cfg)?;
        let q = q_score(&state.current_s, public_u, &state.alignment);
        total += combined_objective(f, q, state.lambda);
    }
    Ok(total)
}

const REPORT_FIELDS: [&str; 6] = [
    "owner_id",
    "public_nodes",
    "size",
    "q_value",
    "f_value",
    "round",
];

/// Wire form of a participant report. The field set is closed; anything else
/// is a privacy violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub owner_id: String,
    pub public_nodes: Vec<String>,
    pub size: usize,
    pub q_value: f64,
    pub f_value: f64,
    pub round: usize,
}

/// Wire form of the coordinator's broadcast.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadcastRecord {
    pub round: usize,
    pub u_nodes: Vec<String>,
}

/// Validates one raw report record against the closed schema and the public
/// network. Fields outside the schema and node ids that are not public nodes
/// are privacy violations; structural defects are input errors.
pub fn validate_report(
    raw: &str,
    public_net: &AttributedNetwork,
) -> Result<(ParticipantReport, usize)> {
    let value: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| Error::input(format!("malformed report record: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::input("report record is not a JSON object"))?;
    for key in obj.keys() {
        if !REPORT_FIELDS.contains(&key.as_str()) {
            return Err(Error::privacy(format!(
                "report record carries disallowed field `{key}`"
            )));
        }
    }
    for field in REPORT_FIELDS {
        if !obj.contains_key(field) {
            return Err(Error::input(format!(
                "report record missing field `{field}`"
            )));
        }
    }
    let record: ReportRecord = serde_json::from_value(value.clone())
        .map_err(|e| Error::input(format!("malformed report record: {e}")))?;
    for pair in record.public_nodes.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::input(format!(
                "report from `{}` lists public nodes out of canonical order",
                record.owner_id
            )));
        }
    }
    if record.size != record.public_nodes.len() {
        return Err(Error::input(format!(
            "report from `{}` declares size {} but carries {} nodes",
            record.owner_id,
            record.size,
            record.public_nodes.len()
        )));
    }
    if !record.q_value.is_finite() || !record.f_value.is_finite() {
        return Err(Error::input(format!(
            "report from `{}` carries non-finite scores",
            record.owner_id
        )));
    }
    for node in &record.public_nodes {
        if !public_net.contains_node(node) {
            return Err(Error::privacy(format!(
                "report from `{}` carries node id `{node}` that is not a public-network node",
                record.owner_id
            )));
        }
    }
    let report = ParticipantReport::new(
        record.owner_id,
        record.public_nodes.into_iter().collect(),
        record.q_value,
        record.f_value,
    );
    Ok((report, record.round))
}

/// Validates one line of a message log: report records go through the full
/// privacy gate, broadcast records through the closed broadcast schema.
pub fn audit_message_line(line: &str, public_net: &AttributedNetwork) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| Error::input(format!("malformed log record: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::input("log record is not a JSON object"))?;
    if obj.contains_key("owner_id") {
        validate_report(line, public_net)?;
        return Ok(());
    }
    let record: BroadcastRecord = serde_json::from_value(value)
        .map_err(|e| Error::input(format!("malformed broadcast record: {e}")))?;
    for node in &record.u_nodes {
        if !public_net.contains_node(node) {
            return Err(Error::input(format!(
                "broadcast carries unknown public node `{node}`"
            )));
        }
    }
    Ok(())
}

fn owner_search_seed(cfg: &FederationConfig, owner_index: usize) -> u64 {
    (cfg.rng_seed ^ cfg.search.rng_seed)
        .wrapping_add((owner_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the full loop. Round 0 starts from an empty public anomaly (the
/// alignment term vanishes, so detection is purely local); every later round
/// broadcasts the coordinator's latest public anomaly. An owner re-uploads
/// the broadcast anomaly instead of its own when its own does not strictly
/// improve its alignment score. The loop stops when the public anomaly node
/// set repeats or `max_rounds` is reached; the returned final state is the
/// best-objective round.
pub fn run_federation(
    cfg: &FederationConfig,
    owners: Vec<OwnerInput>,
    public_net: &AttributedNetwork,
) -> Result<FederationRun> {
    cfg.validate()?;
    if owners.is_empty() {
        return Err(Error::input("federation needs at least one owner"));
    }
    let scan_cfg = ScanConfig::new(cfg.alpha, cfg.statistic, true)?;
    let mut seen_ids = BTreeSet::new();
    let mut states: Vec<OwnerState> = Vec::with_capacity(owners.len());
    for input in owners {
        let id = input.network.network_id().to_string();
        if !seen_ids.insert(id.clone()) {
            return Err(Error::input(format!("duplicate owner id `{id}`")));
        }
        if id == public_net.network_id() {
            return Err(Error::input(format!(
                "owner id `{id}` collides with the public network id"
            )));
        }
        let alignment = input.alignment.with_sigma(cfg.sigma)?;
        states.push(OwnerState::new(
            input.network,
            alignment,
            scan_cfg,
            cfg.lambda,
            public_net,
        )?);
    }

    let mut u_current = public_net.empty_subgraph();
    let mut log: Vec<String> = Vec::new();
    let mut traces: Vec<RoundTrace> = Vec::new();
    let mut best_raw = f64::NEG_INFINITY;
    let mut final_u = public_net.empty_subgraph();
    let mut final_s: BTreeMap<String, Subgraph> = states
        .iter()
        .map(|s| (s.owner_id.clone(), s.network.empty_subgraph()))
        .collect();
    let mut converged = false;

    for round in 0..cfg.max_rounds {
        // Participant side, one independent unit of work per owner.
        let outputs: Vec<(String, f64)> = states
            .par_iter_mut()
            .enumerate()
            .map(|(i, state)| -> Result<(String, f64)> {
                let search = SearchConfig {
                    rng_seed: owner_search_seed(cfg, i),
                    ..cfg.search
                };
                state.current_s = detect_private_anomaly(state, &u_current, &search)?;
                state.current_u_local = best_public_alignment(state, public_net, &search)?;
                let f_value = scan_score(&state.current_s, &state.network, &state.scan_cfg)?;
                let q_own = q_score(&state.current_s, &state.current_u_local, &state.alignment);
                let q_broadcast = q_score(&state.current_s, &u_current, &state.alignment);
                let reported = if q_own > q_broadcast {
                    state.current_u_local.clone()
                } else {
                    u_current.clone()
                };
                let record = ReportRecord {
                    owner_id: state.owner_id.clone(),
                    public_nodes: reported.nodes().iter().cloned().collect(),
                    size: reported.node_count(),
                    q_value: q_score(&state.current_s, &reported, &state.alignment),
                    f_value,
                    round,
                };
                Ok((serde_json::to_string(&record)?, f_value))
            })
            .collect::<Result<Vec<_>>>()?;

        // Coordinator side: every record crosses the privacy gate.
        let mut reports = Vec::with_capacity(outputs.len());
        for (line, _) in &outputs {
            log.push(line.clone());
            let (report, record_round) = validate_report(line, public_net)?;
            if record_round != round {
                return Err(Error::input(format!(
                    "report from `{}` labeled round {record_round}, expected {round}",
                    report.owner_id
                )));
            }
            reports.push(report);
        }
        let sorted = sort_reports(&reports)?;
        let partition = form_partition(&sorted, cfg.theta)?;
        let u_next = select_public_anomaly(&partition, &sorted, public_net)?;
        let broadcast = BroadcastRecord {
            round,
            u_nodes: u_next.nodes().iter().cloned().collect(),
        };
        log.push(serde_json::to_string(&broadcast)?);

        let mut owners_trace = BTreeMap::new();
        let mut raw = 0.0;
        for (state, (_, f_value)) in states.iter().zip(&outputs) {
            let q = q_score(&state.current_s, &u_next, &state.alignment);
            raw += combined_objective(*f_value, q, cfg.lambda);
            owners_trace.insert(
                state.owner_id.clone(),
                OwnerRound {
                    s_nodes: state.current_s.nodes().clone(),
                    f: *f_value,
                    q,
                },
            );
        }
        if raw >= best_raw {
            best_raw = raw;
            final_u = u_next.clone();
            final_s = states
                .iter()
                .map(|s| (s.owner_id.clone(), s.current_s.clone()))
                .collect();
        }
        traces.push(RoundTrace {
            round,
            u_nodes: u_next.nodes().clone(),
            owners: owners_trace,
            objective: best_raw,
        });

        if u_next.nodes() == u_current.nodes() {
            converged = true;
            break;
        }
        u_current = u_next;
    }

    Ok(FederationRun {
        result: FederationResult {
            config: *cfg,
            rounds: traces,
            converged,
            final_u,
            final_s,
        },
        message_log: log,
    })
}

/// Files for one network in a run manifest; paths are relative to the
/// manifest location. Without a p-value file the network is loaded as
/// topology-only with every p-value set to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFiles {
    pub network_id: String,
    pub edges: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvalues: Option<String>,
}

/// Files for one owner: an edge list, exactly one of a p-value file or an
/// observation history (with optional snapshot index), and an alignment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwnerFiles {
    pub owner_id: String,
    pub edges: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvalues: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<usize>,
    pub alignment: String,
}

/// Manifest naming every input file plus the run configuration. A run is
/// reproducible from its manifest alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: FederationConfig,
    pub public: NetworkFiles,
    pub owners: Vec<OwnerFiles>,
    /// Optional message log to validate through the privacy gate before the
    /// run starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_log: Option<String>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open manifest {}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_reader(file)
            .map_err(|e| Error::input(format!("manifest {}: {e}", path.display())))?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Loads the public network and all owner inputs, resolving file names
    /// against `base`.
    pub fn load_inputs(&self, base: &Path) -> Result<(AttributedNetwork, Vec<OwnerInput>)> {
        let public = match &self.public.pvalues {
            Some(pv) => AttributedNetwork::from_files(
                self.public.network_id.clone(),
                base.join(&self.public.edges),
                base.join(pv),
            )?,
            None => AttributedNetwork::from_edge_file_uniform(
                self.public.network_id.clone(),
                base.join(&self.public.edges),
                1.0,
            )?,
        };
        let mut owners = Vec::with_capacity(self.owners.len());
        for files in &self.owners {
            let pvalues = match (&files.pvalues, &files.history) {
                (Some(_), Some(_)) => {
                    return Err(Error::input(format!(
                        "owner `{}` names both a p-value file and a history",
                        files.owner_id
                    )));
                }
                (Some(pv), None) => crate::graph::read_pvalue_file(base.join(pv))?,
                (None, Some(h)) => {
                    let history = ObservationHistory::from_csv(base.join(h))?;
                    let t = files.snapshot.unwrap_or(history.length());
                    empirical_pvalues(&history, t)?
                }
                (None, None) => {
                    return Err(Error::input(format!(
                        "owner `{}` needs a p-value file or a history",
                        files.owner_id
                    )));
                }
            };
            let edges = crate::graph::read_edge_list(base.join(&files.edges))?;
            let network = AttributedNetwork::new(files.owner_id.clone(), edges, pvalues)?;
            let alignment = AlignmentMap::from_file(
                files.owner_id.clone(),
                base.join(&files.alignment),
                self.config.sigma,
            )?;
            owners.push(OwnerInput { network, alignment });
        }
        Ok((public, owners))
    }
}
