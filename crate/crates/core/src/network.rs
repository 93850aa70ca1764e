//! Weighted coordination networks over account identifiers and their
//! connected-component reports.
//!
//! One type serves both the directed rapid-retweet network and the
//! undirected similar-tweet network. Every edge keeps the evidence entries
//! that produced it, so each weight stays recomputable from the raw stream.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ingest::TweetStream;

pub type AccountId = String;

/// One contributing observation behind an edge. `event_at` is the creation
/// time of the later tweet (the retweet, or the later member of the pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    SimilarPair {
        tweet_a: String,
        tweet_b: String,
        score: f64,
        delta_t: i64,
        event_at: i64,
    },
    RapidRetweet {
        retweet_id: String,
        delta_t: i64,
        event_at: i64,
    },
}

impl Evidence {
    pub fn delta_t(&self) -> i64 {
        match self {
            Evidence::SimilarPair { delta_t, .. } => *delta_t,
            Evidence::RapidRetweet { delta_t, .. } => *delta_t,
        }
    }

    pub fn event_at(&self) -> i64 {
        match self {
            Evidence::SimilarPair { event_at, .. } => *event_at,
            Evidence::RapidRetweet { event_at, .. } => *event_at,
        }
    }

    /// Tweet ids this observation references.
    pub fn tweet_ids(&self) -> Vec<&str> {
        match self {
            Evidence::SimilarPair { tweet_a, tweet_b, .. } => vec![tweet_a, tweet_b],
            Evidence::RapidRetweet { retweet_id, .. } => vec![retweet_id],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeData {
    pub weight: u64,
    /// Empty on networks re-imported from graph files; otherwise
    /// `weight == evidence.len()`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<Evidence>,
}

/// Weighted graph over account ids. Directed edges run promoter → promoted;
/// undirected edges are keyed with endpoints in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationNetwork {
    pub directed: bool,
    pub edges: BTreeMap<(AccountId, AccountId), EdgeData>,
}

impl CoordinationNetwork {
    pub fn new(directed: bool) -> Self {
        CoordinationNetwork {
            directed,
            edges: BTreeMap::new(),
        }
    }

    /// Canonical key for an endpoint pair under this network's direction.
    pub fn edge_key(&self, a: &str, b: &str) -> (AccountId, AccountId) {
        if self.directed || a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn add_evidence(&mut self, a: &str, b: &str, evidence: Evidence) {
        let key = self.edge_key(a, b);
        let edge = self.edges.entry(key).or_default();
        edge.weight += 1;
        edge.evidence.push(evidence);
    }

    /// Inserts a bare weighted edge (no evidence); used by graph import.
    pub fn add_weighted_edge(&mut self, a: &str, b: &str, weight: u64) {
        let key = self.edge_key(a, b);
        let edge = self.edges.entry(key).or_default();
        edge.weight += weight;
    }

    pub fn nodes(&self) -> BTreeSet<AccountId> {
        let mut nodes = BTreeSet::new();
        for (a, b) in self.edges.keys() {
            nodes.insert(a.clone());
            nodes.insert(b.clone());
        }
        nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes().len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node strength: sum of incident edge weights; out-strength only for
    /// directed networks, so promoted-only accounts report 0.
    pub fn strengths(&self) -> BTreeMap<AccountId, u64> {
        let mut strengths: BTreeMap<AccountId, u64> = BTreeMap::new();
        for node in self.nodes() {
            strengths.insert(node, 0);
        }
        for ((a, b), edge) in &self.edges {
            *strengths.get_mut(a).unwrap() += edge.weight;
            if !self.directed {
                *strengths.get_mut(b).unwrap() += edge.weight;
            }
        }
        strengths
    }

    /// Maximal connected node sets, ignoring direction. Components are
    /// ordered by descending size, then by their smallest member id; members
    /// are sorted ascending.
    pub fn component_sets(&self) -> Vec<Vec<AccountId>> {
        let nodes: Vec<AccountId> = self.nodes().into_iter().collect();
        let index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (a, b) in self.edges.keys() {
            let (ia, ib) = (index[a.as_str()], index[b.as_str()]);
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }

        let mut seen = vec![false; nodes.len()];
        let mut components = Vec::new();
        for start in 0..nodes.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut members = Vec::new();
            while let Some(i) = queue.pop_front() {
                members.push(nodes[i].clone());
                for &j in &adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            members.sort();
            components.push(members);
        }
        components.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        components
    }

    /// Component id per node, matching [`Self::component_sets`] order.
    pub fn component_ids(&self) -> BTreeMap<AccountId, usize> {
        let mut ids = BTreeMap::new();
        for (cid, members) in self.component_sets().into_iter().enumerate() {
            for member in members {
                ids.insert(member, cid);
            }
        }
        ids
    }
}

/// One connected component with its labeling-aid metrics. The metrics are
/// aids for manual inspection, not classifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub id: usize,
    pub members: Vec<AccountId>,
    /// Internal edges as (endpoint pair, weight).
    pub edges: Vec<((AccountId, AccountId), u64)>,
    pub size: usize,
    pub total_weight: u64,
    /// Distinct URL hosts across the tweets contributing to this component.
    pub domain_diversity: usize,
    pub median_delta_t: Option<f64>,
    /// Maximal evidence runs separated by gaps of more than
    /// [`BURST_GAP_SECONDS`].
    pub burst_count: usize,
}

/// Evidence events further apart than this start a new burst.
pub const BURST_GAP_SECONDS: i64 = 60;

/// Lookup from tweet id to the fields component metrics need.
#[derive(Debug, Default)]
pub struct TweetIndex {
    domains: HashMap<String, Vec<String>>,
}

impl TweetIndex {
    pub fn from_stream(stream: &TweetStream) -> Self {
        let mut domains: HashMap<String, Vec<String>> = HashMap::new();
        for rec in stream {
            if rec.urls.is_empty() {
                continue;
            }
            let hosts: Vec<String> = rec
                .urls
                .iter()
                .filter_map(|u| {
                    url::Url::parse(u)
                        .ok()
                        .and_then(|p| p.host_str().map(str::to_string))
                })
                .collect();
            if !hosts.is_empty() {
                domains.insert(rec.tweet_id.clone(), hosts);
            }
        }
        TweetIndex { domains }
    }

    fn domains_of(&self, tweet_id: &str) -> &[String] {
        self.domains.get(tweet_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Partitions the network into connected components and computes the
/// per-component summary metrics.
pub fn connected_components(
    network: &CoordinationNetwork,
    tweets: &TweetIndex,
) -> Vec<ComponentReport> {
    let sets = network.component_sets();
    let ids: HashMap<&str, usize> = sets
        .iter()
        .enumerate()
        .flat_map(|(cid, members)| members.iter().map(move |m| (m.as_str(), cid)))
        .collect();

    let mut edges_by_component: Vec<Vec<(&(AccountId, AccountId), &EdgeData)>> =
        vec![Vec::new(); sets.len()];
    for (key, edge) in &network.edges {
        edges_by_component[ids[key.0.as_str()]].push((key, edge));
    }

    let mut reports = Vec::with_capacity(sets.len());
    for (id, members) in sets.into_iter().enumerate() {
        let mut edges = Vec::new();
        let mut total_weight = 0u64;
        let mut delta_ts = Vec::new();
        let mut event_times = Vec::new();
        let mut hosts = BTreeSet::new();
        for (key, edge) in &edges_by_component[id] {
            edges.push(((*key).clone(), edge.weight));
            total_weight += edge.weight;
            for ev in &edge.evidence {
                delta_ts.push(ev.delta_t());
                event_times.push(ev.event_at());
                for tid in ev.tweet_ids() {
                    hosts.extend(tweets.domains_of(tid).iter().cloned());
                }
            }
        }
        reports.push(ComponentReport {
            id,
            size: members.len(),
            members,
            total_weight,
            domain_diversity: hosts.len(),
            median_delta_t: median(&mut delta_ts),
            burst_count: count_bursts(&mut event_times),
            edges,
        });
    }
    reports
}

fn median(values: &mut [i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    })
}

fn count_bursts(times: &mut [i64]) -> usize {
    if times.is_empty() {
        return 0;
    }
    times.sort_unstable();
    1 + times
        .windows(2)
        .filter(|w| w[1] - w[0] > BURST_GAP_SECONDS)
        .count()
}
