//! Pedestrian graph model: loading, validation, journeys and stratified
//! journey sampling.
//!
//! Edges are undirected and addressed internally by a dense index equal to
//! their position in the map file. Coordinates are planar meters, so the
//! crow-flies distance between two nodes is plain Euclidean distance.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("malformed map document: {0}")]
    Parse(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(String),
    #[error("unknown endpoint {node} (edge {edge})")]
    UnknownEndpoint { edge: String, node: String },
    #[error("non-positive length on edge {0}")]
    NonPositiveLength(String),
    #[error("edge {0} connects a node to itself")]
    SelfLoop(String),
    #[error("non-finite coordinate on node {0}")]
    NonFiniteCoordinate(String),
    #[error("map has no edges")]
    NoEdges,
    #[error("malformed journeys document: {0}")]
    JourneyParse(String),
    #[error("duplicate journey id {0}")]
    DuplicateJourney(String),
    #[error("journey {journey}: unknown node {node}")]
    UnknownJourneyNode { journey: String, node: String },
    #[error("journey {0} starts and ends at the same node")]
    DegenerateJourney(String),
    #[error("invalid sampling spec: {0}")]
    InvalidSampling(String),
    #[error("stratum {index} [{lo_m} m, {hi_m} m] has {available} node pairs, {needed} needed")]
    EmptyStratum {
        index: usize,
        lo_m: f64,
        hi_m: f64,
        available: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Dense index of the first endpoint.
    pub u: usize,
    /// Dense index of the second endpoint.
    pub v: usize,
    pub length_m: f64,
    pub always_accessible: bool,
}

impl Edge {
    /// The endpoint opposite `node`.
    #[inline]
    pub fn other(&self, node: usize) -> usize {
        if self.u == node {
            self.v
        } else {
            self.u
        }
    }
}

/// Serialized form of a map file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapDocument {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeRecord {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length_m: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub always_accessible: bool,
}

/// Immutable, validated pedestrian graph.
#[derive(Debug, Clone)]
pub struct Map {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    /// Per node: `(edge index, neighbour index)` in edge file order.
    adjacency: Vec<Vec<(usize, usize)>>,
    avg_len_m: f64,
}

impl Map {
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let doc: MapDocument =
            serde_json::from_str(text).map_err(|e| MapError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: MapDocument) -> Result<Self, MapError> {
        let mut node_index = HashMap::with_capacity(doc.nodes.len());
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for rec in doc.nodes {
            if !rec.x.is_finite() || !rec.y.is_finite() {
                return Err(MapError::NonFiniteCoordinate(rec.id));
            }
            if node_index.insert(rec.id.clone(), nodes.len()).is_some() {
                return Err(MapError::DuplicateNode(rec.id));
            }
            nodes.push(Node {
                id: rec.id,
                x: rec.x,
                y: rec.y,
            });
        }

        if doc.edges.is_empty() {
            return Err(MapError::NoEdges);
        }
        let mut edge_index = HashMap::with_capacity(doc.edges.len());
        let mut edges = Vec::with_capacity(doc.edges.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for rec in doc.edges {
            let lookup = |node: &str| {
                node_index
                    .get(node)
                    .copied()
                    .ok_or_else(|| MapError::UnknownEndpoint {
                        edge: rec.id.clone(),
                        node: node.to_string(),
                    })
            };
            let u = lookup(&rec.u)?;
            let v = lookup(&rec.v)?;
            if u == v {
                return Err(MapError::SelfLoop(rec.id));
            }
            // NaN fails this comparison too.
            if !(rec.length_m > 0.0 && rec.length_m.is_finite()) {
                return Err(MapError::NonPositiveLength(rec.id));
            }
            if edge_index.contains_key(&rec.id) {
                return Err(MapError::DuplicateEdge(rec.id));
            }
            let idx = edges.len();
            edge_index.insert(rec.id.clone(), idx);
            adjacency[u].push((idx, v));
            adjacency[v].push((idx, u));
            edges.push(Edge {
                id: rec.id,
                u,
                v,
                length_m: rec.length_m,
                always_accessible: rec.always_accessible,
            });
        }

        let total: f64 = edges.iter().map(|e| e.length_m).sum();
        let avg_len_m = total / edges.len() as f64;
        Ok(Self {
            nodes,
            edges,
            node_index,
            edge_index,
            adjacency,
            avg_len_m,
        })
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.clone(),
                    x: n.x,
                    y: n.y,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id.clone(),
                    u: self.nodes[e.u].id.clone(),
                    v: self.nodes[e.v].id.clone(),
                    length_m: e.length_m,
                    always_accessible: e.always_accessible,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("map serializes")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Mean edge length over the whole map.
    pub fn avg_len_m(&self) -> f64 {
        self.avg_len_m
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edge_idx(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    /// Incident `(edge, neighbour)` pairs of a node, in edge file order.
    pub fn incident(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// Euclidean distance between two nodes, meters.
    pub fn crow_m(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        (na.x - nb.x).hypot(na.y - nb.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Journey {
    pub id: String,
    pub from_node: String,
    pub to_node: String,
    pub crow_m: f64,
}

impl Journey {
    pub fn new(map: &Map, id: &str, from: &str, to: &str) -> Result<Self, MapError> {
        let unknown = |node: &str| MapError::UnknownJourneyNode {
            journey: id.to_string(),
            node: node.to_string(),
        };
        let a = map.node_idx(from).ok_or_else(|| unknown(from))?;
        let b = map.node_idx(to).ok_or_else(|| unknown(to))?;
        if a == b {
            return Err(MapError::DegenerateJourney(id.to_string()));
        }
        Ok(Self {
            id: id.to_string(),
            from_node: from.to_string(),
            to_node: to.to_string(),
            crow_m: map.crow_m(a, b),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JourneysDocument {
    pub journeys: Vec<JourneyRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JourneyRecord {
    pub id: String,
    pub from: String,
    pub to: String,
}

pub fn load_journeys(map: &Map, text: &str) -> Result<Vec<Journey>, MapError> {
    let doc: JourneysDocument =
        serde_json::from_str(text).map_err(|e| MapError::JourneyParse(e.to_string()))?;
    let mut seen = HashMap::new();
    doc.journeys
        .iter()
        .map(|r| {
            if seen.insert(r.id.clone(), ()).is_some() {
                return Err(MapError::DuplicateJourney(r.id.clone()));
            }
            Journey::new(map, &r.id, &r.from, &r.to)
        })
        .collect()
}

pub fn journeys_to_json(journeys: &[Journey]) -> String {
    let doc = JourneysDocument {
        journeys: journeys
            .iter()
            .map(|j| JourneyRecord {
                id: j.id.clone(),
                from: j.from_node.clone(),
                to: j.to_node.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("journeys serialize")
}

/// Parameters of the stratified journey sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub count: usize,
    pub min_crow_m: f64,
    pub max_crow_m: f64,
    pub bins: usize,
}

impl SamplingSpec {
    fn validate(&self, map: &Map) -> Result<(), MapError> {
        if !(self.min_crow_m < self.max_crow_m) {
            return Err(MapError::InvalidSampling(
                "min_crow_m must be below max_crow_m".into(),
            ));
        }
        if self.bins == 0 || self.count < self.bins {
            return Err(MapError::InvalidSampling(
                "need count >= bins >= 1".into(),
            ));
        }
        if map.node_count() < 2 {
            return Err(MapError::InvalidSampling("map has fewer than 2 nodes".into()));
        }
        Ok(())
    }

    /// Journeys allotted to each stratum; the first `count % bins` strata
    /// take one extra.
    pub fn allocation(&self) -> Vec<usize> {
        let base = self.count / self.bins;
        let extra = self.count % self.bins;
        (0..self.bins).map(|b| base + usize::from(b < extra)).collect()
    }

    /// Stratum of a crow-flies distance, if it falls inside the range.
    /// The upper bound belongs to the last stratum.
    pub fn stratum_of(&self, crow_m: f64) -> Option<usize> {
        if crow_m < self.min_crow_m || crow_m > self.max_crow_m {
            return None;
        }
        let width = (self.max_crow_m - self.min_crow_m) / self.bins as f64;
        let b = ((crow_m - self.min_crow_m) / width) as usize;
        Some(b.min(self.bins - 1))
    }
}

/// Draw `spec.count` distinct node pairs, stratified into `spec.bins`
/// equal-width crow-flies distance bands.
///
/// Every unordered pair `(a, b)` with `a` before `b` in the node table is a
/// candidate; each stratum keeps a uniform reservoir sample of its quota.
/// Output is grouped by stratum, and within a stratum ordered by node
/// indices, so it is a pure function of `(map, spec, seed)`.
pub fn sample_journeys(map: &Map, spec: &SamplingSpec, seed: u64) -> Result<Vec<Journey>, MapError> {
    spec.validate(map)?;
    let quota = spec.allocation();
    let mut reservoirs: Vec<Vec<(usize, usize)>> =
        quota.iter().map(|&q| Vec::with_capacity(q)).collect();
    let mut seen = vec![0usize; spec.bins];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n = map.node_count();
    for a in 0..n {
        for b in a + 1..n {
            let Some(s) = spec.stratum_of(map.crow_m(a, b)) else {
                continue;
            };
            seen[s] += 1;
            let res = &mut reservoirs[s];
            if res.len() < quota[s] {
                res.push((a, b));
            } else {
                let k = rng.gen_range(0..seen[s]);
                if k < quota[s] {
                    res[k] = (a, b);
                }
            }
        }
    }

    let width = (spec.max_crow_m - spec.min_crow_m) / spec.bins as f64;
    let mut journeys = Vec::with_capacity(spec.count);
    for (s, mut res) in reservoirs.into_iter().enumerate() {
        if res.len() < quota[s] {
            return Err(MapError::EmptyStratum {
                index: s,
                lo_m: spec.min_crow_m + s as f64 * width,
                hi_m: spec.min_crow_m + (s + 1) as f64 * width,
                available: seen[s],
                needed: quota[s],
            });
        }
        res.sort_unstable();
        for (a, b) in res {
            journeys.push(Journey {
                id: format!("j{:03}", journeys.len()),
                from_node: map.node(a).id.clone(),
                to_node: map.node(b).id.clone(),
                crow_m: map.crow_m(a, b),
            });
        }
    }
    Ok(journeys)
}
