//! Seeded random streams, ground-truth barrier sampling and the
//! documentation tool's error model.
//!
//! Streams are counter based: a key (master seed, purpose, grid indices,
//! trial) is hashed to a 64-bit base, and variate `i` of the stream is the
//! SplitMix64 output for counter `i`. Variate `i` can therefore be read
//! without generating variates `0..i`, which lets the sweep sample only the
//! edges that occur in some route while staying bit-identical to a full
//! pass over the map.

use thiserror::Error;

use crate::bits::BitSet;
use crate::map::Map;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0x6A09_E667_F3BC_C909;

/// SplitMix64 finalizer (Stafford variant 13). A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    GroundTruth,
    Perception,
}

impl Purpose {
    pub fn tag(self) -> u64 {
        match self {
            Purpose::GroundTruth => 1,
            Purpose::Perception => 2,
        }
    }
}

/// Identifies one stream within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub purpose: Purpose,
    pub journey: u64,
    pub rate: u64,
    pub tpr: u64,
    pub tnr: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(purpose: Purpose, journey: usize, rate: usize, tpr: usize, tnr: usize, trial: usize) -> Self {
        Self {
            purpose,
            journey: journey as u64,
            rate: rate as u64,
            tpr: tpr as u64,
            tnr: tnr as u64,
            trial: trial as u64,
        }
    }
}

/// Uniform variates on `[0, 1)` for one key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    base: u64,
    pos: u64,
}

impl RngStream {
    /// Variate number `i`, independent of the iterator position.
    #[inline]
    pub fn at(&self, i: u64) -> f64 {
        let x = mix64(self.base.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
        (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn offset(&self) -> u64 {
        self.pos
    }

    pub fn skip(&mut self, n: u64) {
        self.pos += n;
    }
}

impl Iterator for RngStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let u = self.at(self.pos);
        self.pos += 1;
        Some(u)
    }
}

/// Hash `(master_seed, key)` into a stream.
///
/// The seed is mixed first, then the purpose tag, then each index in the
/// order journey, rate, tpr, tnr, trial: `h ← mix64((h + γ) ⊕ field)`.
/// Each step is a bijection of the running hash for a fixed field, so two
/// keys that differ in exactly one field never share a base.
pub fn derive_stream(master_seed: u64, key: &StreamKey) -> RngStream {
    let mut h = mix64(master_seed ^ SEED_SALT);
    for field in [key.purpose.tag(), key.journey, key.rate, key.tpr, key.tnr, key.trial] {
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ field);
    }
    RngStream { base: h, pos: 0 }
}

#[derive(Debug, Error, PartialEq)]
pub enum StochasticError {
    #[error("unknown edge id {0}")]
    UnknownEdge(String),
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

/// A set of map edges, stored as a bit vector over the dense edge index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet(BitSet);

impl EdgeSet {
    pub fn empty(map: &Map) -> Self {
        Self(BitSet::new(map.edge_count()))
    }

    pub fn with_universe(edge_count: usize) -> Self {
        Self(BitSet::new(edge_count))
    }

    pub fn from_ids<'a>(map: &Map, ids: impl IntoIterator<Item = &'a str>) -> Result<Self, StochasticError> {
        let mut set = Self::empty(map);
        for id in ids {
            let e = map
                .edge_idx(id)
                .ok_or_else(|| StochasticError::UnknownEdge(id.to_string()))?;
            set.insert(e);
        }
        Ok(set)
    }

    pub fn insert(&mut self, edge: usize) {
        self.0.insert(edge);
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.0.contains(edge)
    }

    pub fn len(&self) -> usize {
        self.0.count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn ids<'m>(&self, map: &'m Map) -> Vec<&'m str> {
        self.iter().map(|e| map.edge(e).id.as_str()).collect()
    }

    pub fn bits(&self) -> &BitSet {
        &self.0
    }
}

/// Detection quality of a documentation tool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolProfile {
    pub tpr: f64,
    pub tnr: f64,
}

impl ToolProfile {
    pub const PERFECT: ToolProfile = ToolProfile { tpr: 1.0, tnr: 1.0 };
    pub const OBLIVIOUS: ToolProfile = ToolProfile { tpr: 0.0, tnr: 1.0 };

    pub fn new(tpr: f64, tnr: f64) -> Result<Self, StochasticError> {
        for (name, value) in [("tpr", tpr), ("tnr", tnr)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(StochasticError::OutOfRange { name, value });
            }
        }
        Ok(Self { tpr, tnr })
    }
}

#[inline]
fn weighted(base: f64, length_m: f64, avg_len_m: f64) -> f64 {
    (base * length_m / avg_len_m).clamp(0.0, 1.0)
}

/// Per-edge probability of being truly inaccessible at one rate:
/// `min(1, rate · length / avg_length)`, zero for always-accessible edges.
///
/// A model covers a list of map edges; probabilities and the bit sets it
/// fills are indexed by position in that list. Edge `e` always reads
/// variate `e` of the stream, so restricting the list never changes the
/// outcome on the edges that remain.
#[derive(Debug, Clone)]
pub struct BarrierModel {
    edge_count: usize,
    edges: Vec<usize>,
    probs: Vec<f64>,
}

impl BarrierModel {
    /// Model over every edge of the map; positions equal edge indices.
    pub fn new(map: &Map, rate: f64) -> Self {
        Self::over_edges(map, rate, (0..map.edge_count()).collect())
    }

    pub fn over_edges(map: &Map, rate: f64, edges: Vec<usize>) -> Self {
        let avg = map.avg_len_m();
        let probs = edges
            .iter()
            .map(|&e| {
                let edge = map.edge(e);
                if edge.always_accessible {
                    0.0
                } else {
                    weighted(rate, edge.length_m, avg)
                }
            })
            .collect();
        Self {
            edge_count: map.edge_count(),
            edges,
            probs,
        }
    }

    /// Inclusion probability at list position `pos`.
    pub fn probability(&self, pos: usize) -> f64 {
        self.probs[pos]
    }

    /// Map-level draw; consumes one variate per map edge in index order.
    pub fn sample(&self, stream: &mut RngStream) -> EdgeSet {
        let start = stream.offset();
        let mut set = EdgeSet::with_universe(self.edge_count);
        for (&e, &p) in self.edges.iter().zip(&self.probs) {
            if stream.at(start + e as u64) < p {
                set.insert(e);
            }
        }
        stream.skip(self.edge_count as u64);
        set
    }

    /// Draw into a bit set indexed by list position, without advancing
    /// the stream.
    pub fn sample_into(&self, stream: &RngStream, out: &mut BitSet) {
        out.clear();
        let start = stream.offset();
        for (pos, (&e, &p)) in self.edges.iter().zip(&self.probs).enumerate() {
            if stream.at(start + e as u64) < p {
                out.insert(pos);
            }
        }
    }
}

/// Per-edge labelling error probabilities of a tool. A truly inaccessible
/// edge is missed with `min(1, (1 − tpr) · length / avg_length)`; a truly
/// accessible edge is flagged with `min(1, (1 − tnr) · length / avg_length)`.
/// Always-accessible edges are never flagged. Indexed like [`BarrierModel`].
#[derive(Debug, Clone)]
pub struct PerceptionModel {
    edge_count: usize,
    edges: Vec<usize>,
    miss: Vec<f64>,
    false_alarm: Vec<f64>,
    always_accessible: Vec<bool>,
}

impl PerceptionModel {
    pub fn new(map: &Map, profile: ToolProfile) -> Self {
        Self::over_edges(map, profile, (0..map.edge_count()).collect())
    }

    pub fn over_edges(map: &Map, profile: ToolProfile, edges: Vec<usize>) -> Self {
        let avg = map.avg_len_m();
        let lens = || edges.iter().map(|&e| map.edge(e).length_m);
        Self {
            edge_count: map.edge_count(),
            miss: lens().map(|l| weighted(1.0 - profile.tpr, l, avg)).collect(),
            false_alarm: lens().map(|l| weighted(1.0 - profile.tnr, l, avg)).collect(),
            always_accessible: edges.iter().map(|&e| map.edge(e).always_accessible).collect(),
            edges,
        }
    }

    pub fn miss_probability(&self, pos: usize) -> f64 {
        self.miss[pos]
    }

    pub fn false_alarm_probability(&self, pos: usize) -> f64 {
        self.false_alarm[pos]
    }

    #[inline]
    fn perceives(&self, pos: usize, truly_blocked: bool, u: f64) -> bool {
        if self.always_accessible[pos] {
            false
        } else if truly_blocked {
            u >= self.miss[pos]
        } else {
            u < self.false_alarm[pos]
        }
    }

    /// Map-level pass; consumes one variate per map edge in index order.
    pub fn apply(&self, truth: &EdgeSet, stream: &mut RngStream) -> EdgeSet {
        let start = stream.offset();
        let mut set = EdgeSet::with_universe(self.edge_count);
        for (pos, &e) in self.edges.iter().enumerate() {
            if self.perceives(pos, truth.contains(e), stream.at(start + e as u64)) {
                set.insert(e);
            }
        }
        stream.skip(self.edge_count as u64);
        set
    }

    /// Position-indexed variant of [`PerceptionModel::apply`]; does not
    /// advance the stream.
    pub fn apply_into(&self, truth: &BitSet, stream: &RngStream, out: &mut BitSet) {
        out.clear();
        let start = stream.offset();
        for (pos, &e) in self.edges.iter().enumerate() {
            if self.perceives(pos, truth.contains(pos), stream.at(start + e as u64)) {
                out.insert(pos);
            }
        }
    }
}

pub fn sample_ground_truth(map: &Map, rate: f64, stream: &mut RngStream) -> EdgeSet {
    BarrierModel::new(map, rate).sample(stream)
}

pub fn apply_perception(map: &Map, truth: &EdgeSet, profile: ToolProfile, stream: &mut RngStream) -> EdgeSet {
    PerceptionModel::new(map, profile).apply(truth, stream)
}
