//! Pre-computation of every simple route of a journey under a length cap,
//! the route × edge incidence matrix, and a Dijkstra oracle.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{words_for, BitSet};
use crate::map::{Journey, Map};
use crate::stochastic::EdgeSet;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("unknown edge id {0}")]
    UnknownEdge(String),
    #[error("unknown node id {0}")]
    UnknownNode(String),
    #[error("route-list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("route list {journey_id} is not sorted at route {index}")]
    Unsorted { journey_id: String, index: usize },
    #[error("route list {journey_id}, route {index}: {message}")]
    InvalidRoute {
        journey_id: String,
        index: usize,
        message: String,
    },
}

/// A simple path between the journey endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub dist_m: f64,
    #[serde(rename = "edges")]
    pub edge_ids: Vec<String>,
}

impl Route {
    /// Total order used for route lists: distance, then edge-id sequence.
    pub fn order(&self, other: &Route) -> Ordering {
        self.dist_m
            .total_cmp(&other.dist_m)
            .then_with(|| self.edge_ids.cmp(&other.edge_ids))
    }
}

/// All simple routes of one journey no longer than `cap_m`, shortest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteList {
    pub journey_id: String,
    pub cap_m: f64,
    pub routes: Vec<Route>,
}

impl RouteList {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn is_sorted(&self) -> Result<(), RouteError> {
        for (i, w) in self.routes.windows(2).enumerate() {
            if w[0].order(&w[1]) == Ordering::Greater {
                return Err(RouteError::Unsorted {
                    journey_id: self.journey_id.clone(),
                    index: i + 1,
                });
            }
        }
        Ok(())
    }

    /// Check every route against the map: known edges, a connected simple
    /// walk from the journey start to its end, an exact length sum, and the cap.
    pub fn validate(&self, map: &Map, journey: &Journey) -> Result<(), RouteError> {
        self.is_sorted()?;
        let start = map
            .node_idx(&journey.from_node)
            .ok_or_else(|| RouteError::UnknownNode(journey.from_node.clone()))?;
        let end = map
            .node_idx(&journey.to_node)
            .ok_or_else(|| RouteError::UnknownNode(journey.to_node.clone()))?;
        for (index, route) in self.routes.iter().enumerate() {
            let invalid = |message: &str| RouteError::InvalidRoute {
                journey_id: self.journey_id.clone(),
                index,
                message: message.to_string(),
            };
            let mut at = start;
            let mut visited = vec![false; map.node_count()];
            visited[at] = true;
            let mut dist = 0.0;
            for id in &route.edge_ids {
                let e = map.edge(map.edge_idx(id).ok_or_else(|| RouteError::UnknownEdge(id.clone()))?);
                if e.u != at && e.v != at {
                    return Err(invalid(&format!("edge {id} is not incident to the walk")));
                }
                at = e.other(at);
                if visited[at] {
                    return Err(invalid("node visited twice"));
                }
                visited[at] = true;
                dist += e.length_m;
            }
            if at != end {
                return Err(invalid("walk does not end at the destination"));
            }
            if dist != route.dist_m {
                return Err(invalid(&format!("dist_m {} != edge sum {dist}", route.dist_m)));
            }
            if dist > self.cap_m {
                return Err(invalid("route exceeds cap"));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("route list serializes")
    }
}

/// Serialize route lists as JSON lines, one journey per line.
pub fn write_route_lists(lists: &[RouteList]) -> String {
    let mut out = String::new();
    for l in lists {
        out.push_str(&l.to_json_line());
        out.push('\n');
    }
    out
}

/// Parse a JSON-lines route-list file. Unsorted lists are rejected.
pub fn read_route_lists(text: &str) -> Result<Vec<RouteList>, RouteError> {
    let mut lists = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let list: RouteList = serde_json::from_str(line).map_err(|e| RouteError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        list.is_sorted()?;
        lists.push(list);
    }
    Ok(lists)
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra. Returns per-node distance and the edge used to
/// reach each node. `excluded` edges are skipped.
fn dijkstra(map: &Map, source: usize, excluded: Option<&EdgeSet>) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = map.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut via = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(e, next) in map.incident(node) {
            if excluded.is_some_and(|x| x.contains(e)) {
                continue;
            }
            let nd = d + map.edge(e).length_m;
            if nd < dist[next] {
                dist[next] = nd;
                via[next] = Some(e);
                heap.push(HeapEntry { dist: nd, node: next });
            }
        }
    }
    (dist, via)
}

/// Shortest path avoiding `excluded`, with no length cap. `None` when the
/// endpoints are disconnected in the ablated graph.
pub fn shortest_path_oracle(
    map: &Map,
    from: &str,
    to: &str,
    excluded: &EdgeSet,
) -> Result<Option<(f64, Vec<String>)>, RouteError> {
    let s = map.node_idx(from).ok_or_else(|| RouteError::UnknownNode(from.into()))?;
    let t = map.node_idx(to).ok_or_else(|| RouteError::UnknownNode(to.into()))?;
    let (dist, via) = dijkstra(map, s, Some(excluded));
    if !dist[t].is_finite() {
        return Ok(None);
    }
    let mut edges = Vec::new();
    let mut at = t;
    while at != s {
        let e = via[at].expect("reached node has a predecessor edge");
        edges.push(map.edge(e).id.clone());
        at = map.edge(e).other(at);
    }
    edges.reverse();
    Ok(Some((dist[t], edges)))
}

/// Every node-simple path from the journey start to its end with total
/// length at most `cap_m`, sorted by distance then edge-id sequence.
///
/// Depth-first search with two prunes: the accumulated length, and the
/// accumulated length plus the unconstrained shortest distance to the
/// target. The second is a lower bound so it never removes a valid route.
pub fn enumerate_routes(map: &Map, journey: &Journey, cap_m: f64) -> Result<RouteList, RouteError> {
    let start = map
        .node_idx(&journey.from_node)
        .ok_or_else(|| RouteError::UnknownNode(journey.from_node.clone()))?;
    let target = map
        .node_idx(&journey.to_node)
        .ok_or_else(|| RouteError::UnknownNode(journey.to_node.clone()))?;
    let (to_target, _) = dijkstra(map, target, None);
    // The lower bound is summed in a different order than the path, so give
    // it a little slack; the final acceptance test below is exact.
    let bound = cap_m + cap_m.abs() * 1e-12 + 1e-9;

    let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut on_path = vec![false; map.node_count()];
    let mut path_edges: Vec<usize> = Vec::new();
    let mut dists: Vec<f64> = vec![0.0];
    // (node, next adjacency position)
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    on_path[start] = true;

    if start != target && to_target[start] <= bound {
        while let Some(top) = stack.last_mut() {
            let (node, pos) = *top;
            let incident = map.incident(node);
            if pos == incident.len() {
                stack.pop();
                on_path[node] = false;
                path_edges.pop();
                dists.pop();
                continue;
            }
            top.1 += 1;
            let (e, next) = incident[pos];
            if on_path[next] {
                continue;
            }
            let d = dists.last().copied().unwrap_or(0.0) + map.edge(e).length_m;
            if next == target {
                if d <= cap_m {
                    let mut edges = path_edges.clone();
                    edges.push(e);
                    found.push((d, edges));
                }
                continue;
            }
            if d + to_target[next] > bound {
                continue;
            }
            on_path[next] = true;
            path_edges.push(e);
            dists.push(d);
            stack.push((next, 0));
        }
    }
    on_path[start] = false;

    let mut routes: Vec<Route> = found
        .into_iter()
        .map(|(dist_m, edges)| Route {
            dist_m,
            edge_ids: edges.into_iter().map(|e| map.edge(e).id.clone()).collect(),
        })
        .collect();
    routes.sort_by(Route::order);
    Ok(RouteList {
        journey_id: journey.id.clone(),
        cap_m,
        routes,
    })
}

/// Route-major bit matrix over the edges that occur in at least one route.
///
/// Columns are those edges in ascending map index; row `r` has bit `c` set
/// iff route `r` uses the edge of column `c`. Rows keep the route-list order,
/// so the first row disjoint from a mask is the shortest surviving route.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    /// Column → map edge index.
    columns: Vec<usize>,
    /// Map edge index → column.
    column_of: HashMap<usize, usize>,
    words_per_row: usize,
    rows: Vec<u64>,
    /// Sparse copy of each row: its columns, flattened with offsets.
    row_cols: Vec<u32>,
    row_offsets: Vec<usize>,
    dists: Vec<f64>,
}

impl IncidenceMatrix {
    pub fn route_count(&self) -> usize {
        self.dists.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Map edge index of each column.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn column_of(&self, edge: usize) -> Option<usize> {
        self.column_of.get(&edge).copied()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.rows[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    #[inline]
    pub fn row_columns(&self, r: usize) -> &[u32] {
        &self.row_cols[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    pub fn row_popcount(&self, r: usize) -> usize {
        self.row(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn dist(&self, r: usize) -> f64 {
        self.dists[r]
    }

    /// Project a map-level edge set onto the columns; edges that occur in
    /// no route are dropped.
    pub fn mask_of(&self, set: &EdgeSet) -> BitSet {
        let mut mask = BitSet::new(self.columns.len());
        if set.len() < self.columns.len() {
            for e in set.iter() {
                if let Some(c) = self.column_of(e) {
                    mask.insert(c);
                }
            }
        } else {
            for (c, &e) in self.columns.iter().enumerate() {
                if set.contains(e) {
                    mask.insert(c);
                }
            }
        }
        mask
    }
}

pub fn build_incidence(route_list: &RouteList, map: &Map) -> Result<IncidenceMatrix, RouteError> {
    let mut route_edges = Vec::with_capacity(route_list.len());
    let mut used = vec![false; map.edge_count()];
    for route in &route_list.routes {
        let idx = route
            .edge_ids
            .iter()
            .map(|id| map.edge_idx(id).ok_or_else(|| RouteError::UnknownEdge(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        for &e in &idx {
            used[e] = true;
        }
        route_edges.push(idx);
    }
    let columns: Vec<usize> = (0..map.edge_count()).filter(|&e| used[e]).collect();
    let column_of: HashMap<usize, usize> =
        columns.iter().enumerate().map(|(c, &e)| (e, c)).collect();
    let words_per_row = words_for(columns.len());
    let mut rows = vec![0u64; words_per_row * route_edges.len()];
    let mut row_cols = Vec::new();
    let mut row_offsets = vec![0];
    for (r, edges) in route_edges.iter().enumerate() {
        let mut cols: Vec<u32> = edges.iter().map(|e| column_of[e] as u32).collect();
        cols.sort_unstable();
        cols.dedup();
        for &c in &cols {
            rows[r * words_per_row + c as usize / 64] |= 1u64 << (c % 64);
        }
        row_cols.extend_from_slice(&cols);
        row_offsets.push(row_cols.len());
    }
    Ok(IncidenceMatrix {
        columns,
        column_of,
        words_per_row,
        rows,
        row_cols,
        row_offsets,
        dists: route_list.routes.iter().map(|r| r.dist_m).collect(),
    })
}
