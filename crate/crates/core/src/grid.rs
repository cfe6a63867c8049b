//! Synthetic lattice maps for experiments and tests.

use crate::map::{EdgeRecord, Map, MapDocument, NodeRecord};

/// Node id of lattice point `(col, row)`.
pub fn grid_node_id(col: usize, row: usize) -> String {
    format!("n{col}_{row}")
}

/// A `cols × rows` lattice with uniform `spacing_m` edges.
pub fn grid_document(cols: usize, rows: usize, spacing_m: f64) -> MapDocument {
    let mut nodes = Vec::with_capacity(cols * rows);
    let mut edges = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            nodes.push(NodeRecord {
                id: grid_node_id(col, row),
                x: col as f64 * spacing_m,
                y: row as f64 * spacing_m,
            });
            if col + 1 < cols {
                edges.push(EdgeRecord {
                    id: format!("h{col}_{row}"),
                    u: grid_node_id(col, row),
                    v: grid_node_id(col + 1, row),
                    length_m: spacing_m,
                    always_accessible: false,
                });
            }
            if row + 1 < rows {
                edges.push(EdgeRecord {
                    id: format!("v{col}_{row}"),
                    u: grid_node_id(col, row),
                    v: grid_node_id(col, row + 1),
                    length_m: spacing_m,
                    always_accessible: false,
                });
            }
        }
    }
    MapDocument { nodes, edges }
}

pub fn grid_map(cols: usize, rows: usize, spacing_m: f64) -> Map {
    Map::from_document(grid_document(cols, rows, spacing_m)).expect("lattice is a valid map")
}
