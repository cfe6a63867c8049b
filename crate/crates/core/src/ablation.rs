//! Route selection by ablation: drop every pre-computed route that touches a
//! perceived-inaccessible edge and keep the shortest survivor.
//!
//! Note that "impassible" here means no perceived-accessible route within
//! the enumeration cap. A journey can be connected in the graph and still be
//! reported impassible because every surviving path is longer than the cap.

use crate::bits::BitSet;
use crate::routes::IncidenceMatrix;
use crate::stochastic::EdgeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selection {
    /// Index into the route list.
    Route(usize),
    Impassible,
}

impl Selection {
    pub fn route(self) -> Option<usize> {
        match self {
            Selection::Route(r) => Some(r),
            Selection::Impassible => None,
        }
    }

    pub fn is_impassible(self) -> bool {
        self == Selection::Impassible
    }
}

/// First row of `inc` disjoint from the column mask.
pub fn select_masked(inc: &IncidenceMatrix, mask: &BitSet) -> Selection {
    (0..inc.route_count())
        .find(|&r| mask.is_disjoint_words(inc.row(r)))
        .map_or(Selection::Impassible, Selection::Route)
}

pub fn select_route(inc: &IncidenceMatrix, perceived: &EdgeSet) -> Selection {
    select_masked(inc, &inc.mask_of(perceived))
}

/// Lanes per pass of the batch kernel.
const LANES: usize = 64;

/// Batched [`select_masked`].
///
/// Up to 64 masks are transposed into one `u64` per column, bit `k` set when
/// mask `k` contains the column. Each route row is then tested for all lanes
/// at once by OR-ing the lane words of its columns; lanes not hit are
/// resolved to that row. The pass stops as soon as every lane is resolved.
pub fn batch_select_masked(inc: &IncidenceMatrix, masks: &[BitSet]) -> Vec<Selection> {
    let mut out = vec![Selection::Impassible; masks.len()];
    let mut lanes = vec![0u64; inc.column_count()];
    for (chunk_idx, chunk) in masks.chunks(LANES).enumerate() {
        lanes.iter_mut().for_each(|w| *w = 0);
        for (k, mask) in chunk.iter().enumerate() {
            for c in mask.iter() {
                lanes[c] |= 1u64 << k;
            }
        }
        let mut unresolved = if chunk.len() == LANES {
            u64::MAX
        } else {
            (1u64 << chunk.len()) - 1
        };
        let base = chunk_idx * LANES;
        for r in 0..inc.route_count() {
            if unresolved == 0 {
                break;
            }
            let blocked = inc
                .row_columns(r)
                .iter()
                .fold(0u64, |acc, &c| acc | lanes[c as usize]);
            let mut hit = unresolved & !blocked;
            unresolved &= blocked;
            while hit != 0 {
                let k = hit.trailing_zeros() as usize;
                hit &= hit - 1;
                out[base + k] = Selection::Route(r);
            }
        }
    }
    out
}

pub fn batch_select(inc: &IncidenceMatrix, perceived_batch: &[EdgeSet]) -> Vec<Selection> {
    let masks: Vec<BitSet> = perceived_batch.iter().map(|p| inc.mask_of(p)).collect();
    batch_select_masked(inc, &masks)
}
