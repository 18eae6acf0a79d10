//! Boundary-matrix reduction over Z/2 for the cubical complex.
//!
//! Columns are reduced in twist order: squares (dimension 2) first, then the
//! edges that were not cleared. Every edge that appears as the pivot of a
//! reduced square column is positive and its own column would reduce to
//! zero, so it is skipped.

use super::complex::CubicalComplex;

const NONE: u32 = u32::MAX;

/// Cell ordering within one dimension: by filtration value, then index.
fn ranks(values: &[u8]) -> (Vec<u32>, Vec<u32>) {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_unstable_by_key(|&i| (values[i as usize], i));
    let mut rank = vec![0u32; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    (order, rank)
}

/// `a ^= b` for columns stored as strictly decreasing row ranks.
fn add_column(a: &mut Vec<u32>, b: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Greater => {
                scratch.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Less => {
                scratch.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&a[i..]);
    scratch.extend_from_slice(&b[j..]);
    std::mem::swap(a, scratch);
}

/// Generic column reduction. `columns` yields, in filtration order, the
/// boundary of each column as row ranks. Returns `(pivot row rank, column
/// position)` pairs.
fn reduce<I>(n_rows: usize, columns: I) -> Vec<(u32, u32)>
where
    I: IntoIterator<Item = Vec<u32>>,
{
    let mut owner = vec![NONE; n_rows];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut pairs = Vec::new();
    let mut scratch = Vec::new();
    for (pos, mut col) in columns.into_iter().enumerate() {
        col.sort_unstable_by(|a, b| b.cmp(a));
        while let Some(&pivot) = col.first() {
            let o = owner[pivot as usize];
            if o == NONE {
                break;
            }
            add_column(&mut col, &reduced[o as usize], &mut scratch);
        }
        if let Some(&pivot) = col.first() {
            owner[pivot as usize] = reduced.len() as u32;
            pairs.push((pivot, pos as u32));
        }
        reduced.push(col);
    }
    pairs
}

/// Output of the dimension-2 pass.
pub(crate) struct SquarePass {
    /// `(edge, square)` persistence pairs; the edge creates a 1-cycle that
    /// the square fills.
    pub pairs: Vec<(usize, usize)>,
    /// Edges whose columns are cleared for the dimension-1 pass.
    pub cleared: Vec<bool>,
}

pub(crate) fn reduce_squares(cx: &CubicalComplex) -> SquarePass {
    let (edge_order, edge_rank) = ranks(cx.edge_values());
    let (square_order, _) = ranks(cx.square_values());
    let cols = square_order.iter().map(|&s| {
        cx.square_edges(s as usize)
            .iter()
            .map(|&e| edge_rank[e])
            .collect::<Vec<u32>>()
    });
    let raw = reduce(cx.num_edges(), cols);
    let mut cleared = vec![false; cx.num_edges()];
    let pairs = raw
        .into_iter()
        .map(|(pivot, pos)| {
            let e = edge_order[pivot as usize] as usize;
            cleared[e] = true;
            (e, square_order[pos as usize] as usize)
        })
        .collect();
    SquarePass { pairs, cleared }
}

/// Output of the dimension-1 pass.
pub(crate) struct EdgePass {
    /// `(vertex, edge)` pairs: the vertex's component dies at the edge.
    pub pairs: Vec<(usize, usize)>,
    /// Vertices that are never paired (essential classes).
    pub essential: Vec<usize>,
}

pub(crate) fn reduce_edges(cx: &CubicalComplex, cleared: &[bool]) -> EdgePass {
    let (vertex_order, vertex_rank) = ranks(cx.vertex_values());
    let (edge_order, _) = ranks(cx.edge_values());
    let live: Vec<u32> = edge_order
        .into_iter()
        .filter(|&e| !cleared[e as usize])
        .collect();
    let cols = live.iter().map(|&e| {
        let (a, b) = cx.edge_vertices(e as usize);
        vec![vertex_rank[a], vertex_rank[b]]
    });
    let raw = reduce(cx.num_vertices(), cols);
    let mut paired = vec![false; cx.num_vertices()];
    let pairs = raw
        .into_iter()
        .map(|(pivot, pos)| {
            let v = vertex_order[pivot as usize] as usize;
            paired[v] = true;
            (v, live[pos as usize] as usize)
        })
        .collect();
    let essential = vertex_order
        .iter()
        .map(|&v| v as usize)
        .filter(|&v| !paired[v])
        .collect();
    EdgePass { pairs, essential }
}
