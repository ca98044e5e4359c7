//! Maximum bipartite matching on sparsity patterns.

use petgraph::algo::maximum_matching;
use petgraph::graph::{NodeIndex, UnGraph};

/// Maximum matching between `rows` left vertices and `cols` right vertices.
/// Returns, for each row, the matched column.
pub fn bipartite_matching(
    rows: usize,
    cols: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Vec<Option<usize>> {
    let mut g = UnGraph::<(), ()>::with_capacity(rows + cols, rows * cols);
    for _ in 0..rows + cols {
        g.add_node(());
    }
    for i in 0..rows {
        for j in 0..cols {
            if edge(i, j) {
                g.add_edge(NodeIndex::new(i), NodeIndex::new(rows + j), ());
            }
        }
    }
    let m = maximum_matching(&g);
    (0..rows)
        .map(|i| m.mate(NodeIndex::new(i)).map(|n| n.index() - rows))
        .collect()
}

/// Size of a maximum matching of a boolean pattern (its structural rank).
pub fn structural_rank(rows: usize, cols: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    bipartite_matching(rows, cols, edge)
        .iter()
        .flatten()
        .count()
}
