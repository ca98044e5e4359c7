//! Graph views of a network structure: algebraic loops, feedthrough ordering
//! and the structural pattern of the network transfer function.

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::Dfs;

use crate::model::ModelSetStructure;

/// Directed graph on `l` nodes with an edge `j -> i` whenever `edge(i, j)`.
fn digraph(l: usize, edge: impl Fn(usize, usize) -> bool) -> DiGraph<(), ()> {
    let mut g = DiGraph::with_capacity(l, 0);
    for _ in 0..l {
        g.add_node(());
    }
    for i in 0..l {
        for j in 0..l {
            if i != j && edge(i, j) {
                g.add_edge(NodeIndex::new(j), NodeIndex::new(i), ());
            }
        }
    }
    g
}

/// Ordering `Pi` for which `Pi^T A Pi` is upper triangular, where
/// `edge(i, j)` marks a possibly nonzero `A[i][j]`. Nodes are listed
/// downstream first. On failure returns the nodes of an algebraic loop.
pub fn triangular_order(
    l: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Result<Vec<usize>, Vec<usize>> {
    let g = digraph(l, edge);
    match toposort(&g, None) {
        Ok(order) => Ok(order.into_iter().rev().map(NodeIndex::index).collect()),
        Err(_) => {
            let mut cyc = tarjan_scc(&g)
                .into_iter()
                .find(|c| c.len() > 1)
                .expect("toposort failed without a cycle")
                .into_iter()
                .map(NodeIndex::index)
                .collect::<Vec<_>>();
            cyc.sort_unstable();
            Err(cyc)
        }
    }
}

/// Feedthrough ordering of a structure (edges where `G_ij` may have a
/// nonzero feedthrough).
pub fn feedthrough_order(s: &ModelSetStructure) -> Result<Vec<usize>, Vec<usize>> {
    triangular_order(s.l(), |i, j| s.g().get(i, j).may_have_feedthrough())
}

/// Nodes on an algebraic loop, if any.
pub fn algebraic_loop(s: &ModelSetStructure) -> Option<Vec<usize>> {
    feedthrough_order(s).err()
}

/// `reach[i][j]`: node `i` is reachable from node `j` through structurally
/// nonzero modules of `G` (every node reaches itself).
pub fn reachability(s: &ModelSetStructure) -> Vec<Vec<bool>> {
    let l = s.l();
    let g = digraph(l, |i, j| s.g().get(i, j).is_structurally_nonzero());
    let mut reach = vec![vec![false; l]; l];
    for j in 0..l {
        let mut dfs = Dfs::new(&g, NodeIndex::new(j));
        while let Some(n) = dfs.next(&g) {
            reach[n.index()][j] = true;
        }
    }
    reach
}

/// Generic sparsity of `T = (I - G)^{-1} U`: `pattern[i][c]` is set when
/// some path leads from an input of column `c` to node `i`.
pub fn transfer_pattern(s: &ModelSetStructure) -> Vec<Vec<bool>> {
    let reach = reachability(s);
    (0..s.l())
        .map(|i| {
            (0..s.u_cols())
                .map(|c| (0..s.l()).any(|j| reach[i][j] && s.u(j, c).is_structurally_nonzero()))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_orders_downstream_first() {
        // edges 0 -> 1 -> 2, stored as A[1][0], A[2][1]
        let order = triangular_order(3, |i, j| (i, j) == (1, 0) || (i, j) == (2, 1)).unwrap();
        assert_eq!(order, vec![2, 1, 0]);
        // Pi^T A Pi upper triangular: source position after target position
        let pos = |n: usize| order.iter().position(|&x| x == n).unwrap();
        assert!(pos(1) < pos(0) && pos(2) < pos(1));
    }

    #[test]
    fn loop_is_reported() {
        let err = triangular_order(3, |i, j| (i, j) == (0, 1) || (i, j) == (1, 0)).unwrap_err();
        assert_eq!(err, vec![0, 1]);
    }

    #[test]
    fn empty_graph() {
        assert_eq!(triangular_order(0, |_, _| true), Ok(vec![]));
    }
}
