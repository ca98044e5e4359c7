use std::fmt::Write as _;

use netident::model::{Block, EntryPattern, ModelSetStructure, Properness};

fn edge_attrs(cell: &EntryPattern) -> Option<String> {
    match cell {
        EntryPattern::Zero => None,
        EntryPattern::Fixed(r) => Some(format!("style=solid, color=black, label=\"{r}\"")),
        EntryPattern::Param(Properness::Strict) => {
            Some("style=dashed, color=blue, label=\"param\"".into())
        }
        EntryPattern::Param(Properness::Proper) => {
            Some("style=bold, color=red, label=\"param (proper)\"".into())
        }
    }
}

/// Module graph: nodes `w1..wL`, sources `r1..rK` and `e1..ep`. Zero modules
/// are not drawn; fixed ones are solid and labeled, parameterized ones dashed
/// (strictly proper) or bold (proper).
pub fn export_dot(s: &ModelSetStructure) -> String {
    let mut out = String::from("digraph network {\n    rankdir=LR;\n");
    for i in 1..=s.l() {
        let _ = writeln!(out, "    w{i} [shape=circle];");
    }
    for c in 1..=s.k() {
        let _ = writeln!(out, "    r{c} [shape=box];");
    }
    for c in 1..=s.p() {
        let _ = writeln!(out, "    e{c} [shape=diamond];");
    }
    for (block, src) in [(Block::G, "w"), (Block::R, "r"), (Block::H, "e")] {
        for (i, j, cell) in s.grid(block).iter() {
            if let Some(attrs) = edge_attrs(cell) {
                let _ = writeln!(out, "    {src}{} -> w{} [{attrs}];", j + 1, i + 1);
            }
        }
    }
    out.push_str("}\n");
    out
}
