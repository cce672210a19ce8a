//! Random single-contract Solidity sources with a known call graph, for
//! checking callee resolution against a plain breadth-first search.

use std::collections::{BTreeSet, VecDeque};

use proptest::collection::vec;
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct RandomContract {
    pub source: String,
    /// `edges[i]` lists the functions `f{i}` calls, in call order.
    pub edges: Vec<Vec<usize>>,
}

const VISIBILITY: [&str; 3] = ["public", "internal", "private"];

fn call_statement(callee: usize, form: u8, k: usize) -> String {
    match form % 3 {
        0 => format!("        f{callee}();"),
        1 => format!("        uint256 t{k} = f{callee}() + 1;"),
        _ => format!("        if (s0 > {k}) {{ s0 = f{callee}(); }}"),
    }
}

pub fn render(edges: &[Vec<usize>], visibility: &[u8], forms: &[u8]) -> String {
    let mut src = String::from("pragma solidity ^0.8.0;\n\ncontract R {\n    uint256 private s0;\n\n");
    for (i, calls) in edges.iter().enumerate() {
        let vis = VISIBILITY[usize::from(visibility[i]) % VISIBILITY.len()];
        src.push_str(&format!("    function f{i}() {vis} returns (uint256) {{\n"));
        src.push_str("        s0 += 1;\n");
        for (k, &c) in calls.iter().enumerate() {
            src.push_str(&call_statement(c, forms[(i + k) % forms.len()], k));
            src.push('\n');
        }
        src.push_str("        return s0;\n    }\n\n");
    }
    src.push_str("}\n");
    src
}

pub fn contract_strategy() -> impl Strategy<Value = RandomContract> {
    (1usize..=20)
        .prop_flat_map(|n| (vec(vec(0..n, 0..4), n), vec(any::<u8>(), n), vec(any::<u8>(), 1..8)))
        .prop_map(|(edges, visibility, forms)| RandomContract {
            source: render(&edges, &visibility, &forms),
            edges,
        })
}

/// Names of every function reachable from `f{anchor}`, excluding the anchor.
pub fn bfs_callees(edges: &[Vec<usize>], anchor: usize) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([anchor]);
    let mut queue = VecDeque::from([anchor]);
    while let Some(f) = queue.pop_front() {
        for &c in &edges[f] {
            if seen.insert(c) {
                queue.push_back(c);
            }
        }
    }
    seen.remove(&anchor);
    seen.into_iter().map(|i| format!("f{i}")).collect()
}
