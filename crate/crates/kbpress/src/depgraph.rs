//! Fact-dependency graph: which facts were proved from which.
//!
//! Vertices are the KB's facts plus an implicit truth vertex for empty-body
//! proofs. Each fact records at most one proof (the body grounding of the
//! rule that first derived it); the edges run from every body fact to the
//! derived fact. Facts without an in-edge are essential. When proofs form
//! cycles, at least one vertex per cycle must be kept as well, which
//! `cover_cycles` picks with a greedy feedback-vertex heuristic over strongly
//! connected components.

use std::collections::{HashMap, HashSet};

use crate::eval::Evidence;
use crate::kb::{Fact, KnowledgeBase};

/// Name used for the truth vertex in graph dumps.
pub const TOP_VERTEX: &str = "__top__";

#[derive(Debug, Clone)]
pub struct DependencyGraph {
    facts: Vec<Fact>,
    index: HashMap<Fact, usize>,
    /// Rule id of the recorded proof, if any.
    owner: Vec<Option<usize>>,
    /// In-neighbors of each fact under its recorded proof (deduplicated).
    /// An owned fact with an empty proof is derived from truth alone.
    proof: Vec<Vec<usize>>,
    /// Forward edges derived from `proof`.
    out: Vec<Vec<usize>>,
}

impl DependencyGraph {
    /// A graph over the KB's facts with no proofs recorded.
    pub fn new(kb: &KnowledgeBase) -> Self {
        let facts: Vec<Fact> = kb.facts().to_vec();
        let index = facts
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        let n = facts.len();
        DependencyGraph {
            facts,
            index,
            owner: vec![None; n],
            proof: vec![Vec::new(); n],
            out: vec![Vec::new(); n],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.facts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.proof.iter().map(Vec::len).sum()
    }

    pub fn proof_owner(&self, fact: &Fact) -> Option<usize> {
        self.index.get(fact).and_then(|&i| self.owner[i])
    }

    /// Records one proof per newly derived fact of `evidence`. Facts that
    /// already own a proof are untouched, so re-adding evidence is a no-op.
    pub fn add_proofs(&mut self, rule_id: usize, evidence: &Evidence) {
        for (head, grounding) in &evidence.positive {
            let Some(&h) = self.index.get(head) else {
                continue;
            };
            if self.owner[h].is_some() {
                continue;
            }
            self.owner[h] = Some(rule_id);
            let mut body: Vec<usize> = grounding
                .iter()
                .filter_map(|f| self.index.get(f).copied())
                .collect();
            body.sort_unstable();
            body.dedup();
            for &b in &body {
                self.out[b].push(h);
            }
            self.proof[h] = body;
        }
    }

    /// Facts with no incoming edge: provable by nothing, hence essential.
    pub fn zero_in_degree(&self) -> Vec<Fact> {
        self.facts
            .iter()
            .zip(&self.owner)
            .filter(|(_, owner)| owner.is_none())
            .map(|(f, _)| f.clone())
            .collect()
    }

    /// A set of facts meeting every directed cycle: removing them leaves the
    /// proof graph acyclic. Greedy: per strongly connected component with a
    /// cycle, drop the vertex with the largest in-degree * out-degree product
    /// inside the component and recurse on the rest.
    pub fn cover_cycles(&self) -> Vec<Fact> {
        let n = self.facts.len();
        let mut picked: Vec<usize> = Vec::new();
        let mut worklist: Vec<Vec<usize>> = vec![(0..n).collect()];
        while let Some(active) = worklist.pop() {
            for component in self.components(&active) {
                let has_self_loop =
                    component.len() == 1 && self.proof[component[0]].contains(&component[0]);
                if component.len() < 2 && !has_self_loop {
                    continue;
                }
                let in_component: HashSet<usize> = component.iter().copied().collect();
                let victim = component
                    .iter()
                    .copied()
                    .max_by_key(|&v| {
                        let ins = self.proof[v]
                            .iter()
                            .filter(|b| in_component.contains(b))
                            .count();
                        let outs = self.out[v]
                            .iter()
                            .filter(|h| in_component.contains(h))
                            .count();
                        // Ties go to the smallest fact index.
                        (ins * outs, std::cmp::Reverse(v))
                    })
                    .unwrap();
                picked.push(victim);
                if component.len() > 1 {
                    worklist.push(component.into_iter().filter(|&v| v != victim).collect());
                }
            }
        }
        picked.sort_unstable();
        picked.into_iter().map(|v| self.facts[v].clone()).collect()
    }

    /// Strongly connected components of the subgraph induced by `active`,
    /// via Kosaraju with iterative DFS.
    fn components(&self, active: &[usize]) -> Vec<Vec<usize>> {
        let n = self.facts.len();
        let mut in_active = vec![false; n];
        for &v in active {
            in_active[v] = true;
        }
        let mut visited = vec![false; n];
        let mut order: Vec<usize> = Vec::with_capacity(active.len());
        for &start in active {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                let mut descended = false;
                while *next < self.out[v].len() {
                    let w = self.out[v][*next];
                    *next += 1;
                    if in_active[w] && !visited[w] {
                        visited[w] = true;
                        stack.push((w, 0));
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut assigned = vec![false; n];
        let mut components = Vec::new();
        for &start in order.iter().rev() {
            if assigned[start] {
                continue;
            }
            assigned[start] = true;
            let mut component = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &self.proof[v] {
                    if in_active[w] && !assigned[w] {
                        assigned[w] = true;
                        component.push(w);
                        stack.push(w);
                    }
                }
            }
            components.push(component);
        }
        components
    }

    /// The provability fixpoint: starting from `seed` (and truth), a fact
    /// becomes provable once every fact in its recorded proof is provable.
    /// Returns the set of facts left unprovable; extraction is sound when
    /// seeding with the essential facts and the cycle cover leaves nothing.
    pub fn unprovable_from(&self, seed: &HashSet<Fact>) -> Vec<Fact> {
        let n = self.facts.len();
        let mut marked = vec![false; n];
        let mut remaining: Vec<usize> = self.proof.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = Vec::new();
        for (i, fact) in self.facts.iter().enumerate() {
            if seed.contains(fact) || (self.owner[i].is_some() && remaining[i] == 0) {
                marked[i] = true;
                queue.push(i);
            }
        }
        while let Some(v) = queue.pop() {
            for &h in &self.out[v] {
                if marked[h] {
                    continue;
                }
                remaining[h] -= 1;
                if remaining[h] == 0 {
                    marked[h] = true;
                    queue.push(h);
                }
            }
        }
        self.facts
            .iter()
            .zip(&marked)
            .filter(|(_, &m)| !m)
            .map(|(f, _)| f.clone())
            .collect()
    }

    /// Edge-list dump: `body_fact<TAB>derived_fact<TAB>rule_id`, one line per
    /// edge, empty-body proofs attributed to the truth vertex.
    pub fn dump(&self, kb: &KnowledgeBase) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (h, owner) in self.owner.iter().enumerate() {
            let Some(rule_id) = owner else { continue };
            let head = kb.render_fact_atom(&self.facts[h]);
            if self.proof[h].is_empty() {
                lines.push(format!("{}\t{}\t{}", TOP_VERTEX, head, rule_id));
            } else {
                for &b in &self.proof[h] {
                    lines.push(format!(
                        "{}\t{}\t{}",
                        kb.render_fact_atom(&self.facts[b]),
                        head,
                        rule_id
                    ));
                }
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}
