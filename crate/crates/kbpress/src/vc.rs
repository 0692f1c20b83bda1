//! Vertex-cover instance generator and exact oracles.
//!
//! An undirected graph turns into a KB with one unary relation per vertex
//! plus `edge`. Every edge contributes a pair of constants and six facts
//! linking them to its endpoints; a run of `edge(c_k)` facts and a block of
//! factless `d_k` constants pad the universe so that the bare axiom
//! `edge(X) :- .` entails exactly as many counterexamples as facts. On such a
//! KB the only worthwhile rules are `edge(X) :- v_i(X)`, each worth twice the
//! degree of its vertex minus one, so the rules kept by a size-minimal
//! extraction read off a vertex cover.
//!
//! The brute-force oracles here are intentionally exhaustive and only accept
//! tiny instances.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::enumerate::enumerate_rules;
use crate::eval::ground;
use crate::extract::{assemble, ExtractionResult};
use crate::kb::{KnowledgeBase, RelationId};
use crate::rule::{ArgConstants, Rule, RuleAtom, Term};
use crate::search::SearchConfig;

#[derive(Debug, Error)]
pub enum VcError {
    #[error("line {line}: bad graph input: {reason}")]
    GraphParse { line: usize, reason: String },
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range 1..={count}")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("exhaustive cover needs at most 20 vertices, got {0}")]
    TooManyVertices(usize),
    #[error("exhaustive compression needs at most {limit} facts, got {found}")]
    KbTooLarge { found: usize, limit: usize },
    #[error("rule space too large for exhaustive compression: {found} candidates (limit {limit})")]
    RuleSpaceTooLarge { found: usize, limit: usize },
}

/// An undirected graph with 1-based vertices, no self-loops, no duplicate
/// edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, VcError> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u == v {
                return Err(VcError::SelfLoop(u, v));
            }
            for w in [u, v] {
                if w == 0 || w > vertices {
                    return Err(VcError::VertexOutOfRange {
                        vertex: w,
                        count: vertices,
                    });
                }
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(VcError::DuplicateEdge(u, v));
            }
        }
        Ok(UndirectedGraph { vertices, edges })
    }

    /// Parses `n m` followed by `m` lines `i j` with 1-based vertices.
    pub fn parse(input: &str) -> Result<Self, VcError> {
        let mut vertices = None;
        let mut expected = 0usize;
        let mut edges = Vec::new();
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut nums = line.split_whitespace().map(|t| {
                t.parse::<usize>().map_err(|_| VcError::GraphParse {
                    line: line_no,
                    reason: format!("expected a number, got '{t}'"),
                })
            });
            let a = nums
                .next()
                .transpose()?
                .ok_or_else(|| VcError::GraphParse {
                    line: line_no,
                    reason: "expected two numbers".to_string(),
                })?;
            let b = nums
                .next()
                .transpose()?
                .ok_or_else(|| VcError::GraphParse {
                    line: line_no,
                    reason: "expected two numbers".to_string(),
                })?;
            if nums.next().is_some() {
                return Err(VcError::GraphParse {
                    line: line_no,
                    reason: "expected exactly two numbers".to_string(),
                });
            }
            if vertices.is_none() {
                vertices = Some(a);
                expected = b;
            } else {
                edges.push((a, b));
            }
        }
        let vertices = vertices.ok_or(VcError::GraphParse {
            line: 0,
            reason: "empty graph input".to_string(),
        })?;
        if edges.len() != expected {
            return Err(VcError::GraphParse {
                line: 0,
                reason: format!("header promised {expected} edges, found {}", edges.len()),
            });
        }
        Self::new(vertices, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| u == vertex || v == vertex)
            .count()
    }

    fn is_cover(&self, cover: &BTreeSet<usize>) -> bool {
        self.edges
            .iter()
            .all(|&(u, v)| cover.contains(&u) || cover.contains(&v))
    }
}

/// Constant pair naming for the k-th edge (0-based): letters `a`/`a'`
/// through `z`/`z'`, then `e_i_j`/`ep_i_j` from the endpoints.
fn edge_constants(k: usize, endpoints: (usize, usize)) -> (String, String) {
    if k < 26 {
        let letter = (b'a' + k as u8) as char;
        (letter.to_string(), format!("{letter}'"))
    } else {
        let (i, j) = endpoints;
        (format!("e_{i}_{j}"), format!("ep_{i}_{j}"))
    }
}

/// Builds the reduction KB for a graph.
pub fn graph_to_kb(graph: &UndirectedGraph) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let mut vertex_rel = Vec::with_capacity(graph.vertices + 1);
    vertex_rel.push(RelationId(0)); // placeholder for 1-based indexing
    for v in 1..=graph.vertices {
        vertex_rel.push(kb.add_relation(&format!("v{v}"), 1).unwrap());
    }
    let edge_rel = kb.add_relation("edge", 1).unwrap();

    let mut pair_constants = Vec::with_capacity(graph.edges.len());
    for (k, &(i, j)) in graph.edges.iter().enumerate() {
        let (e, ep) = edge_constants(k, (i, j));
        let e = kb.add_constant(&e);
        let ep = kb.add_constant(&ep);
        kb.add_fact(vertex_rel[i], vec![e]).unwrap();
        kb.add_fact(vertex_rel[i], vec![ep]).unwrap();
        kb.add_fact(vertex_rel[j], vec![e]).unwrap();
        kb.add_fact(vertex_rel[j], vec![ep]).unwrap();
        pair_constants.push((e, ep));
    }
    for &(e, ep) in &pair_constants {
        kb.add_fact(edge_rel, vec![e]).unwrap();
        kb.add_fact(edge_rel, vec![ep]).unwrap();
    }
    let m = graph.edges.len();
    for k in 1..=2 * m + 1 {
        let c = kb.add_constant(&format!("c_{k}"));
        kb.add_fact(edge_rel, vec![c]).unwrap();
    }
    for k in 1..=4 * m + 1 {
        kb.add_constant(&format!("d_{k}"));
    }
    kb
}

/// The search configuration under which extraction on a reduction KB keeps
/// exactly the worthwhile `edge(X) :- v_i(X)` rules: only `edge` is a target
/// head and a rule must strictly shrink the KB.
pub fn reduction_search_config() -> SearchConfig {
    SearchConfig {
        target_relations: Some(["edge".to_string()].into()),
        min_delta: 1,
        ..SearchConfig::default()
    }
}

/// Minimum vertex cover by exhaustive search over subsets of increasing
/// size; among minimum covers the lexicographically smallest vertex list
/// wins. Limited to 20 vertices.
pub fn brute_force_vertex_cover(graph: &UndirectedGraph) -> Result<BTreeSet<usize>, VcError> {
    let n = graph.vertex_count();
    if n > 20 {
        return Err(VcError::TooManyVertices(n));
    }
    for size in 0..=n {
        let mut combo: Vec<usize> = (1..=size).collect();
        loop {
            let cover: BTreeSet<usize> = combo.iter().copied().collect();
            if graph.is_cover(&cover) {
                return Ok(cover);
            }
            if size == 0 || !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    unreachable!("the full vertex set always covers")
}

/// Advances to the next lexicographic `combo.len()`-combination of `1..=n`.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - 1 - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The vertices whose rule `edge(X) :- v_i(X)` appears in `rules`.
pub fn cover_from_rules(kb: &KnowledgeBase, rules: &[Rule]) -> BTreeSet<usize> {
    let Some(edge) = kb.relation_id("edge") else {
        return BTreeSet::new();
    };
    let fps: BTreeSet<_> = rules.iter().map(|r| r.fingerprint(kb)).collect();
    let mut cover = BTreeSet::new();
    for relation in kb.relations() {
        let Some(index) = relation
            .name
            .strip_prefix('v')
            .and_then(|digits| digits.parse::<usize>().ok())
        else {
            continue;
        };
        if relation.arity != 1 {
            continue;
        }
        let vid = kb.relation_id(&relation.name).unwrap();
        let reference = Rule::from_atoms(vec![
            RuleAtom {
                relation: edge,
                terms: vec![Term::Var(0)],
            },
            RuleAtom {
                relation: vid,
                terms: vec![Term::Var(0)],
            },
        ]);
        if fps.contains(&reference.fingerprint(kb)) {
            cover.insert(index);
        }
    }
    cover
}

const COMPRESS_FACT_LIMIT: usize = 12;
const COMPRESS_RULE_LIMIT: usize = 16;

/// Exact compression oracle for tiny KBs: enumerates the whole rule space up
/// to `max_len`, prunes candidates that can never help, and tries every rule
/// subset, deriving necessary facts and counterexamples exactly as the greedy
/// driver would. Returns a global minimizer of the total; ties prefer fewer
/// rules.
pub fn brute_force_compress(
    kb: &KnowledgeBase,
    max_len: usize,
) -> Result<ExtractionResult, VcError> {
    if kb.fact_count() > COMPRESS_FACT_LIMIT {
        return Err(VcError::KbTooLarge {
            found: kb.fact_count(),
            limit: COMPRESS_FACT_LIMIT,
        });
    }
    let candidates = compress_candidates(kb, max_len);
    if candidates.len() > COMPRESS_RULE_LIMIT {
        return Err(VcError::RuleSpaceTooLarge {
            found: candidates.len(),
            limit: COMPRESS_RULE_LIMIT,
        });
    }
    let mut masks: Vec<u32> = (0..(1u32 << candidates.len())).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut best: Option<ExtractionResult> = None;
    for mask in masks {
        let subset: Vec<_> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, pair)| pair.clone())
            .collect();
        let result = assemble(kb, &subset, 0);
        if best
            .as_ref()
            .is_none_or(|b| result.accounting.total < b.accounting.total)
        {
            best = Some(result);
        }
    }
    Ok(best.unwrap())
}

/// Rule-space size the exhaustive oracle would face on this KB, after
/// pruning.
pub fn compress_candidate_count(kb: &KnowledgeBase, max_len: usize) -> usize {
    compress_candidates(kb, max_len).len()
}

fn compress_candidates(kb: &KnowledgeBase, max_len: usize) -> Vec<(Rule, crate::eval::Evidence)> {
    let constants = ArgConstants::from_kb(kb);
    enumerate_rules(kb, max_len, Some(&constants))
        .into_iter()
        // A body repeating an identical atom behaves exactly like the
        // deduplicated rule, which is also enumerated and never costlier.
        .filter(|rule| {
            let body = rule.body();
            !body
                .iter()
                .enumerate()
                .any(|(i, a)| body[i + 1..].contains(a))
        })
        .filter_map(|rule| {
            let evidence = ground(&rule, kb);
            // Rules that cover nothing only ever add cost or counterexamples.
            if evidence.positive.is_empty() {
                None
            } else {
                Some((rule, evidence))
            }
        })
        .collect()
}
