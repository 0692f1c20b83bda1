//! The extraction driver: loops the rule search, accumulates proofs and
//! counterexamples, and derives the final triple (rules, necessary facts,
//! counterexamples) with its size accounting.
//!
//! The driver accepts the best rule of each round until nothing clears the
//! threshold. Necessary facts are then the vertices without a proof plus a
//! cycle cover of the proof graph. Counterexamples are the accepted rules'
//! negative evidence, completed with anything the closure derives beyond the
//! KB — rules can chain through counterexamples, entailing atoms no single
//! rule entailed over the original facts, and those must be recorded too or
//! decompression would not know to subtract them. Should the triple ever end
//! up larger than the plain fact list (cycle covers can cost more than a
//! marginal rule saved), accepted rules are dropped, newest first, until the
//! result is no worse than the input.

use std::collections::HashSet;

use indexmap::IndexSet;

use crate::depgraph::DependencyGraph;
use crate::eval::{closure, rule_cost, Evidence};
use crate::kb::{Fact, KnowledgeBase};
use crate::rule::{Fingerprint, Rule};
use crate::search::{find_single_rule, SearchConfig};

/// Size accounting of an extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Accounting {
    pub original_facts: usize,
    pub necessary: usize,
    pub counter: usize,
    /// Sum over rules of `max(length, 1)`.
    pub rules_cost: usize,
    pub rule_count: usize,
    /// `necessary + counter + rules_cost`.
    pub total: usize,
}

/// The extraction triple plus provenance: rules in acceptance order, the
/// necessary facts, the counterexamples, and the proof graph.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    pub rules: Vec<Rule>,
    pub necessary: Vec<Fact>,
    pub counter: Vec<Fact>,
    pub accounting: Accounting,
    pub graph: DependencyGraph,
    /// Rules retracted by the size guard.
    pub dropped_rules: usize,
}

/// Outcome of checking an extraction against the original KB: the closure of
/// the necessary facts under the rules must reproduce the KB plus exactly the
/// recorded counterexamples.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub ok: bool,
    /// In the KB or the counterexamples, but not derivable.
    pub missing: Vec<Fact>,
    /// Derivable but neither in the KB nor recorded as a counterexample.
    pub extra: Vec<Fact>,
    /// Necessary facts that are not facts of the KB.
    pub necessary_outside_kb: Vec<Fact>,
    /// Recorded counterexamples that are actually facts of the KB.
    pub counter_inside_kb: Vec<Fact>,
    pub closure_rounds: usize,
}

/// Runs the full extraction loop over `kb`.
pub fn extract(kb: &KnowledgeBase, cfg: &SearchConfig) -> ExtractionResult {
    let mut covered: HashSet<Fact> = HashSet::new();
    let mut seen: HashSet<Fingerprint> = HashSet::new();
    let mut accepted: Vec<(Rule, Evidence)> = Vec::new();
    while let Some(found) = find_single_rule(kb, &covered, cfg, &seen) {
        seen.insert(found.fingerprint);
        covered.extend(found.evidence.positive.keys().cloned());
        accepted.push((found.rule, found.evidence));
    }
    let mut dropped = 0;
    loop {
        let result = assemble(kb, &accepted, dropped);
        if result.accounting.total <= kb.fact_count() || accepted.is_empty() {
            return result;
        }
        accepted.pop();
        dropped += 1;
    }
}

/// Derives the triple for a fixed set of accepted rules: builds the proof
/// graph in acceptance order, reads off the necessary facts, and completes
/// the counterexamples from the closure.
pub(crate) fn assemble(
    kb: &KnowledgeBase,
    accepted: &[(Rule, Evidence)],
    dropped_rules: usize,
) -> ExtractionResult {
    let mut graph = DependencyGraph::new(kb);
    for (rule_id, (_, evidence)) in accepted.iter().enumerate() {
        graph.add_proofs(rule_id, evidence);
    }
    let mut necessary = graph.zero_in_degree();
    necessary.extend(graph.cover_cycles());
    let rules: Vec<Rule> = accepted.iter().map(|(r, _)| r.clone()).collect();

    let mut counter: IndexSet<Fact> = IndexSet::new();
    for (_, evidence) in accepted {
        counter.extend(evidence.negative.iter().cloned());
    }
    let closed = closure(&necessary, &rules, kb);
    for fact in &closed.facts {
        if !kb.contains_fact(fact) {
            counter.insert(fact.clone());
        }
    }

    let mut counter: Vec<Fact> = counter.into_iter().collect();
    kb.sort_facts(&mut counter);
    kb.sort_facts(&mut necessary);
    let rules_cost: usize = rules.iter().map(rule_cost).sum();
    let accounting = Accounting {
        original_facts: kb.fact_count(),
        necessary: necessary.len(),
        counter: counter.len(),
        rules_cost,
        rule_count: rules.len(),
        total: necessary.len() + counter.len() + rules_cost,
    };
    ExtractionResult {
        rules,
        necessary,
        counter,
        accounting,
        graph,
        dropped_rules,
    }
}

/// Independently checks the two conditions an extraction must satisfy: the
/// necessary facts and rules derive everything that was removed plus the
/// recorded counterexamples, and nothing else.
pub fn verify(kb: &KnowledgeBase, result: &ExtractionResult) -> VerifyReport {
    verify_parts(kb, &result.rules, &result.necessary, &result.counter)
}

/// `verify` for a triple that did not come from `extract`, e.g. one read
/// back from a bundle.
pub fn verify_parts(
    kb: &KnowledgeBase,
    rules: &[Rule],
    necessary: &[Fact],
    counter: &[Fact],
) -> VerifyReport {
    let closed = closure(necessary, rules, kb);
    let mut target: HashSet<Fact> = kb.facts().iter().cloned().collect();
    target.extend(counter.iter().cloned());

    let mut missing: Vec<Fact> = target
        .iter()
        .filter(|f| !closed.facts.contains(*f))
        .cloned()
        .collect();
    let mut extra: Vec<Fact> = closed
        .facts
        .iter()
        .filter(|f| !target.contains(*f))
        .cloned()
        .collect();
    let mut necessary_outside_kb: Vec<Fact> = necessary
        .iter()
        .filter(|f| !kb.contains_fact(f))
        .cloned()
        .collect();
    let mut counter_inside_kb: Vec<Fact> = counter
        .iter()
        .filter(|f| kb.contains_fact(f))
        .cloned()
        .collect();
    kb.sort_facts(&mut missing);
    kb.sort_facts(&mut extra);
    kb.sort_facts(&mut necessary_outside_kb);
    kb.sort_facts(&mut counter_inside_kb);
    let ok = missing.is_empty()
        && extra.is_empty()
        && necessary_outside_kb.is_empty()
        && counter_inside_kb.is_empty();
    VerifyReport {
        ok,
        missing,
        extra,
        necessary_outside_kb,
        counter_inside_kb,
        closure_rounds: closed.rounds,
    }
}
