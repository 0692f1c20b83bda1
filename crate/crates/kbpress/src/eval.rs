//! Grounding of rules against a knowledge base, compression scoring, and
//! forward-chaining closure.
//!
//! Grounding enumerates body substitutions left-to-right with facts in load
//! order, so the proof chosen for a fact is reproducible across runs. Head
//! variables that the body leaves unbound range over the whole constant
//! universe; this is what makes counterexample counts of unsafe rules finite
//! and closed-world.

use std::collections::HashSet;

use indexmap::{IndexMap, IndexSet};

use crate::kb::{ConstantId, Fact, KnowledgeBase};
use crate::rule::{Rule, RuleAtom, Term};

/// What a rule entails over a KB.
///
/// `positive` maps each entailed fact that is present in the KB to one chosen
/// body grounding: the first, in deterministic enumeration order, that does
/// not contain the entailed fact itself. Facts whose every grounding is
/// self-supporting are excluded — such a proof never helps, since a fact
/// cannot be recovered from itself. `negative` is the set of entailed atoms
/// absent from the KB: its counterexamples under the closed-world assumption.
#[derive(Debug, Clone, Default)]
pub struct Evidence {
    pub positive: IndexMap<Fact, Vec<Fact>>,
    pub negative: IndexSet<Fact>,
}

impl Evidence {
    /// Assembles evidence from explicit parts, mostly for synthetic proof
    /// graphs in tests.
    pub fn from_parts(positive: Vec<(Fact, Vec<Fact>)>, negative: Vec<Fact>) -> Evidence {
        Evidence {
            positive: positive.into_iter().collect(),
            negative: negative.into_iter().collect(),
        }
    }
}

/// Marginal compression value of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Score {
    /// `new_positive - negative - cost`.
    pub delta: i64,
    pub new_positive: usize,
    pub negative: usize,
    pub cost: usize,
}

/// Size charged for carrying a rule: its length, but at least 1 so that
/// length-0 axioms are not free.
pub fn rule_cost(rule: &Rule) -> usize {
    rule.length().max(1)
}

/// Scores a rule's evidence against the facts already covered by previously
/// accepted rules.
pub fn score(evidence: &Evidence, covered: &HashSet<Fact>, rule: &Rule) -> Score {
    let new_positive = evidence
        .positive
        .keys()
        .filter(|f| !covered.contains(*f))
        .count();
    let negative = evidence.negative.len();
    let cost = rule_cost(rule);
    Score {
        delta: new_positive as i64 - negative as i64 - cost as i64,
        new_positive,
        negative,
        cost,
    }
}

/// Enumerates everything `rule` entails over `kb` and classifies it.
pub fn ground(rule: &Rule, kb: &KnowledgeBase) -> Evidence {
    let mut evidence = Evidence::default();
    let mut sub: Vec<Option<ConstantId>> = vec![None; rule.var_slots()];
    let domain: Vec<ConstantId> = kb.domain().collect();
    let mut grounding: Vec<Fact> = Vec::new();
    ground_body(
        rule,
        kb,
        0,
        &mut sub,
        &mut grounding,
        &domain,
        &mut evidence,
    );
    evidence
}

fn ground_body(
    rule: &Rule,
    kb: &KnowledgeBase,
    depth: usize,
    sub: &mut Vec<Option<ConstantId>>,
    grounding: &mut Vec<Fact>,
    domain: &[ConstantId],
    evidence: &mut Evidence,
) {
    let body = rule.body();
    if depth == body.len() {
        emit_heads(rule, kb, sub, grounding, domain, evidence);
        return;
    }
    let atom = &body[depth];
    // A fixed first argument narrows the scan to the indexed facts; the
    // survivors come back in the same load order, so proof choice is
    // unchanged.
    let first = match atom.terms[0] {
        Term::Const(c) => Some(c),
        Term::Var(v) => sub[v as usize],
    };
    let all = kb.facts_of(atom.relation);
    let try_fact = |fact: &Fact,
                    sub: &mut Vec<Option<ConstantId>>,
                    grounding: &mut Vec<Fact>,
                    evidence: &mut Evidence| {
        let mut bound: Vec<u32> = Vec::new();
        if match_atom(atom, fact, sub, &mut bound) {
            grounding.push(fact.clone());
            ground_body(rule, kb, depth + 1, sub, grounding, domain, evidence);
            grounding.pop();
        }
        for v in bound {
            sub[v as usize] = None;
        }
    };
    match first {
        Some(c) => {
            for &slot in kb.facts_of_with_first(atom.relation, c) {
                try_fact(&all[slot as usize], sub, grounding, evidence);
            }
        }
        None => {
            for fact in all {
                try_fact(fact, sub, grounding, evidence);
            }
        }
    }
}

/// Unifies a rule atom with a ground fact, extending `sub`; `bound` records
/// variables bound here so the caller can undo them.
fn match_atom(
    atom: &RuleAtom,
    fact: &Fact,
    sub: &mut [Option<ConstantId>],
    bound: &mut Vec<u32>,
) -> bool {
    debug_assert_eq!(atom.terms.len(), fact.args.len());
    for (term, &arg) in atom.terms.iter().zip(&fact.args) {
        match term {
            Term::Const(c) => {
                if *c != arg {
                    undo(sub, bound);
                    return false;
                }
            }
            Term::Var(v) => match sub[*v as usize] {
                Some(existing) => {
                    if existing != arg {
                        undo(sub, bound);
                        return false;
                    }
                }
                None => {
                    sub[*v as usize] = Some(arg);
                    bound.push(*v);
                }
            },
        }
    }
    true
}

fn undo(sub: &mut [Option<ConstantId>], bound: &mut Vec<u32>) {
    for v in bound.drain(..) {
        sub[v as usize] = None;
    }
}

/// Instantiates the head under `sub`, with unbound head variables ranging
/// over the universe, and classifies each resulting atom.
fn emit_heads(
    rule: &Rule,
    kb: &KnowledgeBase,
    sub: &[Option<ConstantId>],
    grounding: &[Fact],
    domain: &[ConstantId],
    evidence: &mut Evidence,
) {
    let head = rule.head();
    let unsafe_vars: Vec<u32> = {
        let mut seen = Vec::new();
        for term in &head.terms {
            if let Term::Var(v) = term {
                if sub[*v as usize].is_none() && !seen.contains(v) {
                    seen.push(*v);
                }
            }
        }
        seen
    };
    if !unsafe_vars.is_empty() && domain.is_empty() {
        return;
    }
    let mut extra: Vec<ConstantId> = vec![ConstantId(0); unsafe_vars.len()];
    let mut counters = vec![0usize; unsafe_vars.len()];
    loop {
        for (i, &c) in counters.iter().enumerate() {
            extra[i] = domain[c];
        }
        let args: Vec<ConstantId> = head
            .terms
            .iter()
            .map(|term| match term {
                Term::Const(c) => *c,
                Term::Var(v) => sub[*v as usize]
                    .unwrap_or_else(|| extra[unsafe_vars.iter().position(|u| u == v).unwrap()]),
            })
            .collect();
        let fact = Fact {
            relation: head.relation,
            args,
        };
        if kb.contains_fact(&fact) {
            if !evidence.positive.contains_key(&fact) && !grounding.contains(&fact) {
                evidence.positive.insert(fact, grounding.to_vec());
            }
        } else {
            evidence.negative.insert(fact);
        }
        // Advance the counters; empty `unsafe_vars` runs the loop body once.
        let mut pos = 0;
        loop {
            if pos == counters.len() {
                return;
            }
            counters[pos] += 1;
            if counters[pos] < domain.len() {
                break;
            }
            counters[pos] = 0;
            pos += 1;
        }
    }
}

/// A deductive closure together with the number of iteration rounds it took.
#[derive(Debug, Clone)]
pub struct ClosureResult {
    pub facts: IndexSet<Fact>,
    pub rounds: usize,
}

/// Least fixpoint of applying `rules` to `seed`, semi-naive: each round joins
/// one body atom against the newly derived facts and the rest against the
/// accumulated set. Unbound head variables range over the KB's universe, so
/// termination is guaranteed by the finite domain.
pub fn closure(seed: &[Fact], rules: &[Rule], kb: &KnowledgeBase) -> ClosureResult {
    let nrel = kb.relation_count();
    let domain: Vec<ConstantId> = kb.domain().collect();
    let mut total: IndexSet<Fact> = IndexSet::new();
    let mut by_rel: Vec<Vec<Fact>> = vec![Vec::new(); nrel];
    let mut delta: Vec<Fact> = Vec::new();
    let insert = |fact: Fact,
                  total: &mut IndexSet<Fact>,
                  by_rel: &mut Vec<Vec<Fact>>,
                  sink: &mut Vec<Fact>| {
        if total.insert(fact.clone()) {
            by_rel[fact.relation.index()].push(fact.clone());
            sink.push(fact);
        }
    };
    for fact in seed {
        insert(fact.clone(), &mut total, &mut by_rel, &mut delta);
    }
    // Empty-body rules fire once, up front.
    for rule in rules.iter().filter(|r| r.body().is_empty()) {
        let sub = vec![None; rule.var_slots()];
        for fact in instantiate_head(rule, &sub, &domain) {
            insert(fact, &mut total, &mut by_rel, &mut delta);
        }
    }
    let mut rounds = 0;
    while !delta.is_empty() {
        rounds += 1;
        let mut delta_by_rel: Vec<Vec<Fact>> = vec![Vec::new(); nrel];
        for fact in &delta {
            delta_by_rel[fact.relation.index()].push(fact.clone());
        }
        let mut next: Vec<Fact> = Vec::new();
        for rule in rules.iter().filter(|r| !r.body().is_empty()) {
            for pivot in 0..rule.body().len() {
                if delta_by_rel[rule.body()[pivot].relation.index()].is_empty() {
                    continue;
                }
                let mut sub = vec![None; rule.var_slots()];
                join_step(
                    rule,
                    0,
                    pivot,
                    &mut sub,
                    &by_rel,
                    &delta_by_rel,
                    &domain,
                    &mut |fact| {
                        if !total.contains(&fact) {
                            next.push(fact);
                        }
                    },
                );
            }
        }
        delta.clear();
        for fact in next {
            insert(fact, &mut total, &mut by_rel, &mut delta);
        }
    }
    ClosureResult {
        facts: total,
        rounds,
    }
}

#[allow(clippy::too_many_arguments)]
fn join_step(
    rule: &Rule,
    depth: usize,
    pivot: usize,
    sub: &mut Vec<Option<ConstantId>>,
    by_rel: &[Vec<Fact>],
    delta_by_rel: &[Vec<Fact>],
    domain: &[ConstantId],
    sink: &mut dyn FnMut(Fact),
) {
    let body = rule.body();
    if depth == body.len() {
        for fact in instantiate_head(rule, sub, domain) {
            sink(fact);
        }
        return;
    }
    let atom = &body[depth];
    let source = if depth == pivot {
        &delta_by_rel[atom.relation.index()]
    } else {
        &by_rel[atom.relation.index()]
    };
    for fact in source {
        let mut bound = Vec::new();
        if match_atom(atom, fact, sub, &mut bound) {
            join_step(
                rule,
                depth + 1,
                pivot,
                sub,
                by_rel,
                delta_by_rel,
                domain,
                sink,
            );
        }
        for v in bound {
            sub[v as usize] = None;
        }
    }
}

fn instantiate_head(rule: &Rule, sub: &[Option<ConstantId>], domain: &[ConstantId]) -> Vec<Fact> {
    let head = rule.head();
    let mut unsafe_vars: Vec<u32> = Vec::new();
    for term in &head.terms {
        if let Term::Var(v) = term {
            if sub[*v as usize].is_none() && !unsafe_vars.contains(v) {
                unsafe_vars.push(*v);
            }
        }
    }
    if !unsafe_vars.is_empty() && domain.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut counters = vec![0usize; unsafe_vars.len()];
    loop {
        let args: Vec<ConstantId> = head
            .terms
            .iter()
            .map(|term| match term {
                Term::Const(c) => *c,
                Term::Var(v) => sub[*v as usize].unwrap_or_else(|| {
                    domain[counters[unsafe_vars.iter().position(|u| u == v).unwrap()]]
                }),
            })
            .collect();
        out.push(Fact {
            relation: head.relation,
            args,
        });
        let mut pos = 0;
        loop {
            if pos == counters.len() {
                return out;
            }
            counters[pos] += 1;
            if counters[pos] < domain.len() {
                break;
            }
            counters[pos] = 0;
            pos += 1;
        }
        if pos == counters.len() {
            return out;
        }
    }
}
