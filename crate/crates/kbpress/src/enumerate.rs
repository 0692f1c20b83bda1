//! Brute-force enumeration of the valid rule space, independent of the
//! extension operators.
//!
//! Rules are built directly: choose a head relation, a body multiset of
//! relations, a set partition of all argument positions, and optionally bind
//! singleton blocks to constants. Trivial rules and rules with independent
//! fragments are discarded. This is deliberately the slow road; the search
//! module reaches the same space through extension steps, and tests compare
//! the two.

use std::collections::HashSet;

use crate::eval::{ground, score, Score};
use crate::kb::{ConstantId, Fact, KnowledgeBase, RelationId};
use crate::rule::{ArgConstants, Fingerprint, Rule, RuleAtom, Term};

/// Every structurally distinct rule of length at most `max_len`, without
/// fingerprint deduplication: isomorphic variants of the same rule (from
/// duplicate body relations) all appear.
pub fn enumerate_rules_raw(
    kb: &KnowledgeBase,
    max_len: usize,
    constants: Option<&ArgConstants>,
) -> Vec<Rule> {
    let mut out = Vec::new();
    let relation_count = kb.relation_count();
    for head in 0..relation_count {
        let head = RelationId(head as u32);
        // A connected body atom merges at least once, so bodies larger than
        // max_len cannot stay within the length budget.
        let mut body: Vec<RelationId> = Vec::new();
        enumerate_bodies(kb, max_len, head, 0, &mut body, constants, &mut out);
    }
    out
}

/// The valid rule space of length at most `max_len`, deduplicated by
/// fingerprint, in a deterministic order.
pub fn enumerate_rules(
    kb: &KnowledgeBase,
    max_len: usize,
    constants: Option<&ArgConstants>,
) -> Vec<Rule> {
    let mut seen: HashSet<Fingerprint> = HashSet::new();
    enumerate_rules_raw(kb, max_len, constants)
        .into_iter()
        .filter(|r| seen.insert(r.fingerprint(kb)))
        .collect()
}

/// Enumerates and scores the whole space against `kb`, sorted best-first by
/// `(delta desc, length asc, fingerprint asc)`.
pub fn enumerate_scored(
    kb: &KnowledgeBase,
    max_len: usize,
    constants: Option<&ArgConstants>,
    covered: &std::collections::HashSet<Fact>,
) -> Vec<(Rule, Score)> {
    let mut scored: Vec<(Rule, Score, Fingerprint)> = enumerate_rules(kb, max_len, constants)
        .into_iter()
        .map(|r| {
            let ev = ground(&r, kb);
            let s = score(&ev, covered, &r);
            let fp = r.fingerprint(kb);
            (r, s, fp)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.delta
            .cmp(&a.1.delta)
            .then(a.0.length().cmp(&b.0.length()))
            .then(a.2.cmp(&b.2))
    });
    scored.into_iter().map(|(r, s, _)| (r, s)).collect()
}

fn enumerate_bodies(
    kb: &KnowledgeBase,
    max_len: usize,
    head: RelationId,
    from: usize,
    body: &mut Vec<RelationId>,
    constants: Option<&ArgConstants>,
    out: &mut Vec<Rule>,
) {
    emit_partitions(kb, max_len, head, body, constants, out);
    if body.len() == max_len {
        return;
    }
    for rel in from..kb.relation_count() {
        body.push(RelationId(rel as u32));
        enumerate_bodies(kb, max_len, head, rel, body, constants, out);
        body.pop();
    }
}

fn emit_partitions(
    kb: &KnowledgeBase,
    max_len: usize,
    head: RelationId,
    body: &[RelationId],
    constants: Option<&ArgConstants>,
    out: &mut Vec<Rule>,
) {
    // Positions: (instance, arg) pairs over head + body.
    let mut relations = vec![head];
    relations.extend_from_slice(body);
    let mut positions: Vec<(usize, usize)> = Vec::new();
    for (instance, &rel) in relations.iter().enumerate() {
        for arg in 0..kb.relation(rel).arity {
            positions.push((instance, arg));
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    partition_step(
        kb,
        max_len,
        &relations,
        &positions,
        0,
        &mut blocks,
        constants,
        out,
    );
}

/// Standard set-partition walk: each position joins an existing block or
/// opens a new one.
#[allow(clippy::too_many_arguments)]
fn partition_step(
    kb: &KnowledgeBase,
    max_len: usize,
    relations: &[RelationId],
    positions: &[(usize, usize)],
    next: usize,
    blocks: &mut Vec<Vec<usize>>,
    constants: Option<&ArgConstants>,
    out: &mut Vec<Rule>,
) {
    if next == positions.len() {
        let merged: usize = blocks.iter().map(|b| b.len() - 1).sum();
        if merged > max_len {
            return;
        }
        emit_constant_choices(kb, max_len, relations, positions, blocks, constants, out);
        return;
    }
    // Pruning: merges already made never go away.
    let merged: usize = blocks.iter().map(|b| b.len() - 1).sum();
    if merged > max_len {
        return;
    }
    for i in 0..blocks.len() {
        blocks[i].push(next);
        partition_step(
            kb,
            max_len,
            relations,
            positions,
            next + 1,
            blocks,
            constants,
            out,
        );
        blocks[i].pop();
    }
    blocks.push(vec![next]);
    partition_step(
        kb,
        max_len,
        relations,
        positions,
        next + 1,
        blocks,
        constants,
        out,
    );
    blocks.pop();
}

#[allow(clippy::too_many_arguments)]
fn emit_constant_choices(
    kb: &KnowledgeBase,
    max_len: usize,
    relations: &[RelationId],
    positions: &[(usize, usize)],
    blocks: &[Vec<usize>],
    constants: Option<&ArgConstants>,
    out: &mut Vec<Rule>,
) {
    let merged: usize = blocks.iter().map(|b| b.len() - 1).sum();
    let singletons: Vec<usize> = (0..blocks.len())
        .filter(|&i| blocks[i].len() == 1)
        .collect();
    // Choice per singleton block: keep the variable, or bind one candidate
    // constant of that position.
    let mut choice: Vec<Option<ConstantId>> = vec![None; singletons.len()];
    emit_with_choices(
        kb,
        max_len,
        relations,
        positions,
        blocks,
        constants,
        &singletons,
        &mut choice,
        0,
        merged,
        out,
    );
}

#[allow(clippy::too_many_arguments)]
fn emit_with_choices(
    kb: &KnowledgeBase,
    max_len: usize,
    relations: &[RelationId],
    positions: &[(usize, usize)],
    blocks: &[Vec<usize>],
    constants: Option<&ArgConstants>,
    singletons: &[usize],
    choice: &mut Vec<Option<ConstantId>>,
    depth: usize,
    merged: usize,
    out: &mut Vec<Rule>,
) {
    let bound = choice.iter().take(depth).filter(|c| c.is_some()).count();
    if merged + bound > max_len {
        return;
    }
    if depth == singletons.len() {
        if let Some(rule) = build_rule(kb, relations, positions, blocks, singletons, choice) {
            out.push(rule);
        }
        return;
    }
    choice[depth] = None;
    emit_with_choices(
        kb,
        max_len,
        relations,
        positions,
        blocks,
        constants,
        singletons,
        choice,
        depth + 1,
        merged,
        out,
    );
    if let Some(candidates) = constants {
        let (instance, arg) = positions[blocks[singletons[depth]][0]];
        for &c in candidates.at(relations[instance], arg) {
            choice[depth] = Some(c);
            emit_with_choices(
                kb,
                max_len,
                relations,
                positions,
                blocks,
                constants,
                singletons,
                choice,
                depth + 1,
                merged,
                out,
            );
        }
        choice[depth] = None;
    }
}

fn build_rule(
    kb: &KnowledgeBase,
    relations: &[RelationId],
    positions: &[(usize, usize)],
    blocks: &[Vec<usize>],
    singletons: &[usize],
    choice: &[Option<ConstantId>],
) -> Option<Rule> {
    let mut atoms: Vec<RuleAtom> = relations
        .iter()
        .map(|&rel| RuleAtom {
            relation: rel,
            terms: vec![Term::Var(0); kb.relation(rel).arity],
        })
        .collect();
    for (block_idx, block) in blocks.iter().enumerate() {
        let term = match singletons.iter().position(|&s| s == block_idx) {
            Some(slot) => match choice[slot] {
                Some(c) => Term::Const(c),
                None => Term::Var(block_idx as u32),
            },
            None => Term::Var(block_idx as u32),
        };
        for &pos in block {
            let (instance, arg) = positions[pos];
            atoms[instance].terms[arg] = term;
        }
    }
    let rule = Rule::from_atoms(atoms).normalized();
    if rule.is_trivial() || rule.has_independent_fragment() {
        return None;
    }
    Some(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KbFormat;

    fn signature_kb(relations: &[(&str, usize)]) -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        for (name, arity) in relations {
            kb.add_relation(name, *arity).unwrap();
        }
        kb
    }

    #[test]
    fn two_unary_relations_length_one() {
        let kb = signature_kb(&[("p", 1), ("q", 1)]);
        let rules = enumerate_rules(&kb, 1, None);
        let rendered: Vec<String> = rules.iter().map(|r| r.render(&kb)).collect();
        // Head-only rules plus the two cross implications; self implications
        // are trivial and disconnected bodies are fragments.
        assert_eq!(rules.len(), 4, "got: {rendered:?}");
        assert!(rendered.contains(&"p(X0) :- .".to_string()));
        assert!(rendered.contains(&"q(X0) :- .".to_string()));
        assert!(rendered.contains(&"p(X0) :- q(X0).".to_string()));
        assert!(rendered.contains(&"q(X0) :- p(X0).".to_string()));
    }

    #[test]
    fn no_enumerated_rule_is_invalid() {
        let kb = signature_kb(&[("p", 1), ("q", 2), ("r", 2)]);
        for rule in enumerate_rules_raw(&kb, 2, None) {
            assert!(!rule.is_trivial());
            assert!(!rule.has_independent_fragment());
            assert!(rule.length() <= 2);
        }
    }

    #[test]
    fn constant_choices_respect_position_candidates() {
        let kb = KnowledgeBase::parse("p\ta\nq\tb\n", KbFormat::Tsv).unwrap();
        let consts = ArgConstants::from_kb(&kb);
        let rules = enumerate_rules(&kb, 1, Some(&consts));
        let rendered: Vec<String> = rules.iter().map(|r| r.render(&kb)).collect();
        assert!(rendered.contains(&"p(a) :- .".to_string()));
        assert!(!rendered.contains(&"p(b) :- .".to_string()));
    }

    #[test]
    fn scored_enumeration_is_sorted_best_first() {
        let kb = KnowledgeBase::parse("p\ta\np\tb\nq\ta\nq\tb\n", KbFormat::Tsv).unwrap();
        let consts = ArgConstants::from_kb(&kb);
        let scored = enumerate_scored(&kb, 2, Some(&consts), &Default::default());
        assert!(!scored.is_empty());
        for pair in scored.windows(2) {
            assert!(pair[0].1.delta >= pair[1].1.delta);
        }
        // p(X) :- q(X) covers both p facts at cost 1.
        let best = &scored[0];
        assert_eq!(best.1.delta, 1);
    }
}
