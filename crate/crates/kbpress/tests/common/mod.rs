//! Helpers shared by the integration suites.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;

use kbpress::kb::{ConstantId, KnowledgeBase};
use kbpress::rule::{Rule, Term};

/// Random KBs with relations `r0..` of arity 1 or 2 over constants `c0..`.
pub fn random_kb(
    rng: &mut StdRng,
    max_relations: usize,
    max_facts: usize,
    max_constants: usize,
) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let nrel = rng.gen_range(1..=max_relations);
    let nconst = rng.gen_range(2..=max_constants.max(2));
    let consts: Vec<ConstantId> = (0..nconst)
        .map(|i| kb.add_constant(&format!("c{i}")))
        .collect();
    let mut rels = Vec::new();
    for i in 0..nrel {
        let arity = rng.gen_range(1..=2);
        rels.push(kb.add_relation(&format!("r{i}"), arity).unwrap());
    }
    for _ in 0..rng.gen_range(1..=max_facts) {
        let rel = rels[rng.gen_range(0..rels.len())];
        let arity = kb.relation(rel).arity;
        let args: Vec<ConstantId> = (0..arity)
            .map(|_| consts[rng.gen_range(0..consts.len())])
            .collect();
        kb.add_fact(rel, args).unwrap();
    }
    kb
}

/// Brute-force rule isomorphism: some relation-preserving body alignment
/// admits a variable bijection matching all positions, with constants
/// matching literally. The slow, obviously-correct baseline the fingerprint
/// is tested against.
pub fn isomorphic(a: &Rule, b: &Rule) -> bool {
    if a.head().relation != b.head().relation || a.body().len() != b.body().len() {
        return false;
    }
    let n = b.body().len();
    let mut order: Vec<usize> = (0..n).collect();
    permute_and_check(a, b, &mut order, 0)
}

fn permute_and_check(a: &Rule, b: &Rule, order: &mut Vec<usize>, k: usize) -> bool {
    if k == order.len() {
        return aligned_match(a, b, order);
    }
    for i in k..order.len() {
        order.swap(k, i);
        if a.body()[k].relation == b.body()[order[k]].relation
            && permute_and_check(a, b, order, k + 1)
        {
            order.swap(k, i);
            return true;
        }
        order.swap(k, i);
    }
    false
}

fn aligned_match(a: &Rule, b: &Rule, order: &[usize]) -> bool {
    let mut forward: BTreeMap<u32, u32> = Default::default();
    let mut backward: BTreeMap<u32, u32> = Default::default();
    let pairs = std::iter::once((a.head(), b.head()))
        .chain(a.body().iter().zip(order.iter().map(|&i| &b.body()[i])));
    for (left, right) in pairs {
        if left.relation != right.relation {
            return false;
        }
        for (s, t) in left.terms.iter().zip(&right.terms) {
            match (s, t) {
                (Term::Const(x), Term::Const(y)) => {
                    if x != y {
                        return false;
                    }
                }
                (Term::Var(x), Term::Var(y)) => {
                    if *forward.entry(*x).or_insert(*y) != *y {
                        return false;
                    }
                    if *backward.entry(*y).or_insert(*x) != *x {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}
