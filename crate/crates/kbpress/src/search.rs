//! Top-down beam search for the single best rule.
//!
//! Each head relation gets its own beam starting from the most general rule
//! (empty body, all-distinct head variables). Rounds expand the frontier with
//! the extension operators, score every new candidate against the residual
//! (facts covered by previously accepted rules do not count again), and keep
//! the best `beam_width`. Candidates are deduplicated by fingerprint, both
//! within the run and against rules accepted earlier. The globally best
//! candidate is returned if it clears `min_delta`.

use std::collections::{BTreeSet, HashSet};

use crate::concurrency::parallel_map;
use crate::eval::{ground, score, Evidence, Score};
use crate::kb::{Fact, KnowledgeBase, RelationId};
use crate::rule::{ArgConstants, Fingerprint, Rule};

/// Tuning knobs for `find_single_rule`, surfaced as CLI flags.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub max_rule_length: usize,
    /// Acceptance threshold on the marginal score.
    pub min_delta: i64,
    /// When set, only these relations are tried as rule heads.
    pub target_relations: Option<BTreeSet<String>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 5,
            max_rule_length: 4,
            min_delta: 0,
            target_relations: None,
        }
    }
}

/// A scored search result.
#[derive(Debug, Clone)]
pub struct FoundRule {
    pub rule: Rule,
    pub fingerprint: Fingerprint,
    pub evidence: Evidence,
    pub score: Score,
}

struct Scored {
    rule: Rule,
    fingerprint: Fingerprint,
    evidence: Evidence,
    score: Score,
}

/// `(delta desc, length asc, fingerprint asc)` — the ranking used for beams,
/// the returned candidate, and all tie-breaking.
fn better(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    b.score
        .delta
        .cmp(&a.score.delta)
        .then(a.rule.length().cmp(&b.rule.length()))
        .then(a.fingerprint.cmp(&b.fingerprint))
}

/// Searches for the best-scoring rule over the residual KB, or nothing when
/// no candidate reaches `cfg.min_delta`. Identical inputs return identical
/// results.
pub fn find_single_rule(
    kb: &KnowledgeBase,
    covered: &HashSet<Fact>,
    cfg: &SearchConfig,
    seen: &HashSet<Fingerprint>,
) -> Option<FoundRule> {
    let constants = ArgConstants::from_kb(kb);
    let mut evaluated: HashSet<Fingerprint> = HashSet::new();
    let mut best: Option<Scored> = None;

    for rel in 0..kb.relation_count() {
        let head = RelationId(rel as u32);
        if let Some(targets) = &cfg.target_relations {
            if !targets.contains(&kb.relation(head).name) {
                continue;
            }
        }
        beam_for_head(
            kb,
            covered,
            cfg,
            seen,
            &constants,
            head,
            &mut evaluated,
            &mut best,
        );
    }

    let best = best?;
    if best.score.delta < cfg.min_delta {
        return None;
    }
    Some(FoundRule {
        rule: best.rule,
        fingerprint: best.fingerprint,
        evidence: best.evidence,
        score: best.score,
    })
}

#[allow(clippy::too_many_arguments)]
fn beam_for_head(
    kb: &KnowledgeBase,
    covered: &HashSet<Fact>,
    cfg: &SearchConfig,
    seen: &HashSet<Fingerprint>,
    constants: &ArgConstants,
    head: RelationId,
    evaluated: &mut HashSet<Fingerprint>,
    best: &mut Option<Scored>,
) {
    let start = Rule::new_head_rule(kb, head);
    let start_fp = start.fingerprint(kb);
    let mut pool: Vec<(Rule, Fingerprint)> = Vec::new();
    if !seen.contains(&start_fp) && evaluated.insert(start_fp.clone()) {
        pool.push((start, start_fp));
    }
    while !pool.is_empty() {
        let mut scored: Vec<Scored> = parallel_map(pool, |(rule, fp)| {
            let evidence = ground(rule, kb);
            let s = score(&evidence, covered, rule);
            Scored {
                rule: rule.clone(),
                fingerprint: fp.clone(),
                evidence,
                score: s,
            }
        });
        scored.sort_by(better);
        scored.truncate(cfg.beam_width);
        if let Some(first) = scored.first() {
            if best.as_ref().is_none_or(|b| better(first, b).is_lt()) {
                *best = Some(Scored {
                    rule: first.rule.clone(),
                    fingerprint: first.fingerprint.clone(),
                    evidence: first.evidence.clone(),
                    score: first.score,
                });
            }
        }
        pool = Vec::new();
        for cand in &scored {
            if cand.rule.length() >= cfg.max_rule_length {
                continue;
            }
            for ext in cand.rule.extensions(kb, Some(constants)) {
                let fp = ext.fingerprint(kb);
                if seen.contains(&fp) || !evaluated.insert(fp.clone()) {
                    continue;
                }
                pool.push((ext, fp));
            }
        }
    }
}
