//! Acceptance suite: one test per criterion, each printing a summary line
//! (visible with `--nocapture`). Expected values come from the worked
//! examples or from independent oracles computed in this file; nothing here
//! reuses the code path it is checking.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use kbpress::bundle;
use kbpress::depgraph::DependencyGraph;
use kbpress::enumerate::{enumerate_rules, enumerate_rules_raw};
use kbpress::eval::{ground, score, Evidence};
use kbpress::extract::{extract, verify};
use kbpress::kb::{ConstantId, Fact, KbFormat, KnowledgeBase, RelationId};
use kbpress::rule::{ArgConstants, Fingerprint, Rule, RuleAtom, Term};
use kbpress::search::SearchConfig;
use kbpress::vc::{
    brute_force_compress, brute_force_vertex_cover, compress_candidate_count, cover_from_rules,
    graph_to_kb, reduction_search_config, UndirectedGraph,
};

use common::{isomorphic, random_kb};

const FAMILY: &str = include_str!("fixtures/family.tsv");
const FIG1: &str = include_str!("fixtures/fig1.graph");

fn family_kb() -> KnowledgeBase {
    KnowledgeBase::parse(FAMILY, KbFormat::Tsv).unwrap()
}

fn fp(kb: &KnowledgeBase, text: &str) -> Fingerprint {
    Rule::parse(kb, text).unwrap().fingerprint(kb)
}

/// Criterion 1: the 18-fact family KB compresses to the two classic rules,
/// the 12 base facts and no counterexamples, and decompression restores all
/// 18 facts exactly, in under a second.
#[test]
fn family_kb_reproduces_the_flagship_extraction() {
    let start = Instant::now();
    let kb = family_kb();
    let cfg = SearchConfig {
        beam_width: 64,
        target_relations: Some(["father".to_string(), "mother".to_string()].into()),
        ..SearchConfig::default()
    };
    let result = extract(&kb, &cfg);

    let got: BTreeSet<Fingerprint> = result.rules.iter().map(|r| r.fingerprint(&kb)).collect();
    let expected: BTreeSet<Fingerprint> = [
        "father(X,Y) :- parent(X,Y), male(X).",
        "mother(X,Y) :- parent(X,Y), female(X).",
    ]
    .iter()
    .map(|t| fp(&kb, t))
    .collect();
    assert_eq!(got, expected, "rule fingerprints");

    let expected_necessary: BTreeSet<Fact> = kb
        .facts()
        .iter()
        .filter(|f| {
            let name = &kb.relation(f.relation).name;
            name == "parent" || name == "male" || name == "female"
        })
        .cloned()
        .collect();
    assert_eq!(expected_necessary.len(), 12);
    let got_necessary: BTreeSet<Fact> = result.necessary.iter().cloned().collect();
    assert_eq!(got_necessary, expected_necessary, "necessary facts");
    assert!(result.counter.is_empty(), "no counterexamples");
    assert_eq!(result.accounting.total, 18);

    // Full decompression through the on-disk bundle.
    let dir = tempfile::tempdir().unwrap();
    bundle::write_bundle(dir.path(), &kb, &result, &cfg, true, false).unwrap();
    let raw = bundle::read_bundle(dir.path()).unwrap();
    let recovered = bundle::decompress(&raw).unwrap();
    let original: BTreeSet<String> = kb.facts().iter().map(|f| kb.render_fact_tsv(f)).collect();
    let restored: BTreeSet<String> = recovered
        .facts()
        .iter()
        .map(|f| recovered.render_fact_tsv(f))
        .collect();
    assert_eq!(restored, original, "decompression recovers all 18 facts");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "family KB: rules ok, |N|=12, |C|=0, round trip ok in {:?}",
        elapsed
    );
}

/// Criterion 2: the worked 3-vertex reduction produces exactly the listed
/// facts and constants; extraction keeps only the rule for the covering
/// vertex, matching the exhaustive minimum vertex cover, in under a second.
#[test]
fn vertex_cover_example_reproduces_exactly() {
    let start = Instant::now();
    let graph = UndirectedGraph::parse(FIG1).unwrap();
    let kb = graph_to_kb(&graph);

    let expected_constants: BTreeSet<String> = ["a", "a'", "b", "b'"]
        .into_iter()
        .map(String::from)
        .chain((1..=5).map(|k| format!("c_{k}")))
        .chain((1..=9).map(|k| format!("d_{k}")))
        .collect();
    let got_constants: BTreeSet<String> = kb
        .domain()
        .map(|c| kb.constant_name(c).to_string())
        .collect();
    assert_eq!(got_constants, expected_constants, "constant universe");

    let mut expected_facts: BTreeSet<String> = [
        "v1\ta", "v1\ta'", "v2\ta", "v2\ta'", "v1\tb", "v1\tb'", "v3\tb", "v3\tb'", "edge\ta",
        "edge\ta'", "edge\tb", "edge\tb'",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    for k in 1..=5 {
        expected_facts.insert(format!("edge\tc_{k}"));
    }
    let got_facts: BTreeSet<String> = kb.facts().iter().map(|f| kb.render_fact_tsv(f)).collect();
    assert_eq!(got_facts, expected_facts, "generated fact set");

    let result = extract(&kb, &reduction_search_config());
    assert!(verify(&kb, &result).ok);
    let v1 = fp(&kb, "edge(X) :- v1(X).");
    let got: Vec<Fingerprint> = result.rules.iter().map(|r| r.fingerprint(&kb)).collect();
    assert_eq!(got, vec![v1], "only the v1 rule is kept");

    let cover = cover_from_rules(&kb, &result.rules);
    let exact = brute_force_vertex_cover(&graph).unwrap();
    assert_eq!(cover, BTreeSet::from([1]));
    assert_eq!(cover, exact);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("reduction example: facts, constants, rule and cover ok in {elapsed:?}");
}

/// Criterion 3: on 20 random reduction KBs the bare axiom scores exactly -1
/// and each vertex rule scores exactly twice its degree minus one, with
/// integer arithmetic.
#[test]
fn reduction_scores_match_degree_arithmetic() {
    let mut rng = StdRng::seed_from_u64(0xde61);
    let mut checked_vertices = 0usize;
    for case in 0..20 {
        let graph = random_graph(&mut rng, 6);
        let kb = graph_to_kb(&graph);
        let axiom = Rule::parse(&kb, "edge(X) :- .").unwrap();
        let ev = ground(&axiom, &kb);
        let s = score(&ev, &HashSet::new(), &axiom);
        assert_eq!(
            s.delta, -1,
            "case {case}: axiom on {:?} scored {}",
            graph, s.delta
        );
        for vertex in 1..=graph.vertex_count() {
            let rule = Rule::parse(&kb, &format!("edge(X) :- v{vertex}(X).")).unwrap();
            let ev = ground(&rule, &kb);
            let s = score(&ev, &HashSet::new(), &rule);
            let expected = 2 * graph.degree(vertex) as i64 - 1;
            assert_eq!(
                s.delta, expected,
                "case {case}: vertex {vertex} of {:?}",
                graph
            );
            checked_vertices += 1;
        }
    }
    println!("degree arithmetic: 20 graphs, {checked_vertices} vertex rules exact");
}

/// Criterion 4: at least 100 random KBs (up to 50 facts, 5 relations, arity
/// 2) round-trip losslessly — the closure of the necessary facts equals the
/// KB plus the recorded counterexamples exactly — and never compress to
/// something larger than the input. The whole suite stays under a minute.
#[test]
fn random_kbs_round_trip_losslessly_within_budget() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x10551e55);
    let cfg = SearchConfig {
        beam_width: 4,
        max_rule_length: 3,
        ..SearchConfig::default()
    };
    let mut compressed = 0usize;
    let mut with_rules = 0usize;
    for case in 0..100 {
        let kb = random_kb(&mut rng, 5, 50, 8);
        let result = extract(&kb, &cfg);
        let report = verify(&kb, &result);
        assert!(
            report.ok,
            "case {case}: missing {:?}, extra {:?}",
            report
                .missing
                .iter()
                .map(|f| kb.render_fact_atom(f))
                .collect::<Vec<_>>(),
            report
                .extra
                .iter()
                .map(|f| kb.render_fact_atom(f))
                .collect::<Vec<_>>()
        );
        assert!(
            result.accounting.total <= kb.fact_count(),
            "case {case}: total {} > |B| {}",
            result.accounting.total,
            kb.fact_count()
        );
        compressed += 1;
        if !result.rules.is_empty() {
            with_rules += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "suite took {elapsed:?}");
    println!("round trip: {compressed} KBs ok ({with_rules} with rules) in {elapsed:?}");
}

/// Criterion 5: over a signature of three relations (arities 1, 2, 2), the
/// fingerprints reachable from the most general rules by iterated extension
/// steps up to length 2 coincide exactly with the brute-force enumeration of
/// the valid rule space of length at most 2.
#[test]
fn extension_search_reaches_the_whole_rule_space() {
    let mut kb = KnowledgeBase::new();
    kb.add_relation("p", 1).unwrap();
    kb.add_relation("q", 2).unwrap();
    kb.add_relation("r", 2).unwrap();

    let mut reached: BTreeSet<Fingerprint> = BTreeSet::new();
    let mut frontier: Vec<Rule> = (0..kb.relation_count())
        .map(|i| Rule::new_head_rule(&kb, RelationId(i as u32)))
        .collect();
    for r in &frontier {
        reached.insert(r.fingerprint(&kb));
    }
    while let Some(rule) = frontier.pop() {
        if rule.length() >= 2 {
            continue;
        }
        for ext in rule.extensions(&kb, None) {
            if reached.insert(ext.fingerprint(&kb)) {
                frontier.push(ext);
            }
        }
    }

    let enumerated: BTreeSet<Fingerprint> = enumerate_rules(&kb, 2, None)
        .iter()
        .map(|r| r.fingerprint(&kb))
        .collect();

    let only_reached: Vec<_> = reached.difference(&enumerated).collect();
    let only_enumerated: Vec<_> = enumerated.difference(&reached).collect();
    assert!(
        only_reached.is_empty() && only_enumerated.is_empty(),
        "symmetric difference: {} reached-only, {} enumerated-only",
        only_reached.len(),
        only_enumerated.len()
    );
    println!(
        "search completeness: {} rules reached = {} enumerated",
        reached.len(),
        enumerated.len()
    );
}

/// Criterion 6: fingerprints are invariant under 10 random renamings and
/// body permutations of 1000 random rules, and on the exhaustive length-2
/// space fingerprints are equal exactly for isomorphic rules (isomorphism
/// decided by a brute-force matcher).
#[test]
fn fingerprints_are_stable_and_collision_free() {
    let mut rng = StdRng::seed_from_u64(0xf1f1);
    // Invariance over random rules.
    let mut tested = 0usize;
    while tested < 1000 {
        let kb = random_kb(&mut rng, 4, 25, 5);
        let consts = ArgConstants::from_kb(&kb);
        for _ in 0..10 {
            if tested >= 1000 {
                break;
            }
            let rule = random_walk_rule(&mut rng, &kb, &consts, 3);
            let reference = rule.fingerprint(&kb);
            for _ in 0..10 {
                let shuffled = perturb(&mut rng, &rule);
                assert_eq!(
                    shuffled.fingerprint(&kb),
                    reference,
                    "perturbed {} vs {}",
                    shuffled.render(&kb),
                    rule.render(&kb)
                );
            }
            tested += 1;
        }
    }

    // Exhaustive separation on a small signature.
    let mut kb = KnowledgeBase::new();
    kb.add_relation("p", 1).unwrap();
    kb.add_relation("q", 2).unwrap();
    kb.add_relation("r", 2).unwrap();
    let raw = enumerate_rules_raw(&kb, 2, None);
    let mut by_fp: std::collections::BTreeMap<Fingerprint, Vec<&Rule>> = Default::default();
    for rule in &raw {
        by_fp.entry(rule.fingerprint(&kb)).or_default().push(rule);
    }
    // Equal fingerprints must be isomorphic.
    let mut same_fp_pairs = 0usize;
    for group in by_fp.values() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                assert!(
                    isomorphic(group[i], group[j]),
                    "fingerprint collision: {} vs {}",
                    group[i].render(&kb),
                    group[j].render(&kb)
                );
                same_fp_pairs += 1;
            }
        }
    }
    // Distinct fingerprints must not be isomorphic.
    let representatives: Vec<&Rule> = by_fp.values().map(|g| g[0]).collect();
    let mut cross_pairs = 0usize;
    for i in 0..representatives.len() {
        for j in i + 1..representatives.len() {
            let (a, b) = (representatives[i], representatives[j]);
            if a.head().relation != b.head().relation || a.body().len() != b.body().len() {
                continue;
            }
            assert!(
                !isomorphic(a, b),
                "isomorphic rules with different fingerprints: {} vs {}",
                a.render(&kb),
                b.render(&kb)
            );
            cross_pairs += 1;
        }
    }
    println!(
        "fingerprints: 1000 rules x 10 perturbations stable; {} variants, {} equal-fp pairs isomorphic, {} cross pairs distinct",
        raw.len(),
        same_fp_pairs,
        cross_pairs
    );
}

/// Criterion 7: on 50 random digraphs of up to 30 vertices, removing the
/// cycle cover leaves the proof graph acyclic (checked by an independent
/// DFS) and seeding the provability marking with the essential facts plus
/// the cover marks every vertex.
#[test]
fn cycle_covers_break_all_cycles_and_restore_provability() {
    let mut rng = StdRng::seed_from_u64(0xc1c1e5);
    let mut covered_total = 0usize;
    for case in 0..50 {
        let n = rng.gen_range(1..=30);
        let mut kb = KnowledgeBase::new();
        let rel = kb.add_relation("node", 1).unwrap();
        let facts: Vec<Fact> = (0..n)
            .map(|i| {
                let c = kb.add_constant(&format!("x{i}"));
                kb.add_fact(rel, vec![c]).unwrap();
                Fact {
                    relation: rel,
                    args: vec![c],
                }
            })
            .collect();
        // Random in-neighbor sets; a vertex with in-edges gets one proof
        // containing all of them.
        let p = 2.0 / n as f64;
        let mut in_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for ins in in_neighbors.iter_mut() {
            for b in 0..n {
                if rng.gen_bool(p.min(1.0)) {
                    ins.push(b);
                }
            }
        }
        let mut graph = DependencyGraph::new(&kb);
        for (h, ins) in in_neighbors.iter().enumerate() {
            if ins.is_empty() {
                continue;
            }
            let body: Vec<Fact> = ins.iter().map(|&b| facts[b].clone()).collect();
            graph.add_proofs(
                h,
                &Evidence::from_parts(vec![(facts[h].clone(), body)], vec![]),
            );
        }

        let cover = graph.cover_cycles();
        let removed: HashSet<usize> = cover
            .iter()
            .map(|f| facts.iter().position(|g| g == f).unwrap())
            .collect();
        assert!(
            acyclic_after_removal(&in_neighbors, &removed),
            "case {case}: cycle survived the cover"
        );

        let mut seed: HashSet<Fact> = graph.zero_in_degree().into_iter().collect();
        seed.extend(cover.iter().cloned());
        let unprovable = graph.unprovable_from(&seed);
        assert!(
            unprovable.is_empty(),
            "case {case}: {} vertices unprovable",
            unprovable.len()
        );
        covered_total += cover.len();
    }
    println!("cycle covers: 50 digraphs acyclic after removal, all provable ({covered_total} cover vertices)");
}

/// Criterion 8: on 20 tiny KBs the greedy extraction total is compared to
/// the exhaustive optimum; the gap is reported and must stay within a factor
/// of two.
#[test]
fn greedy_stays_within_twice_the_exact_optimum() {
    let mut rng = StdRng::seed_from_u64(0xc0de);
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut worst = 1.0f64;
    while accepted < 20 {
        attempts += 1;
        assert!(attempts < 4000, "could not find 20 tractable tiny KBs");
        let kb = random_tiny_kb(&mut rng);
        if kb.fact_count() < 4 || kb.fact_count() > 12 {
            continue;
        }
        if compress_candidate_count(&kb, 2) > 16 {
            continue;
        }
        let optimal = brute_force_compress(&kb, 2).unwrap();
        let greedy = extract(&kb, &SearchConfig::default());
        assert!(verify(&kb, &greedy).ok);
        let g = greedy.accounting.total;
        let o = optimal.accounting.total;
        assert!(o >= 1);
        let ratio = g as f64 / o as f64;
        worst = worst.max(ratio);
        println!(
            "tiny KB {}: |B|={}, greedy={}, optimal={}, ratio={:.2}",
            accepted,
            kb.fact_count(),
            g,
            o,
            ratio
        );
        assert!(
            g <= 2 * o,
            "greedy {g} more than twice optimal {o} on a {}-fact KB",
            kb.fact_count()
        );
        accepted += 1;
    }
    println!("greedy vs exact: 20 tiny KBs, worst ratio {worst:.2}");
}

// --- generators and oracles ---------------------------------------------

fn random_graph(rng: &mut StdRng, max_vertices: usize) -> UndirectedGraph {
    let n = rng.gen_range(1..=max_vertices);
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.gen_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    UndirectedGraph::new(n, edges).unwrap()
}

/// Unary-heavy KBs in the 4..=12 fact range: large enough to be
/// interesting, small enough for the exhaustive compression oracle.
fn random_tiny_kb(rng: &mut StdRng) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let nconst = rng.gen_range(3..=4);
    let consts: Vec<ConstantId> = (0..nconst)
        .map(|i| kb.add_constant(&format!("c{i}")))
        .collect();
    let mut rels = vec![
        kb.add_relation("r0", 1).unwrap(),
        kb.add_relation("r1", 1).unwrap(),
    ];
    if rng.gen_bool(0.4) {
        rels.push(kb.add_relation("r2", 2).unwrap());
    }
    for _ in 0..rng.gen_range(6..=14) {
        let rel = rels[rng.gen_range(0..rels.len())];
        let arity = kb.relation(rel).arity;
        let args: Vec<ConstantId> = (0..arity)
            .map(|_| consts[rng.gen_range(0..consts.len())])
            .collect();
        kb.add_fact(rel, args).unwrap();
    }
    kb
}

/// A rule built by a random walk through the extension operators.
fn random_walk_rule(
    rng: &mut StdRng,
    kb: &KnowledgeBase,
    consts: &ArgConstants,
    max_steps: usize,
) -> Rule {
    let rel = RelationId(rng.gen_range(0..kb.relation_count()) as u32);
    let mut rule = Rule::new_head_rule(kb, rel);
    for _ in 0..rng.gen_range(0..=max_steps) {
        let exts = rule.extensions(kb, Some(consts));
        if exts.is_empty() {
            break;
        }
        rule = exts[rng.gen_range(0..exts.len())].clone();
    }
    rule
}

/// Renames variables through a random bijection and shuffles the body.
fn perturb(rng: &mut StdRng, rule: &Rule) -> Rule {
    let mut vars: Vec<u32> = Vec::new();
    for atom in rule.atoms() {
        for term in &atom.terms {
            if let Term::Var(v) = term {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
        }
    }
    let mut images: Vec<u32> = (0..vars.len() as u32).map(|i| i + 100).collect();
    images.shuffle(rng);
    let rename = |t: &Term| match t {
        Term::Var(v) => Term::Var(images[vars.iter().position(|w| w == v).unwrap()]),
        Term::Const(c) => Term::Const(*c),
    };
    let head = RuleAtom {
        relation: rule.head().relation,
        terms: rule.head().terms.iter().map(rename).collect(),
    };
    let mut body: Vec<RuleAtom> = rule
        .body()
        .iter()
        .map(|a| RuleAtom {
            relation: a.relation,
            terms: a.terms.iter().map(rename).collect(),
        })
        .collect();
    body.shuffle(rng);
    let mut atoms = vec![head];
    atoms.extend(body);
    Rule::from_atoms(atoms)
}

/// Independent acyclicity check on the fact indices that survive removal.
fn acyclic_after_removal(in_neighbors: &[Vec<usize>], removed: &HashSet<usize>) -> bool {
    let n = in_neighbors.len();
    // 0 = unvisited, 1 = on stack, 2 = done.
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 || removed.contains(&start) {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        state[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let mut descended = false;
            while *next < in_neighbors[v].len() {
                let w = in_neighbors[v][*next];
                *next += 1;
                if removed.contains(&w) {
                    continue;
                }
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                        descended = true;
                        break;
                    }
                    1 => return false,
                    _ => {}
                }
            }
            if !descended {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    true
}
