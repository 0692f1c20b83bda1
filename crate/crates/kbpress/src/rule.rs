//! First-order Horn rules, viewed as equivalence classes over argument
//! positions.
//!
//! A rule is a head atom plus a conjunctive body. Each argument position
//! either carries a variable (positions sharing a variable form one
//! equivalence class) or is bound to a constant (a class of that single
//! position and the constant). The rule length is the sum of `size - 1` over
//! all classes, counting a bound constant as a class member, so every
//! extension step below adds exactly 1.
//!
//! Rules are plain immutable values; all operations return new rules.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::kb::{quote_constant, ConstantId, KnowledgeBase, RelationId};

/// One argument position: either a variable or a bound constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Var(u32),
    Const(ConstantId),
}

/// An atom inside a rule: a relation applied to terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleAtom {
    pub relation: RelationId,
    pub terms: Vec<Term>,
}

/// An argument position inside a rule. Instance 0 is the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArgLocation {
    pub instance: usize,
    pub arg: usize,
}

/// What an equivalence class is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Variable(u32),
    Constant(ConstantId),
}

/// A maximal set of argument positions carrying the same variable, or a
/// single position bound to a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub members: Vec<ArgLocation>,
    pub binding: Binding,
}

impl EquivalenceClass {
    /// Class size with a bound constant counted as a member.
    pub fn size(&self) -> usize {
        match self.binding {
            Binding::Variable(_) => self.members.len(),
            Binding::Constant(_) => self.members.len() + 1,
        }
    }
}

/// Canonical identity of a rule, invariant under variable renaming and body
/// reordering, stable across processes (it is built from symbol names).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum RuleParseError {
    #[error("rule '{0}' is missing ':-'")]
    MissingImplication(String),
    #[error("rule '{0}' is missing the trailing '.'")]
    MissingPeriod(String),
    #[error("bad atom '{0}'")]
    BadAtom(String),
    #[error("bad term '{0}'")]
    BadTerm(String),
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("unknown constant '{0}'")]
    UnknownConstant(String),
    #[error("relation '{relation}' has arity {expected}, atom has {found} arguments")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },
}

/// A Horn rule. `atoms[0]` is the head, the rest is the body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    atoms: Vec<RuleAtom>,
}

impl Rule {
    /// The most general rule for a relation: an empty body and fresh,
    /// pairwise-distinct variables in every head position. Length 0.
    pub fn new_head_rule(kb: &KnowledgeBase, relation: RelationId) -> Rule {
        let arity = kb.relation(relation).arity;
        Rule {
            atoms: vec![RuleAtom {
                relation,
                terms: (0..arity as u32).map(Term::Var).collect(),
            }],
        }
    }

    /// Builds a rule from raw atoms without renumbering variables. The head
    /// is `atoms[0]`.
    pub fn from_atoms(atoms: Vec<RuleAtom>) -> Rule {
        assert!(!atoms.is_empty(), "a rule needs a head atom");
        Rule { atoms }
    }

    pub fn head(&self) -> &RuleAtom {
        &self.atoms[0]
    }

    pub fn body(&self) -> &[RuleAtom] {
        &self.atoms[1..]
    }

    pub fn atoms(&self) -> &[RuleAtom] {
        &self.atoms
    }

    pub fn body_len(&self) -> usize {
        self.atoms.len() - 1
    }

    /// Number of variable slots needed for substitutions: one past the
    /// largest variable id.
    pub fn var_slots(&self) -> usize {
        self.atoms
            .iter()
            .flat_map(|a| &a.terms)
            .filter_map(|t| match t {
                Term::Var(v) => Some(*v as usize + 1),
                Term::Const(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn var_occurrences(&self) -> HashMap<u32, Vec<ArgLocation>> {
        let mut occ: HashMap<u32, Vec<ArgLocation>> = HashMap::new();
        for (instance, atom) in self.atoms.iter().enumerate() {
            for (arg, term) in atom.terms.iter().enumerate() {
                if let Term::Var(v) = term {
                    occ.entry(*v)
                        .or_default()
                        .push(ArgLocation { instance, arg });
                }
            }
        }
        occ
    }

    /// The equivalence classes of this rule, ordered by first occurrence.
    pub fn classes(&self) -> Vec<EquivalenceClass> {
        let mut by_var: HashMap<u32, usize> = HashMap::new();
        let mut classes: Vec<EquivalenceClass> = Vec::new();
        for (instance, atom) in self.atoms.iter().enumerate() {
            for (arg, term) in atom.terms.iter().enumerate() {
                let loc = ArgLocation { instance, arg };
                match term {
                    Term::Var(v) => {
                        if let Some(&i) = by_var.get(v) {
                            classes[i].members.push(loc);
                        } else {
                            by_var.insert(*v, classes.len());
                            classes.push(EquivalenceClass {
                                members: vec![loc],
                                binding: Binding::Variable(*v),
                            });
                        }
                    }
                    Term::Const(c) => classes.push(EquivalenceClass {
                        members: vec![loc],
                        binding: Binding::Constant(*c),
                    }),
                }
            }
        }
        classes
    }

    /// Rule length: the sum over classes of `size - 1`.
    pub fn length(&self) -> usize {
        self.classes().iter().map(|c| c.size() - 1).sum()
    }

    /// Variables occurring exactly once.
    pub fn unlimited_positions(&self) -> Vec<ArgLocation> {
        let mut out: Vec<ArgLocation> = self
            .var_occurrences()
            .into_values()
            .filter(|locs| locs.len() == 1)
            .map(|locs| locs[0])
            .collect();
        out.sort();
        out
    }

    /// Variables occurring at least twice, ascending.
    pub fn limited_vars(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .var_occurrences()
            .into_iter()
            .filter(|(_, locs)| locs.len() >= 2)
            .map(|(v, _)| v)
            .collect();
        out.sort();
        out
    }

    /// Variables occurring in both the head and the body.
    pub fn generative_vars(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .var_occurrences()
            .into_iter()
            .filter(|(_, locs)| {
                locs.iter().any(|l| l.instance == 0) && locs.iter().any(|l| l.instance > 0)
            })
            .map(|(v, _)| v)
            .collect();
        out.sort();
        out
    }

    /// True when some body atom is identical to the head: same relation and
    /// the same term at every position.
    pub fn is_trivial(&self) -> bool {
        let head = self.head();
        self.body()
            .iter()
            .any(|atom| atom.relation == head.relation && atom.terms == head.terms)
    }

    /// True when some nonempty subset of body atoms shares no variable with
    /// the rest of the rule, i.e. some body atom has no linked path to the
    /// head.
    pub fn has_independent_fragment(&self) -> bool {
        let n = self.atoms.len();
        if n <= 1 {
            return false;
        }
        // Atoms sharing any variable are linked (a shared variable occurs at
        // least twice, hence is limited).
        let mut var_homes: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            for term in &atom.terms {
                if let Term::Var(v) = term {
                    let homes = var_homes.entry(*v).or_default();
                    if homes.last() != Some(&i) {
                        homes.push(i);
                    }
                }
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for homes in var_homes.values() {
            for w in homes.windows(2) {
                adj[w[0]].push(w[1]);
                adj[w[1]].push(w[0]);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().any(|s| !s)
    }

    /// Renumbers variables to 0.. in first-occurrence order.
    pub fn normalized(&self) -> Rule {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut atoms = self.atoms.clone();
        for atom in &mut atoms {
            for term in &mut atom.terms {
                if let Term::Var(v) = term {
                    let next = map.len() as u32;
                    let id = *map.entry(*v).or_insert(next);
                    *term = Term::Var(id);
                }
            }
        }
        Rule { atoms }
    }

    /// Canonical identity: every class is encoded as the sorted multiset of
    /// `relation#instance-tag[arg]` entries (the head tagged `!`), plus the
    /// constant name for bound classes; class encodings are sorted and when
    /// the body repeats a relation the minimum over all relabelings of the
    /// duplicate instances is taken.
    pub fn fingerprint(&self, kb: &KnowledgeBase) -> Fingerprint {
        // Group body instances by relation so duplicates can be relabeled.
        let mut groups: HashMap<RelationId, Vec<usize>> = HashMap::new();
        for (i, atom) in self.atoms.iter().enumerate().skip(1) {
            groups.entry(atom.relation).or_default().push(i);
        }
        let dup_groups: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();

        let mut tags: Vec<usize> = vec![0; self.atoms.len()];
        {
            let mut counter: HashMap<RelationId, usize> = HashMap::new();
            for (i, atom) in self.atoms.iter().enumerate().skip(1) {
                let c = counter.entry(atom.relation).or_insert(0);
                tags[i] = *c;
                *c += 1;
            }
        }

        let mut best: Option<String> = None;
        let relabel = |tags: &[usize], best: &mut Option<String>| {
            let enc = self.encode_classes(kb, tags);
            if best.as_ref().is_none_or(|b| enc < *b) {
                *best = Some(enc);
            }
        };

        if dup_groups.is_empty() {
            relabel(&tags, &mut best);
        } else {
            // Walk all permutations of each duplicate group's tags.
            let mut perms: Vec<Vec<Vec<usize>>> = Vec::new();
            for group in &dup_groups {
                perms.push(permutations(group.len()));
            }
            let mut choice = vec![0usize; dup_groups.len()];
            loop {
                let mut t = tags.clone();
                for (g, group) in dup_groups.iter().enumerate() {
                    let perm = &perms[g][choice[g]];
                    let base: Vec<usize> = group.iter().map(|&i| tags[i]).collect();
                    for (k, &i) in group.iter().enumerate() {
                        t[i] = base[perm[k]];
                    }
                }
                relabel(&t, &mut best);
                let mut pos = 0;
                loop {
                    if pos == choice.len() {
                        break;
                    }
                    choice[pos] += 1;
                    if choice[pos] < perms[pos].len() {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == choice.len() {
                    break;
                }
            }
        }
        Fingerprint(best.unwrap())
    }

    fn encode_classes(&self, kb: &KnowledgeBase, tags: &[usize]) -> String {
        let member = |loc: &ArgLocation| {
            let atom = &self.atoms[loc.instance];
            let name = &kb.relation(atom.relation).name;
            if loc.instance == 0 {
                format!("{}#![{}]", name, loc.arg)
            } else {
                format!("{}#{}[{}]", name, tags[loc.instance], loc.arg)
            }
        };
        let mut encoded: Vec<String> = self
            .classes()
            .iter()
            .map(|class| {
                let mut parts: Vec<String> = class.members.iter().map(member).collect();
                parts.sort();
                let mut s = parts.join(",");
                if let Binding::Constant(c) = class.binding {
                    s.push('=');
                    s.push_str(kb.constant_name(c));
                }
                s
            })
            .collect();
        encoded.sort();
        encoded.join(";")
    }

    fn with_term(&self, loc: ArgLocation, term: Term) -> Rule {
        let mut atoms = self.atoms.clone();
        atoms[loc.instance].terms[loc.arg] = term;
        Rule { atoms }
    }

    fn with_new_atom(&self, relation: RelationId, arity: usize) -> (Rule, usize, u32) {
        let base = self.var_slots() as u32;
        let mut atoms = self.atoms.clone();
        atoms.push(RuleAtom {
            relation,
            terms: (0..arity as u32).map(|i| Term::Var(base + i)).collect(),
        });
        let instance = atoms.len() - 1;
        (Rule { atoms }, instance, base + arity as u32)
    }

    /// All rules reachable from this one with a single extension step:
    ///
    /// 1. merge an unlimited-variable position into an existing limited
    ///    variable;
    /// 2. append a fresh-variable atom and merge one of its positions into an
    ///    existing limited variable;
    /// 3. merge two unlimited-variable positions into a new limited variable;
    /// 4. append a fresh-variable atom and pair one of its positions with an
    ///    existing unlimited position under a new limited variable;
    /// 5. bind an unlimited-variable position to a constant occurring at that
    ///    argument position (when candidates are supplied).
    ///
    /// Trivial results and results with independent fragments are dropped;
    /// the remainder is deduplicated by fingerprint. Every returned rule has
    /// length `self.length() + 1`.
    pub fn extensions(&self, kb: &KnowledgeBase, constants: Option<&ArgConstants>) -> Vec<Rule> {
        let unlimited = self.unlimited_positions();
        let limited = self.limited_vars();
        let mut out: Vec<Rule> = Vec::new();
        let mut seen: HashSet<Fingerprint> = HashSet::new();
        let push = |rule: Rule, out: &mut Vec<Rule>, seen: &mut HashSet<Fingerprint>| {
            if rule.is_trivial() || rule.has_independent_fragment() {
                return;
            }
            debug_assert_eq!(rule.length(), self.length() + 1);
            let rule = rule.normalized();
            if seen.insert(rule.fingerprint(kb)) {
                out.push(rule);
            }
        };

        // Case 1
        for &loc in &unlimited {
            for &v in &limited {
                push(self.with_term(loc, Term::Var(v)), &mut out, &mut seen);
            }
        }
        // Case 2
        for rel in 0..kb.relation_count() {
            let relation = RelationId(rel as u32);
            let arity = kb.relation(relation).arity;
            for &v in &limited {
                for arg in 0..arity {
                    let (rule, instance, _) = self.with_new_atom(relation, arity);
                    push(
                        rule.with_term(ArgLocation { instance, arg }, Term::Var(v)),
                        &mut out,
                        &mut seen,
                    );
                }
            }
        }
        // Case 3
        for (i, &a) in unlimited.iter().enumerate() {
            for &b in unlimited.iter().skip(i + 1) {
                let fresh = self.var_slots() as u32;
                let rule = self
                    .with_term(a, Term::Var(fresh))
                    .with_term(b, Term::Var(fresh));
                push(rule, &mut out, &mut seen);
            }
        }
        // Case 4: the two paired arguments are never both from the new atom.
        for rel in 0..kb.relation_count() {
            let relation = RelationId(rel as u32);
            let arity = kb.relation(relation).arity;
            for &loc in &unlimited {
                for arg in 0..arity {
                    let (rule, instance, fresh) = self.with_new_atom(relation, arity);
                    let rule = rule
                        .with_term(loc, Term::Var(fresh))
                        .with_term(ArgLocation { instance, arg }, Term::Var(fresh));
                    push(rule, &mut out, &mut seen);
                }
            }
        }
        // Case 5
        if let Some(constants) = constants {
            for &loc in &unlimited {
                let relation = self.atoms[loc.instance].relation;
                for &c in constants.at(relation, loc.arg) {
                    push(self.with_term(loc, Term::Const(c)), &mut out, &mut seen);
                }
            }
        }
        out
    }

    /// Renders the rule in the textual grammar, e.g.
    /// `father(X0,X1) :- parent(X0,X1), male(X0).`; an empty body renders as
    /// `head :- .`.
    pub fn render(&self, kb: &KnowledgeBase) -> String {
        let mut names: HashMap<u32, String> = HashMap::new();
        for atom in &self.atoms {
            for term in &atom.terms {
                if let Term::Var(v) = term {
                    let next = format!("X{}", names.len());
                    names.entry(*v).or_insert(next);
                }
            }
        }
        let atom_str = |atom: &RuleAtom| {
            let mut s = kb.relation(atom.relation).name.clone();
            s.push('(');
            for (i, term) in atom.terms.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match term {
                    Term::Var(v) => s.push_str(&names[v]),
                    Term::Const(c) => s.push_str(&quote_constant(kb.constant_name(*c))),
                }
            }
            s.push(')');
            s
        };
        let head = atom_str(self.head());
        if self.body().is_empty() {
            format!("{} :- .", head)
        } else {
            let body: Vec<String> = self.body().iter().map(atom_str).collect();
            format!("{} :- {}.", head, body.join(", "))
        }
    }

    /// Parses a rule in the textual grammar against a KB's symbol tables.
    pub fn parse(kb: &KnowledgeBase, text: &str) -> Result<Rule, RuleParseError> {
        let text = text.trim();
        let stripped = text
            .strip_suffix('.')
            .ok_or_else(|| RuleParseError::MissingPeriod(text.to_string()))?;
        let (head_text, body_text) = stripped
            .split_once(":-")
            .ok_or_else(|| RuleParseError::MissingImplication(text.to_string()))?;
        let mut vars: HashMap<String, u32> = HashMap::new();
        let mut atoms = vec![parse_rule_atom(kb, head_text.trim(), &mut vars)?];
        let mut rest = body_text.trim();
        while !rest.is_empty() {
            let end =
                split_atom_end(rest).ok_or_else(|| RuleParseError::BadAtom(rest.to_string()))?;
            atoms.push(parse_rule_atom(kb, rest[..end].trim(), &mut vars)?);
            rest = rest[end..].trim_start();
            if let Some(tail) = rest.strip_prefix(',') {
                rest = tail.trim_start();
            } else if !rest.is_empty() {
                return Err(RuleParseError::BadAtom(rest.to_string()));
            }
        }
        Ok(Rule { atoms })
    }
}

/// Finds the end of the first atom (the closing parenthesis) in a body.
fn split_atom_end(text: &str) -> Option<usize> {
    let mut in_quote = false;
    for (i, c) in text.char_indices() {
        match c {
            '\'' => in_quote = !in_quote,
            ')' if !in_quote => return Some(i + 1),
            _ => {}
        }
    }
    None
}

fn parse_rule_atom(
    kb: &KnowledgeBase,
    text: &str,
    vars: &mut HashMap<String, u32>,
) -> Result<RuleAtom, RuleParseError> {
    let open = text
        .find('(')
        .ok_or_else(|| RuleParseError::BadAtom(text.to_string()))?;
    if !text.ends_with(')') {
        return Err(RuleParseError::BadAtom(text.to_string()));
    }
    let name = text[..open].trim();
    let relation = kb
        .relation_id(name)
        .ok_or_else(|| RuleParseError::UnknownRelation(name.to_string()))?;
    let inner = &text[open + 1..text.len() - 1];
    let mut terms = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let (token, tail) = if let Some(t) = rest.strip_prefix('\'') {
            let end = t
                .find('\'')
                .ok_or_else(|| RuleParseError::BadTerm(rest.to_string()))?;
            (format!("'{}'", &t[..end]), t[end + 1..].trim_start())
        } else {
            let end = rest.find(',').unwrap_or(rest.len());
            (rest[..end].trim().to_string(), rest[end..].trim_start())
        };
        if token.is_empty() {
            return Err(RuleParseError::BadTerm(rest.to_string()));
        }
        terms.push(parse_term(kb, &token, vars)?);
        rest = tail;
        if let Some(t) = rest.strip_prefix(',') {
            rest = t.trim_start();
            if rest.is_empty() {
                return Err(RuleParseError::BadTerm(text.to_string()));
            }
        } else if !rest.is_empty() {
            return Err(RuleParseError::BadAtom(text.to_string()));
        }
    }
    let expected = kb.relation(relation).arity;
    if terms.len() != expected {
        return Err(RuleParseError::ArityMismatch {
            relation: name.to_string(),
            expected,
            found: terms.len(),
        });
    }
    Ok(RuleAtom { relation, terms })
}

fn parse_term(
    kb: &KnowledgeBase,
    token: &str,
    vars: &mut HashMap<String, u32>,
) -> Result<Term, RuleParseError> {
    if let Some(quoted) = token.strip_prefix('\'') {
        let name = quoted
            .strip_suffix('\'')
            .ok_or_else(|| RuleParseError::BadTerm(token.to_string()))?;
        return kb
            .constant_id(name)
            .map(Term::Const)
            .ok_or_else(|| RuleParseError::UnknownConstant(name.to_string()));
    }
    let first = token
        .chars()
        .next()
        .ok_or_else(|| RuleParseError::BadTerm(token.to_string()))?;
    if first.is_ascii_uppercase() {
        if !token.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(RuleParseError::BadTerm(token.to_string()));
        }
        let next = vars.len() as u32;
        return Ok(Term::Var(*vars.entry(token.to_string()).or_insert(next)));
    }
    kb.constant_id(token)
        .map(Term::Const)
        .ok_or_else(|| RuleParseError::UnknownConstant(token.to_string()))
}

/// Per-(relation, argument position) constant candidates, collected from the
/// facts of a KB. Used to keep constant-binding extensions finite.
#[derive(Debug, Clone, Default)]
pub struct ArgConstants {
    slots: HashMap<(RelationId, usize), Vec<ConstantId>>,
}

impl ArgConstants {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let mut slots: HashMap<(RelationId, usize), Vec<ConstantId>> = HashMap::new();
        let mut seen: HashSet<(RelationId, usize, ConstantId)> = HashSet::new();
        for fact in kb.facts() {
            for (arg, &c) in fact.args.iter().enumerate() {
                if seen.insert((fact.relation, arg, c)) {
                    slots.entry((fact.relation, arg)).or_default().push(c);
                }
            }
        }
        for list in slots.values_mut() {
            list.sort();
        }
        ArgConstants { slots }
    }

    pub fn at(&self, relation: RelationId, arg: usize) -> &[ConstantId] {
        self.slots
            .get(&(relation, arg))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}
