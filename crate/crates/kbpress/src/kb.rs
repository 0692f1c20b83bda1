//! Relational knowledge bases: interned constants, fixed-arity relations and
//! deduplicated ground facts under the closed-world assumption.
//!
//! A [`KnowledgeBase`] is built once (single writer) and read-only afterwards,
//! so it can be shared freely between workers. The constant table is the
//! universe used for closed-world reasoning; it may contain constants that
//! appear in no fact (declared via `#const` lines) because counterexample
//! counting ranges over the whole universe.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index into the constant intern table of a [`KnowledgeBase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstantId(pub u32);

impl ConstantId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index into the relation table of a [`KnowledgeBase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A relation symbol with a fixed arity. Names are unique within a KB and the
/// arity is fixed by the first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
}

/// A ground atom: a relation applied to constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub relation: RelationId,
    pub args: Vec<ConstantId>,
}

/// Input grammars accepted by [`KnowledgeBase::parse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbFormat {
    /// One fact per line: `relation<TAB>arg1<TAB>...<TAB>argk`.
    Tsv,
    /// One fact per line: `relation(arg1,...,argk).`
    Atoms,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error(
        "line {line}: arity mismatch for relation '{relation}': expected {expected}, found {found}"
    )]
    ArityMismatch {
        line: usize,
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: empty relation name")]
    EmptyRelationName { line: usize },
    #[error("line {line}: malformed line: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("relation '{name}' declared with arity {existing}, got {requested}")]
    ConflictingArity {
        name: String,
        existing: usize,
        requested: usize,
    },
    #[error("relation '{0}' must have arity of at least 1")]
    ZeroArity(String),
}

/// Exact counts reported by [`KnowledgeBase::stats`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbStats {
    pub relations: usize,
    pub facts: usize,
    pub constants: usize,
    /// `(relation name, fact count)` sorted by name.
    pub per_relation: Vec<(String, usize)>,
}

impl fmt::Display for KbStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relations: {}", self.relations)?;
        writeln!(f, "facts: {}", self.facts)?;
        writeln!(f, "constants: {}", self.constants)?;
        for (name, count) in &self.per_relation {
            writeln!(f, "  {}: {}", name, count)?;
        }
        Ok(())
    }
}

/// An immutable-after-load set of ground facts over interned symbols.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    relations: Vec<Relation>,
    relation_ids: HashMap<String, RelationId>,
    constants: Vec<String>,
    constant_ids: HashMap<String, ConstantId>,
    facts: Vec<Fact>,
    fact_set: std::collections::HashSet<Fact>,
    facts_by_relation: Vec<Vec<Fact>>,
    /// Per relation: first argument value -> positions in
    /// `facts_by_relation`, in load order. Lets joins with a bound first
    /// argument skip facts that could never match.
    first_arg_index: Vec<HashMap<ConstantId, Vec<u32>>>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns a relation. Re-declaring with the same arity is a no-op.
    pub fn add_relation(&mut self, name: &str, arity: usize) -> Result<RelationId, KbError> {
        if name.is_empty() {
            return Err(KbError::EmptyRelationName { line: 0 });
        }
        if arity == 0 {
            return Err(KbError::ZeroArity(name.to_string()));
        }
        if let Some(&id) = self.relation_ids.get(name) {
            let existing = self.relations[id.index()].arity;
            if existing != arity {
                return Err(KbError::ConflictingArity {
                    name: name.to_string(),
                    existing,
                    requested: arity,
                });
            }
            return Ok(id);
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(Relation {
            name: name.to_string(),
            arity,
        });
        self.relation_ids.insert(name.to_string(), id);
        self.facts_by_relation.push(Vec::new());
        self.first_arg_index.push(HashMap::new());
        Ok(id)
    }

    /// Interns a constant name; equal strings map to the same id.
    pub fn add_constant(&mut self, name: &str) -> ConstantId {
        if let Some(&id) = self.constant_ids.get(name) {
            return id;
        }
        let id = ConstantId(self.constants.len() as u32);
        self.constants.push(name.to_string());
        self.constant_ids.insert(name.to_string(), id);
        id
    }

    /// Adds a fact; duplicates are silently merged. Returns whether the fact
    /// was new.
    pub fn add_fact(
        &mut self,
        relation: RelationId,
        args: Vec<ConstantId>,
    ) -> Result<bool, KbError> {
        let rel = &self.relations[relation.index()];
        if args.len() != rel.arity {
            return Err(KbError::ArityMismatch {
                line: 0,
                relation: rel.name.clone(),
                expected: rel.arity,
                found: args.len(),
            });
        }
        let fact = Fact { relation, args };
        if self.fact_set.contains(&fact) {
            return Ok(false);
        }
        let slot = self.facts_by_relation[relation.index()].len() as u32;
        self.first_arg_index[relation.index()]
            .entry(fact.args[0])
            .or_default()
            .push(slot);
        self.fact_set.insert(fact.clone());
        self.facts_by_relation[relation.index()].push(fact.clone());
        self.facts.push(fact);
        Ok(true)
    }

    fn add_fact_by_name(
        &mut self,
        name: &str,
        args: &[String],
        line: usize,
    ) -> Result<(), KbError> {
        if name.is_empty() {
            return Err(KbError::EmptyRelationName { line });
        }
        if args.is_empty() {
            return Err(KbError::Malformed {
                line,
                reason: "fact needs at least one argument".to_string(),
            });
        }
        let relation = match self.relation_ids.get(name) {
            Some(&id) => {
                let expected = self.relations[id.index()].arity;
                if expected != args.len() {
                    return Err(KbError::ArityMismatch {
                        line,
                        relation: name.to_string(),
                        expected,
                        found: args.len(),
                    });
                }
                id
            }
            None => self.add_relation(name, args.len())?,
        };
        let args = args.iter().map(|a| self.add_constant(a)).collect();
        self.add_fact(relation, args)?;
        Ok(())
    }

    /// Parses a knowledge base from text in the given format.
    ///
    /// Lines starting with `#` are comments, except for the `#const NAME`
    /// pragma which declares a universe constant that occurs in no fact.
    pub fn parse(input: &str, format: KbFormat) -> Result<Self, KbError> {
        let mut kb = Self::new();
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#const") {
                let name = rest.trim();
                if name.is_empty() {
                    return Err(KbError::Malformed {
                        line: line_no,
                        reason: "#const needs a constant name".to_string(),
                    });
                }
                kb.add_constant(name);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            match format {
                KbFormat::Tsv => kb.parse_tsv_line(line, line_no)?,
                KbFormat::Atoms => kb.parse_atom_line(line, line_no)?,
            }
        }
        Ok(kb)
    }

    fn parse_tsv_line(&mut self, line: &str, line_no: usize) -> Result<(), KbError> {
        let mut parts = line.split('\t');
        let name = parts.next().unwrap_or("").to_string();
        let args: Vec<String> = parts.map(|p| p.to_string()).collect();
        if args.iter().any(|a| a.is_empty()) {
            return Err(KbError::Malformed {
                line: line_no,
                reason: "empty argument".to_string(),
            });
        }
        self.add_fact_by_name(&name, &args, line_no)
    }

    fn parse_atom_line(&mut self, line: &str, line_no: usize) -> Result<(), KbError> {
        let (name, args) = parse_atom_text(line.trim(), line_no)?;
        self.add_fact_by_name(&name, &args, line_no)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: RelationId) -> &Relation {
        &self.relations[id.index()]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn constant_name(&self, id: ConstantId) -> &str {
        &self.constants[id.index()]
    }

    pub fn constant_id(&self, name: &str) -> Option<ConstantId> {
        self.constant_ids.get(name).copied()
    }

    pub fn constant_count(&self) -> usize {
        self.constants.len()
    }

    /// All constant ids in intern order; the closed-world universe.
    pub fn domain(&self) -> impl Iterator<Item = ConstantId> + '_ {
        (0..self.constants.len() as u32).map(ConstantId)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty() && self.relations.is_empty()
    }

    /// Facts of one relation in load order.
    pub fn facts_of(&self, relation: RelationId) -> &[Fact] {
        &self.facts_by_relation[relation.index()]
    }

    /// Load-order positions (into `facts_of`) of the relation's facts whose
    /// first argument is `first`.
    pub fn facts_of_with_first(&self, relation: RelationId, first: ConstantId) -> &[u32] {
        self.first_arg_index[relation.index()]
            .get(&first)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Closed-world membership test for a fact over this KB's symbols.
    pub fn contains_fact(&self, fact: &Fact) -> bool {
        self.fact_set.contains(fact)
    }

    /// Membership test by names. Unknown relations are an error rather than
    /// `false`; unknown constants cannot occur in any stored fact.
    pub fn contains_atom(&self, relation: &str, args: &[&str]) -> Result<bool, KbError> {
        let id = self
            .relation_id(relation)
            .ok_or_else(|| KbError::UnknownRelation(relation.to_string()))?;
        let rel = self.relation(id);
        if rel.arity != args.len() {
            return Err(KbError::ArityMismatch {
                line: 0,
                relation: relation.to_string(),
                expected: rel.arity,
                found: args.len(),
            });
        }
        let mut ids = Vec::with_capacity(args.len());
        for a in args {
            match self.constant_id(a) {
                Some(c) => ids.push(c),
                None => return Ok(false),
            }
        }
        Ok(self.contains_fact(&Fact {
            relation: id,
            args: ids,
        }))
    }

    pub fn stats(&self) -> KbStats {
        let mut per_relation: Vec<(String, usize)> = self
            .relations
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    format!("{}/{}", r.name, r.arity),
                    self.facts_by_relation[i].len(),
                )
            })
            .collect();
        per_relation.sort();
        KbStats {
            relations: self.relations.len(),
            facts: self.facts.len(),
            constants: self.constants.len(),
            per_relation,
        }
    }

    /// Renders a fact as a TSV line.
    pub fn render_fact_tsv(&self, fact: &Fact) -> String {
        let mut out = self.relation(fact.relation).name.clone();
        for &a in &fact.args {
            out.push('\t');
            out.push_str(self.constant_name(a));
        }
        out
    }

    /// Renders a fact as `relation(arg1,...,argk)`.
    pub fn render_fact_atom(&self, fact: &Fact) -> String {
        let mut out = self.relation(fact.relation).name.clone();
        out.push('(');
        for (i, &a) in fact.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&quote_constant(self.constant_name(a)));
        }
        out.push(')');
        out
    }

    /// Facts sorted by their rendered TSV line; the canonical output order.
    pub fn sort_facts(&self, facts: &mut [Fact]) {
        facts.sort_by_cached_key(|f| self.render_fact_tsv(f));
    }

    /// Serializes the KB in TSV form: `#const` lines for universe constants
    /// that occur in no fact, then facts sorted lexicographically.
    pub fn serialize_tsv(&self) -> String {
        let mut out = String::new();
        for name in self.factless_constants() {
            out.push_str("#const ");
            out.push_str(&name);
            out.push('\n');
        }
        let mut lines: Vec<String> = self.facts.iter().map(|f| self.render_fact_tsv(f)).collect();
        lines.sort();
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Serializes the KB in atoms form.
    pub fn serialize_atoms(&self) -> String {
        let mut out = String::new();
        for name in self.factless_constants() {
            out.push_str("#const ");
            out.push_str(&name);
            out.push('\n');
        }
        let mut lines: Vec<String> = self
            .facts
            .iter()
            .map(|f| format!("{}.", self.render_fact_atom(f)))
            .collect();
        lines.sort();
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    fn factless_constants(&self) -> Vec<String> {
        let mut used = vec![false; self.constants.len()];
        for f in &self.facts {
            for &a in &f.args {
                used[a.index()] = true;
            }
        }
        let mut names: Vec<String> = self
            .constants
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(_, n)| n.clone())
            .collect();
        names.sort();
        names
    }
}

/// True when the name fits the bare-constant grammar of the atoms format:
/// `[a-z][A-Za-z0-9_']*`.
pub fn is_bare_constant(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

/// Quotes a constant when it does not fit the bare grammar.
pub fn quote_constant(name: &str) -> String {
    if is_bare_constant(name) {
        name.to_string()
    } else {
        format!("'{}'", name)
    }
}

/// Parses `relation(arg1,...,argk).` into name and constant arguments.
fn parse_atom_text(text: &str, line_no: usize) -> Result<(String, Vec<String>), KbError> {
    let malformed = |reason: &str| KbError::Malformed {
        line: line_no,
        reason: reason.to_string(),
    };
    let body = text
        .strip_suffix('.')
        .ok_or_else(|| malformed("missing trailing '.'"))?
        .trim();
    let open = body.find('(').ok_or_else(|| malformed("missing '('"))?;
    if !body.ends_with(')') {
        return Err(malformed("missing ')'"));
    }
    let name = body[..open].trim().to_string();
    let inner = &body[open + 1..body.len() - 1];
    let mut args = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix('\'') {
            let end = tail
                .find('\'')
                .ok_or_else(|| malformed("unterminated quote"))?;
            args.push(tail[..end].to_string());
            rest = tail[end + 1..].trim_start();
        } else {
            let end = rest.find(',').unwrap_or(rest.len());
            let token = rest[..end].trim();
            if token.is_empty() {
                return Err(malformed("empty argument"));
            }
            if !is_bare_constant(token) {
                return Err(malformed(&format!("bad constant '{token}'")));
            }
            args.push(token.to_string());
            rest = rest[end..].trim_start();
        }
        if let Some(tail) = rest.strip_prefix(',') {
            rest = tail.trim_start();
            if rest.is_empty() {
                return Err(malformed("trailing comma"));
            }
        } else if !rest.is_empty() {
            return Err(malformed("expected ','"));
        }
    }
    if args.is_empty() {
        return Err(malformed("fact needs at least one argument"));
    }
    Ok((name, args))
}
