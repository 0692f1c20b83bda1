//! On-disk bundle produced by compression and consumed by decompression and
//! verification.
//!
//! A bundle is a directory:
//!
//! ```text
//! rules.dl        one rule per line, acceptance order
//! necessary.tsv   necessary facts, sorted
//! counter.tsv     counterexample atoms, sorted
//! manifest.json   accounting, config echo, verification status, and the
//!                 full symbol tables (relations and the constant universe)
//! graph.tsv       optional proof-graph dump
//! ```
//!
//! The manifest carries the constant universe because closure needs the
//! original domain: an accepted axiom rule may range over constants that no
//! surviving fact mentions. All text is UTF-8 with LF line endings and facts
//! are sorted for reproducible diffs.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::closure;
use crate::extract::{Accounting, ExtractionResult};
use crate::kb::{Fact, KnowledgeBase};
use crate::rule::Rule;
use crate::search::SearchConfig;

pub const BUNDLE_FORMAT: &str = "kbpress-bundle/1";

pub const RULES_FILE: &str = "rules.dl";
pub const NECESSARY_FILE: &str = "necessary.tsv";
pub const COUNTER_FILE: &str = "counter.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPH_FILE: &str = "graph.tsv";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("unsupported bundle format '{0}'")]
    UnsupportedFormat(String),
    #[error("{file} line {line}: {reason}")]
    BadFact {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("bad rule '{rule}': {reason}")]
    BadRule { rule: String, reason: String },
    #[error("bundle does not match this knowledge base: unknown {kind} '{name}'")]
    ForeignSymbol { kind: &'static str, name: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRelation {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub beam_width: usize,
    pub max_rule_length: usize,
    pub min_delta: i64,
    pub target_relations: Option<Vec<String>>,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub accounting: Accounting,
    pub verified: bool,
    pub dropped_rules: usize,
    pub config: ManifestConfig,
    pub relations: Vec<ManifestRelation>,
    /// The full constant universe of the compressed KB, sorted.
    pub constants: Vec<String>,
}

/// A bundle as read from disk, before symbols are resolved.
#[derive(Debug, Clone)]
pub struct RawBundle {
    pub manifest: Manifest,
    pub rule_lines: Vec<String>,
    pub necessary_lines: Vec<String>,
    pub counter_lines: Vec<String>,
}

/// A bundle resolved against a symbol table.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub rules: Vec<Rule>,
    pub necessary: Vec<Fact>,
    pub counter: Vec<Fact>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), BundleError> {
    fs::write(path, contents).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes an extraction result as a bundle directory.
pub fn write_bundle(
    dir: &Path,
    kb: &KnowledgeBase,
    result: &ExtractionResult,
    cfg: &SearchConfig,
    verified: bool,
    dump_graph: bool,
) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(|source| BundleError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut rules_text = String::new();
    for rule in &result.rules {
        rules_text.push_str(&rule.render(kb));
        rules_text.push('\n');
    }
    write_file(&dir.join(RULES_FILE), &rules_text)?;
    write_file(
        &dir.join(NECESSARY_FILE),
        &fact_lines(kb, &result.necessary),
    )?;
    write_file(&dir.join(COUNTER_FILE), &fact_lines(kb, &result.counter))?;
    let mut constants: Vec<String> = kb
        .domain()
        .map(|c| kb.constant_name(c).to_string())
        .collect();
    constants.sort();
    let manifest = Manifest {
        format: BUNDLE_FORMAT.to_string(),
        accounting: result.accounting,
        verified,
        dropped_rules: result.dropped_rules,
        config: ManifestConfig {
            beam_width: cfg.beam_width,
            max_rule_length: cfg.max_rule_length,
            min_delta: cfg.min_delta,
            target_relations: cfg
                .target_relations
                .as_ref()
                .map(|t| t.iter().cloned().collect()),
            threads: crate::concurrency::threads(),
        },
        relations: kb
            .relations()
            .iter()
            .map(|r| ManifestRelation {
                name: r.name.clone(),
                arity: r.arity,
            })
            .collect(),
        constants,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| BundleError::Manifest(e.to_string()))?;
    write_file(&dir.join(MANIFEST_FILE), &format!("{json}\n"))?;
    if dump_graph {
        write_file(&dir.join(GRAPH_FILE), &result.graph.dump(kb))?;
    }
    Ok(())
}

fn fact_lines(kb: &KnowledgeBase, facts: &[Fact]) -> String {
    let mut lines: Vec<String> = facts.iter().map(|f| kb.render_fact_tsv(f)).collect();
    lines.sort();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Reads a bundle directory without resolving symbols.
pub fn read_bundle(dir: &Path) -> Result<RawBundle, BundleError> {
    let manifest_text = read_file(&dir.join(MANIFEST_FILE))?;
    let manifest: Manifest =
        serde_json::from_str(&manifest_text).map_err(|e| BundleError::Manifest(e.to_string()))?;
    if !manifest.format.starts_with("kbpress-bundle/") {
        return Err(BundleError::UnsupportedFormat(manifest.format));
    }
    let non_empty = |text: String| -> Vec<String> {
        text.lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .collect()
    };
    Ok(RawBundle {
        manifest,
        rule_lines: non_empty(read_file(&dir.join(RULES_FILE))?),
        necessary_lines: non_empty(read_file(&dir.join(NECESSARY_FILE))?),
        counter_lines: non_empty(read_file(&dir.join(COUNTER_FILE))?),
    })
}

/// Builds a facts-free KB carrying the bundle's symbol tables: the relations
/// and the full constant universe.
pub fn symbol_table(manifest: &Manifest) -> Result<KnowledgeBase, BundleError> {
    let mut kb = KnowledgeBase::new();
    for rel in &manifest.relations {
        kb.add_relation(&rel.name, rel.arity)
            .map_err(|e| BundleError::Manifest(e.to_string()))?;
    }
    for name in &manifest.constants {
        kb.add_constant(name);
    }
    Ok(kb)
}

/// Resolves the bundle against an existing symbol table. Symbols the table
/// does not know make the bundle foreign to it.
pub fn bind(raw: &RawBundle, kb: &KnowledgeBase) -> Result<LoadedBundle, BundleError> {
    let mut rules = Vec::new();
    for line in &raw.rule_lines {
        let rule = Rule::parse(kb, line).map_err(|e| match e {
            crate::rule::RuleParseError::UnknownRelation(name) => BundleError::ForeignSymbol {
                kind: "relation",
                name,
            },
            crate::rule::RuleParseError::UnknownConstant(name) => BundleError::ForeignSymbol {
                kind: "constant",
                name,
            },
            other => BundleError::BadRule {
                rule: line.clone(),
                reason: other.to_string(),
            },
        })?;
        rules.push(rule);
    }
    let necessary = parse_fact_lines(kb, &raw.necessary_lines, NECESSARY_FILE)?;
    let counter = parse_fact_lines(kb, &raw.counter_lines, COUNTER_FILE)?;
    Ok(LoadedBundle {
        rules,
        necessary,
        counter,
    })
}

fn parse_fact_lines(
    kb: &KnowledgeBase,
    lines: &[String],
    file: &'static str,
) -> Result<Vec<Fact>, BundleError> {
    let mut facts = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let mut parts = line.split('\t');
        let name = parts.next().unwrap_or("");
        let relation = kb
            .relation_id(name)
            .ok_or_else(|| BundleError::ForeignSymbol {
                kind: "relation",
                name: name.to_string(),
            })?;
        let mut args = Vec::new();
        for part in parts {
            let id = kb
                .constant_id(part)
                .ok_or_else(|| BundleError::ForeignSymbol {
                    kind: "constant",
                    name: part.to_string(),
                })?;
            args.push(id);
        }
        if args.len() != kb.relation(relation).arity {
            return Err(BundleError::BadFact {
                file,
                line: line_no,
                reason: format!(
                    "relation '{name}' has arity {}, line has {} arguments",
                    kb.relation(relation).arity,
                    args.len()
                ),
            });
        }
        facts.push(Fact { relation, args });
    }
    Ok(facts)
}

/// Reconstructs the original KB from a bundle alone: the closure of the
/// necessary facts under the rules, minus the recorded counterexamples, over
/// the manifest's constant universe.
pub fn decompress(raw: &RawBundle) -> Result<KnowledgeBase, BundleError> {
    let symbols = symbol_table(&raw.manifest)?;
    let loaded = bind(raw, &symbols)?;
    let closed = closure(&loaded.necessary, &loaded.rules, &symbols);
    let counter: HashSet<Fact> = loaded.counter.into_iter().collect();
    let mut out = symbols.clone();
    for fact in &closed.facts {
        if !counter.contains(fact) {
            out.add_fact(fact.relation, fact.args.clone())
                .map_err(|e| BundleError::Manifest(e.to_string()))?;
        }
    }
    Ok(out)
}
