//! Command-line front end. Exit codes: 0 on success, 1 when verification
//! fails, 2 on usage or input errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kbpress::bundle::{self, BundleError};
use kbpress::enumerate::enumerate_scored;
use kbpress::extract::{extract, verify, verify_parts};
use kbpress::kb::{KbFormat, KnowledgeBase};
use kbpress::rule::ArgConstants;
use kbpress::search::SearchConfig;
use kbpress::vc::{graph_to_kb, UndirectedGraph};

#[derive(Parser)]
#[command(
    name = "kbpress",
    version,
    about = "Compress relational knowledge bases into Horn rules, necessary facts and counterexamples"
)]
struct Cli {
    /// Worker threads for candidate scoring (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Pick by file extension (.atoms/.dl/.pl are atoms, anything else TSV).
    Auto,
    Tsv,
    Atoms,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a knowledge base and write a bundle directory.
    Compress {
        /// Input fact file.
        kb: PathBuf,
        /// Beam width of the rule search.
        #[arg(long, default_value_t = 5)]
        beam: usize,
        /// Maximum rule length.
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        /// Acceptance threshold on a rule's marginal score.
        #[arg(long, default_value_t = 0)]
        min_delta: i64,
        /// Only mine rules for these head relations (comma separated).
        #[arg(long, value_delimiter = ',')]
        target: Vec<String>,
        /// Bundle directory (default: `<input stem>.bundle`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the proof-graph edge list into the bundle.
        #[arg(long)]
        dump_graph: bool,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
    },
    /// Rebuild the fact file from a bundle.
    Decompress {
        bundle: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a bundle losslessly encodes a knowledge base.
    Verify {
        kb: PathBuf,
        bundle: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
    },
    /// Generate the reduction KB of an undirected graph (`n m` header, one
    /// `i j` edge per line, 1-based).
    GenVc {
        graph: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print relation, fact and constant counts.
    Stats {
        kb: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
    },
    /// Exhaustively enumerate and score the rule space (slow; debugging aid).
    Enumerate {
        kb: PathBuf,
        /// Maximum rule length to enumerate.
        #[arg(long)]
        max_len: usize,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
    },
}

fn main() -> ExitCode {
    // Die quietly when the downstream pipe closes instead of panicking in
    // println.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        kbpress::concurrency::set_threads(threads);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Compress {
            kb,
            beam,
            max_len,
            min_delta,
            target,
            out,
            dump_graph,
            format,
        } => {
            let base = load_kb(&kb, format)?;
            if beam == 0 || max_len == 0 {
                bail!("--beam and --max-len must be at least 1");
            }
            for name in &target {
                if base.relation_id(name).is_none() {
                    bail!("unknown target relation '{name}'");
                }
            }
            let cfg = SearchConfig {
                beam_width: beam,
                max_rule_length: max_len,
                min_delta,
                target_relations: if target.is_empty() {
                    None
                } else {
                    Some(target.into_iter().collect())
                },
            };
            let result = extract(&base, &cfg);
            let report = verify(&base, &result);
            let out = out.unwrap_or_else(|| default_bundle_dir(&kb));
            bundle::write_bundle(&out, &base, &result, &cfg, report.ok, dump_graph)?;
            let a = result.accounting;
            let ratio = if a.original_facts == 0 {
                1.0
            } else {
                a.total as f64 / a.original_facts as f64
            };
            println!(
                "{} → {} + {} + {} (ratio {:.2})",
                a.original_facts, a.necessary, a.counter, a.rules_cost, ratio
            );
            println!(
                "rules: {}, necessary: {}, counterexamples: {}, dropped: {}",
                a.rule_count, a.necessary, a.counter, result.dropped_rules
            );
            println!("verified: {}", if report.ok { "ok" } else { "FAILED" });
            println!("bundle: {}", out.display());
            if report.ok {
                Ok(ExitCode::SUCCESS)
            } else {
                print_verify_details(&base, &report);
                Ok(ExitCode::from(1))
            }
        }
        Command::Decompress { bundle: dir, out } => {
            let raw = bundle::read_bundle(&dir)?;
            let recovered = bundle::decompress(&raw)?;
            let text = recovered.serialize_tsv();
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            kb,
            bundle: dir,
            format,
        } => {
            let base = load_kb(&kb, format)?;
            let raw = bundle::read_bundle(&dir)?;
            let loaded = match bundle::bind(&raw, &base) {
                Ok(loaded) => loaded,
                Err(err @ BundleError::ForeignSymbol { .. }) => {
                    println!("verification: FAILED ({err})");
                    return Ok(ExitCode::from(1));
                }
                Err(err) => return Err(err.into()),
            };
            let report = verify_parts(&base, &loaded.rules, &loaded.necessary, &loaded.counter);
            if report.ok {
                println!(
                    "verification: ok (closure rounds: {})",
                    report.closure_rounds
                );
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verification: FAILED");
                print_verify_details(&base, &report);
                Ok(ExitCode::from(1))
            }
        }
        Command::GenVc { graph, out } => {
            let text = std::fs::read_to_string(&graph)
                .with_context(|| format!("reading {}", graph.display()))?;
            let parsed = UndirectedGraph::parse(&text)?;
            let kb = graph_to_kb(&parsed);
            let serialized = kb.serialize_tsv();
            match out {
                Some(path) => std::fs::write(&path, serialized)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{serialized}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { kb, format } => {
            let base = load_kb(&kb, format)?;
            print!("{}", base.stats());
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate {
            kb,
            max_len,
            format,
        } => {
            let base = load_kb(&kb, format)?;
            let constants = ArgConstants::from_kb(&base);
            let scored = enumerate_scored(&base, max_len, Some(&constants), &HashSet::new());
            for (rule, score) in &scored {
                println!("{}\t{}\t{}", score.delta, rule.length(), rule.render(&base));
            }
            eprintln!("{} rules of length <= {max_len}", scored.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_kb(path: &Path, format: InputFormat) -> Result<KnowledgeBase> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = match format {
        InputFormat::Tsv => KbFormat::Tsv,
        InputFormat::Atoms => KbFormat::Atoms,
        InputFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("atoms") | Some("dl") | Some("pl") => KbFormat::Atoms,
            _ => KbFormat::Tsv,
        },
    };
    KnowledgeBase::parse(&text, format).with_context(|| format!("parsing {}", path.display()))
}

fn default_bundle_dir(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kb".to_string());
    input.with_file_name(format!("{stem}.bundle"))
}

fn print_verify_details(kb: &KnowledgeBase, report: &kbpress::VerifyReport) {
    let show = |label: &str, facts: &[kbpress::Fact]| {
        if facts.is_empty() {
            return;
        }
        let sample: Vec<String> = facts
            .iter()
            .take(5)
            .map(|f| kb.render_fact_atom(f))
            .collect();
        println!("  {label}: {} (e.g. {})", facts.len(), sample.join(", "));
    };
    show("missing", &report.missing);
    show("underivable extras", &report.extra);
    show(
        "necessary facts outside the KB",
        &report.necessary_outside_kb,
    );
    show("counterexamples inside the KB", &report.counter_inside_kb);
}
