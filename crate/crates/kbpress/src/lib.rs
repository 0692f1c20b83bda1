//! kbpress compresses a relational knowledge base into three parts: Horn
//! rules mined from the data, the necessary facts the rules cannot derive,
//! and the counterexamples the rules over-derive under the closed-world
//! assumption. Forward-chaining the necessary facts through the rules and
//! subtracting the counterexamples restores the original fact set exactly,
//! and every compression run is checked against that round trip.
//!
//! The pieces:
//!
//! - [`kb`]: fact tables, interning, parsing and serialization
//! - [`rule`]: rules as equivalence classes, fingerprints, extension steps
//! - [`eval`]: grounding, scoring, forward-chaining closure
//! - [`search`]: beam search for the next best rule
//! - [`depgraph`]: proof dependencies, essential facts, cycle covers
//! - [`mod@extract`]: the driver producing the triple, plus the verifier
//! - [`enumerate`]: brute-force rule-space enumeration (the slow oracle)
//! - [`vc`]: vertex-cover instance generator and exact baselines
//! - [`bundle`]: the on-disk format

pub mod bundle;
pub mod concurrency;
pub mod depgraph;
pub mod enumerate;
pub mod eval;
pub mod extract;
pub mod kb;
pub mod rule;
pub mod search;
pub mod vc;

pub use extract::{extract, verify, verify_parts, ExtractionResult, VerifyReport};
pub use kb::{Fact, KbFormat, KnowledgeBase};
pub use rule::{Fingerprint, Rule};
pub use search::{find_single_rule, SearchConfig};
