//! The end-to-end driver: configuration, document store, keyword
//! extraction, synthetic corpora, and the experiment suite.

pub mod adversary;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod docstore;
pub mod keywords;
pub mod system;

pub use adversary::{run_adversary, synthetic_system, AdversaryMode, AdversaryOutcome};
pub use config::Config;
pub use docstore::DocumentStore;
pub use keywords::{dictionary, extract_keywords};
pub use system::{AddOutcome, IngestReport, QueryOutcome, System};
