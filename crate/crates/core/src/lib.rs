//! Document refinement for retrieval-augmented generation.
//!
//! Long plain-text documents are structured into [`DocTree`]s through a flat
//! tag markup ([`xml_codec`]), scored against a query from a local and a
//! global perspective ([`scoring`]), and cut down to a token budget
//! ([`budget_select`]). Model-dependent steps sit behind the traits in
//! [`providers`].

pub mod budget_select;
pub mod doctree;
pub mod label_pipeline;
pub mod providers;
pub mod query_analysis;
pub mod records;
pub mod scoring;
pub mod synth;
pub mod tokens;
pub mod xml_codec;

pub use budget_select::{refine, Budget, RefineOptions, RefineResult};
pub use doctree::{DocNode, DocTree, NodeId, NodeKind, Outline, Span};
pub use query_analysis::{analyze, QueryAnalysis, ScopeMode};
pub use scoring::NodeScores;
pub use tokens::{TokenCounter, TokenizerKind, WordCounter};
pub use xml_codec::{parse, restore, serialize, SkipPolicy, XmlDoc};
