//! A hybrid SPARQL engine that evaluates basic graph patterns over an
//! in-memory RDF data set and asks a crowd for the triple-pattern values the
//! data set is likely to be missing.
//!
//! Pipeline: [`query::parse_query`] → [`decompose::decompose`] →
//! [`plan::build_plan`] → [`executor::execute`], which consults the
//! [`quality`] model and the crowd knowledge base ([`kb`]) to decide which
//! instantiations to send through a [`gateway::CrowdGateway`].

pub mod decompose;
pub mod eval;
pub mod executor;
pub mod experiment;
pub mod gateway;
pub mod kb;
pub mod metrics;
pub mod microtask;
pub mod ntriples;
pub mod par;
pub mod plan;
pub mod quality;
pub mod query;
pub mod report;
pub mod solution;
pub mod store;
pub mod term;

pub use executor::{crowd_probability, execute, Execution, ExecutionConfig, ExecutionError};
pub use kb::{CrowdKb, CrowdQuad, KbSet, QuadObject};
pub use ntriples::parse_ntriples;
pub use query::{parse_query, BgpQuery};
pub use solution::{SolutionMapping, SolutionSet};
pub use store::Dataset;
pub use term::{Term, Triple};
