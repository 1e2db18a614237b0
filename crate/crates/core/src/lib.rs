//! Core engine for turning natural-language stream-processing requests into
//! validated pipeline artifact bundles.
//!
//! The crate is organised around a thought hypergraph: a query is classified
//! and parameterised ([`query`]), expanded into a hypergraph of analysis and
//! plan vertices ([`hgot`]) over deterministic text embeddings
//! ([`embeddings`]), and executed step by step against a rotating pool of
//! model providers ([`providers`], [`executor`]). Reference material can be
//! ingested into a retrieval index ([`knowledge`]), results land in an
//! on-disk artifact bundle ([`artifacts`]), and finished bundles are graded
//! with an error-free score ([`efs`]).

pub mod artifacts;
pub mod efs;
pub mod embeddings;
pub mod executor;
pub mod hgot;
pub mod knowledge;
pub mod providers;
pub mod query;
pub mod spe;

pub use spe::TargetSystem;
