//! SPARQL-to-SQL compiler for ontology-based data access.
//!
//! The pipeline: parse a SPARQL fragment, translate it into a bag-semantics
//! relational algebra over a universal `triple` relation, unfold the triple
//! scans through mapping assertions, rewrite the resulting left joins with a
//! catalog of constraint-aware rules, and emit portable SQL. Every stage is
//! paired with a brute-force reference evaluator so translations and
//! rewrites can be cross-checked on small instances.

pub mod model;
pub mod three;
pub mod sparql;
pub mod ra;
pub mod translate;
pub mod mapping;
pub mod optimize;
pub mod sql;
pub mod fuzz;
pub mod pipeline;
