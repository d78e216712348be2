//! Automatic web service composition at the library level.
//!
//! A composition is an ordered (optionally layered) list of services that,
//! starting from a request's initially known parameters, keeps every service
//! callable at its position and ends with every required parameter known.
//! This crate implements the search engines for five parameter-matching
//! models, the validators that check their outputs independently, and seeded
//! instance generators that plant known-valid compositions for benchmarks.
//!
//! Modules map onto the matching models:
//!
//! - [`model`] / [`validate`]: name matching, composition validation and a
//!   brute-force shortest-composition oracle for desk-scale tests.
//! - [`name_engine`]: linear-time greedy search with a score heuristic and a
//!   reduction pass that drops useless services.
//! - [`taxonomy`] / [`hierarchical`]: concept forests with an Euler-tour
//!   index for O(1) subsumption, plus the layered engine minimizing the
//!   execution path.
//! - [`relational`]: typed objects, binary relations, inference rules applied
//!   to fixpoint and backtracking parameter matching.
//! - [`oo`]: concept trees with inherited properties and the linear
//!   property-learner engine.
//! - [`online`]: dynamic repository with maintained solutions, precomputed
//!   per-service backups and failover on deletion.
//! - [`gen`]: seeded generators emitting instances plus ground-truth
//!   manifests.
//! - [`instance`]: the JSON instance/composition formats shared with the CLI.

pub mod error;
pub mod gen;
pub mod hierarchical;
pub mod instance;
pub mod intern;
pub mod model;
pub mod name_engine;
pub mod online;
pub mod oo;
pub mod relational;
pub mod taxonomy;
pub mod validate;

pub use error::Error;
pub use intern::{ParamRegistry, ParameterId};
pub use model::{Composition, Repository, Request, Service, ValidationReport};
