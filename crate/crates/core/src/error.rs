//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter name must not be empty")]
    EmptyParameterName,

    #[error("unknown service `{0}`")]
    UnknownService(String),

    #[error("duplicate service name `{0}`")]
    DuplicateService(String),

    #[error("service `{service}` declares `{parameter}` as both input and output")]
    OverlappingParameters { service: String, parameter: String },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("duplicate concept `{0}`")]
    DuplicateConcept(String),

    #[error("cycle in concept hierarchy involving `{0}`")]
    HierarchyCycle(String),

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown property `{property}` for concept `{concept}`")]
    UnknownProperty { concept: String, property: String },

    #[error("property `{property}` redeclared along the inheritance chain of `{concept}`")]
    PropertyRedeclared { concept: String, property: String },

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("duplicate query `{0}`")]
    DuplicateQuery(String),

    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
