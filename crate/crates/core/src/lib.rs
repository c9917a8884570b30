//! A case-based reasoning engine for explanation strategies.
//!
//! An explanation experience is a case: a description of an AI system and
//! the people who need it explained, a behaviour-tree strategy of
//! explainers, and the feedback that strategy earned. The engine runs the
//! retrieve, reuse, revise and retain cycle over a case base of such
//! experiences.
//!
//! ```
//! use isee_core::{fixtures, retrieval::FeatureSchema};
//!
//! let onto = fixtures::ontology();
//! let cb = fixtures::case_base();
//! let q = fixtures::radiograph_description();
//! let hits = isee_core::retrieval::retrieve_description(&q, &cb, 3, &FeatureSchema::standard(), &onto)?;
//! assert_eq!(hits.ranked.len(), 3);
//! # Ok::<(), isee_core::Error>(())
//! ```

pub mod adaptation;
pub mod case;
pub mod engine;
pub mod explainer;
pub mod fixtures;
pub mod retention;
pub mod retrieval;
pub mod revision;
pub mod strategy;
pub mod taxonomy;

pub use engine::Engine;

use thiserror::Error;

use adaptation::AdaptationError;
use case::CaseError;
use retention::RetentionError;
use retrieval::RetrievalError;
use revision::RevisionError;
use strategy::{StrategyError, ValidationReport};
use taxonomy::TaxonomyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Adaptation(#[from] AdaptationError),
    #[error(transparent)]
    Revision(#[from] RevisionError),
    #[error(transparent)]
    Retention(#[from] RetentionError),
    #[error("behaviour tree is invalid: {} issue(s)", .0.issues.len())]
    InvalidTree(ValidationReport),
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl Error {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Taxonomy(e) => match e {
                TaxonomyError::DuplicateConcept(_) => "DuplicateConcept",
                TaxonomyError::MultipleRoots { .. } => "MultipleRoots",
                TaxonomyError::CycleDetected { .. } => "CycleDetected",
                TaxonomyError::DanglingParent { .. } => "DanglingParent",
                TaxonomyError::EmptyConcept(_) => "EmptyConcept",
                TaxonomyError::UnknownConcept(_) => "UnknownConcept",
                TaxonomyError::WrongTree { .. } => "WrongTree",
                TaxonomyError::UnknownTree(_) => "UnknownTree",
                TaxonomyError::Parse(_) => "SchemaViolation",
            },
            Error::Case(CaseError::SchemaViolation(_)) => "SchemaViolation",
            Error::Case(CaseError::InvalidTree { .. }) | Error::InvalidTree(_) => "InvalidTree",
            Error::Strategy(StrategyError::DuplicateQuestion(_)) => "DuplicateQuestion",
            Error::Strategy(StrategyError::InvalidSubtree { .. }) => "InvalidSubtree",
            Error::Retrieval(e) => match e {
                RetrievalError::MetricTypeMismatch { .. } => "MetricTypeMismatch",
                RetrievalError::EmptyCaseBase(_) => "EmptyCaseBase",
                RetrievalError::InvalidK => "InvalidK",
                RetrievalError::InvalidSchema(_) => "InvalidSchema",
                RetrievalError::Taxonomy(t) => Error::Taxonomy(t.clone()).code(),
            },
            Error::Adaptation(e) => match e {
                AdaptationError::MissingSolution { .. } => "MissingSolution",
                AdaptationError::UnknownCase(_) => "NotFound",
                AdaptationError::EmptyNeighbourhood => "EmptyNeighbourhood",
                AdaptationError::Strategy(s) => Error::Strategy(s.clone()).code(),
            },
            Error::Revision(e) => match e {
                RevisionError::UnknownExplainer(_) => "UnknownExplainer",
                RevisionError::SizeCapExceeded { .. } => "SizeCapExceeded",
                RevisionError::Taxonomy(t) => Error::Taxonomy(t.clone()).code(),
            },
            Error::Retention(e) => match e {
                RetentionError::EmptyFeedback => "EmptyFeedback",
                RetentionError::ScoreOutOfRange { .. } => "ScoreOutOfRange",
                RetentionError::MissingDimension { .. } => "MissingDimension",
                RetentionError::ConsentWithheld => "ConsentWithheld",
                RetentionError::IncompleteCase => "IncompleteCase",
                RetentionError::DuplicateId(_) => "DuplicateId",
                RetentionError::InvalidId(_) => "InvalidId",
                RetentionError::Io { .. } => "Io",
                RetentionError::Corrupt { .. } => "CorruptCaseBase",
                RetentionError::Invalid(c) => Error::Case(c.clone()).code(),
            },
            Error::NotFound { .. } => "NotFound",
            Error::InvalidRequest(_) => "InvalidRequest",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
