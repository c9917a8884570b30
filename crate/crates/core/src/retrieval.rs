//! Similarity-based case retrieval.
//!
//! Retrieval runs in two phases. The case base is first narrowed to the
//! cases whose dataset type equals the query's; every surviving case is then
//! scored by the mean of per-feature local similarities and the best `k` are
//! returned. Local metric per feature:
//!
//! | feature                                   | metric                  |
//! |-------------------------------------------|-------------------------|
//! | `ai_task`, `ai_method`                    | Wu & Palmer             |
//! | `technical_facilities`, `user_questions`  | query intersection      |
//! | everything else                           | exact match             |
//!
//! Query intersection is `|q ∩ c| / |q|`, so it is asymmetric on purpose.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{Case, CaseDescription, DatasetType};
use crate::retention::CaseBase;
use crate::taxonomy::{trees, ConceptId, Ontology, TaxonomyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("metric {metric:?} cannot compare the values of feature `{feature}`")]
    MetricTypeMismatch { feature: String, metric: Metric },
    #[error("no case in the case base has dataset type `{0}`")]
    EmptyCaseBase(DatasetType),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "WP")]
    WuPalmer,
    #[serde(rename = "QI")]
    QueryIntersection,
    #[serde(rename = "EM")]
    ExactMatch,
}

/// Scored attributes of a [`CaseDescription`]. The dataset type is absent
/// because it is a filter, not a scored feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    AiTask,
    AiMethod,
    TechnicalFacilities,
    UserQuestions,
    ModelFramework,
    ModelAccess,
    HasTrainingData,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::AiTask,
        Feature::AiMethod,
        Feature::TechnicalFacilities,
        Feature::UserQuestions,
        Feature::ModelFramework,
        Feature::ModelAccess,
        Feature::HasTrainingData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::AiTask => "ai_task",
            Feature::AiMethod => "ai_method",
            Feature::TechnicalFacilities => "technical_facilities",
            Feature::UserQuestions => "user_questions",
            Feature::ModelFramework => "model_framework",
            Feature::ModelAccess => "model_access",
            Feature::HasTrainingData => "has_training_data",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Feature::AiTask | Feature::AiMethod => Metric::WuPalmer,
            Feature::TechnicalFacilities | Feature::UserQuestions => Metric::QueryIntersection,
            _ => Metric::ExactMatch,
        }
    }

    pub fn tree(self) -> Option<&'static str> {
        match self {
            Feature::AiTask => Some(trees::AI_TASK),
            Feature::AiMethod => Some(trees::AI_METHOD),
            Feature::TechnicalFacilities => Some(trees::TECHNICAL_FACILITY),
            Feature::UserQuestions => Some(trees::USER_QUESTION),
            _ => None,
        }
    }

    pub fn value(self, d: &CaseDescription) -> FeatureValue<'_> {
        match self {
            Feature::AiTask => FeatureValue::Concept(&d.ai_task),
            Feature::AiMethod => FeatureValue::Concept(&d.ai_method),
            Feature::TechnicalFacilities => FeatureValue::Set(d.technical_facilities.clone()),
            Feature::UserQuestions => FeatureValue::Set(d.user_questions()),
            Feature::ModelFramework => FeatureValue::Token(d.model_framework.token()),
            Feature::ModelAccess => FeatureValue::Token(d.model_access.token()),
            Feature::HasTrainingData => {
                FeatureValue::Token(if d.has_training_data { "true" } else { "false" })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureValue<'a> {
    Concept(&'a ConceptId),
    Set(BTreeSet<ConceptId>),
    Token(&'a str),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub feature: Feature,
    pub metric: Metric,
    /// Tree for WP features; `None` falls back to the feature's own tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
}

impl FeatureEntry {
    pub fn of(feature: Feature) -> Self {
        FeatureEntry {
            feature,
            metric: feature.metric(),
            tree: None,
        }
    }

    fn tree_name(&self) -> Option<&str> {
        self.tree.as_deref().or(self.feature.tree())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    entries: Vec<FeatureEntry>,
    /// Per-feature weights. `None` is the plain mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::standard()
    }
}

impl FeatureSchema {
    /// Every scored feature with its canonical metric.
    pub fn standard() -> Self {
        FeatureSchema {
            entries: Feature::ALL.iter().copied().map(FeatureEntry::of).collect(),
            weights: None,
        }
    }

    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self, RetrievalError> {
        if entries.is_empty() {
            return Err(RetrievalError::InvalidSchema("no features".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.feature.name()) {
                return Err(RetrievalError::InvalidSchema(format!(
                    "feature `{}` listed twice",
                    e.feature.name()
                )));
            }
            if e.metric != e.feature.metric() {
                return Err(RetrievalError::InvalidSchema(format!(
                    "feature `{}` must use {:?}",
                    e.feature.name(),
                    e.feature.metric()
                )));
            }
        }
        Ok(FeatureSchema {
            entries,
            weights: None,
        })
    }

    pub fn of_features(features: &[Feature]) -> Result<Self, RetrievalError> {
        Self::new(features.iter().copied().map(FeatureEntry::of).collect())
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, RetrievalError> {
        if weights.len() != self.entries.len()
            || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || weights.iter().sum::<f64>() <= 0.0
        {
            return Err(RetrievalError::InvalidSchema(
                "weights must be non-negative, finite, one per feature and not all zero".into(),
            ));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn query_intersection(q: &BTreeSet<ConceptId>, c: &BTreeSet<ConceptId>) -> f64 {
    if q.is_empty() {
        return 1.0;
    }
    q.intersection(c).count() as f64 / q.len() as f64
}

pub fn local_similarity(
    entry: &FeatureEntry,
    query: &FeatureValue<'_>,
    case: &FeatureValue<'_>,
    ontology: &Ontology,
) -> Result<f64, RetrievalError> {
    let mismatch = || RetrievalError::MetricTypeMismatch {
        feature: entry.feature.name().to_owned(),
        metric: entry.metric,
    };
    match (entry.metric, query, case) {
        (Metric::WuPalmer, FeatureValue::Concept(a), FeatureValue::Concept(b)) => {
            let tree = entry.tree_name().ok_or_else(mismatch)?;
            Ok(ontology.wu_palmer(tree, a, b)?)
        }
        (Metric::QueryIntersection, FeatureValue::Set(a), FeatureValue::Set(b)) => {
            Ok(query_intersection(a, b))
        }
        (Metric::ExactMatch, FeatureValue::Token(a), FeatureValue::Token(b)) => {
            Ok(if a == b { 1.0 } else { 0.0 })
        }
        (Metric::ExactMatch, FeatureValue::Concept(a), FeatureValue::Concept(b)) => {
            Ok(if a == b { 1.0 } else { 0.0 })
        }
        _ => Err(mismatch()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalScore {
    pub feature: Feature,
    pub metric: Metric,
    pub score: f64,
}

/// Global score plus the per-feature breakdown.
pub fn score_description(
    query: &CaseDescription,
    case: &CaseDescription,
    schema: &FeatureSchema,
    ontology: &Ontology,
) -> Result<(f64, Vec<LocalScore>), RetrievalError> {
    let mut local = Vec::with_capacity(schema.len());
    for entry in schema.entries() {
        let score = local_similarity(
            entry,
            &entry.feature.value(query),
            &entry.feature.value(case),
            ontology,
        )?;
        local.push(LocalScore {
            feature: entry.feature,
            metric: entry.metric,
            score,
        });
    }
    let global = match &schema.weights {
        None => local.iter().map(|l| l.score).sum::<f64>() / local.len() as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            local.iter().zip(w).map(|(l, w)| l.score * w).sum::<f64>() / total
        }
    };
    Ok((global, local))
}

pub fn global_similarity(
    query: &CaseDescription,
    case: &CaseDescription,
    schema: &FeatureSchema,
    ontology: &Ontology,
) -> Result<f64, RetrievalError> {
    score_description(query, case, schema, ontology).map(|(g, _)| g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCase {
    pub case_id: String,
    pub score: f64,
    pub local: Vec<LocalScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub k: usize,
    pub ranked: Vec<ScoredCase>,
}

impl RetrievalResult {
    pub fn top(&self) -> Option<&ScoredCase> {
        self.ranked.first()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.ranked.iter().map(|s| s.case_id.as_str()).collect()
    }

    pub fn score_of(&self, case_id: &str) -> Option<f64> {
        self.ranked
            .iter()
            .find(|s| s.case_id == case_id)
            .map(|s| s.score)
    }
}

/// Sorts by score descending, then case id ascending.
pub(crate) fn rank(scored: &mut [ScoredCase]) {
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
}

/// Filters by dataset type and returns the `k` most similar cases.
pub fn retrieve(
    query: &Case,
    case_base: &CaseBase,
    k: usize,
    schema: &FeatureSchema,
    ontology: &Ontology,
) -> Result<RetrievalResult, RetrievalError> {
    retrieve_description(&query.description, case_base, k, schema, ontology)
}

pub fn retrieve_description(
    query: &CaseDescription,
    case_base: &CaseBase,
    k: usize,
    schema: &FeatureSchema,
    ontology: &Ontology,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let mut scored = Vec::new();
    for case in case_base
        .cases()
        .filter(|c| c.description.dataset_type == query.dataset_type)
    {
        let (score, local) = score_description(query, &case.description, schema, ontology)?;
        scored.push(ScoredCase {
            case_id: case.id.clone(),
            score,
            local,
        });
    }
    if scored.is_empty() {
        return Err(RetrievalError::EmptyCaseBase(query.dataset_type));
    }
    rank(&mut scored);
    scored.truncate(k);
    Ok(RetrievalResult { k, ranked: scored })
}
