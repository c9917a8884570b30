//! The explanation-experience case: description, solution and outcome.
//!
//! A query is a case whose solution and outcome are both absent. A retained
//! case has both and is flagged as anonymised.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strategy::{validate_tree, BehaviorTree, NodeKind, ValidationReport};
use crate::taxonomy::{trees, ConceptId, Ontology};

/// Upper bound of the XEQ item scale; items score `0..=XEQ_MAX_SCORE`.
pub const XEQ_MAX_SCORE: u8 = 4;

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

token_enum!(
    /// Hard-filter attribute for retrieval.
    DatasetType {
        Image => "image",
        Text => "text",
        Tabular => "tabular",
        TimeSeries => "time-series",
    }
);

token_enum!(ModelFramework {
    Tensorflow => "tensorflow",
    Pytorch => "pytorch",
    Sklearn => "sklearn",
    Xgboost => "xgboost",
    Other => "other",
});

token_enum!(
    /// How the design user exposes the model.
    ModelAccess {
        File => "file",
        PredictApi => "predict-api",
    }
);

token_enum!(
    /// What an explainer needs from the model.
    AccessRequirement {
        File => "file",
        PredictApi => "predict-api",
        Either => "either",
    }
);

token_enum!(Dimension {
    Learning => "Learning",
    Utility => "Utility",
    Fulfilment => "Fulfilment",
    Engagement => "Engagement",
});

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub label: ConceptId,
    pub user_questions: BTreeSet<ConceptId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub intents: Vec<Intent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDescription {
    pub ai_task: ConceptId,
    pub ai_method: ConceptId,
    pub dataset_type: DatasetType,
    pub model_framework: ModelFramework,
    pub model_access: ModelAccess,
    pub has_training_data: bool,
    #[serde(default)]
    pub technical_facilities: BTreeSet<ConceptId>,
    pub personas: Vec<Persona>,
    /// Free-text notes about the AI system. Redacted on retention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Opaque pointer to the model file or predict endpoint. Redacted on retention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_descriptor: Option<String>,
}

impl CaseDescription {
    /// Union of the user questions of every persona intent.
    pub fn user_questions(&self) -> BTreeSet<ConceptId> {
        self.intents()
            .flat_map(|i| i.user_questions.iter().cloned())
            .collect()
    }

    pub fn intents(&self) -> impl Iterator<Item = &Intent> {
        self.personas.iter().flat_map(|p| p.intents.iter())
    }

    /// Questions asked under `label`, merged across personas.
    pub fn questions_for_intent(&self, label: &ConceptId) -> BTreeSet<ConceptId> {
        self.intents()
            .filter(|i| &i.label == label)
            .flat_map(|i| i.user_questions.iter().cloned())
            .collect()
    }

    pub fn intent_labels(&self) -> BTreeSet<ConceptId> {
        self.intents().map(|i| i.label.clone()).collect()
    }
}

/// One strategy per persona intent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategySolution {
    pub strategies: BTreeMap<ConceptId, BehaviorTree>,
}

impl StrategySolution {
    pub fn single(intent: impl Into<ConceptId>, tree: BehaviorTree) -> Self {
        StrategySolution {
            strategies: BTreeMap::from([(intent.into(), tree)]),
        }
    }

    /// The strategy for `intent`. A solution holding exactly one strategy
    /// serves as the default for any intent.
    pub fn tree_for(&self, intent: &ConceptId) -> Option<&BehaviorTree> {
        self.strategies.get(intent).or_else(|| {
            if self.strategies.len() == 1 {
                self.strategies.values().next()
            } else {
                None
            }
        })
    }

    pub fn trees(&self) -> impl Iterator<Item = (&ConceptId, &BehaviorTree)> {
        self.strategies.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub dimension_means: BTreeMap<Dimension, f64>,
    pub respondent_count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    #[serde(default)]
    pub id: String,
    pub description: CaseDescription,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<StrategySolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default)]
    pub anonymised: bool,
}

impl Case {
    pub fn query(description: CaseDescription) -> Self {
        Case {
            id: String::new(),
            description,
            solution: None,
            outcome: None,
            anonymised: false,
        }
    }

    pub fn is_query(&self) -> bool {
        self.solution.is_none() && self.outcome.is_none()
    }

    pub fn is_complete(&self) -> bool {
        self.solution.is_some() && self.outcome.is_some()
    }
}

pub fn is_query(case: &Case) -> bool {
    case.is_query()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl FieldIssue {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldIssue {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("schema violation: {}", format_issues(.0))]
    SchemaViolation(Vec<FieldIssue>),
    #[error("invalid strategy for intent `{intent}`: {} issue(s)", .report.issues.len())]
    InvalidTree {
        intent: ConceptId,
        report: ValidationReport,
    },
}

fn format_issues(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// What a case is checked against: the taxonomy and the known explainer ids.
#[derive(Clone, Copy)]
pub struct CaseContext<'a> {
    pub ontology: &'a Ontology,
    pub explainers: &'a BTreeSet<String>,
}

fn check_concept(
    ctx: &CaseContext<'_>,
    tree: &str,
    concept: &ConceptId,
    field: &str,
    issues: &mut Vec<FieldIssue>,
) {
    if let Err(e) = ctx.ontology.resolve(tree, concept) {
        issues.push(FieldIssue::new(field, e.to_string()));
    }
}

/// Referential and structural checks on a description.
pub fn validate_description(
    d: &CaseDescription,
    ctx: &CaseContext<'_>,
) -> Result<(), CaseError> {
    let mut issues = Vec::new();
    check_concept(ctx, trees::AI_TASK, &d.ai_task, "description.ai_task", &mut issues);
    check_concept(ctx, trees::AI_METHOD, &d.ai_method, "description.ai_method", &mut issues);
    for f in &d.technical_facilities {
        check_concept(
            ctx,
            trees::TECHNICAL_FACILITY,
            f,
            "description.technical_facilities",
            &mut issues,
        );
    }
    if d.personas.is_empty() {
        issues.push(FieldIssue::new("description.personas", "at least one persona is required"));
    }
    for (p, persona) in d.personas.iter().enumerate() {
        let base = format!("description.personas[{p}]");
        if persona.name.trim().is_empty() {
            issues.push(FieldIssue::new(format!("{base}.name"), "persona name is empty"));
        }
        if persona.intents.is_empty() {
            issues.push(FieldIssue::new(format!("{base}.intents"), "at least one intent is required"));
        }
        for (i, intent) in persona.intents.iter().enumerate() {
            let ibase = format!("{base}.intents[{i}]");
            check_concept(ctx, trees::INTENT, &intent.label, &format!("{ibase}.label"), &mut issues);
            if intent.user_questions.is_empty() {
                issues.push(FieldIssue::new(
                    format!("{ibase}.user_questions"),
                    "at least one user question is required",
                ));
            }
            for q in &intent.user_questions {
                check_concept(
                    ctx,
                    trees::USER_QUESTION,
                    q,
                    &format!("{ibase}.user_questions"),
                    &mut issues,
                );
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CaseError::SchemaViolation(issues))
    }
}

/// Full validation of a case against its context.
pub fn validate_case(case: &Case, ctx: &CaseContext<'_>) -> Result<(), CaseError> {
    validate_description(&case.description, ctx)?;
    let mut issues = Vec::new();
    if let Some(solution) = &case.solution {
        for (intent, tree) in solution.trees() {
            check_concept(ctx, trees::INTENT, intent, "solution", &mut issues);
            let report = validate_tree(tree, ctx.explainers);
            if !report.is_valid() {
                return Err(CaseError::InvalidTree {
                    intent: intent.clone(),
                    report,
                });
            }
            for node in tree.root.iter().filter(|n| n.kind == NodeKind::UserQuestion) {
                if let Some(q) = &node.question {
                    check_concept(ctx, trees::USER_QUESTION, q, &format!("solution.{intent}"), &mut issues);
                }
            }
        }
    }
    if let Some(outcome) = &case.outcome {
        if outcome.respondent_count > 0 {
            for dim in Dimension::ALL {
                if !outcome.dimension_means.contains_key(dim) {
                    issues.push(FieldIssue::new(
                        "outcome.dimension_means",
                        format!("missing dimension {dim}"),
                    ));
                }
            }
        }
        for (dim, mean) in &outcome.dimension_means {
            if !(0.0..=f64::from(XEQ_MAX_SCORE)).contains(mean) {
                issues.push(FieldIssue::new(
                    format!("outcome.dimension_means.{dim}"),
                    format!("mean {mean} outside 0..={XEQ_MAX_SCORE}"),
                ));
            }
        }
    }
    if case.anonymised && !case.is_complete() {
        issues.push(FieldIssue::new("anonymised", "only complete cases can be anonymised"));
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CaseError::SchemaViolation(issues))
    }
}

/// Deserialises JSON, reporting the failing field path.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T, CaseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CaseError::SchemaViolation(vec![FieldIssue::new(
            if path == "." { "<document>".to_owned() } else { path },
            e.into_inner().to_string(),
        )])
    })
}

/// Parses and validates a case document.
pub fn parse_case(text: &str, ctx: &CaseContext<'_>) -> Result<Case, CaseError> {
    let case: Case = from_json_str(text)?;
    validate_case(&case, ctx)?;
    Ok(case)
}

/// Canonical serialisation: pretty JSON, fields in declaration order.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("engine values always serialise")
}
