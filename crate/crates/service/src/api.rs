//! Request and response bodies. The command line prints the same types.

use isee_core::case::{Case, CaseDescription, CaseError, FieldIssue, Outcome};
use isee_core::retention::FeedbackResponse;
use isee_core::strategy::{BehaviorTree, QuestionSubtree};
use isee_core::taxonomy::ConceptId;
use isee_core::Error;
use serde::{Deserialize, Serialize};

fn default_k() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub description: CaseDescription,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptRequest {
    pub query: Case,
    /// Neighbour ids, nearest first.
    pub case_ids: Vec<String>,
    pub intent: ConceptId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainerSubstitutionRequest {
    pub target_id: String,
    pub description: CaseDescription,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtreeSubstitutionRequest {
    pub subtree: QuestionSubtree,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRequest {
    pub tree: BehaviorTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub tree: BehaviorTree,
    pub script: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    #[serde(default)]
    pub case_id: Option<String>,
    pub responses: Vec<FeedbackResponse>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetainRequest {
    pub case: Case,
    #[serde(default)]
    pub consent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetainResult {
    pub id: String,
    pub revision: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub cases: usize,
    pub revision: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub fields: Vec<FieldIssue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        let tree_fields = |report: &isee_core::strategy::ValidationReport| {
            report
                .issues
                .iter()
                .map(|i| FieldIssue {
                    field: i.path.clone(),
                    message: serde_json::to_string(&i.issue).unwrap_or_default(),
                })
                .collect()
        };
        let fields = match e {
            Error::Case(CaseError::SchemaViolation(issues)) => issues.clone(),
            Error::Case(CaseError::InvalidTree { report, .. }) | Error::InvalidTree(report) => tree_fields(report),
            _ => Vec::new(),
        };
        ErrorBody {
            error: ErrorDetail {
                code: e.code().to_owned(),
                message: e.to_string(),
                fields,
            },
        }
    }
}
