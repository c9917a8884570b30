//! Explainer metadata records and the explainer library.
//!
//! Explainers are described, never executed. The fields are the semantic
//! features used for substitution ranking and the requirements used for
//! applicability checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::case::{from_json_str, AccessRequirement, CaseError, DatasetType, FieldIssue, ModelFramework};
use crate::taxonomy::{trees, ConceptId, Ontology};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainerSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub applicable_ai_tasks: BTreeSet<ConceptId>,
    pub applicable_ai_methods: BTreeSet<ConceptId>,
    pub dataset_type: DatasetType,
    pub explanation_technique: BTreeSet<ConceptId>,
    pub explanation_type: BTreeSet<ConceptId>,
    pub presentation: ConceptId,
    pub implementation_frameworks: BTreeSet<ModelFramework>,
    pub model_access_needed: AccessRequirement,
    pub needs_training_data: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ExplainerLibrary {
    specs: Vec<ExplainerSpec>,
    by_id: BTreeMap<String, usize>,
}

impl ExplainerLibrary {
    pub fn new(specs: Vec<ExplainerSpec>) -> Result<Self, CaseError> {
        let mut by_id = BTreeMap::new();
        for (i, spec) in specs.iter().enumerate() {
            if by_id.insert(spec.id.clone(), i).is_some() {
                return Err(CaseError::SchemaViolation(vec![FieldIssue {
                    field: format!("[{i}].id"),
                    message: format!("duplicate explainer id `{}`", spec.id),
                }]));
            }
        }
        Ok(ExplainerLibrary { specs, by_id })
    }

    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        Self::new(from_json_str(text)?)
    }

    /// Parses and checks every concept against `ontology`.
    pub fn load(text: &str, ontology: &Ontology) -> Result<Self, CaseError> {
        let lib = Self::from_json(text)?;
        lib.validate(ontology)?;
        Ok(lib)
    }

    pub fn validate(&self, ontology: &Ontology) -> Result<(), CaseError> {
        let mut issues = Vec::new();
        for (i, spec) in self.specs.iter().enumerate() {
            let mut check = |tree: &str, c: &ConceptId, field: &str| {
                if let Err(e) = ontology.resolve(tree, c) {
                    issues.push(FieldIssue {
                        field: format!("[{i}].{field}"),
                        message: e.to_string(),
                    });
                }
            };
            spec.applicable_ai_tasks
                .iter()
                .for_each(|c| check(trees::AI_TASK, c, "applicable_ai_tasks"));
            spec.applicable_ai_methods
                .iter()
                .for_each(|c| check(trees::AI_METHOD, c, "applicable_ai_methods"));
            spec.explanation_technique
                .iter()
                .for_each(|c| check(trees::EXPLANATION_TECHNIQUE, c, "explanation_technique"));
            spec.explanation_type
                .iter()
                .for_each(|c| check(trees::EXPLANATION_TYPE, c, "explanation_type"));
            check(trees::PRESENTATION, &spec.presentation, "presentation");
            if spec.implementation_frameworks.is_empty() {
                issues.push(FieldIssue {
                    field: format!("[{i}].implementation_frameworks"),
                    message: "at least one framework is required".into(),
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CaseError::SchemaViolation(issues))
        }
    }

    pub fn get(&self, id: &str) -> Option<&ExplainerSpec> {
        self.by_id.get(id).map(|&i| &self.specs[i])
    }

    pub fn specs(&self) -> &[ExplainerSpec] {
        &self.specs
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.by_id.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn shipped_library_is_valid() {
        let lib = fixtures::library();
        assert!(lib.len() >= 15);
        lib.validate(&fixtures::ontology()).unwrap();
        assert!(lib.get("GradCAM").is_some());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let spec = fixtures::library().get("GradCAM").unwrap().clone();
        assert!(ExplainerLibrary::new(vec![spec.clone(), spec]).is_err());
    }

    #[test]
    fn empty_frameworks_rejected() {
        let mut spec = fixtures::library().get("GradCAM").unwrap().clone();
        spec.implementation_frameworks.clear();
        let lib = ExplainerLibrary::new(vec![spec]).unwrap();
        assert!(lib.validate(&fixtures::ontology()).is_err());
    }
}
