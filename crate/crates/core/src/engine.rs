//! One handle over the loaded data: taxonomy, explainer library and case store.
//!
//! The HTTP service and the command line both go through [`Engine`], so the
//! two surfaces return the same values for the same request.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::adaptation::{adapt, AdaptationConfig, AdaptationError, AdaptationPlan};
use crate::case::{validate_case, validate_description, Case, CaseContext, CaseDescription, Outcome};
use crate::explainer::ExplainerLibrary;
use crate::retention::{
    aggregate_outcome, coverage_report, stats, CaseBase, CaseBaseStats, CaseStore, CoverageReport, FeedbackResponse,
    RetentionError,
};
use crate::retrieval::{rank, retrieve_description, score_description, FeatureSchema, RetrievalError, RetrievalResult, ScoredCase};
use crate::revision::{
    rank_subtree_substitutes, rank_substitutes, ExplainerRanking, ExplainerSimilarityConfig, NodeSimContext,
    RevisionError, SubtreeRanking,
};
use crate::strategy::{simulate, validate_structure, validate_tree, BehaviorTree, QuestionSubtree, Trace, ValidationReport};
use crate::taxonomy::{ConceptId, Ontology};
use crate::{Error, Result};

/// Where each data file lives under a data directory.
#[derive(Clone, Debug)]
pub struct DataPaths {
    pub taxonomy: PathBuf,
    pub library: PathBuf,
    pub casebase: PathBuf,
}

impl DataPaths {
    pub fn under(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DataPaths {
            taxonomy: dir.join("taxonomy").join("isee.json"),
            library: dir.join("library").join("explainers.json"),
            casebase: dir.join("casebase"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Retention(RetentionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })
}

#[derive(Debug)]
pub struct Engine {
    ontology: Ontology,
    library: ExplainerLibrary,
    explainer_ids: BTreeSet<String>,
    store: CaseStore,
    pub schema: FeatureSchema,
    pub adaptation: AdaptationConfig,
    pub similarity: ExplainerSimilarityConfig,
}

impl Engine {
    /// Loads taxonomy, library and case base from a data directory.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let paths = DataPaths::under(dir);
        let ontology = Ontology::from_json(&read(&paths.taxonomy)?)?;
        let library = ExplainerLibrary::load(&read(&paths.library)?, &ontology)?;
        let ids = library.ids();
        let store = CaseStore::open(
            &paths.casebase,
            &CaseContext {
                ontology: &ontology,
                explainers: &ids,
            },
        )?;
        Ok(Self::new(ontology, library, store))
    }

    pub fn new(ontology: Ontology, library: ExplainerLibrary, store: CaseStore) -> Self {
        Engine {
            explainer_ids: library.ids(),
            ontology,
            library,
            store,
            schema: FeatureSchema::standard(),
            adaptation: AdaptationConfig::default(),
            similarity: ExplainerSimilarityConfig::default(),
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn library(&self) -> &ExplainerLibrary {
        &self.library
    }

    pub fn store(&self) -> &CaseStore {
        &self.store
    }

    pub fn snapshot(&self) -> Arc<CaseBase> {
        self.store.snapshot()
    }

    pub fn context(&self) -> CaseContext<'_> {
        CaseContext {
            ontology: &self.ontology,
            explainers: &self.explainer_ids,
        }
    }

    pub fn query(&self, description: &CaseDescription, k: usize) -> Result<RetrievalResult> {
        validate_description(description, &self.context())?;
        Ok(retrieve_description(description, &self.snapshot(), k, &self.schema, &self.ontology)?)
    }

    /// Adapts against the given neighbours, nearest first.
    ///
    /// Neighbour scores are recomputed against the query so the plan is
    /// independent of any earlier retrieval call.
    pub fn adapt(&self, query: &Case, case_ids: &[String], intent: &ConceptId) -> Result<AdaptationPlan> {
        validate_description(&query.description, &self.context())?;
        if case_ids.is_empty() {
            return Err(AdaptationError::EmptyNeighbourhood.into());
        }
        let cb = self.snapshot();
        let mut ranked = Vec::with_capacity(case_ids.len());
        for id in case_ids {
            let case = cb.get(id).ok_or_else(|| Error::NotFound {
                kind: "case",
                id: id.clone(),
            })?;
            let (score, local) = score_description(&query.description, &case.description, &self.schema, &self.ontology)?;
            ranked.push(ScoredCase {
                case_id: id.clone(),
                score,
                local,
            });
        }
        let topk = RetrievalResult {
            k: ranked.len(),
            ranked,
        };
        Ok(adapt(query, &topk, &cb, intent, &self.ontology, &self.adaptation)?)
    }

    pub fn substitute_explainer(&self, target_id: &str, description: &CaseDescription) -> Result<ExplainerRanking> {
        validate_description(description, &self.context())?;
        let target = self
            .library
            .get(target_id)
            .ok_or_else(|| RevisionError::UnknownExplainer(target_id.to_owned()))?;
        Ok(rank_substitutes(
            target,
            self.library.specs(),
            description,
            &self.ontology,
            &self.similarity,
        )?)
    }

    pub fn substitute_subtree(&self, subtree: &QuestionSubtree, k: usize) -> Result<SubtreeRanking> {
        if k == 0 {
            return Err(RetrievalError::InvalidK.into());
        }
        let report = validate_structure(&subtree.tree);
        if !report.is_valid() {
            return Err(Error::InvalidTree(report));
        }
        let ctx = NodeSimContext {
            ontology: &self.ontology,
            library: &self.library,
            config: self.similarity,
        };
        Ok(rank_subtree_substitutes(subtree, &self.snapshot(), k, &ctx)?)
    }

    pub fn validate_tree(&self, tree: &BehaviorTree) -> ValidationReport {
        validate_tree(tree, &self.explainer_ids)
    }

    pub fn simulate<S: AsRef<str>>(&self, tree: &BehaviorTree, script: &[S]) -> Result<Trace> {
        let report = self.validate_tree(tree);
        if !report.is_valid() {
            return Err(Error::InvalidTree(report));
        }
        Ok(simulate(tree, script))
    }

    pub fn feedback(&self, responses: &[FeedbackResponse]) -> Result<Outcome> {
        Ok(aggregate_outcome(responses)?)
    }

    /// Validates, anonymises and durably stores a complete case.
    pub fn retain(&self, case: &Case, consent: bool) -> Result<String> {
        if !consent {
            return Err(RetentionError::ConsentWithheld.into());
        }
        if !case.is_complete() {
            return Err(RetentionError::IncompleteCase.into());
        }
        validate_case(case, &self.context())?;
        Ok(self.store.retain(case, consent, &self.context())?)
    }

    pub fn case(&self, id: &str) -> Result<Case> {
        self.snapshot().get(id).cloned().ok_or_else(|| Error::NotFound {
            kind: "case",
            id: id.to_owned(),
        })
    }

    pub fn coverage(&self, threshold: f64) -> Result<CoverageReport> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidRequest(format!("threshold {threshold} is outside [0, 1]")));
        }
        Ok(coverage_report(&self.snapshot(), threshold, &self.schema, &self.ontology)?)
    }

    pub fn stats(&self) -> CaseBaseStats {
        stats(&self.snapshot())
    }

    /// Ranks every case of the query's dataset type.
    pub fn rank_all(&self, description: &CaseDescription) -> Result<Vec<ScoredCase>> {
        let cb = self.snapshot();
        let mut scored = Vec::new();
        for c in cb.cases().filter(|c| c.description.dataset_type == description.dataset_type) {
            let (score, local) = score_description(description, &c.description, &self.schema, &self.ontology)?;
            scored.push(ScoredCase {
                case_id: c.id.clone(),
                score,
                local,
            });
        }
        rank(&mut scored);
        Ok(scored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn engine_in(dir: &Path) -> Engine {
        crate::retention::save_case_base(dir, &fixtures::case_base()).unwrap();
        Engine::new(
            fixtures::ontology(),
            fixtures::library(),
            CaseStore::open(dir, &CaseContext {
                ontology: &fixtures::ontology(),
                explainers: &fixtures::library().ids(),
            })
            .unwrap(),
        )
    }

    #[test]
    fn retain_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let engine = engine_in(tmp.path());
        let mut c = fixtures::retained_radiograph_case();
        c.anonymised = false;
        assert_eq!(engine.retain(&c, false), Err(Error::Retention(RetentionError::ConsentWithheld)));
        let id = engine.retain(&c, true).unwrap();
        assert!(engine.case(&id).unwrap().anonymised);
        let top = engine.query(&c.description, 1).unwrap();
        assert_eq!(top.ranked[0].case_id, id);
    }

    #[test]
    fn unknown_ids() {
        let tmp = tempfile::tempdir().unwrap();
        let engine = engine_in(tmp.path());
        assert_eq!(engine.case("nope").unwrap_err().code(), "NotFound");
        let d = fixtures::radiograph_description();
        assert_eq!(engine.substitute_explainer("nope", &d).unwrap_err().code(), "UnknownExplainer");
        assert_eq!(engine.coverage(1.5).unwrap_err().code(), "InvalidRequest");
    }
}
