//! Shipped reference data and the worked-example fixtures built on it.
//!
//! Everything here is embedded at compile time from the workspace `data/`
//! directory, so tests and doc examples need no file system access.

use crate::case::{from_json_str, Case, CaseContext, CaseDescription};
use crate::explainer::ExplainerLibrary;
use crate::retention::CaseBase;
use crate::retrieval::{retrieve, FeatureSchema, RetrievalResult};
use crate::strategy::{BehaviorTree, BtNode};
use crate::taxonomy::{Ontology, Taxonomy, TreeDocument};

pub const TAXONOMY_JSON: &str = include_str!("../../../data/taxonomy/isee.json");
pub const LIBRARY_JSON: &str = include_str!("../../../data/library/explainers.json");
pub const RADIOGRAPH_QUERY_JSON: &str = include_str!("../../../data/examples/radiograph-query.json");
pub const RADIOGRAPH_RETAINED_JSON: &str = include_str!("../../../data/examples/radiograph-retained.json");
pub const ADAPTATION_QUERY_JSON: &str = include_str!("../../../data/examples/adaptation-query.json");

/// Seed case files as `(id, json)` pairs.
pub const SEED_CASES: &[(&str, &str)] = &[
    ("card-fraud-alerts", include_str!("../../../data/casebase/cases/card-fraud-alerts.json")),
    ("customer-churn", include_str!("../../../data/casebase/cases/customer-churn.json")),
    ("energy-load-forecast", include_str!("../../../data/casebase/cases/energy-load-forecast.json")),
    ("fracture-nn1", include_str!("../../../data/casebase/cases/fracture-nn1.json")),
    ("fracture-nn2", include_str!("../../../data/casebase/cases/fracture-nn2.json")),
    ("fracture-nn3", include_str!("../../../data/casebase/cases/fracture-nn3.json")),
    ("house-price-valuation", include_str!("../../../data/casebase/cases/house-price-valuation.json")),
    ("loan-approval", include_str!("../../../data/casebase/cases/loan-approval.json")),
    ("review-sentiment", include_str!("../../../data/casebase/cases/review-sentiment.json")),
    ("satellite-land-use", include_str!("../../../data/casebase/cases/satellite-land-use.json")),
    ("skin-lesion-triage", include_str!("../../../data/casebase/cases/skin-lesion-triage.json")),
    ("toxic-comment-moderation", include_str!("../../../data/casebase/cases/toxic-comment-moderation.json")),
    ("turbine-maintenance", include_str!("../../../data/casebase/cases/turbine-maintenance.json")),
    ("weld-defect-inspection", include_str!("../../../data/casebase/cases/weld-defect-inspection.json")),
];

pub fn ontology() -> Ontology {
    Ontology::from_json(TAXONOMY_JSON).expect("shipped taxonomy is valid")
}

pub fn library() -> ExplainerLibrary {
    ExplainerLibrary::from_json(LIBRARY_JSON).expect("shipped library is valid")
}

/// `AITask` with `Classification` and `Regression` beneath it and two
/// classification leaves.
pub fn five_node_taxonomy() -> Taxonomy {
    let doc = TreeDocument {
        name: "AITask".into(),
        root: "AITask".into(),
        edges: vec![
            ("AITask".into(), "Classification".into()),
            ("AITask".into(), "Regression".into()),
            ("Classification".into(), "ImageClassification".into()),
            ("Classification".into(), "BinaryClassification".into()),
        ],
        labels: Default::default(),
    };
    Taxonomy::from_document(&doc).expect("fixture taxonomy is valid")
}

/// A why question answered by a saliency map or similar examples, and a
/// what question answered by attributions.
pub fn why_what_tree() -> BehaviorTree {
    BehaviorTree::new(BtNode::priority(vec![
        BtNode::question(
            "why",
            BtNode::variant(vec![
                BtNode::explainer("GradCAM"),
                BtNode::explainer("NearestNeighbours"),
            ]),
        ),
        BtNode::question("what", BtNode::explainer("IntegratedGradients")),
    ]))
}

/// Binary fracture classifier on radiographs, one clinician persona.
pub fn radiograph_description() -> CaseDescription {
    from_json_str::<Case>(RADIOGRAPH_QUERY_JSON)
        .expect("fixture parses")
        .description
}

/// The radiograph use case after feedback and retention.
pub fn retained_radiograph_case() -> Case {
    from_json_str(RADIOGRAPH_RETAINED_JSON).expect("fixture parses")
}

/// The shipped seed case base, validated against the shipped data.
pub fn case_base() -> CaseBase {
    let (onto, lib) = (ontology(), library());
    let ids = lib.ids();
    let ctx = CaseContext {
        ontology: &onto,
        explainers: &ids,
    };
    let cases = SEED_CASES.iter().map(|(id, text)| {
        let mut c = crate::case::parse_case(text, &ctx).unwrap_or_else(|e| panic!("seed case {id}: {e}"));
        c.id = (*id).to_owned();
        c
    });
    CaseBase::new(cases).expect("seed ids are unique")
}

/// Query asking why, what and how under transparency, with the seed base.
///
/// Its three nearest neighbours are `fracture-nn1` (covers how), `fracture-nn2`
/// (covers why) and `fracture-nn3` (covers what), in that order.
pub fn adaptation_scenario() -> (Case, CaseBase) {
    let query: Case = from_json_str(ADAPTATION_QUERY_JSON).expect("fixture parses");
    (query, case_base())
}

pub fn adaptation_topk(cb: &CaseBase) -> RetrievalResult {
    let query: Case = from_json_str(ADAPTATION_QUERY_JSON).expect("fixture parses");
    retrieve(&query, cb, 3, &FeatureSchema::standard(), &ontology()).expect("image cases exist")
}
