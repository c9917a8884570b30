//! Generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use isee_core::case::{
    AccessRequirement, Case, CaseDescription, DatasetType, Dimension, Intent, ModelAccess, ModelFramework,
    Outcome, Persona, StrategySolution,
};
use isee_core::explainer::{ExplainerLibrary, ExplainerSpec};
use isee_core::fixtures;
use isee_core::strategy::{BehaviorTree, BtNode};
use isee_core::taxonomy::{trees, ConceptId, Ontology, TreeDocument};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

pub static ONTOLOGY: LazyLock<Ontology> = LazyLock::new(fixtures::ontology);
pub static LIBRARY: LazyLock<ExplainerLibrary> = LazyLock::new(fixtures::library);

pub fn tree_doc(name: &str) -> &'static TreeDocument {
    ONTOLOGY.document().trees.iter().find(|t| t.name == name).unwrap()
}

pub fn concepts(name: &str) -> Vec<ConceptId> {
    let doc = tree_doc(name);
    let mut out = vec![doc.root.clone()];
    out.extend(doc.edges.iter().map(|(_, c)| c.clone()));
    out
}

pub fn leaves(name: &str) -> Vec<ConceptId> {
    let doc = tree_doc(name);
    let parents: BTreeSet<&ConceptId> = doc.edges.iter().map(|(p, _)| p).collect();
    concepts(name).into_iter().filter(|c| !parents.contains(c)).collect()
}

/// Wu & Palmer computed straight from a tree document's parent edges.
pub struct WpOracle {
    parent: HashMap<ConceptId, ConceptId>,
}

impl WpOracle {
    pub fn new(name: &str) -> Self {
        WpOracle {
            parent: tree_doc(name).edges.iter().map(|(p, c)| (c.clone(), p.clone())).collect(),
        }
    }

    pub fn path(&self, c: &ConceptId) -> Vec<ConceptId> {
        let mut out = vec![c.clone()];
        while let Some(p) = self.parent.get(out.last().unwrap()) {
            out.push(p.clone());
        }
        out
    }

    pub fn wp(&self, a: &ConceptId, b: &ConceptId) -> f64 {
        let pa = self.path(a);
        let pb = self.path(b);
        let lca = pb.iter().find(|x| pa.contains(x)).unwrap();
        let depth_lca = self.path(lca).len();
        2.0 * depth_lca as f64 / (pa.len() + pb.len()) as f64
    }
}

pub fn question_pool() -> Vec<ConceptId> {
    leaves(trees::USER_QUESTION)
}

fn intent_strategy() -> impl Strategy<Value = Intent> {
    (select(leaves(trees::INTENT)), subsequence(question_pool(), 1..=4)).prop_map(|(label, qs)| Intent {
        label,
        user_questions: qs.into_iter().collect(),
    })
}

fn persona_strategy() -> impl Strategy<Value = Persona> {
    ("[A-Z][a-z]{2,8}( [A-Z][a-z]{2,8})?", prop::collection::vec(intent_strategy(), 1..=2))
        .prop_map(|(name, intents)| Persona { name, intents })
}

pub fn description_strategy() -> impl Strategy<Value = CaseDescription> {
    (
        (
            select(concepts(trees::AI_TASK)),
            select(concepts(trees::AI_METHOD)),
            select(DatasetType::ALL.to_vec()),
            select(ModelFramework::ALL.to_vec()),
            select(ModelAccess::ALL.to_vec()),
            any::<bool>(),
        ),
        subsequence(concepts(trees::TECHNICAL_FACILITY), 0..=3),
        prop::collection::vec(persona_strategy(), 1..=2),
        prop::option::of("[a-z ]{1,24}"),
        prop::option::of("models/[a-z0-9]{1,12}\\.bin"),
    )
        .prop_map(
            |((ai_task, ai_method, dataset_type, model_framework, model_access, has_training_data), fac, personas, notes, model_descriptor)| {
                CaseDescription {
                    ai_task,
                    ai_method,
                    dataset_type,
                    model_framework,
                    model_access,
                    has_training_data,
                    technical_facilities: fac.into_iter().collect(),
                    personas,
                    notes,
                    model_descriptor,
                }
            },
        )
}

pub fn explainer_ids() -> Vec<String> {
    LIBRARY.specs().iter().map(|s| s.id.clone()).collect()
}

/// Valid trees whose leaves are library explainers.
pub fn bt_node_strategy(max_depth: u32) -> impl Strategy<Value = BtNode> {
    let leaf = select(explainer_ids()).prop_map(BtNode::explainer);
    leaf.prop_recursive(max_depth, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..=3).prop_map(BtNode::priority),
            prop::collection::vec(inner.clone(), 1..=3).prop_map(BtNode::sequence),
            prop::collection::vec(inner.clone(), 1..=3).prop_map(BtNode::variant),
            (select(question_pool()), inner).prop_map(|(q, c)| BtNode::question(q, c)),
        ]
    })
}

/// A valid strategy: root priority over question nodes with distinct questions.
pub fn strategy_tree_strategy() -> impl Strategy<Value = BehaviorTree> {
    (subsequence(question_pool(), 1..=4), prop::collection::vec(bt_node_strategy(2), 4)).prop_map(|(qs, bodies)| {
        BehaviorTree::new(BtNode::priority(
            qs.into_iter().zip(bodies).map(|(q, b)| BtNode::question(q, b)).collect(),
        ))
    })
}

pub fn outcome_strategy() -> impl Strategy<Value = Outcome> {
    (prop::collection::vec(0u8..=16, 4), 1u32..20).prop_map(|(qs, n)| Outcome {
        dimension_means: Dimension::ALL.iter().zip(qs).map(|(d, q)| (*d, f64::from(q) / 4.0)).collect(),
        respondent_count: n,
    })
}

pub fn complete_case_strategy() -> impl Strategy<Value = Case> {
    (description_strategy(), strategy_tree_strategy(), outcome_strategy()).prop_map(|(d, tree, outcome)| {
        let intent = d.personas[0].intents[0].label.clone();
        Case {
            id: String::new(),
            description: d,
            solution: Some(StrategySolution::single(intent, tree)),
            outcome: Some(outcome),
            anonymised: false,
        }
    })
}

pub fn explainer_strategy() -> impl Strategy<Value = ExplainerSpec> {
    (
        (
            "[A-Z][A-Za-z]{2,10}",
            subsequence(concepts(trees::AI_TASK), 1..=3),
            subsequence(concepts(trees::AI_METHOD), 1..=3),
            select(DatasetType::ALL.to_vec()),
        ),
        (
            subsequence(concepts(trees::EXPLANATION_TECHNIQUE), 1..=2),
            subsequence(concepts(trees::EXPLANATION_TYPE), 1..=2),
            select(concepts(trees::PRESENTATION)),
        ),
        (
            subsequence(ModelFramework::ALL.to_vec(), 1..=3),
            select(AccessRequirement::ALL.to_vec()),
            any::<bool>(),
        ),
    )
        .prop_map(|((id, tasks, methods, dataset_type), (tech, ty, presentation), (fw, access, needs))| ExplainerSpec {
            id,
            label: None,
            applicable_ai_tasks: tasks.into_iter().collect(),
            applicable_ai_methods: methods.into_iter().collect(),
            dataset_type,
            explanation_technique: tech.into_iter().collect(),
            explanation_type: ty.into_iter().collect(),
            presentation,
            implementation_frameworks: fw.into_iter().collect(),
            model_access_needed: access,
            needs_training_data: needs,
        })
}

/// Mean of every score per dimension, computed row by row.
pub fn flat_means(rows: &[(Dimension, i64)]) -> BTreeMap<Dimension, f64> {
    let mut out = BTreeMap::new();
    for d in Dimension::ALL {
        let col: Vec<i64> = rows.iter().filter(|(x, _)| x == d).map(|(_, s)| *s).collect();
        if !col.is_empty() {
            out.insert(*d, col.iter().sum::<i64>() as f64 / col.len() as f64);
        }
    }
    out
}
