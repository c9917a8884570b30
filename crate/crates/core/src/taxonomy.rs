//! Rooted concept taxonomies and Wu & Palmer similarity.
//!
//! A taxonomy document carries several named trees. Concept ids are
//! unique across the whole document, so a bare id resolves to exactly one
//! tree. Depth is counted from 1 at the root, which keeps
//!
//! ```text
//! wp(a, b) = 2 * depth(lca(a, b)) / (depth(a) + depth(b))
//! ```
//!
//! strictly positive for any pair in the same tree.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tree names used by the shipped taxonomy and the feature schemas.
pub mod trees {
    pub const AI_TASK: &str = "AITask";
    pub const AI_METHOD: &str = "AIMethod";
    pub const PRESENTATION: &str = "Presentation";
    pub const USER_QUESTION: &str = "UserQuestionIntent";
    pub const INTENT: &str = "Intent";
    pub const TECHNICAL_FACILITY: &str = "TechnicalFacility";
    pub const EXPLANATION_TECHNIQUE: &str = "ExplanationTechnique";
    pub const EXPLANATION_TYPE: &str = "ExplanationType";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("concept `{0}` is declared more than once")]
    DuplicateConcept(String),
    #[error("tree `{tree}` has more than one root: {roots:?}")]
    MultipleRoots { tree: String, roots: Vec<String> },
    #[error("tree `{tree}` contains a cycle through `{concept}`")]
    CycleDetected { tree: String, concept: String },
    #[error("tree `{tree}` references undeclared parent `{concept}`")]
    DanglingParent { tree: String, concept: String },
    #[error("concept id must be non-empty (tree `{0}`)")]
    EmptyConcept(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("concept `{concept}` is not in tree `{tree}`")]
    WrongTree { concept: String, tree: String },
    #[error("unknown taxonomy tree `{0}`")]
    UnknownTree(String),
    #[error("malformed taxonomy document: {0}")]
    Parse(String),
}

/// Opaque concept key, unique within its document.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Self {
        ConceptId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId(s.to_owned())
    }
}

impl From<String> for ConceptId {
    fn from(s: String) -> Self {
        ConceptId(s)
    }
}

impl AsRef<str> for ConceptId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One tree as it appears in the JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub name: String,
    pub root: ConceptId,
    #[serde(default)]
    pub edges: Vec<(ConceptId, ConceptId)>,
    #[serde(default)]
    pub labels: BTreeMap<ConceptId, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyDocument {
    pub trees: Vec<TreeDocument>,
}

/// A validated rooted tree of concepts.
#[derive(Clone, Debug)]
pub struct Taxonomy {
    name: String,
    root: ConceptId,
    parent_of: BTreeMap<ConceptId, ConceptId>,
    children_of: BTreeMap<ConceptId, Vec<ConceptId>>,
    depth_of: BTreeMap<ConceptId, usize>,
    labels: BTreeMap<ConceptId, String>,
}

impl Taxonomy {
    /// Validates a single tree document.
    pub fn from_document(doc: &TreeDocument) -> Result<Self, TaxonomyError> {
        let tree = doc.name.clone();
        if doc.root.as_str().is_empty() {
            return Err(TaxonomyError::EmptyConcept(tree));
        }

        let mut parent_of: BTreeMap<ConceptId, ConceptId> = BTreeMap::new();
        let mut children_of: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
        for (parent, child) in &doc.edges {
            if parent.as_str().is_empty() || child.as_str().is_empty() {
                return Err(TaxonomyError::EmptyConcept(tree));
            }
            if parent == child {
                return Err(TaxonomyError::CycleDetected {
                    tree,
                    concept: child.to_string(),
                });
            }
            if parent_of.insert(child.clone(), parent.clone()).is_some() {
                return Err(TaxonomyError::DuplicateConcept(child.to_string()));
            }
            children_of
                .entry(parent.clone())
                .or_default()
                .push(child.clone());
        }

        // Parents that never appear as a child and are not the root.
        let mut orphans = BTreeSet::new();
        for parent in children_of.keys() {
            if parent != &doc.root && !parent_of.contains_key(parent) {
                orphans.insert(parent.clone());
            }
        }
        if let Some(first) = orphans.iter().next() {
            if orphans.iter().all(|c| doc.labels.contains_key(c)) {
                let mut roots = vec![doc.root.to_string()];
                roots.extend(orphans.iter().map(ToString::to_string));
                return Err(TaxonomyError::MultipleRoots { tree, roots });
            }
            let undeclared = orphans
                .iter()
                .find(|c| !doc.labels.contains_key(*c))
                .unwrap_or(first);
            return Err(TaxonomyError::DanglingParent {
                tree,
                concept: undeclared.to_string(),
            });
        }

        // Every parent chain must terminate at the root.
        for start in parent_of.keys() {
            let mut seen = BTreeSet::new();
            let mut cursor = start;
            while let Some(parent) = parent_of.get(cursor) {
                if !seen.insert(cursor) {
                    return Err(TaxonomyError::CycleDetected {
                        tree,
                        concept: cursor.to_string(),
                    });
                }
                cursor = parent;
            }
            if cursor != &doc.root {
                return Err(TaxonomyError::CycleDetected {
                    tree,
                    concept: start.to_string(),
                });
            }
        }

        let mut depth_of = BTreeMap::new();
        let mut queue = VecDeque::from([(doc.root.clone(), 1usize)]);
        while let Some((concept, depth)) = queue.pop_front() {
            if let Some(children) = children_of.get(&concept) {
                for child in children {
                    queue.push_back((child.clone(), depth + 1));
                }
            }
            depth_of.insert(concept, depth);
        }

        if let Some(stray) = doc.labels.keys().find(|c| !depth_of.contains_key(*c)) {
            return Err(TaxonomyError::UnknownConcept(stray.to_string()));
        }

        Ok(Taxonomy {
            name: doc.name.clone(),
            root: doc.root.clone(),
            parent_of,
            children_of,
            depth_of,
            labels: doc.labels.clone(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &ConceptId {
        &self.root
    }

    pub fn contains(&self, concept: &ConceptId) -> bool {
        self.depth_of.contains_key(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.depth_of.keys()
    }

    pub fn len(&self) -> usize {
        self.depth_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth_of.is_empty()
    }

    pub fn parent(&self, concept: &ConceptId) -> Option<&ConceptId> {
        self.parent_of.get(concept)
    }

    pub fn children(&self, concept: &ConceptId) -> &[ConceptId] {
        self.children_of
            .get(concept)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn label(&self, concept: &ConceptId) -> Option<&str> {
        self.labels.get(concept).map(String::as_str)
    }

    pub fn depth(&self, concept: &ConceptId) -> Result<usize, TaxonomyError> {
        self.depth_of
            .get(concept)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownConcept(concept.to_string()))
    }

    /// Deepest concept that is an ancestor-or-self of both `a` and `b`.
    pub fn lca(&self, a: &ConceptId, b: &ConceptId) -> Result<ConceptId, TaxonomyError> {
        let (mut da, mut db) = (self.depth(a)?, self.depth(b)?);
        let (mut a, mut b) = (a, b);
        while da > db {
            a = &self.parent_of[a];
            da -= 1;
        }
        while db > da {
            b = &self.parent_of[b];
            db -= 1;
        }
        while a != b {
            a = &self.parent_of[a];
            b = &self.parent_of[b];
        }
        Ok(a.clone())
    }

    pub fn wu_palmer(&self, a: &ConceptId, b: &ConceptId) -> Result<f64, TaxonomyError> {
        let lca = self.lca(a, b)?;
        let shared = self.depth_of[&lca] as f64;
        Ok(2.0 * shared / (self.depth(a)? + self.depth(b)?) as f64)
    }
}

/// The full set of trees loaded from one document.
#[derive(Clone, Debug)]
pub struct Ontology {
    document: TaxonomyDocument,
    trees: Vec<Taxonomy>,
    tree_of: BTreeMap<ConceptId, usize>,
}

impl Ontology {
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDocument =
            serde_json::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(document: TaxonomyDocument) -> Result<Self, TaxonomyError> {
        let mut trees = Vec::with_capacity(document.trees.len());
        let mut tree_of = BTreeMap::new();
        let mut names = BTreeSet::new();
        for (index, tree_doc) in document.trees.iter().enumerate() {
            if !names.insert(tree_doc.name.clone()) {
                return Err(TaxonomyError::DuplicateConcept(tree_doc.name.clone()));
            }
            let tree = Taxonomy::from_document(tree_doc)?;
            for concept in tree.concepts() {
                if tree_of.insert(concept.clone(), index).is_some() {
                    return Err(TaxonomyError::DuplicateConcept(concept.to_string()));
                }
            }
            trees.push(tree);
        }
        Ok(Ontology {
            document,
            trees,
            tree_of,
        })
    }

    pub fn document(&self) -> &TaxonomyDocument {
        &self.document
    }

    pub fn trees(&self) -> &[Taxonomy] {
        &self.trees
    }

    pub fn tree(&self, name: &str) -> Result<&Taxonomy, TaxonomyError> {
        self.trees
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| TaxonomyError::UnknownTree(name.to_owned()))
    }

    /// The tree a concept belongs to, if any.
    pub fn tree_of(&self, concept: &ConceptId) -> Option<&Taxonomy> {
        self.tree_of.get(concept).map(|&i| &self.trees[i])
    }

    /// Checks that `concept` lives in the tree called `tree`.
    pub fn resolve(&self, tree: &str, concept: &ConceptId) -> Result<(), TaxonomyError> {
        match self.tree_of(concept) {
            None => Err(TaxonomyError::UnknownConcept(concept.to_string())),
            Some(t) if t.name == tree => Ok(()),
            Some(_) => Err(TaxonomyError::WrongTree {
                concept: concept.to_string(),
                tree: tree.to_owned(),
            }),
        }
    }

    pub fn wu_palmer(
        &self,
        tree: &str,
        a: &ConceptId,
        b: &ConceptId,
    ) -> Result<f64, TaxonomyError> {
        self.resolve(tree, a)?;
        self.resolve(tree, b)?;
        self.tree(tree)?.wu_palmer(a, b)
    }
}
