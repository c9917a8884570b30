//! Explanation strategies as behaviour trees.
//!
//! A strategy is an ordered tree whose root is a `Priority` composite.
//! `UserQuestion` nodes guard the subtree that answers one kind of user
//! question and `Explainer` leaves name an explainer from the library.
//! `Variant` composites group alternative explanations the user can step
//! through when asking for another one.

use std::collections::{BTreeSet, VecDeque};

use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::ConceptId;

/// Script token that asks for the next alternative explanation.
pub const VARIANT_TOKEN: &str = "variant";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Priority,
    Sequence,
    Variant,
    UserQuestion,
    Explainer,
}

impl NodeKind {
    pub fn is_composite(self) -> bool {
        matches!(self, NodeKind::Priority | NodeKind::Sequence | NodeKind::Variant)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BtNode {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<ConceptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explainer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<BtNode>,
}

impl BtNode {
    fn composite(kind: NodeKind, children: Vec<BtNode>) -> Self {
        BtNode {
            kind,
            question: None,
            explainer: None,
            children,
        }
    }

    pub fn priority(children: Vec<BtNode>) -> Self {
        Self::composite(NodeKind::Priority, children)
    }

    pub fn sequence(children: Vec<BtNode>) -> Self {
        Self::composite(NodeKind::Sequence, children)
    }

    pub fn variant(children: Vec<BtNode>) -> Self {
        Self::composite(NodeKind::Variant, children)
    }

    pub fn question(question: impl Into<ConceptId>, child: BtNode) -> Self {
        BtNode {
            kind: NodeKind::UserQuestion,
            question: Some(question.into()),
            explainer: None,
            children: vec![child],
        }
    }

    pub fn explainer(id: impl Into<String>) -> Self {
        BtNode {
            kind: NodeKind::Explainer,
            question: None,
            explainer: Some(id.into()),
            children: Vec::new(),
        }
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(BtNode::size).sum::<usize>()
    }

    /// Pre-order iterator over this subtree.
    pub fn iter(&self) -> impl Iterator<Item = &BtNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Explainer ids of all leaves, depth-first and left to right.
    pub fn explainer_leaves(&self) -> Vec<&str> {
        self.iter()
            .filter_map(|n| match n.kind {
                NodeKind::Explainer => n.explainer.as_deref(),
                _ => None,
            })
            .collect()
    }
}

/// A strategy. Serialises as its root node object.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorTree {
    pub root: BtNode,
}

impl BehaviorTree {
    pub fn new(root: BtNode) -> Self {
        BehaviorTree { root }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The `UserQuestion` node answering `question` plus everything beneath it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSubtree {
    pub question: ConceptId,
    pub tree: BtNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_case: Option<String>,
}

impl QuestionSubtree {
    /// Wraps a `UserQuestion` node. Returns `None` for any other kind.
    pub fn from_node(tree: BtNode, origin_case: Option<String>) -> Option<Self> {
        match (&tree.kind, &tree.question) {
            (NodeKind::UserQuestion, Some(q)) => Some(QuestionSubtree {
                question: q.clone(),
                tree,
                origin_case,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum IssueKind {
    UnknownExplainer(String),
    EmptyComposite,
    MalformedQuestionNode,
    MalformedNode(String),
    RootNotPriority,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeIssue {
    /// Child-index path from the root, e.g. `/0/1`.
    pub path: String,
    #[serde(flatten)]
    pub issue: IssueKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<TreeIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("question `{0}` is already covered by the base strategy")]
    DuplicateQuestion(ConceptId),
    #[error("invalid question subtree for `{question}`: {reason}")]
    InvalidSubtree { question: ConceptId, reason: String },
}

fn check_node(
    node: &BtNode,
    path: &mut String,
    known: Option<&BTreeSet<String>>,
    issues: &mut Vec<TreeIssue>,
) {
    let mut push = |issue: IssueKind| {
        issues.push(TreeIssue {
            path: if path.is_empty() { "/".into() } else { path.clone() },
            issue,
        })
    };
    match node.kind {
        NodeKind::Priority | NodeKind::Sequence | NodeKind::Variant => {
            if node.children.is_empty() {
                push(IssueKind::EmptyComposite);
            }
            if node.question.is_some() || node.explainer.is_some() {
                push(IssueKind::MalformedNode(format!(
                    "{:?} carries a question or explainer",
                    node.kind
                )));
            }
        }
        NodeKind::UserQuestion => {
            if node.question.is_none() || node.children.len() != 1 || node.explainer.is_some() {
                push(IssueKind::MalformedQuestionNode);
            }
        }
        NodeKind::Explainer => match &node.explainer {
            None => push(IssueKind::MalformedNode("explainer leaf without id".into())),
            Some(_) if !node.children.is_empty() || node.question.is_some() => {
                push(IssueKind::MalformedNode("explainer leaf is not a leaf".into()))
            }
            Some(id) => {
                if let Some(known) = known {
                    if !known.contains(id) {
                        push(IssueKind::UnknownExplainer(id.clone()));
                    }
                }
            }
        },
    }
    for (i, child) in node.children.iter().enumerate() {
        let len = path.len();
        path.push_str(&format!("/{i}"));
        check_node(child, path, known, issues);
        path.truncate(len);
    }
}

/// Checks every node invariant and that each explainer id is in `known`.
pub fn validate_tree(bt: &BehaviorTree, known: &BTreeSet<String>) -> ValidationReport {
    let mut issues = Vec::new();
    if bt.root.kind != NodeKind::Priority {
        issues.push(TreeIssue {
            path: "/".into(),
            issue: IssueKind::RootNotPriority,
        });
    }
    check_node(&bt.root, &mut String::new(), Some(known), &mut issues);
    ValidationReport { issues }
}

/// Structural checks only; explainer ids are not resolved.
pub fn validate_structure(node: &BtNode) -> ValidationReport {
    let mut issues = Vec::new();
    check_node(node, &mut String::new(), None, &mut issues);
    ValidationReport { issues }
}

pub fn covered_questions(bt: &BehaviorTree) -> BTreeSet<ConceptId> {
    node_questions(&bt.root)
}

pub(crate) fn node_questions(node: &BtNode) -> BTreeSet<ConceptId> {
    node.iter()
        .filter(|n| n.kind == NodeKind::UserQuestion)
        .filter_map(|n| n.question.clone())
        .collect()
}

fn shallowest_question<'a>(root: &'a BtNode, question: &ConceptId) -> Option<&'a BtNode> {
    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if node.kind == NodeKind::UserQuestion && node.question.as_ref() == Some(question) {
            return Some(node);
        }
        queue.extend(node.children.iter());
    }
    None
}

/// Shallowest `UserQuestion` node for `question`; leftmost wins ties.
pub fn extract_subtree(bt: &BehaviorTree, question: &ConceptId) -> Option<QuestionSubtree> {
    shallowest_question(&bt.root, question).map(|node| QuestionSubtree {
        question: question.clone(),
        tree: node.clone(),
        origin_case: None,
    })
}

/// Every `UserQuestion` subtree in pre-order, including nested ones.
pub fn question_subtrees(bt: &BehaviorTree) -> Vec<QuestionSubtree> {
    bt.root
        .iter()
        .filter_map(|n| QuestionSubtree::from_node(n.clone(), None))
        .collect()
}

/// Appends `additions` under the root `Priority` node, in order.
pub fn compose(
    base: &BehaviorTree,
    additions: &[QuestionSubtree],
) -> Result<BehaviorTree, StrategyError> {
    let mut covered = covered_questions(base);
    let mut root = base.root.clone();
    for add in additions {
        let report = validate_structure(&add.tree);
        if add.tree.kind != NodeKind::UserQuestion
            || add.tree.question.as_ref() != Some(&add.question)
        {
            return Err(StrategyError::InvalidSubtree {
                question: add.question.clone(),
                reason: "subtree root is not the matching user question node".into(),
            });
        }
        if let Some(issue) = report.issues.first() {
            return Err(StrategyError::InvalidSubtree {
                question: add.question.clone(),
                reason: format!("{:?} at {}", issue.issue, issue.path),
            });
        }
        if !covered.insert(add.question.clone()) {
            return Err(StrategyError::DuplicateQuestion(add.question.clone()));
        }
        covered.extend(node_questions(&add.tree));
        root.children.push(add.tree.clone());
    }
    Ok(BehaviorTree { root })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub token: String,
    /// `None` records a no-op.
    pub explainer: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    /// The explainers emitted, skipping no-ops.
    pub fn explainers(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| s.explainer.as_deref())
            .collect()
    }
}

fn nearest_variant<'a>(node: &'a BtNode, leaf: &BtNode) -> Option<&'a BtNode> {
    // Depth-first search recording the innermost Variant on the path to `leaf`.
    fn walk<'a>(node: &'a BtNode, leaf: &BtNode, best: Option<&'a BtNode>) -> Option<Option<&'a BtNode>> {
        let best = if node.kind == NodeKind::Variant { Some(node) } else { best };
        if std::ptr::eq(node, leaf) {
            return Some(best);
        }
        node.children.iter().find_map(|c| walk(c, leaf, best))
    }
    walk(node, leaf, None).flatten()
}

struct Activation<'a> {
    variant_leaves: Vec<&'a BtNode>,
    cursor: Option<usize>,
}

/// Deterministic walk standing in for an interactive session.
///
/// A question token activates the matching subtree and emits its first
/// explainer leaf. `variant` emits the next leaf of the active subtree's
/// `Variant` composite. Anything else is a no-op.
pub fn simulate<S: AsRef<str>>(bt: &BehaviorTree, script: &[S]) -> Trace {
    let mut steps = Vec::with_capacity(script.len());
    let mut active: Option<Activation<'_>> = None;
    for token in script {
        let token = token.as_ref();
        let emitted = if token == VARIANT_TOKEN {
            active.as_mut().and_then(|act| {
                let next = act.cursor.map_or(0, |c| c + 1);
                let leaf = act.variant_leaves.get(next)?;
                act.cursor = Some(next);
                leaf.explainer.clone()
            })
        } else {
            let question = ConceptId::from(token);
            shallowest_question(&bt.root, &question).and_then(|subtree| {
                let first = subtree.iter().find(|n| n.kind == NodeKind::Explainer)?;
                let owning = nearest_variant(subtree, first);
                let variant = owning.or_else(|| subtree.iter().find(|n| n.kind == NodeKind::Variant));
                let variant_leaves: Vec<&BtNode> = variant
                    .map(|v| v.iter().filter(|n| n.kind == NodeKind::Explainer).collect())
                    .unwrap_or_default();
                let cursor = owning.and_then(|_| {
                    variant_leaves.iter().position(|l| std::ptr::eq(*l, first))
                });
                active = Some(Activation {
                    variant_leaves,
                    cursor,
                });
                first.explainer.clone()
            })
        };
        steps.push(TraceStep {
            token: token.to_owned(),
            explainer: emitted,
        });
    }
    Trace { steps }
}

/// Node payload carried into the graph form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub question: Option<ConceptId>,
    pub explainer: Option<String>,
}

impl From<&BtNode> for GraphNode {
    fn from(n: &BtNode) -> Self {
        GraphNode {
            kind: n.kind,
            question: n.question.clone(),
            explainer: n.explainer.clone(),
        }
    }
}

/// Directed graph with one node per tree node and parent→child edges
/// labelled by child position. Node 0 is the root; nodes are numbered in
/// pre-order.
#[derive(Clone, Debug)]
pub struct StrategyGraph {
    pub graph: DiGraph<GraphNode, usize>,
}

impl StrategyGraph {
    pub fn from_node(root: &BtNode) -> Self {
        fn add(graph: &mut DiGraph<GraphNode, usize>, node: &BtNode) -> NodeIndex {
            let index = graph.add_node(GraphNode::from(node));
            for (ordinal, child) in node.children.iter().enumerate() {
                let child_index = add(graph, child);
                graph.add_edge(index, child_index, ordinal);
            }
            index
        }
        let mut graph = DiGraph::with_capacity(root.size(), root.size().saturating_sub(1));
        add(&mut graph, root);
        StrategyGraph { graph }
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn node(&self, i: usize) -> &GraphNode {
        &self.graph[NodeIndex::new(i)]
    }

    /// `(parent, child)` index pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.graph
            .raw_edges()
            .iter()
            .map(|e| (e.source().index(), e.target().index()))
    }
}

pub fn to_graph(bt: &BehaviorTree) -> StrategyGraph {
    StrategyGraph::from_node(&bt.root)
}
