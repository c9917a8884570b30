//! Tools for collaborative revision of a strategy.
//!
//! * applicability checks between a query description and an explainer,
//! * explainer substitution ranked by explainer similarity,
//! * subtree substitution ranked by graph edit distance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{AccessRequirement, CaseDescription};
use crate::explainer::{ExplainerLibrary, ExplainerSpec};
use crate::retention::CaseBase;
use crate::retrieval::Metric;
use crate::strategy::{question_subtrees, GraphNode, NodeKind, QuestionSubtree, StrategyGraph};
use crate::taxonomy::{trees, ConceptId, Ontology, TaxonomyError};

/// Largest graph, in nodes, the exact edit distance accepts.
pub const GED_NODE_CAP: usize = 25;

const EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RevisionError {
    #[error("unknown explainer `{0}`")]
    UnknownExplainer(String),
    #[error("graph with {nodes} nodes exceeds the exact edit distance cap of {cap}")]
    SizeCapExceeded { nodes: usize, cap: usize },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WarningKind {
    FrameworkMismatch,
    ModelAccessMismatch,
    DataRequirementMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicabilityWarning {
    pub kind: WarningKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicabilityReport {
    pub explainer_id: String,
    pub warnings: Vec<ApplicabilityWarning>,
}

impl ApplicabilityReport {
    pub fn is_applicable(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn applicability_check(d: &CaseDescription, e: &ExplainerSpec) -> ApplicabilityReport {
    let mut warnings = Vec::new();
    if !e.implementation_frameworks.contains(&d.model_framework) {
        let supported: Vec<&str> = e.implementation_frameworks.iter().map(|f| f.token()).collect();
        warnings.push(ApplicabilityWarning {
            kind: WarningKind::FrameworkMismatch,
            detail: format!(
                "{} supports {}; the AI model uses {}",
                e.id,
                supported.join(", "),
                d.model_framework
            ),
        });
    }
    let access_ok = match e.model_access_needed {
        AccessRequirement::Either => true,
        need => need.token() == d.model_access.token(),
    };
    if !access_ok {
        warnings.push(ApplicabilityWarning {
            kind: WarningKind::ModelAccessMismatch,
            detail: format!(
                "{} needs {} access; the design user provides {}",
                e.id, e.model_access_needed, d.model_access
            ),
        });
    }
    if e.needs_training_data && !d.has_training_data {
        warnings.push(ApplicabilityWarning {
            kind: WarningKind::DataRequirementMismatch,
            detail: format!("{} needs labelled training data; none is provided", e.id),
        });
    }
    ApplicabilityReport {
        explainer_id: e.id.clone(),
        warnings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerFeature {
    AiTasks,
    AiMethods,
    DatasetType,
    ExplanationTechnique,
    ExplanationType,
    Presentation,
    ImplementationFrameworks,
    ModelAccessNeeded,
    NeedsTrainingData,
}

impl ExplainerFeature {
    pub const ALL: [ExplainerFeature; 9] = [
        ExplainerFeature::AiTasks,
        ExplainerFeature::AiMethods,
        ExplainerFeature::DatasetType,
        ExplainerFeature::ExplanationTechnique,
        ExplainerFeature::ExplanationType,
        ExplainerFeature::Presentation,
        ExplainerFeature::ImplementationFrameworks,
        ExplainerFeature::ModelAccessNeeded,
        ExplainerFeature::NeedsTrainingData,
    ];

    pub fn metric(self) -> Metric {
        use ExplainerFeature::*;
        match self {
            AiTasks | AiMethods | Presentation => Metric::WuPalmer,
            ImplementationFrameworks | ExplanationTechnique | ExplanationType => {
                Metric::QueryIntersection
            }
            DatasetType | ModelAccessNeeded | NeedsTrainingData => Metric::ExactMatch,
        }
    }
}

/// How set-valued overlap features are compared between two explainers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetOverlap {
    /// `|a ∩ b| / |a ∪ b|`.
    #[default]
    Jaccard,
    /// `|a ∩ b| / |a|` with `a` the explainer being replaced.
    QueryNormalised,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainerSimilarityConfig {
    pub set_overlap: SetOverlap,
}

fn overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>, mode: SetOverlap) -> f64 {
    let inter = a.intersection(b).count() as f64;
    match mode {
        SetOverlap::Jaccard => {
            let union = a.union(b).count();
            if union == 0 {
                1.0
            } else {
                inter / union as f64
            }
        }
        SetOverlap::QueryNormalised => {
            if a.is_empty() {
                1.0
            } else {
                inter / a.len() as f64
            }
        }
    }
}

/// Symmetric best-match average of Wu & Palmer scores between two sets.
fn best_match_wp(
    ontology: &Ontology,
    tree: &str,
    a: &BTreeSet<ConceptId>,
    b: &BTreeSet<ConceptId>,
) -> Result<f64, TaxonomyError> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let one_way = |from: &BTreeSet<ConceptId>, to: &BTreeSet<ConceptId>| -> Result<f64, TaxonomyError> {
        let mut total = 0.0;
        for x in from {
            let mut best: f64 = 0.0;
            for y in to {
                best = best.max(ontology.wu_palmer(tree, x, y)?);
            }
            total += best;
        }
        Ok(total / from.len() as f64)
    };
    Ok((one_way(a, b)? + one_way(b, a)?) / 2.0)
}

/// Per-feature local scores between two explainers.
pub fn explainer_local_scores(
    a: &ExplainerSpec,
    b: &ExplainerSpec,
    ontology: &Ontology,
    config: &ExplainerSimilarityConfig,
) -> Result<Vec<(ExplainerFeature, f64)>, RevisionError> {
    let em = |same: bool| if same { 1.0 } else { 0.0 };
    let mode = config.set_overlap;
    let mut out = Vec::with_capacity(ExplainerFeature::ALL.len());
    for feature in ExplainerFeature::ALL {
        let score = match feature {
            ExplainerFeature::AiTasks => {
                best_match_wp(ontology, trees::AI_TASK, &a.applicable_ai_tasks, &b.applicable_ai_tasks)?
            }
            ExplainerFeature::AiMethods => best_match_wp(
                ontology,
                trees::AI_METHOD,
                &a.applicable_ai_methods,
                &b.applicable_ai_methods,
            )?,
            ExplainerFeature::Presentation => {
                ontology.wu_palmer(trees::PRESENTATION, &a.presentation, &b.presentation)?
            }
            ExplainerFeature::ImplementationFrameworks => {
                overlap(&a.implementation_frameworks, &b.implementation_frameworks, mode)
            }
            ExplainerFeature::ExplanationTechnique => {
                overlap(&a.explanation_technique, &b.explanation_technique, mode)
            }
            ExplainerFeature::ExplanationType => overlap(&a.explanation_type, &b.explanation_type, mode),
            ExplainerFeature::DatasetType => em(a.dataset_type == b.dataset_type),
            ExplainerFeature::ModelAccessNeeded => em(a.model_access_needed == b.model_access_needed),
            ExplainerFeature::NeedsTrainingData => em(a.needs_training_data == b.needs_training_data),
        };
        out.push((feature, score));
    }
    Ok(out)
}

/// Mean of the local scores over all explainer features.
pub fn explainer_similarity(
    a: &ExplainerSpec,
    b: &ExplainerSpec,
    ontology: &Ontology,
    config: &ExplainerSimilarityConfig,
) -> Result<f64, RevisionError> {
    let local = explainer_local_scores(a, b, ontology, config)?;
    Ok(local.iter().map(|(_, s)| s).sum::<f64>() / local.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMetric {
    ESim,
    EditDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRanking<T, C> {
    pub target: T,
    pub metric: RankingMetric,
    pub ranked: Vec<C>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainerSubstitute {
    pub explainer_id: String,
    pub score: f64,
    /// True when the applicability report carries warnings.
    pub flagged: bool,
    pub applicability: ApplicabilityReport,
}

pub type ExplainerRanking = SubstitutionRanking<String, ExplainerSubstitute>;

/// Scores every other library entry against `target`.
pub fn rank_substitutes(
    target: &ExplainerSpec,
    library: &[ExplainerSpec],
    d: &CaseDescription,
    ontology: &Ontology,
    config: &ExplainerSimilarityConfig,
) -> Result<ExplainerRanking, RevisionError> {
    let mut ranked = Vec::new();
    for candidate in library.iter().filter(|c| c.id != target.id) {
        let applicability = applicability_check(d, candidate);
        ranked.push(ExplainerSubstitute {
            explainer_id: candidate.id.clone(),
            score: explainer_similarity(target, candidate, ontology, config)?,
            flagged: !applicability.is_applicable(),
            applicability,
        });
    }
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.explainer_id.cmp(&b.explainer_id))
    });
    Ok(SubstitutionRanking {
        target: target.id.clone(),
        metric: RankingMetric::ESim,
        ranked,
    })
}

/// What node similarity needs to know.
#[derive(Clone, Copy)]
pub struct NodeSimContext<'a> {
    pub ontology: &'a Ontology,
    pub library: &'a ExplainerLibrary,
    pub config: ExplainerSimilarityConfig,
}

pub fn node_similarity(a: &GraphNode, b: &GraphNode, ctx: &NodeSimContext<'_>) -> Result<f64, RevisionError> {
    match (a.kind, b.kind) {
        (NodeKind::Explainer, NodeKind::Explainer) => {
            let lookup = |n: &GraphNode| {
                let id = n.explainer.as_deref().unwrap_or("");
                ctx.library
                    .get(id)
                    .ok_or_else(|| RevisionError::UnknownExplainer(id.to_owned()))
            };
            let (ea, eb) = (lookup(a)?, lookup(b)?);
            explainer_similarity(ea, eb, ctx.ontology, &ctx.config)
        }
        (NodeKind::UserQuestion, NodeKind::UserQuestion) => match (&a.question, &b.question) {
            (Some(qa), Some(qb)) => Ok(ctx.ontology.wu_palmer(trees::USER_QUESTION, qa, qb)?),
            _ => Ok(0.0),
        },
        (ka, kb) if ka == kb => Ok(1.0),
        _ => Ok(0.0),
    }
}

struct EditSearch {
    n1: usize,
    n2: usize,
    subst: Vec<Vec<f64>>,
    adj1: Vec<Vec<bool>>,
    adj2: Vec<Vec<bool>>,
    edges1: Vec<(usize, usize)>,
    edges2: Vec<(usize, usize)>,
    mapping: Vec<Option<usize>>,
    best: f64,
}

impl EditSearch {
    fn lower_bound(&self, next: usize, used: u32) -> f64 {
        let rem1 = self.n1 - next;
        let rem2 = self.n2 - used.count_ones() as usize;
        let mut node_min = 0.0;
        for i in next..self.n1 {
            let mut m: f64 = 1.0;
            for j in 0..self.n2 {
                if used & (1 << j) == 0 {
                    m = m.min(self.subst[i][j]);
                }
            }
            node_min += m;
        }
        let nodes = (rem1.abs_diff(rem2) as f64).max(node_min);
        let open1 = self.edges1.iter().filter(|&&(u, v)| u.max(v) >= next).count();
        let open2 = self
            .edges2
            .iter()
            .filter(|&&(u, v)| used & (1 << u) == 0 || used & (1 << v) == 0)
            .count();
        nodes + open1.abs_diff(open2) as f64
    }

    /// Edge cost fixed by assigning node `i` to `target`, given nodes `< i`.
    fn edge_cost(&self, i: usize, target: Option<usize>) -> f64 {
        let mut cost = 0.0;
        for k in 0..i {
            let fk = self.mapping[k];
            for (a, b, fa, fb) in [(i, k, target, fk), (k, i, fk, target)] {
                let in1 = self.adj1[a][b];
                let in2 = match (fa, fb) {
                    (Some(x), Some(y)) => self.adj2[x][y],
                    _ => false,
                };
                if in1 != in2 {
                    cost += 1.0;
                }
            }
        }
        cost
    }

    fn finish_cost(&self, used: u32) -> f64 {
        let free_nodes = (0..self.n2).filter(|j| used & (1 << j) == 0).count();
        let free_edges = self
            .edges2
            .iter()
            .filter(|&&(u, v)| used & (1 << u) == 0 || used & (1 << v) == 0)
            .count();
        (free_nodes + free_edges) as f64
    }

    fn search(&mut self, next: usize, used: u32, cost: f64) {
        if next == self.n1 {
            let total = cost + self.finish_cost(used);
            if total < self.best {
                self.best = total;
            }
            return;
        }
        if cost + self.lower_bound(next, used) >= self.best - EPS {
            return;
        }
        let mut options: Vec<(f64, Option<usize>)> = (0..self.n2)
            .filter(|j| used & (1 << j) == 0)
            .map(|j| (self.subst[next][j], Some(j)))
            .collect();
        options.push((1.0, None));
        options.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (node_cost, target) in options {
            let step = node_cost + self.edge_cost(next, target);
            self.mapping[next] = target;
            let used_next = target.map_or(used, |j| used | (1 << j));
            self.search(next + 1, used_next, cost + step);
        }
        self.mapping[next] = None;
    }
}

/// Exact graph edit distance between two strategy graphs.
///
/// Substituting a node costs `1 - node_sim`; inserting or deleting a node
/// or an edge costs 1. Edges carry no label beyond their direction.
pub fn tree_edit_distance<F>(g1: &StrategyGraph, g2: &StrategyGraph, node_sim: F) -> Result<f64, RevisionError>
where
    F: Fn(&GraphNode, &GraphNode) -> Result<f64, RevisionError>,
{
    for g in [g1, g2] {
        if g.node_count() > GED_NODE_CAP {
            return Err(RevisionError::SizeCapExceeded {
                nodes: g.node_count(),
                cap: GED_NODE_CAP,
            });
        }
    }
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let mut subst = vec![vec![0.0; n2]; n1];
    for (i, row) in subst.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (1.0 - node_sim(g1.node(i), g2.node(j))?).clamp(0.0, 1.0);
        }
    }
    let adjacency = |g: &StrategyGraph, n: usize| {
        let mut adj = vec![vec![false; n]; n];
        for (u, v) in g.edges() {
            adj[u][v] = true;
        }
        adj
    };
    let edges1: Vec<_> = g1.edges().collect();
    let edges2: Vec<_> = g2.edges().collect();
    let mut search = EditSearch {
        n1,
        n2,
        subst,
        adj1: adjacency(g1, n1),
        adj2: adjacency(g2, n2),
        best: (n1 + n2 + edges1.len() + edges2.len()) as f64 + 1.0,
        edges1,
        edges2,
        mapping: vec![None; n1],
    };
    search.search(0, 0, 0.0);
    Ok(search.best)
}

/// Normalised similarity `1 - ged / (|V1| + |E1| + |V2| + |E2|)`.
pub fn edit_similarity(distance: f64, g1: &StrategyGraph, g2: &StrategyGraph) -> f64 {
    let norm = (g1.node_count() + g1.edge_count() + g2.node_count() + g2.edge_count()) as f64;
    if norm == 0.0 {
        return 1.0;
    }
    (1.0 - distance / norm).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtreeSubstitute {
    pub subtree: QuestionSubtree,
    pub intent: ConceptId,
    pub distance: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSubtree {
    pub case_id: String,
    pub question: ConceptId,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtreeRanking {
    #[serde(flatten)]
    pub ranking: SubstitutionRanking<QuestionSubtree, SubtreeSubstitute>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedSubtree>,
}

/// Question subtrees from every case solution, ranked by edit similarity.
pub fn rank_subtree_substitutes(
    target: &QuestionSubtree,
    case_base: &CaseBase,
    k: usize,
    ctx: &NodeSimContext<'_>,
) -> Result<SubtreeRanking, RevisionError> {
    let target_graph = StrategyGraph::from_node(&target.tree);
    let sim = |a: &GraphNode, b: &GraphNode| node_similarity(a, b, ctx);
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for case in case_base.cases() {
        let Some(solution) = &case.solution else { continue };
        for (intent, tree) in solution.trees() {
            for mut candidate in question_subtrees(tree) {
                if target.origin_case.as_deref() == Some(case.id.as_str()) && candidate.tree == target.tree {
                    continue;
                }
                candidate.origin_case = Some(case.id.clone());
                let graph = StrategyGraph::from_node(&candidate.tree);
                match tree_edit_distance(&target_graph, &graph, sim) {
                    Ok(distance) => ranked.push(SubtreeSubstitute {
                        score: edit_similarity(distance, &target_graph, &graph),
                        distance,
                        intent: intent.clone(),
                        subtree: candidate,
                    }),
                    Err(RevisionError::SizeCapExceeded { nodes, .. }) => skipped.push(SkippedSubtree {
                        case_id: case.id.clone(),
                        question: candidate.question.clone(),
                        nodes,
                    }),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    // stable sort keeps case-base order among equal keys
    ranked.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| {
            a.subtree
                .origin_case
                .cmp(&b.subtree.origin_case)
                .then_with(|| a.intent.cmp(&b.intent))
        })
    });
    ranked.truncate(k);
    Ok(SubtreeRanking {
        ranking: SubstitutionRanking {
            target: target.clone(),
            metric: RankingMetric::EditDistance,
            ranked,
        },
        skipped,
    })
}
