//! Failure-driven reuse of the top retrieved strategy.
//!
//! When the nearest neighbour's strategy leaves some of the query's user
//! questions unanswered, question subtrees are collected from the other
//! neighbours and paired with the unmet questions by Gale-Shapley stable
//! matching (questions propose). Matched subtrees are appended to the
//! nearest neighbour's strategy.
//!
//! Preferences come from question-concept similarity: an exact match beats
//! any Wu & Palmer score, pairs below the compatibility threshold are
//! unacceptable, and ties fall back to the origin case's retrieval score and
//! then its id. A subtree answering a different question is relabelled with
//! the query question it was matched to.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::Case;
use crate::retention::CaseBase;
use crate::retrieval::RetrievalResult;
use crate::strategy::{
    compose, covered_questions, extract_subtree, BehaviorTree, BtNode, NodeKind, QuestionSubtree,
    StrategyError,
};
use crate::taxonomy::{trees, ConceptId, Ontology};

pub const DEFAULT_COMPATIBILITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptationError {
    #[error("case `{case_id}` has no strategy for intent `{intent}`")]
    MissingSolution { case_id: String, intent: ConceptId },
    #[error("case `{0}` is not in the case base")]
    UnknownCase(String),
    #[error("adaptation needs at least one retrieved neighbour")]
    EmptyNeighbourhood,
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Query questions for `intent` that `case`'s strategy does not cover.
pub fn unmet_questions(
    query: &Case,
    case: &Case,
    intent: &ConceptId,
) -> Result<BTreeSet<ConceptId>, AdaptationError> {
    let tree = case
        .solution
        .as_ref()
        .and_then(|s| s.tree_for(intent))
        .ok_or_else(|| AdaptationError::MissingSolution {
            case_id: case.id.clone(),
            intent: intent.clone(),
        })?;
    let covered = covered_questions(tree);
    Ok(query
        .description
        .questions_for_intent(intent)
        .difference(&covered)
        .cloned()
        .collect())
}

/// Gale-Shapley with incomplete preference lists; proposers propose.
///
/// `proposer_prefs[p]` lists acceptable receivers, most preferred first;
/// `receiver_prefs[r]` likewise lists acceptable proposers. A pair is
/// acceptable only if each side lists the other. Returns the receiver
/// assigned to each proposer.
pub fn gale_shapley(proposer_prefs: &[Vec<usize>], receiver_prefs: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n_recv = receiver_prefs.len();
    let rank: Vec<BTreeMap<usize, usize>> = receiver_prefs
        .iter()
        .map(|prefs| prefs.iter().enumerate().map(|(r, &p)| (p, r)).collect())
        .collect();
    let mut next = vec![0usize; proposer_prefs.len()];
    let mut held: Vec<Option<usize>> = vec![None; n_recv];
    let mut free: Vec<usize> = (0..proposer_prefs.len()).rev().collect();
    while let Some(p) = free.pop() {
        while next[p] < proposer_prefs[p].len() {
            let r = proposer_prefs[p][next[p]];
            next[p] += 1;
            let Some(&p_rank) = rank.get(r).and_then(|m| m.get(&p)) else {
                continue;
            };
            match held[r] {
                None => {
                    held[r] = Some(p);
                    break;
                }
                Some(cur) if p_rank < rank[r][&cur] => {
                    held[r] = Some(p);
                    free.push(cur);
                    break;
                }
                Some(_) => {}
            }
        }
    }
    let mut assignment = vec![None; proposer_prefs.len()];
    for (r, p) in held.iter().enumerate() {
        if let Some(p) = p {
            assignment[*p] = Some(r);
        }
    }
    assignment
}

/// A subtree offered by a neighbour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub subtree: QuestionSubtree,
    /// Global similarity of the origin case to the query.
    pub origin_score: f64,
    /// Position of the origin case in the retrieval ranking (0 = NN1).
    pub origin_rank: usize,
}

impl Candidate {
    fn origin(&self) -> &str {
        self.subtree.origin_case.as_deref().unwrap_or("")
    }
}

pub trait PreferenceBuilder {
    /// Acceptable candidates for `question`, most preferred first.
    fn question_prefs(&self, question: &ConceptId, candidates: &[Candidate]) -> Vec<usize>;
    /// Acceptable questions for `candidate`, most preferred first.
    fn candidate_prefs(&self, candidate: &Candidate, questions: &[ConceptId]) -> Vec<usize>;
}

/// The concept-similarity preferences described in the module docs.
pub struct ConceptPreferences<'a> {
    pub ontology: &'a Ontology,
    pub threshold: f64,
    /// Strategy being repaired. A non-exact pairing is refused when it already
    /// holds the same body under a compatible question.
    pub base: Option<&'a BehaviorTree>,
}

impl ConceptPreferences<'_> {
    pub fn similarity(&self, a: &ConceptId, b: &ConceptId) -> f64 {
        if a == b {
            1.0
        } else {
            self.ontology
                .wu_palmer(trees::USER_QUESTION, a, b)
                .unwrap_or(0.0)
        }
    }

    fn already_present(&self, candidate: &Candidate) -> bool {
        let Some(base) = self.base else { return false };
        base.root.iter().any(|n| {
            n.kind == NodeKind::UserQuestion
                && n.children == candidate.subtree.tree.children
                && n.question
                    .as_ref()
                    .is_some_and(|q| self.similarity(q, &candidate.subtree.question) >= self.threshold)
        })
    }

    pub fn acceptable(&self, question: &ConceptId, candidate: &Candidate) -> bool {
        let q = &candidate.subtree.question;
        if q == question {
            return true;
        }
        self.similarity(question, q) >= self.threshold && !self.already_present(candidate)
    }
}

impl PreferenceBuilder for ConceptPreferences<'_> {
    fn question_prefs(&self, question: &ConceptId, candidates: &[Candidate]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..candidates.len())
            .filter(|&i| self.acceptable(question, &candidates[i]))
            .collect();
        let key = |i: usize| {
            let c = &candidates[i];
            (c.subtree.question == *question, self.similarity(question, &c.subtree.question))
        };
        idx.sort_by(|&a, &b| {
            let (ea, sa) = key(a);
            let (eb, sb) = key(b);
            eb.cmp(&ea)
                .then(sb.total_cmp(&sa))
                .then(candidates[b].origin_score.total_cmp(&candidates[a].origin_score))
                .then_with(|| candidates[a].origin().cmp(candidates[b].origin()))
                .then(a.cmp(&b))
        });
        idx
    }

    fn candidate_prefs(&self, candidate: &Candidate, questions: &[ConceptId]) -> Vec<usize> {
        let own = &candidate.subtree.question;
        let mut idx: Vec<usize> = (0..questions.len())
            .filter(|&i| self.acceptable(&questions[i], candidate))
            .collect();
        idx.sort_by(|&a, &b| {
            let (qa, qb) = (&questions[a], &questions[b]);
            (qb == own)
                .cmp(&(qa == own))
                .then(self.similarity(own, qb).total_cmp(&self.similarity(own, qa)))
                .then_with(|| qa.cmp(qb))
        });
        idx
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `(question index, candidate index)`, ascending by question.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
}

pub fn stable_match(
    questions: &[ConceptId],
    candidates: &[Candidate],
    prefs: &dyn PreferenceBuilder,
) -> Matching {
    let q_prefs: Vec<Vec<usize>> = questions
        .iter()
        .map(|q| prefs.question_prefs(q, candidates))
        .collect();
    let c_prefs: Vec<Vec<usize>> = candidates
        .iter()
        .map(|c| prefs.candidate_prefs(c, questions))
        .collect();
    let assignment = gale_shapley(&q_prefs, &c_prefs);
    let mut matching = Matching::default();
    for (q, a) in assignment.into_iter().enumerate() {
        match a {
            Some(c) => matching.pairs.push((q, c)),
            None => matching.unmatched.push(q),
        }
    }
    matching
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationMatch {
    pub question: ConceptId,
    /// Imported subtree, already labelled with `question`.
    pub subtree: QuestionSubtree,
    /// Question the subtree answered in its origin case.
    pub source_question: ConceptId,
    pub similarity: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedNeighbour {
    pub case_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPlan {
    pub intent: ConceptId,
    pub base_case: String,
    pub unmet: BTreeSet<ConceptId>,
    pub matches: Vec<AdaptationMatch>,
    pub residual_unmet: BTreeSet<ConceptId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedNeighbour>,
    pub adapted: BehaviorTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub compatibility_threshold: f64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        AdaptationConfig {
            compatibility_threshold: DEFAULT_COMPATIBILITY_THRESHOLD,
        }
    }
}

/// Repairs the nearest neighbour's strategy for one intent.
pub fn adapt(
    query: &Case,
    topk: &RetrievalResult,
    case_base: &CaseBase,
    intent: &ConceptId,
    ontology: &Ontology,
    config: &AdaptationConfig,
) -> Result<AdaptationPlan, AdaptationError> {
    let nn1 = topk.ranked.first().ok_or(AdaptationError::EmptyNeighbourhood)?;
    let base_case = case_base
        .get(&nn1.case_id)
        .ok_or_else(|| AdaptationError::UnknownCase(nn1.case_id.clone()))?;
    let base = base_case
        .solution
        .as_ref()
        .and_then(|s| s.tree_for(intent))
        .ok_or_else(|| AdaptationError::MissingSolution {
            case_id: base_case.id.clone(),
            intent: intent.clone(),
        })?;
    let unmet = unmet_questions(query, base_case, intent)?;
    let mut plan = AdaptationPlan {
        intent: intent.clone(),
        base_case: base_case.id.clone(),
        unmet: unmet.clone(),
        matches: Vec::new(),
        residual_unmet: unmet.clone(),
        skipped: Vec::new(),
        adapted: base.clone(),
    };
    if unmet.is_empty() {
        return Ok(plan);
    }

    let prefs = ConceptPreferences {
        ontology,
        threshold: config.compatibility_threshold,
        base: Some(base),
    };
    let mut candidates = Vec::new();
    for (rank, neighbour) in topk.ranked.iter().enumerate().skip(1) {
        let Some(case) = case_base.get(&neighbour.case_id) else {
            plan.skipped.push(SkippedNeighbour {
                case_id: neighbour.case_id.clone(),
                reason: "not in case base".into(),
            });
            continue;
        };
        let Some(tree) = case.solution.as_ref().and_then(|s| s.tree_for(intent)) else {
            plan.skipped.push(SkippedNeighbour {
                case_id: case.id.clone(),
                reason: AdaptationError::MissingSolution {
                    case_id: case.id.clone(),
                    intent: intent.clone(),
                }
                .to_string(),
            });
            continue;
        };
        for covered in covered_questions(tree) {
            if !unmet
                .iter()
                .any(|q| prefs.similarity(q, &covered) >= config.compatibility_threshold)
            {
                continue;
            }
            if let Some(mut subtree) = extract_subtree(tree, &covered) {
                subtree.origin_case = Some(case.id.clone());
                candidates.push(Candidate {
                    subtree,
                    origin_score: neighbour.score,
                    origin_rank: rank,
                });
            }
        }
    }

    let questions: Vec<ConceptId> = unmet.iter().cloned().collect();
    let matching = stable_match(&questions, &candidates, &prefs);
    let mut imports: Vec<QuestionSubtree> = Vec::with_capacity(matching.pairs.len());
    for &(qi, ci) in &matching.pairs {
        let question = &questions[qi];
        let cand = &candidates[ci];
        // an earlier import may already answer this question in a nested node
        if let Some(host) = imports.iter().find(|s| s.tree.iter().skip(1).any(|n| n.question.as_ref() == Some(question))) {
            let host_tree = BehaviorTree::new(host.tree.clone());
            let mut subtree = extract_subtree(&host_tree, question).expect("nested question node present");
            subtree.origin_case = host.origin_case.clone();
            plan.residual_unmet.remove(question);
            plan.matches.push(AdaptationMatch {
                question: question.clone(),
                subtree,
                source_question: question.clone(),
                similarity: 1.0,
                provenance: format!(
                    "{question} already answered inside the {}-subtree imported from case {}",
                    host.question,
                    host.origin_case.as_deref().unwrap_or("")
                ),
            });
            continue;
        }
        let source_question = cand.subtree.question.clone();
        let mut tree: BtNode = cand.subtree.tree.clone();
        tree.question = Some(question.clone());
        let subtree = QuestionSubtree {
            question: question.clone(),
            tree,
            origin_case: cand.subtree.origin_case.clone(),
        };
        let origin = cand.origin();
        let nn = cand.origin_rank + 1;
        let provenance = if &source_question == question {
            format!("{question}-subtree taken from case {origin} (NN{nn})")
        } else {
            format!(
                "{question} answered with the {source_question}-subtree of case {origin} (NN{nn})"
            )
        };
        plan.residual_unmet.remove(question);
        imports.push(subtree.clone());
        plan.matches.push(AdaptationMatch {
            question: question.clone(),
            similarity: prefs.similarity(question, &source_question),
            source_question,
            subtree,
            provenance,
        });
    }
    plan.adapted = compose(base, &imports)?;
    Ok(plan)
}

/// One plan per intent of the query, in intent order.
pub fn adapt_all(
    query: &Case,
    topk: &RetrievalResult,
    case_base: &CaseBase,
    ontology: &Ontology,
    config: &AdaptationConfig,
) -> Result<Vec<AdaptationPlan>, AdaptationError> {
    query
        .description
        .intent_labels()
        .iter()
        .map(|intent| adapt(query, topk, case_base, intent, ontology, config))
        .collect()
}
