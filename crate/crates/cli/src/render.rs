//! Plain-text tables for terminal output.

use std::fmt::Write;

use isee_core::adaptation::AdaptationPlan;
use isee_core::case::Outcome;
use isee_core::retention::{CaseBaseStats, CoverageReport};
use isee_core::retrieval::RetrievalResult;
use isee_core::revision::{ExplainerRanking, SubtreeRanking};
use isee_core::strategy::{Trace, ValidationReport};

fn join<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> String {
    items.into_iter().map(|s| s.as_ref().to_owned()).collect::<Vec<_>>().join(", ")
}

pub fn retrieval(r: &RetrievalResult) -> String {
    let mut s = format!("{:<4} {:<28} {:>7}\n", "rank", "case", "score");
    for (i, c) in r.ranked.iter().enumerate() {
        let _ = writeln!(s, "{:<4} {:<28} {:>7.4}", i + 1, c.case_id, c.score);
    }
    s
}

pub fn plan(p: &AdaptationPlan) -> String {
    let mut s = format!("base case: {} (intent {})\n", p.base_case, p.intent);
    let _ = writeln!(s, "unmet: {}", if p.unmet.is_empty() { "none".into() } else { join(&p.unmet) });
    for m in &p.matches {
        let _ = writeln!(s, "  {}", m.provenance);
    }
    if !p.residual_unmet.is_empty() {
        let _ = writeln!(s, "still unanswered: {}", join(&p.residual_unmet));
    }
    for k in &p.skipped {
        let _ = writeln!(s, "skipped {}: {}", k.case_id, k.reason);
    }
    s
}

pub fn explainer_ranking(r: &ExplainerRanking) -> String {
    let mut s = format!("substitutes for {}\n{:<28} {:>7}  warnings\n", r.target, "explainer", "e_sim");
    for c in &r.ranked {
        let warnings = join(c.applicability.warnings.iter().map(|w| w.detail.as_str()));
        let _ = writeln!(s, "{:<28} {:>7.4}  {}", c.explainer_id, c.score, warnings);
    }
    s
}

pub fn subtree_ranking(r: &SubtreeRanking) -> String {
    let mut s = format!("{:<28} {:<14} {:>7} {:>8}\n", "case", "question", "score", "distance");
    for c in &r.ranking.ranked {
        let origin = c.subtree.origin_case.as_deref().unwrap_or("-");
        let _ = writeln!(s, "{:<28} {:<14} {:>7.4} {:>8.4}", origin, c.subtree.question, c.score, c.distance);
    }
    for k in &r.skipped {
        let _ = writeln!(s, "skipped {} {} ({} nodes)", k.case_id, k.question, k.nodes);
    }
    s
}

pub fn validation(r: &ValidationReport) -> String {
    if r.is_valid() {
        return "valid\n".into();
    }
    let mut s = String::new();
    for i in &r.issues {
        let _ = writeln!(s, "{}: {}", i.path, serde_json::to_string(&i.issue).unwrap_or_default());
    }
    s
}

pub fn trace(t: &Trace) -> String {
    let mut s = String::new();
    for step in &t.steps {
        let _ = writeln!(s, "{:<14} {}", step.token, step.explainer.as_deref().unwrap_or("(no-op)"));
    }
    s
}

pub fn outcome(o: &Outcome) -> String {
    let mut s = format!("respondents: {}\n", o.respondent_count);
    for (d, m) in &o.dimension_means {
        let _ = writeln!(s, "{:<12} {:.4}", d.token(), m);
    }
    s
}

pub fn stats(st: &CaseBaseStats) -> String {
    let mut s = format!(
        "cases: {} ({} anonymised), revision {}\n",
        st.cases, st.anonymised, st.revision
    );
    for (d, n) in &st.strata {
        let _ = writeln!(s, "  {:<12} {}", d.token(), n);
    }
    let _ = writeln!(s, "intents: {}", join(&st.intents));
    s
}

pub fn coverage(r: &CoverageReport) -> String {
    let mut s = format!("threshold {}\n{:<28} {:<12} {:>10}\n", r.threshold, "case", "dataset", "neighbours");
    for c in &r.cases {
        let _ = writeln!(s, "{:<28} {:<12} {:>10}", c.case_id, c.dataset_type.token(), c.neighbours);
    }
    let _ = writeln!(
        s,
        "isolated: {}",
        if r.isolated.is_empty() { "none".into() } else { join(&r.isolated) }
    );
    s
}
