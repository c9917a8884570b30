//! Feedback aggregation, anonymisation and durable retention of cases.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::case::{
    parse_case, to_json, validate_case, Case, CaseContext, CaseError, DatasetType, Dimension, Outcome, XEQ_MAX_SCORE,
};
use crate::retrieval::{score_description, FeatureSchema, RetrievalError};
use crate::taxonomy::Ontology;

/// Salt used when a store is opened without an explicit one.
pub const DEFAULT_SALT: &str = "isee-casebase";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetentionError {
    #[error("no feedback responses were given")]
    EmptyFeedback,
    #[error("respondent `{respondent}` scored item `{item}` as {score}; the scale is 0 to {max}", max = XEQ_MAX_SCORE)]
    ScoreOutOfRange { respondent: String, item: String, score: i64 },
    #[error("respondent `{respondent}` scored item `{item}`, which maps to no dimension")]
    MissingDimension { respondent: String, item: String },
    #[error("the design user has not consented to retention")]
    ConsentWithheld,
    #[error("only complete cases (description, solution and outcome) can be retained")]
    IncompleteCase,
    #[error("case id `{0}` already exists")]
    DuplicateId(String),
    #[error("case id `{0}` is not a valid file name")]
    InvalidId(String),
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("case file {path} is invalid: {source}")]
    Corrupt { path: String, source: CaseError },
    #[error("case rejected: {0}")]
    Invalid(CaseError),
}

fn io_err(path: &Path, e: impl ToString) -> RetentionError {
    RetentionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// One stakeholder's answers to the XEQ questionnaire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub respondent: String,
    pub item_scores: BTreeMap<String, i64>,
    pub item_dimension: BTreeMap<String, Dimension>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XeqItem {
    pub id: String,
    pub dimension: Dimension,
    pub statement: String,
}

/// The questionnaire items and the dimension each one measures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XeqInventory {
    pub items: Vec<XeqItem>,
}

impl Default for XeqInventory {
    fn default() -> Self {
        let statements: [(Dimension, [&str; 4]); 4] = [
            (
                Dimension::Learning,
                [
                    "The explanations helped me understand how the AI system works.",
                    "I learned something new about the system's decisions.",
                    "The explanations improved my mental model of the system.",
                    "I could predict the system's behaviour after the explanations.",
                ],
            ),
            (
                Dimension::Utility,
                [
                    "The explanations were useful for my task.",
                    "The explanations helped me decide whether to trust an outcome.",
                    "The explanations contained the details I needed.",
                    "I would use these explanations again.",
                ],
            ),
            (
                Dimension::Fulfilment,
                [
                    "The explanations answered my questions.",
                    "The explanation experience met my expectations.",
                    "The explanations covered my concerns about the system.",
                    "I am satisfied with the explanations I received.",
                ],
            ),
            (
                Dimension::Engagement,
                [
                    "The explanation experience held my attention.",
                    "Interacting with the explanations was pleasant.",
                    "The pace of the explanation experience suited me.",
                    "I wanted to explore further explanations.",
                ],
            ),
        ];
        let mut items = Vec::new();
        for (dimension, texts) in statements {
            for (i, text) in texts.iter().enumerate() {
                items.push(XeqItem {
                    id: format!("{}-{}", dimension.token().to_lowercase(), i + 1),
                    dimension,
                    statement: (*text).to_owned(),
                });
            }
        }
        XeqInventory { items }
    }
}

impl XeqInventory {
    pub fn dimension_map(&self) -> BTreeMap<String, Dimension> {
        self.items.iter().map(|i| (i.id.clone(), i.dimension)).collect()
    }

    /// Builds a response whose item mapping comes from this inventory.
    pub fn response<'a>(
        &self,
        respondent: impl Into<String>,
        scores: impl IntoIterator<Item = (&'a str, i64)>,
    ) -> FeedbackResponse {
        FeedbackResponse {
            respondent: respondent.into(),
            item_scores: scores.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
            item_dimension: self.dimension_map(),
        }
    }
}

/// Per-dimension mean of every item score across all respondents.
///
/// Dimensions with no scored item are left out of the outcome.
pub fn aggregate_outcome(responses: &[FeedbackResponse]) -> Result<Outcome, RetentionError> {
    if responses.is_empty() {
        return Err(RetentionError::EmptyFeedback);
    }
    let mut sums: BTreeMap<Dimension, (i64, u64)> = BTreeMap::new();
    for r in responses {
        for (item, &score) in &r.item_scores {
            if !(0..=i64::from(XEQ_MAX_SCORE)).contains(&score) {
                return Err(RetentionError::ScoreOutOfRange {
                    respondent: r.respondent.clone(),
                    item: item.clone(),
                    score,
                });
            }
            let dim = r.item_dimension.get(item).ok_or_else(|| RetentionError::MissingDimension {
                respondent: r.respondent.clone(),
                item: item.clone(),
            })?;
            let entry = sums.entry(*dim).or_default();
            entry.0 += score;
            entry.1 += 1;
        }
    }
    Ok(Outcome {
        dimension_means: sums
            .into_iter()
            .map(|(d, (sum, n))| (d, sum as f64 / n as f64))
            .collect(),
        respondent_count: responses.len() as u32,
    })
}

fn salted_hash(salt: &str, value: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0u8]);
    h.update(value.as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Anonymised copy of a complete case.
///
/// Persona names, notes and the model descriptor are replaced by salted
/// hashes. Nothing that retrieval or adaptation reads is touched.
pub fn anonymize(case: &Case, salt: &str) -> Result<Case, RetentionError> {
    if !case.is_complete() {
        return Err(RetentionError::IncompleteCase);
    }
    let mut out = case.clone();
    if out.anonymised {
        return Ok(out);
    }
    for p in &mut out.description.personas {
        p.name = format!("persona-{}", salted_hash(salt, &p.name));
    }
    if let Some(n) = &mut out.description.notes {
        *n = format!("redacted-{}", salted_hash(salt, n));
    }
    if let Some(m) = &mut out.description.model_descriptor {
        *m = format!("redacted-{}", salted_hash(salt, m));
    }
    out.anonymised = true;
    Ok(out)
}

/// In-memory case collection with a monotone revision counter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseBase {
    cases: BTreeMap<String, Case>,
    revision: u64,
}

impl CaseBase {
    pub fn new(cases: impl IntoIterator<Item = Case>) -> Result<Self, RetentionError> {
        let mut cb = CaseBase::default();
        for c in cases {
            if cb.cases.contains_key(&c.id) {
                return Err(RetentionError::DuplicateId(c.id));
            }
            cb.cases.insert(c.id.clone(), c);
        }
        Ok(cb)
    }

    /// Cases in id order.
    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    pub fn get(&self, id: &str) -> Option<&Case> {
        self.cases.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.cases.contains_key(id)
    }

    /// Inserts or replaces a case without touching the revision.
    pub fn insert(&mut self, case: Case) -> Option<Case> {
        self.cases.insert(case.id.clone(), case)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.cases.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn strata(&self) -> BTreeMap<DatasetType, usize> {
        let mut out = BTreeMap::new();
        for c in self.cases() {
            *out.entry(c.description.dataset_type).or_insert(0) += 1;
        }
        out
    }

    /// Id the next retained case receives.
    pub fn next_id(&self) -> String {
        format!("retained-{:06}", self.revision + 1)
    }
}

/// Anonymises `case` and inserts it under a fresh id.
pub fn retain(cb: &mut CaseBase, case: &Case, consent: bool, salt: &str) -> Result<String, RetentionError> {
    if !consent {
        return Err(RetentionError::ConsentWithheld);
    }
    let mut anon = anonymize(case, salt)?;
    let id = cb.next_id();
    if cb.contains(&id) {
        return Err(RetentionError::DuplicateId(id));
    }
    anon.id = id.clone();
    cb.cases.insert(id.clone(), anon);
    cb.revision += 1;
    Ok(id)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct IndexFile {
    revision: u64,
    cases: Vec<String>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RetentionError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    // make the rename itself durable
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

/// Reads a case-base directory (`index.json` plus `cases/<id>.json`).
pub fn load_case_base(dir: &Path, ctx: &CaseContext<'_>) -> Result<CaseBase, RetentionError> {
    let index_path = dir.join("index.json");
    let text = fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let index: IndexFile = crate::case::from_json_str(&text).map_err(|source| RetentionError::Corrupt {
        path: index_path.display().to_string(),
        source,
    })?;
    let mut cb = CaseBase {
        cases: BTreeMap::new(),
        revision: index.revision,
    };
    for id in &index.cases {
        if !valid_id(id) {
            return Err(RetentionError::InvalidId(id.clone()));
        }
        let path = dir.join("cases").join(format!("{id}.json"));
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut case = parse_case(&text, ctx).map_err(|source| RetentionError::Corrupt {
            path: path.display().to_string(),
            source,
        })?;
        case.id = id.clone();
        if cb.cases.insert(id.clone(), case).is_some() {
            return Err(RetentionError::DuplicateId(id.clone()));
        }
    }
    Ok(cb)
}

/// Writes every case file and the index.
pub fn save_case_base(dir: &Path, cb: &CaseBase) -> Result<(), RetentionError> {
    let cases_dir = dir.join("cases");
    fs::create_dir_all(&cases_dir).map_err(|e| io_err(&cases_dir, e))?;
    for case in cb.cases() {
        if !valid_id(&case.id) {
            return Err(RetentionError::InvalidId(case.id.clone()));
        }
        write_atomic(&cases_dir.join(format!("{}.json", case.id)), &(to_json(case) + "\n"))?;
    }
    write_index(dir, cb)
}

fn write_index(dir: &Path, cb: &CaseBase) -> Result<(), RetentionError> {
    let index = IndexFile {
        revision: cb.revision,
        cases: cb.ids().map(str::to_owned).collect(),
    };
    write_atomic(&dir.join("index.json"), &(to_json(&index) + "\n"))
}

/// A case base persisted in a directory.
///
/// Readers take cheap immutable snapshots. Retention holds an exclusive
/// write lease, persists, then swaps the snapshot.
#[derive(Debug)]
pub struct CaseStore {
    dir: PathBuf,
    salt: String,
    current: RwLock<Arc<CaseBase>>,
    lease: Mutex<()>,
}

impl CaseStore {
    pub fn open(dir: impl Into<PathBuf>, ctx: &CaseContext<'_>) -> Result<Self, RetentionError> {
        let dir = dir.into();
        let cb = load_case_base(&dir, ctx)?;
        Ok(Self::with_base(dir, cb))
    }

    /// Wraps an already loaded base; `dir` is where retained cases go.
    pub fn with_base(dir: impl Into<PathBuf>, cb: CaseBase) -> Self {
        CaseStore {
            dir: dir.into(),
            salt: DEFAULT_SALT.to_owned(),
            current: RwLock::new(Arc::new(cb)),
            lease: Mutex::new(()),
        }
    }

    pub fn with_salt(mut self, salt: impl Into<String>) -> Self {
        self.salt = salt.into();
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn salt(&self) -> &str {
        &self.salt
    }

    pub fn snapshot(&self) -> Arc<CaseBase> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Retains `case`; the new case and index are on disk before this returns.
    ///
    /// The case is checked against `ctx` first, so nothing that would fail to
    /// load again is ever written.
    pub fn retain(&self, case: &Case, consent: bool, ctx: &CaseContext<'_>) -> Result<String, RetentionError> {
        if consent && case.is_complete() {
            validate_case(case, ctx).map_err(RetentionError::Invalid)?;
        }
        let _lease = self.lease.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = (*self.snapshot()).clone();
        let id = retain(&mut next, case, consent, &self.salt)?;
        let cases_dir = self.dir.join("cases");
        fs::create_dir_all(&cases_dir).map_err(|e| io_err(&cases_dir, e))?;
        let stored = next.get(&id).expect("just inserted");
        write_atomic(&cases_dir.join(format!("{id}.json")), &(to_json(stored) + "\n"))?;
        write_index(&self.dir, &next)?;
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseCoverage {
    pub case_id: String,
    pub dataset_type: DatasetType,
    pub neighbours: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub threshold: f64,
    pub cases: Vec<CaseCoverage>,
    pub isolated: Vec<String>,
    pub strata: BTreeMap<DatasetType, usize>,
}

/// Counts, for each case, the other cases of its dataset type whose global
/// similarity to it (taken as the query) reaches `threshold`.
pub fn coverage_report(
    cb: &CaseBase,
    threshold: f64,
    schema: &FeatureSchema,
    ontology: &Ontology,
) -> Result<CoverageReport, RetrievalError> {
    let mut cases = Vec::with_capacity(cb.len());
    for c in cb.cases() {
        let mut neighbours = 0;
        for other in cb.cases() {
            if other.id == c.id || other.description.dataset_type != c.description.dataset_type {
                continue;
            }
            let (score, _) = score_description(&c.description, &other.description, schema, ontology)?;
            if score >= threshold {
                neighbours += 1;
            }
        }
        cases.push(CaseCoverage {
            case_id: c.id.clone(),
            dataset_type: c.description.dataset_type,
            neighbours,
        });
    }
    let isolated = cases
        .iter()
        .filter(|c| c.neighbours == 0)
        .map(|c| c.case_id.clone())
        .collect();
    Ok(CoverageReport {
        threshold,
        cases,
        isolated,
        strata: cb.strata(),
    })
}

/// Summary counts for a case base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseBaseStats {
    pub revision: u64,
    pub cases: usize,
    pub anonymised: usize,
    pub strata: BTreeMap<DatasetType, usize>,
    pub intents: BTreeSet<String>,
}

pub fn stats(cb: &CaseBase) -> CaseBaseStats {
    CaseBaseStats {
        revision: cb.revision(),
        cases: cb.len(),
        anonymised: cb.cases().filter(|c| c.anonymised).count(),
        strata: cb.strata(),
        intents: cb
            .cases()
            .flat_map(|c| c.description.intent_labels())
            .map(|i| i.to_string())
            .collect(),
    }
}
