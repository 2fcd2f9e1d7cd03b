//! Scorer contract and the deterministic mock scorers.
//!
//! Real-model scorers (masked and causal) live in the `clozeprobe-lm` crate
//! and implement the same [`Scorer`] trait.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::ProbeItem;
use crate::itembank::{ItemBank, BLANK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerFamily {
    Masked,
    Causal,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    /// Probability one on the answer, zero elsewhere.
    Oracle,
    /// Prefers the candidate whose cue word occurred most recently.
    Recency,
    /// Every candidate ties.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthNormalization {
    /// Joint log-probability of all subtokens.
    #[default]
    Sum,
    /// Joint log-probability divided by the subtoken count.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerOptions {
    #[serde(default)]
    pub length_normalization: LengthNormalization,
    /// Lower-case context and candidates before tokenization. Defaults to
    /// the checkpoint's own normalization when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowercase: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_kind: Option<MockKind>,
    /// Opaque device hint passed to the backend ("cpu" is always accepted).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
}

/// Declaration of a scoring backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSpec {
    pub family: ScorerFamily,
    pub model_id: String,
    #[serde(default)]
    pub options: ScorerOptions,
}

impl ScorerSpec {
    pub fn mock(kind: MockKind) -> Self {
        let name = match kind {
            MockKind::Oracle => "oracle",
            MockKind::Recency => "recency",
            MockKind::Uniform => "uniform",
        };
        ScorerSpec {
            family: ScorerFamily::Mock,
            model_id: name.to_string(),
            options: ScorerOptions {
                mock_kind: Some(kind),
                ..ScorerOptions::default()
            },
        }
    }

    /// Stable identifier used in score, metric and table records.
    pub fn id(&self) -> String {
        let family = match self.family {
            ScorerFamily::Masked => "masked",
            ScorerFamily::Causal => "causal",
            ScorerFamily::Mock => "mock",
        };
        match self.options.length_normalization {
            LengthNormalization::Sum => format!("{family}:{}", self.model_id),
            LengthNormalization::Mean => format!("{family}:{}:mean", self.model_id),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model_id.trim().is_empty() {
            return Err("scorer model_id must be nonempty".into());
        }
        match (self.family, self.options.mock_kind) {
            (ScorerFamily::Mock, None) => Err(format!("mock scorer {:?} needs options.mock_kind", self.model_id)),
            (ScorerFamily::Masked | ScorerFamily::Causal, Some(_)) => {
                Err(format!("mock_kind is only valid for mock scorers ({})", self.id()))
            }
            _ => Ok(()),
        }
    }
}

/// Parses `family:model_id`, e.g. `mock:oracle`, `masked:bert-base-uncased`.
/// For mocks the model id names the mock kind.
impl FromStr for ScorerSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (family, model) = s
            .split_once(':')
            .ok_or_else(|| format!("scorer {s:?} must look like family:model_id"))?;
        let spec = match family {
            "mock" => match model {
                "oracle" => ScorerSpec::mock(MockKind::Oracle),
                "recency" => ScorerSpec::mock(MockKind::Recency),
                "uniform" => ScorerSpec::mock(MockKind::Uniform),
                other => return Err(format!("unknown mock scorer {other:?}")),
            },
            "masked" | "causal" => ScorerSpec {
                family: if family == "masked" { ScorerFamily::Masked } else { ScorerFamily::Causal },
                model_id: model.to_string(),
                options: ScorerOptions::default(),
            },
            other => return Err(format!("unknown scorer family {other:?}")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Natural-log probability. Negative infinity is the distinguished
/// "impossible" score; it is serialized as the string `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb(f64);

impl LogProb {
    pub const IMPOSSIBLE: LogProb = LogProb(f64::NEG_INFINITY);
    pub const CERTAIN: LogProb = LogProb(0.0);

    /// Panics on NaN or positive values.
    pub fn new(value: f64) -> Self {
        assert!(!value.is_nan() && value <= 0.0, "log-probability out of range: {value}");
        LogProb(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_impossible(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

impl Eq for LogProb {}

impl PartialOrd for LogProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LogProb {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_impossible() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LogProb {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_impossible() {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogProb {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Word(w) if w == "-inf" => Ok(LogProb::IMPOSSIBLE),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("bad log-probability {w:?}"))),
            Raw::Num(v) if !v.is_nan() && v <= 0.0 => Ok(LogProb(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("log-probability out of range: {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateScore {
    pub candidate: String,
    pub log_prob: LogProb,
    pub n_subtokens: usize,
    /// Set when this candidate could not be scored; `log_prob` is then
    /// impossible and `n_subtokens` zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CandidateScore {
    pub fn new(candidate: impl Into<String>, log_prob: LogProb, n_subtokens: usize) -> Self {
        CandidateScore {
            candidate: candidate.into(),
            log_prob,
            n_subtokens,
            error: None,
        }
    }

    pub fn failed(candidate: impl Into<String>, error: impl Into<String>) -> Self {
        CandidateScore {
            candidate: candidate.into(),
            log_prob: LogProb::IMPOSSIBLE,
            n_subtokens: 0,
            error: Some(error.into()),
        }
    }
}

/// All candidate scores for one context under one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredItem {
    pub item_id: String,
    pub context: String,
    pub scores: Vec<CandidateScore>,
    pub scorer: ScorerSpec,
}

impl ScoredItem {
    pub fn score_of(&self, candidate: &str) -> Option<&CandidateScore> {
        self.scores.iter().find(|s| s.candidate == candidate)
    }

    /// Highest-scoring candidate; ties resolve to the earliest candidate.
    pub fn argmax(&self) -> Option<&CandidateScore> {
        self.scores
            .iter()
            .reduce(|best, s| if s.log_prob > best.log_prob { s } else { best })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoringError {
    #[error("invalid scoring request: {0}")]
    InvalidRequest(String),
    #[error("scorer backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("scorer backend failed: {0}")]
    Backend(String),
}

/// Per-candidate cue words, used by the recency mock.
pub type CueMap = BTreeMap<String, Vec<String>>;

/// Input to a scorer. Real-model scorers use only `context` and
/// `candidates`; the mocks may consult `answer` and `cues`.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub context: &'a str,
    pub candidates: &'a [String],
    pub answer: Option<&'a str>,
    pub cues: Option<&'a CueMap>,
}

impl<'a> ScoreRequest<'a> {
    pub fn new(context: &'a str, candidates: &'a [String]) -> Self {
        ScoreRequest {
            context,
            candidates,
            answer: None,
            cues: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let blanks = self.context.matches(BLANK).count();
        if blanks != 1 {
            return Err(ScoringError::InvalidRequest(format!(
                "context must contain exactly one blank marker, found {blanks}"
            )));
        }
        if self.candidates.is_empty() {
            return Err(ScoringError::InvalidRequest("no candidates".into()));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if self.candidates[..i].contains(c) {
                return Err(ScoringError::InvalidRequest(format!("duplicate candidate {c:?}")));
            }
        }
        Ok(())
    }
}

/// A scoring backend. Instances need not be shareable across threads; the
/// harness serializes calls per scorer.
pub trait Scorer {
    fn spec(&self) -> &ScorerSpec;

    fn score_candidates(&mut self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, ScoringError>;
}

/// Cue map for the recency heuristic: each candidate is cued by the
/// background word it is paired with and by its own surface form.
pub fn cue_map(bank: &ItemBank, set_id: &str) -> CueMap {
    bank.set(set_id)
        .map(|set| {
            set.pairs
                .iter()
                .map(|p| (p.target.clone(), vec![p.background.clone(), p.target.clone()]))
                .collect()
        })
        .unwrap_or_default()
}

/// Scores a probe item's candidates, supplying answer and cues for mocks.
pub fn score_item(
    scorer: &mut dyn Scorer,
    bank: &ItemBank,
    item: &ProbeItem,
) -> Result<ScoredItem, ScoringError> {
    let cues = cue_map(bank, &item.set_id);
    score_context(scorer, &item.item_id, &item.context, &item.candidate_targets, &item.target_word, &cues)
}

pub fn score_context(
    scorer: &mut dyn Scorer,
    item_id: &str,
    context: &str,
    candidates: &[String],
    answer: &str,
    cues: &CueMap,
) -> Result<ScoredItem, ScoringError> {
    let request = ScoreRequest {
        context,
        candidates,
        answer: Some(answer),
        cues: Some(cues),
    };
    let scores = scorer.score_candidates(&request)?;
    Ok(ScoredItem {
        item_id: item_id.to_string(),
        context: context.to_string(),
        scores,
        scorer: scorer.spec().clone(),
    })
}

/// Word tokens of a context with surrounding punctuation and possessive
/// suffixes stripped. The blank marker survives as its own token.
pub fn context_words(context: &str) -> Vec<&str> {
    context
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '_'))
        .map(|w| w.strip_suffix("'s").unwrap_or(w))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Recency heuristic: each candidate scores minus the word distance from
/// the blank back to the end of the nearest preceding occurrence of any of
/// its cues. Candidates with no cue before the blank are impossible.
pub fn mock_recency(context: &str, candidates: &[String], cues: &CueMap) -> Vec<CandidateScore> {
    let words = context_words(context);
    let blank = words.iter().position(|w| *w == BLANK).unwrap_or(words.len());
    let before = &words[..blank];
    candidates
        .iter()
        .map(|candidate| {
            let nearest = cues
                .get(candidate)
                .into_iter()
                .flatten()
                .filter_map(|cue| {
                    let cue: Vec<&str> = cue.split_whitespace().collect();
                    if cue.is_empty() || cue.len() > before.len() {
                        return None;
                    }
                    before
                        .windows(cue.len())
                        .rposition(|w| w == cue.as_slice())
                        .map(|start| blank - (start + cue.len() - 1))
                })
                .min();
            match nearest {
                Some(distance) => CandidateScore::new(candidate.clone(), LogProb::new(-(distance as f64)), 1),
                None => CandidateScore::new(candidate.clone(), LogProb::IMPOSSIBLE, 1),
            }
        })
        .collect()
}

/// Mock scorer requiring no external assets.
#[derive(Debug, Clone)]
pub struct MockScorer {
    spec: ScorerSpec,
    kind: MockKind,
}

impl MockScorer {
    pub fn new(spec: ScorerSpec) -> Result<Self, ScoringError> {
        spec.validate().map_err(ScoringError::InvalidRequest)?;
        let kind = match (spec.family, spec.options.mock_kind) {
            (ScorerFamily::Mock, Some(kind)) => kind,
            _ => return Err(ScoringError::InvalidRequest(format!("{} is not a mock scorer", spec.id()))),
        };
        Ok(MockScorer { spec, kind })
    }

    pub fn of_kind(kind: MockKind) -> Self {
        MockScorer::new(ScorerSpec::mock(kind)).expect("mock spec is valid")
    }
}

impl Scorer for MockScorer {
    fn spec(&self) -> &ScorerSpec {
        &self.spec
    }

    fn score_candidates(&mut self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, ScoringError> {
        request.validate()?;
        let scores = match self.kind {
            MockKind::Uniform => {
                let lp = LogProb::new(-(request.candidates.len() as f64).ln());
                request
                    .candidates
                    .iter()
                    .map(|c| CandidateScore::new(c.clone(), lp, 1))
                    .collect()
            }
            MockKind::Oracle => {
                let answer = request
                    .answer
                    .ok_or_else(|| ScoringError::InvalidRequest("oracle mock needs the answer".into()))?;
                request
                    .candidates
                    .iter()
                    .map(|c| {
                        let lp = if c == answer { LogProb::CERTAIN } else { LogProb::IMPOSSIBLE };
                        CandidateScore::new(c.clone(), lp, 1)
                    })
                    .collect()
            }
            MockKind::Recency => {
                let cues = request
                    .cues
                    .ok_or_else(|| ScoringError::InvalidRequest("recency mock needs a cue map".into()))?;
                mock_recency(request.context, request.candidates, cues)
            }
        };
        Ok(scores)
    }
}
