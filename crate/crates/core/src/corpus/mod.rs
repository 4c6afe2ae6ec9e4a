//! Span-annotated mention corpora.
//!
//! A corpus file is JSON Lines with two record kinds:
//!
//! ```text
//! {"doc": "d1", "sentences": [["tok", ...], ...]}
//! {"mention": {"doc": "d1", "sent": 0, "start": 2, "end": 4, "label": 1,
//!              "pron": 0, "proper": 1, "first_person": 0}}
//! ```
//!
//! `label` may be omitted for corpora that are only used for prediction. The
//! three flags are optional; when missing they are filled from the built-in
//! pronoun lexicon (proper-name defaults to 0). Tokens are NFC-normalized.

pub mod pronouns;
mod split;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub use split::{Split, SplitSpec};

/// Gold class of a mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonSingleton = 0,
    Singleton = 1,
}

impl Label {
    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NonSingleton),
            1 => Some(Label::Singleton),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    /// Sentences as token surfaces; every sentence is non-empty.
    pub sentences: Vec<Vec<String>>,
}

impl Document {
    pub fn sentence(&self, index: usize) -> Option<&[String]> {
        self.sentences.get(index).map(Vec::as_slice)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// A token span `[start, end)` inside one sentence of a document.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMention {
    pub doc_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub label: Option<Label>,
    pub is_pronoun: bool,
    pub is_proper_name: bool,
    pub is_first_person_pronoun: bool,
    /// Additional binary features carried through from the file (`"extra"`).
    pub extra_flags: Vec<bool>,
}

impl LabeledMention {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn is_singleton(&self) -> bool {
        self.label == Some(Label::Singleton)
    }

    /// The mention's token surfaces. The span must be valid for `doc`.
    pub fn tokens<'a>(&self, doc: &'a Document) -> &'a [String] {
        &doc.sentences[self.sentence_index][self.start..self.end]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub sentences: usize,
    pub tokens: usize,
    pub mentions: usize,
    pub singletons: usize,
}

/// A validated collection of documents and mentions. Immutable once built.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    mentions: Vec<LabeledMention>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.documents == other.documents && self.mentions == other.mentions
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    doc: String,
    sentences: Vec<Vec<String>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MentionRecord {
    doc: String,
    sent: usize,
    start: usize,
    end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    #[serde(default)]
    pron: Option<u8>,
    #[serde(default)]
    proper: Option<u8>,
    #[serde(default)]
    first_person: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    extra: Vec<u8>,
}

fn flag(value: u8, name: &str, line: usize) -> Result<bool> {
    match value {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Error::CorpusParse {
            line,
            message: format!("'{name}' must be 0 or 1, got {v}"),
        }),
    }
}

impl Corpus {
    /// Build a corpus from in-memory parts, validating every invariant.
    /// Errors report 1-based record positions (documents first, then mentions).
    pub fn new(documents: Vec<Document>, mentions: Vec<LabeledMention>) -> Result<Corpus> {
        let n_docs = documents.len();
        let docs = documents.into_iter().enumerate().map(|(i, d)| (i + 1, d));
        let ments = mentions
            .into_iter()
            .enumerate()
            .map(|(i, m)| (n_docs + i + 1, m));
        Self::assemble(docs.collect(), ments.collect())
    }

    fn assemble(
        documents: Vec<(usize, Document)>,
        mentions: Vec<(usize, LabeledMention)>,
    ) -> Result<Corpus> {
        let mut by_id = HashMap::with_capacity(documents.len());
        let mut docs = Vec::with_capacity(documents.len());
        for (line, doc) in documents {
            if doc.sentences.is_empty() {
                return Err(Error::CorpusParse {
                    line,
                    message: format!("document '{}' has no sentences", doc.id),
                });
            }
            for (si, sentence) in doc.sentences.iter().enumerate() {
                if sentence.is_empty() {
                    return Err(Error::CorpusParse {
                        line,
                        message: format!("document '{}' sentence {si} is empty", doc.id),
                    });
                }
                if sentence.iter().any(String::is_empty) {
                    return Err(Error::CorpusParse {
                        line,
                        message: format!("document '{}' sentence {si} has an empty token", doc.id),
                    });
                }
            }
            if by_id.insert(doc.id.clone(), docs.len()).is_some() {
                return Err(Error::DuplicateDocument { line, doc: doc.id });
            }
            docs.push(doc);
        }

        let mut ments = Vec::with_capacity(mentions.len());
        for (line, m) in mentions {
            let doc = match by_id.get(&m.doc_id) {
                Some(&i) => &docs[i],
                None => {
                    return Err(Error::UnknownDocument {
                        line,
                        doc: m.doc_id,
                    })
                }
            };
            let len = doc.sentence(m.sentence_index).map(<[String]>::len);
            let in_bounds = matches!(len, Some(len) if m.start < m.end && m.end <= len);
            if !in_bounds {
                return Err(Error::SpanOutOfBounds {
                    line,
                    doc: m.doc_id,
                    sentence: m.sentence_index,
                    start: m.start,
                    end: m.end,
                    len: len.unwrap_or(0),
                });
            }
            ments.push(m);
        }

        Ok(Corpus {
            documents: docs,
            mentions: ments,
            by_id,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Corpus> {
        let mut docs = Vec::new();
        let mut pending = Vec::new();

        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::CorpusParse {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| Error::CorpusParse {
                line: lineno,
                message: e.to_string(),
            };
            let value: Value = serde_json::from_str(&line).map_err(parse_err)?;
            if value.get("mention").is_some() {
                let mut obj = value;
                let inner = obj
                    .as_object_mut()
                    .and_then(|o| o.remove("mention"))
                    .unwrap_or(Value::Null);
                if obj.as_object().is_some_and(|o| !o.is_empty()) {
                    return Err(Error::CorpusParse {
                        line: lineno,
                        message: "unexpected keys next to 'mention'".into(),
                    });
                }
                let rec: MentionRecord = serde_json::from_value(inner).map_err(parse_err)?;
                pending.push((lineno, rec));
            } else if value.get("doc").is_some() {
                let rec: DocRecord = serde_json::from_value(value).map_err(parse_err)?;
                let sentences = rec
                    .sentences
                    .into_iter()
                    .map(|s| s.into_iter().map(|t| t.nfc().collect()).collect())
                    .collect();
                docs.push((
                    lineno,
                    Document {
                        id: rec.doc,
                        sentences,
                    },
                ));
            } else {
                return Err(Error::CorpusParse {
                    line: lineno,
                    message: "expected a 'doc' or 'mention' record".into(),
                });
            }
        }

        // Flags are resolved after all documents are known, since the lexicon
        // fallback needs the mention's tokens.
        let doc_index: HashMap<&str, &Document> =
            docs.iter().map(|(_, d)| (d.id.as_str(), d)).collect();
        let mut mentions = Vec::with_capacity(pending.len());
        for (line, rec) in pending {
            let label = match rec.label {
                None => None,
                Some(v) => Some(if flag(v, "label", line)? {
                    Label::Singleton
                } else {
                    Label::NonSingleton
                }),
            };
            let single_token = doc_index
                .get(rec.doc.as_str())
                .and_then(|d| d.sentence(rec.sent))
                .filter(|_| rec.end == rec.start + 1)
                .and_then(|s| s.get(rec.start))
                .map(String::as_str);
            let is_pronoun = match rec.pron {
                Some(v) => flag(v, "pron", line)?,
                None => single_token.is_some_and(pronouns::is_pronoun),
            };
            let is_first_person_pronoun = match rec.first_person {
                Some(v) => flag(v, "first_person", line)?,
                None => single_token.is_some_and(pronouns::is_first_person),
            };
            let is_proper_name = match rec.proper {
                Some(v) => flag(v, "proper", line)?,
                None => false,
            };
            let extra_flags = rec
                .extra
                .iter()
                .map(|&v| flag(v, "extra", line))
                .collect::<Result<Vec<_>>>()?;
            mentions.push((
                line,
                LabeledMention {
                    doc_id: rec.doc,
                    sentence_index: rec.sent,
                    start: rec.start,
                    end: rec.end,
                    label,
                    is_pronoun,
                    is_proper_name,
                    is_first_person_pronoun,
                    extra_flags,
                },
            ));
        }

        Self::assemble(docs, mentions)
    }

    /// Write the corpus in the JSON Lines format, documents first.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io_err = |e| Error::io("<writer>", e);
        for doc in &self.documents {
            let line = serde_json::json!({ "doc": doc.id, "sentences": doc.sentences });
            writeln!(w, "{line}").map_err(io_err)?;
        }
        for m in &self.mentions {
            let rec = MentionRecord {
                doc: m.doc_id.clone(),
                sent: m.sentence_index,
                start: m.start,
                end: m.end,
                label: m.label.map(|l| l as u8),
                pron: Some(m.is_pronoun as u8),
                proper: Some(m.is_proper_name as u8),
                first_person: Some(m.is_first_person_pronoun as u8),
                extra: m.extra_flags.iter().map(|&f| f as u8).collect(),
            };
            let line = serde_json::json!({ "mention": rec });
            writeln!(w, "{line}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn mentions(&self) -> &[LabeledMention] {
        &self.mentions
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            documents: self.documents.len(),
            sentences: self.documents.iter().map(|d| d.sentences.len()).sum(),
            tokens: self.documents.iter().map(Document::token_count).sum(),
            mentions: self.mentions.len(),
            singletons: self.mentions.iter().filter(|m| m.is_singleton()).count(),
        }
    }

    /// Fraction of coreferent mentions, `(|M| - |S|) / |M|`.
    pub fn singleton_ratio(&self) -> Result<f64> {
        singleton_ratio(&self.mentions)
    }

    /// Replace mention labels, keeping everything else. `labels` must have one
    /// entry per mention.
    pub fn with_labels(&self, labels: &[Option<Label>]) -> Result<Corpus> {
        if labels.len() != self.mentions.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.mentions.len(),
            });
        }
        let mut out = self.clone();
        for (m, &l) in out.mentions.iter_mut().zip(labels) {
            m.label = l;
        }
        Ok(out)
    }

    /// Document ids in file order.
    pub fn document_ids(&self) -> HashSet<&str> {
        self.documents.iter().map(|d| d.id.as_str()).collect()
    }
}

/// `(|M| - |S|) / |M|` over a mention list: 1 when no mention is a singleton,
/// 0 when all are.
pub fn singleton_ratio(mentions: &[LabeledMention]) -> Result<f64> {
    if mentions.is_empty() {
        return Err(Error::NoMentions);
    }
    let total = mentions.len();
    let singletons = mentions.iter().filter(|m| m.is_singleton()).count();
    Ok((total - singletons) as f64 / total as f64)
}
