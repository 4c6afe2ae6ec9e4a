//! Seeded synthetic corpora and embedding tables for tests, benchmarks and
//! demos.
//!
//! * [`scale_corpus`]: a corpus with fixed document, sentence and token
//!   totals, for exercising loading and statistics at realistic size.
//! * [`separable_task`]: a labelling that a correct network can learn. A
//!   mention is a singleton exactly when a marker token sits within two
//!   tokens of it *and* its pronoun flag is set.
//! * [`memorization_task`]: random labels on distinct random inputs, which
//!   the network can only fit by memorizing.

use crate::corpus::{Corpus, Document, Label, LabeledMention, Split};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::tensor::RngState;

/// Token whose presence near a mention drives the separable labelling.
pub const MARKER: &str = "<marker>";

fn filler(i: usize) -> String {
    format!("w{i:04}")
}

/// Random vectors for `words`, uniform in `[-0.5, 0.5)`.
pub fn random_embeddings<I, S>(words: I, dim: usize, seed: u64) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut rng = RngState::derive(seed, 7);
    let entries: Vec<(String, Vec<f64>)> = words
        .into_iter()
        .map(|w| (w.into(), (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect()))
        .collect();
    EmbeddingTable::from_vectors(dim, entries)
}

fn mention(doc: &str, sentence: usize, start: usize, end: usize) -> LabeledMention {
    LabeledMention {
        doc_id: doc.to_string(),
        sentence_index: sentence,
        start,
        end,
        label: None,
        is_pronoun: false,
        is_proper_name: false,
        is_first_person_pronoun: false,
        extra_flags: Vec::new(),
    }
}

pub const SCALE_DOCUMENTS: usize = 275;
pub const SCALE_SENTENCES: usize = 3600;
pub const SCALE_TOKENS: usize = 78_000;

/// Corpus with exactly [`SCALE_DOCUMENTS`] documents, [`SCALE_SENTENCES`]
/// sentences and [`SCALE_TOKENS`] tokens, and two or three labelled mentions
/// per sentence.
pub fn scale_corpus(seed: u64) -> Result<Corpus> {
    let mut rng = RngState::new(seed);
    let base_sents = SCALE_SENTENCES / SCALE_DOCUMENTS;
    let mut sents_per_doc = vec![base_sents; SCALE_DOCUMENTS];
    for n in sents_per_doc
        .iter_mut()
        .take(SCALE_SENTENCES % SCALE_DOCUMENTS)
    {
        *n += 1;
    }
    rng.shuffle(&mut sents_per_doc);

    let base_len = SCALE_TOKENS / SCALE_SENTENCES;
    let mut lens = vec![base_len; SCALE_SENTENCES];
    for n in lens.iter_mut().take(SCALE_TOKENS % SCALE_SENTENCES) {
        *n += 1;
    }
    rng.shuffle(&mut lens);

    let mut lens = lens.into_iter();
    let mut documents = Vec::with_capacity(SCALE_DOCUMENTS);
    let mut mentions = Vec::new();
    for (d, &n_sents) in sents_per_doc.iter().enumerate() {
        let id = format!("doc{d:03}");
        let mut sentences = Vec::with_capacity(n_sents);
        for s in 0..n_sents {
            let len = lens.next().expect("sentence lengths sum to the total");
            sentences.push(
                (0..len)
                    .map(|_| filler(rng.below(2000)))
                    .collect::<Vec<_>>(),
            );
            let per = 2 + rng.below(2);
            let slot = len / per;
            for k in 0..per {
                let start = k * slot + rng.below(slot - 3);
                let mut m = mention(&id, s, start, start + 1 + rng.below(3));
                m.label = Some(if rng.bernoulli(0.4) {
                    Label::Singleton
                } else {
                    Label::NonSingleton
                });
                m.is_pronoun = rng.bernoulli(0.2);
                m.is_proper_name = !m.is_pronoun && rng.bernoulli(0.3);
                m.is_first_person_pronoun = m.is_pronoun && rng.bernoulli(0.3);
                mentions.push(m);
            }
        }
        documents.push(Document { id, sentences });
    }
    Corpus::new(documents, mentions)
}

/// A generated corpus together with an embedding table covering every token.
#[derive(Clone, Debug)]
pub struct Task {
    pub corpus: Corpus,
    pub embedding: EmbeddingTable,
}

impl Task {
    /// Train on the first `train_docs` documents, test on the rest, no
    /// validation partition.
    pub fn ordered_split(&self, train_docs: usize) -> Split {
        let mut split = Split::default();
        for (i, doc) in self.corpus.documents().iter().enumerate() {
            let (docs, ments) = if i < train_docs {
                (&mut split.train_docs, &mut split.train)
            } else {
                (&mut split.test_docs, &mut split.test)
            };
            docs.push(doc.id.clone());
            ments.extend(
                self.corpus
                    .mentions()
                    .iter()
                    .filter(|m| m.doc_id == doc.id)
                    .cloned(),
            );
        }
        split
    }
}

const TASK_VOCAB: usize = 50;

/// `docs` documents of `mentions_per_doc` one-mention sentences. Half the
/// mentions are singletons (marker adjacent and pronoun flag set). Of the
/// rest, half are marker-only (the negatives that need the flag to tell
/// apart) and the others are pronoun-only or neither. Marker
/// tokens never occur in a sentence whose mention lacks one.
pub fn separable_task(seed: u64, docs: usize, mentions_per_doc: usize, dim: usize) -> Result<Task> {
    let mut rng = RngState::new(seed);
    let mut documents = Vec::with_capacity(docs);
    let mut mentions = Vec::with_capacity(docs * mentions_per_doc);
    for d in 0..docs {
        let id = format!("sep{d:03}");
        let mut sentences = Vec::with_capacity(mentions_per_doc);
        for s in 0..mentions_per_doc {
            let (marker, pron) = match rng.below(8) {
                0..=3 => (true, true),
                4 | 5 => (true, false),
                6 => (false, true),
                _ => (false, false),
            };
            let left = 2 + rng.below(4);
            let len = 1 + rng.below(3);
            let right = 2 + rng.below(4);
            let mut tokens: Vec<String> = (0..left + len + right)
                .map(|_| filler(rng.below(TASK_VOCAB)))
                .collect();
            if marker {
                let at = match rng.below(4) {
                    0 => left - 2,
                    1 => left - 1,
                    2 => left + len,
                    _ => left + len + 1,
                };
                tokens[at] = MARKER.to_string();
            }
            sentences.push(tokens);
            let mut m = mention(&id, s, left, left + len);
            m.is_pronoun = pron;
            m.label = Some(if marker && pron {
                Label::Singleton
            } else {
                Label::NonSingleton
            });
            mentions.push(m);
        }
        documents.push(Document { id, sentences });
    }
    let corpus = Corpus::new(documents, mentions)?;
    let words = std::iter::once(MARKER.to_string()).chain((0..TASK_VOCAB).map(filler));
    let embedding = random_embeddings(words, dim, seed)?;
    Ok(Task { corpus, embedding })
}

/// `n` mentions with random labels, random flags and random sentences drawn
/// from a large vocabulary, grouped five to a document.
pub fn memorization_task(seed: u64, n: usize, dim: usize) -> Result<Task> {
    let vocab = 5000;
    let mut rng = RngState::new(seed);
    let mut documents = Vec::new();
    let mut mentions = Vec::with_capacity(n);
    for d in 0..n.div_ceil(5) {
        let id = format!("mem{d:03}");
        let mut sentences = Vec::new();
        for s in 0..(n - 5 * d).min(5) {
            let len = 6 + rng.below(5);
            sentences.push((0..len).map(|_| filler(rng.below(vocab))).collect());
            let start = rng.below(len - 2);
            let mut m = mention(&id, s, start, start + 1 + rng.below(2));
            m.label = Some(if rng.bernoulli(0.5) {
                Label::Singleton
            } else {
                Label::NonSingleton
            });
            m.is_pronoun = rng.bernoulli(0.5);
            m.is_proper_name = rng.bernoulli(0.5);
            mentions.push(m);
        }
        documents.push(Document { id, sentences });
    }
    let corpus = Corpus::new(documents, mentions)?;
    let embedding = random_embeddings((0..vocab).map(filler), dim, seed)?;
    Ok(Task { corpus, embedding })
}

/// Same corpus with labels shuffled across mentions.
pub fn permute_labels(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let mut labels: Vec<Option<Label>> = corpus.mentions().iter().map(|m| m.label).collect();
    RngState::derive(seed, 3).shuffle(&mut labels);
    corpus.with_labels(&labels)
}

/// Same corpus with every token replaced by one absent from any table built
/// here.
pub fn all_oov(corpus: &Corpus) -> Result<Corpus> {
    let documents = corpus
        .documents()
        .iter()
        .map(|d| Document {
            id: d.id.clone(),
            sentences: d
                .sentences
                .iter()
                .map(|s| s.iter().map(|t| format!("oov:{t}")).collect())
                .collect(),
        })
        .collect();
    Corpus::new(documents, corpus.mentions().to_vec())
}
