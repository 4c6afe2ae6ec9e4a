//! Fixed-shape encoding of mentions: padded word-index sequences for the
//! mention and its context, plus the binary syntactic vector.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Label, LabeledMention};
use crate::embeddings::{EmbeddingTable, PAD_INDEX};
use crate::error::{Error, Result};

/// Number of built-in syntactic flags: pronoun, proper name, first person.
pub const SYNTACTIC_FLAGS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Up to two tokens on each side of the mention.
    TwoByTwo,
    /// Every other token of the sentence, trimmed around the mention.
    AllWords,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two_by_two" => Ok(ContextMode::TwoByTwo),
            "all" | "all_words" => Ok(ContextMode::AllWords),
            other => Err(Error::InvalidConfig(format!(
                "unknown context mode '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for ContextMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContextMode::TwoByTwo => "two",
            ContextMode::AllWords => "all",
        })
    }
}

/// Which input branches feed the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branches {
    pub words: bool,
    pub context: bool,
    pub syntactic: bool,
}

impl Branches {
    pub const ALL: Branches = Branches {
        words: true,
        context: true,
        syntactic: true,
    };

    /// The four configurations compared in the ablation tables.
    pub const ABLATIONS: [Branches; 4] = [
        Branches {
            words: true,
            context: false,
            syntactic: false,
        },
        Branches {
            words: true,
            context: true,
            syntactic: false,
        },
        Branches {
            words: true,
            context: false,
            syntactic: true,
        },
        Branches::ALL,
    ];

    pub fn any(&self) -> bool {
        self.words || self.context || self.syntactic
    }
}

impl Default for Branches {
    fn default() -> Self {
        Branches::ALL
    }
}

impl std::str::FromStr for Branches {
    type Err = Error;

    /// Comma-separated subset of `words,context,syntactic`.
    fn from_str(s: &str) -> Result<Self> {
        let mut b = Branches {
            words: false,
            context: false,
            syntactic: false,
        };
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "words" | "word" => b.words = true,
                "context" => b.context = true,
                "syntactic" | "syn" => b.syntactic = true,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown feature group '{other}'"
                    )))
                }
            }
        }
        if !b.any() {
            return Err(Error::InvalidConfig(
                "at least one feature group is required".into(),
            ));
        }
        Ok(b)
    }
}

impl std::fmt::Display for Branches {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<&str> = [
            (self.words, "words"),
            (self.context, "context"),
            (self.syntactic, "syntactic"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        f.write_str(&parts.join("+"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub max_mention_len: usize,
    pub context_mode: ContextMode,
    pub context_len: usize,
    pub branches: Branches,
    /// File-provided flags appended after the three built-in ones.
    pub extra_flags: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            max_mention_len: 10,
            context_mode: ContextMode::TwoByTwo,
            context_len: 10,
            branches: Branches::ALL,
            extra_flags: 0,
        }
    }
}

impl FeatureConfig {
    pub fn syntactic_len(&self) -> usize {
        SYNTACTIC_FLAGS + self.extra_flags
    }

    /// `min_len` is the widest convolution the sequences must support.
    pub fn validate(&self, min_len: usize) -> Result<()> {
        if !self.branches.any() {
            return Err(Error::InvalidConfig("no input branch enabled".into()));
        }
        if self.max_mention_len < min_len || self.context_len < min_len {
            return Err(Error::InvalidConfig(format!(
                "max_mention_len {} and context_len {} must be at least the widest filter ({min_len})",
                self.max_mention_len, self.context_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub mention_ids: Vec<usize>,
    pub context_ids: Vec<usize>,
    pub syntactic: Vec<f64>,
    pub label: Option<Label>,
}

impl EncodedExample {
    pub fn gold(&self, index: usize) -> Result<Label> {
        self.label.ok_or(Error::Unlabeled { index })
    }
}

fn pad(mut ids: Vec<usize>, len: usize) -> Vec<usize> {
    ids.resize(len, PAD_INDEX);
    ids
}

/// Mention tokens as vocabulary indices: the first `max_mention_len` tokens,
/// right-padded with 0.
pub fn encode_mention_words(
    mention: &LabeledMention,
    doc: &Document,
    table: &EmbeddingTable,
    cfg: &FeatureConfig,
) -> Vec<usize> {
    let ids = mention
        .tokens(doc)
        .iter()
        .take(cfg.max_mention_len)
        .map(|t| table.index_of(t))
        .collect();
    pad(ids, cfg.max_mention_len)
}

/// Context tokens from the mention's sentence, in textual order, right-padded.
///
/// In `AllWords` mode the sentence is trimmed to `context_len` by taking
/// tokens alternately from the left and right neighbourhoods, nearest first,
/// starting on the left.
pub fn extract_context(
    mention: &LabeledMention,
    doc: &Document,
    table: &EmbeddingTable,
    cfg: &FeatureConfig,
) -> Vec<usize> {
    let sentence = &doc.sentences[mention.sentence_index];
    let (left, right) = match cfg.context_mode {
        ContextMode::TwoByTwo => {
            let left = mention.start.saturating_sub(2)..mention.start;
            let right = mention.end..(mention.end + 2).min(sentence.len());
            (left, right)
        }
        ContextMode::AllWords => {
            let mut n_left = 0;
            let mut n_right = 0;
            let avail_left = mention.start;
            let avail_right = sentence.len() - mention.end;
            while n_left + n_right < cfg.context_len
                && (n_left < avail_left || n_right < avail_right)
            {
                if n_left < avail_left {
                    n_left += 1;
                }
                if n_left + n_right < cfg.context_len && n_right < avail_right {
                    n_right += 1;
                }
            }
            (
                mention.start - n_left..mention.start,
                mention.end..mention.end + n_right,
            )
        }
    };
    let ids = sentence[left]
        .iter()
        .chain(&sentence[right])
        .take(cfg.context_len)
        .map(|t| table.index_of(t))
        .collect();
    pad(ids, cfg.context_len)
}

/// `[pronoun, proper name, first person, extra...]` as 0/1 values.
pub fn syntactic_vector(mention: &LabeledMention, cfg: &FeatureConfig) -> Vec<f64> {
    let mut v = vec![
        mention.is_pronoun as u8 as f64,
        mention.is_proper_name as u8 as f64,
        mention.is_first_person_pronoun as u8 as f64,
    ];
    v.extend(
        (0..cfg.extra_flags)
            .map(|i| mention.extra_flags.get(i).copied().unwrap_or(false) as u8 as f64),
    );
    v
}

pub fn encode_mention(
    mention: &LabeledMention,
    doc: &Document,
    table: &EmbeddingTable,
    cfg: &FeatureConfig,
) -> EncodedExample {
    EncodedExample {
        mention_ids: encode_mention_words(mention, doc, table, cfg),
        context_ids: extract_context(mention, doc, table, cfg),
        syntactic: syntactic_vector(mention, cfg),
        label: mention.label,
    }
}

/// Encode mentions in order. Every mention's document must be in `corpus`.
pub fn encode_corpus(
    mentions: &[LabeledMention],
    corpus: &Corpus,
    table: &EmbeddingTable,
    cfg: &FeatureConfig,
) -> Result<Vec<EncodedExample>> {
    mentions
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let doc = corpus.document(&m.doc_id).ok_or(Error::UnknownDocument {
                line: i + 1,
                doc: m.doc_id.clone(),
            })?;
            if doc
                .sentence(m.sentence_index)
                .is_none_or(|s| m.start >= m.end || m.end > s.len())
            {
                return Err(Error::SpanOutOfBounds {
                    line: i + 1,
                    doc: m.doc_id.clone(),
                    sentence: m.sentence_index,
                    start: m.start,
                    end: m.end,
                    len: doc.sentence(m.sentence_index).map_or(0, <[String]>::len),
                });
            }
            Ok(encode_mention(m, doc, table, cfg))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(words: &[&str]) -> EmbeddingTable {
        EmbeddingTable::from_vectors(2, words.iter().map(|w| (*w, vec![1.0, 1.0]))).unwrap()
    }

    fn sentence_doc(n: usize) -> Document {
        Document {
            id: "d".into(),
            sentences: vec![(0..n).map(|i| format!("w{i}")).collect()],
        }
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn mention(start: usize, end: usize) -> LabeledMention {
        LabeledMention {
            doc_id: "d".into(),
            sentence_index: 0,
            start,
            end,
            label: Some(Label::NonSingleton),
            is_pronoun: false,
            is_proper_name: false,
            is_first_person_pronoun: false,
            extra_flags: vec![],
        }
    }

    fn full_table(n: usize) -> EmbeddingTable {
        let w = words(n);
        table(&w.iter().map(String::as_str).collect::<Vec<_>>())
    }

    #[test]
    fn short_mention_is_padded() {
        let doc = sentence_doc(6);
        let t = full_table(6);
        let ids = encode_mention_words(&mention(1, 4), &doc, &t, &FeatureConfig::default());
        assert_eq!(ids, vec![2, 3, 4, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn long_mention_keeps_first_tokens() {
        let doc = sentence_doc(12);
        let t = full_table(12);
        let ids = encode_mention_words(&mention(0, 12), &doc, &t, &FeatureConfig::default());
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn oov_mention_encodes_as_padding() {
        let doc = sentence_doc(3);
        let t = table(&["other"]);
        let ids = encode_mention_words(&mention(0, 3), &doc, &t, &FeatureConfig::default());
        assert_eq!(ids, vec![0; 10]);
    }

    #[test]
    fn two_by_two_window() {
        let doc = sentence_doc(6);
        let t = full_table(6);
        let cfg = FeatureConfig::default();
        // tokens 0,1 before and 4,5 after => indices 1,2,5,6
        assert_eq!(
            extract_context(&mention(2, 4), &doc, &t, &cfg),
            vec![1, 2, 5, 6, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            extract_context(&mention(0, 1), &doc, &t, &cfg),
            vec![2, 3, 0, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            extract_context(&mention(5, 6), &doc, &t, &cfg),
            vec![4, 5, 0, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn all_words_trims_around_mention() {
        let doc = sentence_doc(20);
        let t = full_table(20);
        let cfg = FeatureConfig {
            context_mode: ContextMode::AllWords,
            ..FeatureConfig::default()
        };
        // mention at [9,10): tokens 4..9 before and 10..15 after
        let expected: Vec<usize> = (4..9).chain(10..15).map(|i| i + 1).collect();
        assert_eq!(extract_context(&mention(9, 10), &doc, &t, &cfg), expected);
        // lopsided: mention at [1,2): token 0 then 2..11
        let expected: Vec<usize> = std::iter::once(0).chain(2..11).map(|i| i + 1).collect();
        assert_eq!(extract_context(&mention(1, 2), &doc, &t, &cfg), expected);
        // short sentence: everything, padded
        let doc = sentence_doc(5);
        assert_eq!(
            extract_context(&mention(2, 3), &doc, &t, &cfg),
            vec![1, 2, 4, 5, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn syntactic_flags() {
        let cfg = FeatureConfig::default();
        let mut m = mention(0, 1);
        assert_eq!(syntactic_vector(&m, &cfg), vec![0.0, 0.0, 0.0]);
        m.is_pronoun = true;
        assert_eq!(syntactic_vector(&m, &cfg), vec![1.0, 0.0, 0.0]);
        m.is_pronoun = false;
        m.is_proper_name = true;
        assert_eq!(syntactic_vector(&m, &cfg), vec![0.0, 1.0, 0.0]);
        m.extra_flags = vec![true];
        let cfg = FeatureConfig {
            extra_flags: 2,
            ..cfg
        };
        assert_eq!(syntactic_vector(&m, &cfg), vec![0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn parses_cli_spellings() {
        assert_eq!("two".parse::<ContextMode>().unwrap(), ContextMode::TwoByTwo);
        assert_eq!("all".parse::<ContextMode>().unwrap(), ContextMode::AllWords);
        let b: Branches = "words,syntactic".parse().unwrap();
        assert!(b.words && !b.context && b.syntactic);
        assert!("".parse::<Branches>().is_err());
        assert!("words,pos".parse::<Branches>().is_err());
        assert_eq!(Branches::ALL.to_string(), "words+context+syntactic");
    }

    #[test]
    fn config_validation() {
        let cfg = FeatureConfig::default();
        assert!(cfg.validate(4).is_ok());
        assert!(cfg.validate(11).is_err());
    }

    #[test]
    fn encode_corpus_empty_and_pure() {
        let doc = sentence_doc(6);
        let corpus = Corpus::new(vec![doc], vec![mention(1, 3), mention(4, 6)]).unwrap();
        let t = full_table(6);
        let cfg = FeatureConfig::default();
        assert!(encode_corpus(&[], &corpus, &t, &cfg).unwrap().is_empty());
        let a = encode_corpus(corpus.mentions(), &corpus, &t, &cfg).unwrap();
        let b = encode_corpus(corpus.mentions(), &corpus, &t, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn shapes_are_fixed(
                n in 1usize..30,
                a in 0usize..30,
                b in 0usize..30,
                all in any::<bool>(),
            ) {
                let (s, e) = (a.min(b) % n, (a.max(b) % n) + 1);
                let (s, e) = if s < e { (s, e) } else { (e - 1, e) };
                let doc = sentence_doc(n);
                let t = full_table(n);
                let cfg = FeatureConfig {
                    context_mode: if all { ContextMode::AllWords } else { ContextMode::TwoByTwo },
                    ..FeatureConfig::default()
                };
                let ex = encode_mention(&mention(s, e), &doc, &t, &cfg);
                prop_assert_eq!(ex.mention_ids.len(), cfg.max_mention_len);
                prop_assert_eq!(ex.context_ids.len(), cfg.context_len);
                prop_assert_eq!(ex.syntactic.len(), 3);
                prop_assert!(ex.mention_ids.iter().chain(&ex.context_ids).all(|&i| i < t.rows()));
                if !all {
                    prop_assert!(ex.context_ids.iter().filter(|&&i| i != 0).count() <= 4);
                }
                // context never contains mention tokens
                for &i in &ex.context_ids {
                    if i != 0 {
                        prop_assert!(i - 1 < s || i > e);
                    }
                }
            }
        }
    }
}
