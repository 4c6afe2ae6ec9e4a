//! Pre-trained word vectors in word2vec text format.
//!
//! The table reserves row 0 as the all-zero vector shared by padding and
//! out-of-vocabulary words; file words get indices `1..=V` in file order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Index shared by padding positions and unknown words.
pub const PAD_INDEX: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    /// `(words.len() + 1) x dim`, row-major, row 0 zero.
    matrix: Vec<f64>,
}

impl EmbeddingTable {
    /// Build a table from `(word, vector)` pairs. Duplicate words keep their
    /// first vector.
    pub fn from_vectors<I, S>(dim: usize, entries: I) -> Result<EmbeddingTable>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut table = EmbeddingTable {
            dim,
            vocab: HashMap::new(),
            words: Vec::new(),
            matrix: vec![0.0; dim],
        };
        for (i, (word, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: vector.len(),
                });
            }
            table.push(word.as_ref(), &vector);
        }
        Ok(table)
    }

    fn push(&mut self, word: &str, vector: &[f64]) -> bool {
        let word: String = word.nfc().collect();
        if self.vocab.contains_key(&word) {
            return false;
        }
        self.vocab.insert(word.clone(), self.words.len() + 1);
        self.words.push(word);
        self.matrix.extend_from_slice(vector);
        true
    }

    pub fn load(path: impl AsRef<Path>, max_words: Option<usize>) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), max_words)
    }

    /// Parse word2vec text format. A first line of exactly two integers is a
    /// `V D` header; otherwise the file is headerless and `D` is taken from
    /// the first vector line.
    pub fn from_reader<R: BufRead>(reader: R, max_words: Option<usize>) -> Result<EmbeddingTable> {
        if max_words == Some(0) {
            return Err(Error::InvalidConfig("max_words must be positive".into()));
        }
        let mut declared: Option<usize> = None;
        let mut dim: Option<usize> = None;
        let mut table: Option<EmbeddingTable> = None;
        let mut seen_lines = 0usize;

        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::EmbeddingFormat {
                line: lineno,
                message: e.to_string(),
            })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 1 && fields.len() == 2 {
                if let (Ok(v), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if d == 0 {
                        return Err(Error::EmbeddingFormat {
                            line: 1,
                            message: "header declares zero dimensions".into(),
                        });
                    }
                    declared = Some(v);
                    dim = Some(d);
                    continue;
                }
            }
            let d = *dim.get_or_insert(fields.len() - 1);
            if d == 0 {
                return Err(Error::EmbeddingFormat {
                    line: lineno,
                    message: "vector line has no components".into(),
                });
            }
            if fields.len() - 1 != d {
                return Err(Error::DimensionMismatch {
                    line: lineno,
                    expected: d,
                    found: fields.len() - 1,
                });
            }
            seen_lines += 1;
            if declared.is_some_and(|v| seen_lines > v) {
                return Err(Error::EmbeddingFormat {
                    line: lineno,
                    message: format!(
                        "more vectors than the {} declared in the header",
                        declared.unwrap()
                    ),
                });
            }
            let t = table.get_or_insert_with(|| EmbeddingTable {
                dim: d,
                vocab: HashMap::new(),
                words: Vec::new(),
                matrix: vec![0.0; d],
            });
            if max_words.is_some_and(|m| t.len() >= m) {
                continue;
            }
            let mut vector = Vec::with_capacity(d);
            for f in &fields[1..] {
                let x: f64 = f.parse().map_err(|_| Error::EmbeddingFormat {
                    line: lineno,
                    message: format!("non-numeric component '{f}'"),
                })?;
                if !x.is_finite() {
                    return Err(Error::EmbeddingFormat {
                        line: lineno,
                        message: format!("non-finite component '{f}'"),
                    });
                }
                vector.push(x);
            }
            if !t.push(fields[0], &vector) {
                warn!(
                    "embedding line {lineno}: duplicate word '{}' ignored",
                    fields[0]
                );
            }
        }

        if let Some(v) = declared {
            if seen_lines != v {
                return Err(Error::EmbeddingFormat {
                    line: 1,
                    message: format!("header declares {v} vectors but file has {seen_lines}"),
                });
            }
        }
        match (table, dim) {
            (Some(t), _) => Ok(t),
            (None, Some(d)) => Ok(EmbeddingTable {
                dim: d,
                vocab: HashMap::new(),
                words: Vec::new(),
                matrix: vec![0.0; d],
            }),
            (None, None) => Err(Error::EmbeddingFormat {
                line: 1,
                message: "empty embedding file".into(),
            }),
        }
    }

    /// Write in word2vec text format with a `V D` header.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io_err = |e| Error::io("<writer>", e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io_err)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}").map_err(io_err)?;
            for x in self.row(i + 1) {
                write!(w, " {x}").map_err(io_err)?;
            }
            writeln!(w).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of words, excluding the padding row.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Matrix rows, `len() + 1`.
    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> usize {
        if let Some(&i) = self.vocab.get(word) {
            return i;
        }
        // Fall back to the normalized form only when needed.
        let nfc: String = word.nfc().collect();
        self.vocab.get(&nfc).copied().unwrap_or(PAD_INDEX)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index_of(word) != PAD_INDEX
    }

    /// Row `index`; panics when `index >= rows()`.
    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    /// The word's vector, or the zero vector for unknown words.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.row(self.index_of(word))
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// SHA-256 over the dimension and the raw matrix bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for x in &self.matrix {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "3 4\nएक 0.1 0.2 0.3 0.4\nदो 1 2 3 4\ntree -1 -2 -3 -4.5\n";

    #[test]
    fn loads_header_file() {
        let t = EmbeddingTable::from_reader(FIXTURE.as_bytes(), None).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows(), 4);
        assert_eq!(t.matrix().len(), 16);
        assert_eq!(t.row(0), &[0.0; 4]);
        assert_eq!(t.lookup("दो"), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.index_of("एक"), 1);
        assert_eq!(t.index_of("tree"), 3);
    }

    #[test]
    fn oov_is_zero() {
        let t = EmbeddingTable::from_reader(FIXTURE.as_bytes(), None).unwrap();
        assert_eq!(t.lookup("xyzzy"), &[0.0; 4]);
        assert_eq!(t.lookup(""), &[0.0; 4]);
        assert_eq!(t.index_of("xyzzy"), PAD_INDEX);
        // case-sensitive
        assert_eq!(t.index_of("Tree"), PAD_INDEX);
    }

    #[test]
    fn max_words_truncates() {
        let t = EmbeddingTable::from_reader(FIXTURE.as_bytes(), Some(2)).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.contains("एक") && t.contains("दो"));
        assert!(!t.contains("tree"));
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let text = "2 4\na 1 2 3 4\nb 1 2 3\n";
        match EmbeddingTable::from_reader(text.as_bytes(), None) {
            Err(Error::DimensionMismatch {
                line,
                expected,
                found,
            }) => assert_eq!((line, expected, found), (3, 4, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_component() {
        let text = "1 2\na 1 x\n";
        assert!(matches!(
            EmbeddingTable::from_reader(text.as_bytes(), None),
            Err(Error::EmbeddingFormat { line: 2, .. })
        ));
    }

    #[test]
    fn header_count_mismatch() {
        let text = "3 2\na 1 2\nb 1 2\n";
        assert!(EmbeddingTable::from_reader(text.as_bytes(), None).is_err());
        let text = "1 2\na 1 2\nb 1 2\n";
        assert!(EmbeddingTable::from_reader(text.as_bytes(), None).is_err());
    }

    #[test]
    fn headerless_file_infers_dimension() {
        let text = "a 1 2 3\nb 4 5 6\n";
        let t = EmbeddingTable::from_reader(text.as_bytes(), None).unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
        assert_eq!(t.lookup("b"), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn duplicate_word_keeps_first() {
        let text = "3 2\na 1 2\na 3 4\nb 5 6\n";
        let t = EmbeddingTable::from_reader(text.as_bytes(), None).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("a"), &[1.0, 2.0]);
        assert_eq!(t.index_of("b"), 2);
    }

    #[test]
    fn write_then_read_is_identical() {
        let t = EmbeddingTable::from_reader(FIXTURE.as_bytes(), None).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let again = EmbeddingTable::from_reader(buf.as_slice(), None).unwrap();
        assert_eq!(t, again);
        assert_eq!(t.digest(), again.digest());
    }
}
