//! Vocabulary construction and the two sampling structures built from it:
//! per-word keep-probabilities for subsampling and the unigram^(3/4)
//! negative-sampling table.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngExt};
use thiserror::Error;

use crate::corpus::Sentence;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("no word reached min_count {min_count}; vocabulary is empty")]
    Empty { min_count: u64 },
    #[error("negative table size {table_size} is smaller than the vocabulary ({vocab_size})")]
    TableTooSmall { table_size: usize, vocab_size: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> VocabError {
    VocabError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Frequency-filtered vocabulary in canonical order: descending count,
/// ties broken lexicographically.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index_of: HashMap<String, u32>,
    total_count: u64,
}

impl Vocabulary {
    /// Count words over a finite sentence stream and keep those with
    /// absolute count >= `min_count`.
    pub fn build<I>(sentences: I, min_count: u64) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator,
        I::Item: Borrow<Sentence>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for sent in sentences {
            for tok in &sent.borrow().tokens {
                *counts.entry(tok.clone()).or_insert(0) += 1;
            }
        }
        Vocabulary::from_counts(counts, min_count)
    }

    /// Build from precomputed absolute counts.
    pub fn from_counts<I>(counts: I, min_count: u64) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(VocabError::Empty { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut words = Vec::with_capacity(kept.len());
        let mut word_counts = Vec::with_capacity(kept.len());
        let mut index_of = HashMap::with_capacity(kept.len());
        let mut total = 0u64;
        for (i, (word, count)) in kept.into_iter().enumerate() {
            index_of.insert(word.clone(), i as u32);
            words.push(word);
            word_counts.push(count);
            total += count;
        }
        Ok(Vocabulary {
            words,
            counts: word_counts,
            index_of,
            total_count: total,
        })
    }

    /// Build preserving the given word order instead of re-sorting.
    /// Used when the order is fixed externally, e.g. by a model file whose
    /// rows must keep their indices.
    pub fn from_ordered<I>(words: I) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut out = Vocabulary {
            words: Vec::new(),
            counts: Vec::new(),
            index_of: HashMap::new(),
            total_count: 0,
        };
        for (word, count) in words {
            let idx = out.words.len() as u32;
            if out.index_of.insert(word.clone(), idx).is_some() {
                return Err(VocabError::Parse {
                    path: String::new(),
                    line: idx as usize + 1,
                    msg: format!("duplicate word `{word}`"),
                });
            }
            out.words.push(word);
            out.counts.push(count);
            out.total_count += count;
        }
        if out.words.is_empty() {
            return Err(VocabError::Empty { min_count: 0 });
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: u32) -> &str {
        &self.words[index as usize]
    }

    pub fn index(&self, word: &str) -> Option<u32> {
        self.index_of.get(word).copied()
    }

    pub fn count(&self, index: u32) -> u64 {
        self.counts[index as usize]
    }

    /// Total corpus occurrences of retained words.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    /// f(w): relative frequency of the word among retained occurrences.
    pub fn rel_freq(&self, index: u32) -> f64 {
        self.counts[index as usize] as f64 / self.total_count as f64
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Write `#total <N>` then one `word<TAB>count` line per word in
    /// canonical order.
    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        (|| {
            writeln!(w, "#total {}", self.total_count)?;
            for (word, count) in self.words.iter().zip(&self.counts) {
                writeln!(w, "{word}\t{count}")?;
            }
            w.flush()
        })()
        .map_err(|e| io_err(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, VocabError> {
        let parse_err = |line: usize, msg: String| VocabError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();

        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty vocabulary file".into()))?;
        let header = header.map_err(|e| io_err(path, e))?;
        let total: u64 = header
            .strip_prefix("#total ")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| parse_err(1, format!("expected `#total <count>`, got `{header}`")))?;

        let mut counts = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected `word<TAB>count`".into()))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad count `{count}`")))?;
            counts.push((word.to_string(), count));
        }

        let n = counts.len();
        let vocab = Vocabulary::from_counts(counts, 0)
            .map_err(|_| parse_err(1, "vocabulary file has no words".into()))?;
        if vocab.len() != n {
            return Err(parse_err(1, "duplicate word in vocabulary file".into()));
        }
        if vocab.total_count != total {
            return Err(parse_err(
                1,
                format!(
                    "header total {total} does not match sum of counts {}",
                    vocab.total_count
                ),
            ));
        }
        Ok(vocab)
    }
}

/// Subsampling threshold, `s` of the keeping-probability formula.
#[derive(Debug, Clone, Copy)]
pub struct SubsamplingConfig {
    pub s: f64,
}

impl Default for SubsamplingConfig {
    fn default() -> Self {
        SubsamplingConfig { s: 1e-3 }
    }
}

/// Keeping probability for a word of relative frequency `f`:
/// `min(1, (sqrt(f/s) + 1) * (s/f))`.
pub fn keep_probability_freq(f: f64, s: f64) -> f64 {
    let raw = ((f / s).sqrt() + 1.0) * (s / f);
    raw.min(1.0)
}

/// Keeping probability of a vocabulary word under threshold `cfg.s`.
pub fn keep_probability(word: u32, vocab: &Vocabulary, cfg: &SubsamplingConfig) -> f64 {
    keep_probability_freq(vocab.rel_freq(word), cfg.s)
}

pub const DEFAULT_TABLE_SIZE: usize = 10_000_000;

/// Pre-expanded slot table for O(1) draws from the unigram^(3/4)
/// distribution. Word `w` occupies a contiguous run of roughly
/// `table_size * f(w)^(3/4) / sum_j f(w_j)^(3/4)` slots.
pub struct NegativeTable {
    table: Vec<u32>,
}

impl NegativeTable {
    pub fn build(vocab: &Vocabulary, table_size: usize) -> Result<NegativeTable, VocabError> {
        let n = vocab.len();
        if table_size < n {
            return Err(VocabError::TableTooSmall {
                table_size,
                vocab_size: n,
            });
        }

        let weights: Vec<f64> = (0..n as u32).map(|w| vocab.rel_freq(w).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();

        // Largest-remainder apportionment keeps every word within one slot
        // of its exact quota; words rounded to zero get one slot taken from
        // the largest holder.
        let mut slots: Vec<usize> = Vec::with_capacity(n);
        let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(n);
        let mut assigned = 0usize;
        for (i, w) in weights.iter().enumerate() {
            let quota = table_size as f64 * w / total;
            let base = quota.floor() as usize;
            slots.push(base);
            fractions.push((i, quota - base as f64));
            assigned += base;
        }
        fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(i, _) in fractions.iter().take(table_size - assigned) {
            slots[i] += 1;
        }
        for i in 0..n {
            if slots[i] == 0 {
                let donor = (0..n).max_by_key(|&j| slots[j]).unwrap();
                slots[donor] -= 1;
                slots[i] += 1;
            }
        }

        let mut table = Vec::with_capacity(table_size);
        for (i, &s) in slots.iter().enumerate() {
            table.extend(std::iter::repeat_n(i as u32, s));
        }
        debug_assert_eq!(table.len(), table_size);
        Ok(NegativeTable { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Uniform draw over table slots.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.table[rng.random_range(0..self.table.len())]
    }

    /// Number of slots held by `word`, for distribution checks.
    pub fn occupancy(&self, word: u32) -> usize {
        self.table.iter().filter(|&&w| w == word).count()
    }
}

/// Draw a negative word, re-drawing while the result equals `exclude`.
/// Requires a vocabulary of at least two words to terminate.
pub fn sample_negative<R: Rng + ?Sized>(table: &NegativeTable, rng: &mut R, exclude: u32) -> u32 {
    loop {
        let w = table.draw(rng);
        if w != exclude {
            return w;
        }
    }
}
