//! Corpus preprocessing: sentence splitting and token cleaning.
//!
//! Raw text is cut into sentences on a configurable separator set, every
//! character outside the configured alphabet is replaced by a space,
//! tokens are lowercased and purely numeric tokens are folded into a
//! single placeholder token. Processing is single pass and bounded by the
//! longest sentence, so corpora larger than RAM stream through fine.

use std::collections::BTreeSet;
use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Encoding { offset: u64 },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// A cleaned sentence: lowercase tokens with no separator or special
/// characters left in them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Characters that survive cleaning (besides ASCII digits, which are always
/// kept so that numeric tokens can be folded afterwards).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: BTreeSet<char>,
}

impl Alphabet {
    /// ASCII letters plus the accented vowels Italian needs.
    pub fn italian() -> Self {
        let mut chars: BTreeSet<char> = ('a'..='z').chain('A'..='Z').collect();
        chars.extend("àèéìòùÀÈÉÌÒÙ".chars());
        Alphabet { chars }
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        Alphabet {
            chars: chars.into_iter().collect(),
        }
    }

    pub fn contains(&self, c: char) -> bool {
        self.chars.contains(&c)
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    /// Characters that end a sentence.
    pub sentence_separators: BTreeSet<char>,
    /// Replacement token for purely numeric tokens.
    pub num_token: String,
    /// Lowercase text before cleaning.
    pub lowercase: bool,
    /// Word characters retained by cleaning.
    pub alphabet: Alphabet,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            sentence_separators: ['.', '?', '!'].into_iter().collect(),
            num_token: "<NUM>".to_string(),
            lowercase: true,
            alphabet: Alphabet::italian(),
        }
    }
}

/// Streaming sentence splitter over a byte reader.
///
/// Yields the text between separator characters, in order, separators
/// consumed. Zero-length segments (adjacent separators, trailing separator)
/// are dropped; whitespace-only segments are kept and end up as empty
/// sentences in the tokenizer, which drops them.
pub struct SentenceSplitter<R> {
    reader: R,
    separators: BTreeSet<char>,
    /// Bytes read from `reader` but not yet decoded.
    pending: Vec<u8>,
    /// Absolute byte offset of `pending[0]` in the input.
    offset: u64,
    current: String,
    eof: bool,
    failed: bool,
}

impl<R: BufRead> SentenceSplitter<R> {
    pub fn new(reader: R, cfg: &PreprocessConfig) -> Self {
        SentenceSplitter {
            reader,
            separators: cfg.sentence_separators.clone(),
            pending: Vec::new(),
            offset: 0,
            current: String::new(),
            eof: false,
            failed: false,
        }
    }

    /// Decode what is decodable from `pending`, moving chars into
    /// `current`, and return a finished sentence as soon as a separator is
    /// seen. `Ok(None)` means more input is needed.
    fn drain_pending(&mut self) -> Result<Option<String>, CorpusError> {
        loop {
            if self.pending.is_empty() {
                return Ok(None);
            }
            let (valid, error_len) = match std::str::from_utf8(&self.pending) {
                Ok(s) => (s.len(), None),
                Err(e) => (e.valid_up_to(), e.error_len()),
            };
            let text = unsafe { std::str::from_utf8_unchecked(&self.pending[..valid]) };
            let mut consumed = 0;
            let mut out = None;
            for c in text.chars() {
                consumed += c.len_utf8();
                if self.separators.contains(&c) {
                    out = Some(std::mem::take(&mut self.current));
                    break;
                }
                self.current.push(c);
            }
            self.pending.drain(..consumed);
            self.offset += consumed as u64;
            match out {
                Some(s) if !s.is_empty() => return Ok(Some(s)),
                Some(_) => continue, // zero-length segment, dropped
                None => {}
            }
            if consumed == valid || valid == 0 {
                // Everything decodable is consumed.
                match error_len {
                    Some(_) => return Err(CorpusError::Encoding { offset: self.offset }),
                    None if self.eof && !self.pending.is_empty() => {
                        return Err(CorpusError::Encoding { offset: self.offset })
                    }
                    None => return Ok(None),
                }
            }
        }
    }
}

impl<R: BufRead> Iterator for SentenceSplitter<R> {
    type Item = Result<String, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            match self.drain_pending() {
                Ok(Some(s)) => return Some(Ok(s)),
                Ok(None) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
            if self.eof {
                if self.current.is_empty() {
                    return None;
                }
                return Some(Ok(std::mem::take(&mut self.current)));
            }
            let mut chunk = [0u8; 8192];
            match self.reader.read(&mut chunk) {
                Ok(0) => self.eof = true,
                Ok(n) => self.pending.extend_from_slice(&chunk[..n]),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
        }
    }
}

/// Split raw text into raw sentence strings on the configured separators.
pub fn split_sentences<R: BufRead>(reader: R, cfg: &PreprocessConfig) -> SentenceSplitter<R> {
    SentenceSplitter::new(reader, cfg)
}

/// In-memory convenience for [`split_sentences`].
pub fn split_sentences_str(text: &str, cfg: &PreprocessConfig) -> Vec<String> {
    split_sentences(text.as_bytes(), cfg)
        .collect::<Result<_, _>>()
        .expect("str input is valid UTF-8")
}

/// Clean and tokenize one raw sentence.
///
/// Characters outside the alphabet (and non-digits) become spaces, text is
/// lowercased, and purely numeric tokens are folded to `cfg.num_token`.
/// A literal `cfg.num_token` in the input passes through unchanged, so
/// already-preprocessed text tokenizes to itself.
pub fn tokenize_sentence(raw: &str, cfg: &PreprocessConfig) -> Sentence {
    let mut tokens = Vec::new();
    let mut cleaned = String::new();
    for chunk in raw.split_whitespace() {
        if chunk == cfg.num_token {
            tokens.push(cfg.num_token.clone());
            continue;
        }
        cleaned.clear();
        for raw_char in chunk.chars() {
            if cfg.lowercase {
                for c in raw_char.to_lowercase() {
                    push_cleaned(&mut cleaned, c, &cfg.alphabet);
                }
            } else {
                push_cleaned(&mut cleaned, raw_char, &cfg.alphabet);
            }
        }
        for sub in cleaned.split_whitespace() {
            tokens.push(fold_numeric(sub, cfg).to_string());
        }
    }
    Sentence { tokens }
}

fn push_cleaned(out: &mut String, c: char, alphabet: &Alphabet) {
    if alphabet.contains(c) || c.is_ascii_digit() {
        out.push(c);
    } else {
        out.push(' ');
    }
}

/// Fold a cleaned token to the numeric placeholder iff every character is a
/// decimal digit. Mixed tokens are returned unchanged.
pub fn fold_numeric<'a>(token: &'a str, cfg: &'a PreprocessConfig) -> &'a str {
    if !token.is_empty() && token.chars().all(|c| c.is_ascii_digit()) {
        &cfg.num_token
    } else {
        token
    }
}

/// Full preprocessing pipeline: split, tokenize and drop empty sentences.
pub fn preprocess<'a, R: BufRead + 'a>(
    reader: R,
    cfg: &'a PreprocessConfig,
) -> impl Iterator<Item = Result<Sentence, CorpusError>> + 'a {
    split_sentences(reader, cfg).filter_map(move |raw| match raw {
        Ok(raw) => {
            let sent = tokenize_sentence(&raw, cfg);
            if sent.is_empty() {
                None
            } else {
                Some(Ok(sent))
            }
        }
        Err(e) => Some(Err(e)),
    })
}
