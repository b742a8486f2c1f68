//! The two parameter matrices, their initialization and persistence.
//!
//! Rows of the input matrix are the word vectors used everywhere after
//! training; the output (context) matrix exists only for the training
//! objective and is discarded at use time.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("row for word `{word}` has zero norm and cannot be normalized")]
    ZeroRow { word: String },
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
    #[error(transparent)]
    Vocab(#[from] crate::vocab::VocabError),
}

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOf<F> {
    rows: usize,
    dim: usize,
    data: Vec<F>,
}

pub type Matrix = MatrixOf<f32>;

impl<F: Copy + Default> MatrixOf<F> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        MatrixOf {
            rows,
            dim,
            data: vec![F::default(); rows * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged rows");
            data.extend(r);
        }
        MatrixOf { rows: n, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: u32) -> &[F] {
        let start = i as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: u32) -> &mut [F] {
        let start = i as usize * self.dim;
        &mut self.data[start..start + self.dim]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }
}

/// Trained (or in-training) embedding model: input and output matrices
/// plus the vocabulary that indexes their rows.
pub struct EmbeddingModel {
    vocab: Arc<Vocabulary>,
    input: Matrix,
    output: Matrix,
}

impl EmbeddingModel {
    /// Fresh model: input entries i.i.d. uniform in `[-0.5/dim, 0.5/dim)`,
    /// output all zeros. Deterministic for a given seed.
    pub fn init(vocab: Arc<Vocabulary>, dim: usize, seed: u64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        let n = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / dim as f32;
        let mut input = Matrix::zeros(n, dim);
        for x in input.as_mut_slice() {
            *x = rng.random_range(-bound..bound);
        }
        Ok(EmbeddingModel {
            vocab,
            input,
            output: Matrix::zeros(n, dim),
        })
    }

    pub fn from_parts(vocab: Arc<Vocabulary>, input: Matrix, output: Matrix) -> Self {
        assert_eq!(input.rows(), vocab.len());
        assert_eq!(output.rows(), vocab.len());
        assert_eq!(input.dim(), output.dim());
        EmbeddingModel {
            vocab,
            input,
            output,
        }
    }

    pub fn into_parts(self) -> (Arc<Vocabulary>, Matrix, Matrix) {
        (self.vocab, self.input, self.output)
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Input and output matrices, simultaneously mutable.
    pub fn parts_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.input, &mut self.output)
    }

    /// Row-normalized copy of the input matrix; the model itself is left
    /// untouched.
    pub fn normalized(&self) -> Result<NormalizedEmbeddings, ModelError> {
        let mut rows = self.input.clone();
        for i in 0..rows.rows() as u32 {
            let row = rows.row_mut(i);
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(ModelError::ZeroRow {
                    word: self.vocab.word(i).to_string(),
                });
            }
            for x in row.iter_mut() {
                *x = (*x as f64 / norm) as f32;
            }
        }
        Ok(NormalizedEmbeddings {
            vocab: Arc::clone(&self.vocab),
            rows,
        })
    }

    /// Write the text interchange format: `|V| dim` header, then one
    /// `word c1 .. cd` line per word in vocabulary order. Components are
    /// printed with nine significant digits, enough to reproduce the
    /// stored `f32` exactly.
    pub fn save_text(&self, path: &Path) -> Result<(), ModelError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        (|| {
            write!(w, "{} {}\n", self.vocab.len(), self.dim())?;
            for i in 0..self.vocab.len() as u32 {
                w.write_all(self.vocab.word(i).as_bytes())?;
                for x in self.input.row(i) {
                    write!(w, " {:.8e}", x)?;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        })()
        .map_err(|e| io_err(path, e))?;
        Ok(())
    }

    /// Read the text format back. With `expected_vocab`, words must match
    /// that vocabulary's order and the loaded model shares it; without,
    /// a vocabulary is synthesized in file order (counts unknown, set
    /// to 1). The output matrix is not stored in this format and loads
    /// as zeros.
    pub fn load_text(
        path: &Path,
        expected_vocab: Option<Arc<Vocabulary>>,
    ) -> Result<Self, ModelError> {
        let parse_err = |line: usize, msg: String| ModelError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = BufReader::new(file);

        let mut header = String::new();
        reader.read_line(&mut header).map_err(|e| io_err(path, e))?;
        let mut parts = header.split_whitespace();
        let (n, dim) = match (
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next(),
        ) {
            (Some(n), Some(dim), None) if dim > 0 => (n, dim),
            _ => {
                return Err(parse_err(
                    1,
                    format!("expected header `<words> <dim>`, got `{}`", header.trim_end()),
                ))
            }
        };
        if let Some(v) = &expected_vocab {
            if v.len() != n {
                return Err(parse_err(
                    1,
                    format!("file has {n} words but vocabulary has {}", v.len()),
                ));
            }
        }

        let mut words = Vec::with_capacity(n);
        let mut input = Matrix::zeros(n, dim);
        let mut line = String::new();
        for i in 0..n {
            let lineno = i + 2;
            line.clear();
            let read = reader.read_line(&mut line).map_err(|e| io_err(path, e))?;
            if read == 0 {
                return Err(parse_err(lineno, format!("expected {n} rows, file ends after {i}")));
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| parse_err(lineno, "empty row".into()))?;
            if let Some(v) = &expected_vocab {
                if v.word(i as u32) != word {
                    return Err(parse_err(
                        lineno,
                        format!("word `{word}` does not match vocabulary entry `{}`", v.word(i as u32)),
                    ));
                }
            }
            let row = input.row_mut(i as u32);
            let mut k = 0;
            for field in fields {
                if k == dim {
                    k += 1;
                    break;
                }
                row[k] = field.parse::<f32>().map_err(|_| {
                    parse_err(lineno, format!("bad vector component `{field}`"))
                })?;
                k += 1;
            }
            if k != dim {
                return Err(parse_err(
                    lineno,
                    format!("row for `{word}` has {k} components, expected {dim}"),
                ));
            }
            words.push(word.to_string());
        }
        // anything non-empty past the declared row count is an error
        loop {
            line.clear();
            let read = reader.read_line(&mut line).map_err(|e| io_err(path, e))?;
            if read == 0 {
                break;
            }
            if !line.trim().is_empty() {
                return Err(parse_err(n + 2, format!("unexpected extra row beyond declared {n}")));
            }
        }

        let vocab = match expected_vocab {
            Some(v) => v,
            None => Arc::new(Vocabulary::from_ordered(
                words.into_iter().map(|w| (w, 1)),
            )?),
        };
        let output = Matrix::zeros(n, dim);
        Ok(EmbeddingModel {
            vocab,
            input,
            output,
        })
    }

    /// Read the binary interchange format (read-only support): text header
    /// `|V| dim\n`, then per word the name terminated by a space and `dim`
    /// little-endian `f32`s, optionally followed by a newline.
    pub fn load_binary(
        path: &Path,
        expected_vocab: Option<Arc<Vocabulary>>,
    ) -> Result<Self, ModelError> {
        let parse_err = |line: usize, msg: String| ModelError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = BufReader::new(file);

        let mut header = String::new();
        reader.read_line(&mut header).map_err(|e| io_err(path, e))?;
        let mut parts = header.split_whitespace();
        let (n, dim) = match (
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next().and_then(|s| s.parse::<usize>().ok()),
        ) {
            (Some(n), Some(dim)) if dim > 0 => (n, dim),
            _ => return Err(parse_err(1, "expected header `<words> <dim>`".into())),
        };

        let mut words = Vec::with_capacity(n);
        let mut input = Matrix::zeros(n, dim);
        let mut float_buf = vec![0u8; dim * 4];
        for i in 0..n {
            let mut word_bytes = Vec::new();
            reader
                .read_until(b' ', &mut word_bytes)
                .map_err(|e| io_err(path, e))?;
            if word_bytes.last() == Some(&b' ') {
                word_bytes.pop();
            }
            let word = String::from_utf8(word_bytes)
                .map_err(|_| parse_err(i + 2, "word is not valid UTF-8".into()))?;
            let word = word.trim_start_matches('\n').to_string();
            if word.is_empty() {
                return Err(parse_err(i + 2, format!("expected {n} rows, file ends after {i}")));
            }
            reader
                .read_exact(&mut float_buf)
                .map_err(|e| io_err(path, e))?;
            let row = input.row_mut(i as u32);
            for (k, chunk) in float_buf.chunks_exact(4).enumerate() {
                row[k] = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            if let Some(v) = &expected_vocab {
                if v.word(i as u32) != word {
                    return Err(parse_err(
                        i + 2,
                        format!("word `{word}` does not match vocabulary entry `{}`", v.word(i as u32)),
                    ));
                }
            }
            words.push(word);
        }

        let vocab = match expected_vocab {
            Some(v) => v,
            None => Arc::new(Vocabulary::from_ordered(
                words.into_iter().map(|w| (w, 1)),
            )?),
        };
        let output = Matrix::zeros(n, dim);
        Ok(EmbeddingModel {
            vocab,
            input,
            output,
        })
    }
}

/// Unit-row view of the input matrix used by evaluation.
pub struct NormalizedEmbeddings {
    vocab: Arc<Vocabulary>,
    rows: Matrix,
}

impl NormalizedEmbeddings {
    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn into_parts(self) -> (Arc<Vocabulary>, Matrix) {
        (self.vocab, self.rows)
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    pub fn row(&self, i: u32) -> &[f32] {
        self.rows.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }
}

/// L2 norm with 64-bit accumulation.
pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}
