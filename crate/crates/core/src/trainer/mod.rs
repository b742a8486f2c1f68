//! Training-pair generation and negative-sampling SGD across epochs.
//!
//! Sentences are subsampled, windowed and turned into updates against the
//! shared parameter matrices. Multi-worker training follows the usual
//! lock-free recipe: workers own disjoint sentence shards and write to the
//! shared matrices without synchronization; torn `f32` updates are
//! tolerated. Training is bit-reproducible only at `workers = 1`.

pub mod kernels;

use std::cell::UnsafeCell;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{preprocess, CorpusError, PreprocessConfig, Sentence};
use crate::model::{EmbeddingModel, Matrix, ModelError};
use crate::vocab::{
    keep_probability, sample_negative, NegativeTable, SubsamplingConfig, VocabError, Vocabulary,
    DEFAULT_TABLE_SIZE,
};

use kernels::{axpy, ns_step, OutputRows};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("negative sampling needs a vocabulary of at least two words")]
    VocabTooSmall,
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    SkipGram,
    Cbow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPolicy {
    /// Effective width drawn uniformly from `1..=window` per position.
    Dynamic,
    /// Effective width always equal to `window`.
    Fixed,
}

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub mode: TrainingMode,
    pub window: usize,
    pub negatives: usize,
    pub dim: usize,
    pub epochs: usize,
    /// Subsampling threshold.
    pub s: f64,
    pub lr_initial: f64,
    pub lr_floor: f64,
    pub seed: u64,
    pub workers: usize,
    /// Average (rather than sum) the context vectors in CBOW.
    pub cbow_mean: bool,
    pub window_policy: WindowPolicy,
    /// Shuffle sentence order per epoch; materializes the corpus in memory.
    pub shuffle: bool,
    pub table_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            mode: TrainingMode::SkipGram,
            window: 5,
            negatives: 5,
            dim: 300,
            epochs: 5,
            s: 1e-3,
            lr_initial: 0.025,
            lr_floor: 1e-4,
            seed: 1,
            workers: 1,
            cbow_mean: true,
            window_policy: WindowPolicy::Dynamic,
            shuffle: false,
            table_size: DEFAULT_TABLE_SIZE,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |field, msg: String| Err(TrainError::Config { field, msg });
        if self.window < 1 {
            return err("window", "must be at least 1".into());
        }
        if self.negatives < 1 {
            return err("negatives", "must be at least 1".into());
        }
        if self.dim < 1 {
            return err("dim", "must be at least 1".into());
        }
        if self.epochs < 1 {
            return err("epochs", "must be at least 1".into());
        }
        if !(self.s > 0.0) {
            return err("sample", "must be positive".into());
        }
        if !(self.lr_floor > 0.0) {
            return err("lr_floor", "must be positive".into());
        }
        if self.lr_floor > self.lr_initial {
            return err(
                "lr_floor",
                format!("{} exceeds lr_initial {}", self.lr_floor, self.lr_initial),
            );
        }
        if self.workers < 1 {
            return err("workers", "must be at least 1".into());
        }
        Ok(())
    }

    fn subsampling(&self) -> SubsamplingConfig {
        SubsamplingConfig { s: self.s }
    }
}

/// One (center, context) skip-gram training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPair {
    pub center: u32,
    pub context: u32,
}

/// A corpus the trainer can re-iterate once per epoch (and once more to
/// build the vocabulary). Sentences are visited in a stable order as
/// vocabulary indices; out-of-vocabulary tokens are skipped.
pub trait SentenceSource: Sync {
    fn visit(&self, vocab: &Vocabulary, visitor: &mut dyn FnMut(&[u32])) -> Result<(), TrainError>;
}

/// Already-tokenized sentences held in memory.
pub struct InMemoryCorpus {
    sentences: Vec<Sentence>,
}

impl InMemoryCorpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        InMemoryCorpus { sentences }
    }

    pub fn from_texts<'t>(texts: impl IntoIterator<Item = &'t str>, cfg: &PreprocessConfig) -> Self {
        let mut sentences = Vec::new();
        for text in texts {
            sentences.extend(
                preprocess(text.as_bytes(), cfg).map(|s| s.expect("in-memory text cannot fail I/O")),
            );
        }
        InMemoryCorpus { sentences }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }
}

impl SentenceSource for InMemoryCorpus {
    fn visit(&self, vocab: &Vocabulary, visitor: &mut dyn FnMut(&[u32])) -> Result<(), TrainError> {
        let mut indexed = Vec::new();
        for sent in &self.sentences {
            indexed.clear();
            indexed.extend(sent.tokens.iter().filter_map(|t| vocab.index(t)));
            visitor(&indexed);
        }
        Ok(())
    }
}

/// Sentences pre-mapped to vocabulary indices; the fastest source for
/// corpora that fit in RAM.
pub struct IndexedCorpus {
    sentences: Vec<Vec<u32>>,
}

impl IndexedCorpus {
    pub fn index<S: SentenceSource + ?Sized>(
        source: &S,
        vocab: &Vocabulary,
    ) -> Result<Self, TrainError> {
        let mut sentences = Vec::new();
        source.visit(vocab, &mut |sent| sentences.push(sent.to_vec()))?;
        Ok(IndexedCorpus { sentences })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

impl SentenceSource for IndexedCorpus {
    fn visit(&self, _vocab: &Vocabulary, visitor: &mut dyn FnMut(&[u32])) -> Result<(), TrainError> {
        for sent in &self.sentences {
            visitor(sent);
        }
        Ok(())
    }
}

/// Raw text files streamed through the preprocessing pipeline on every
/// pass. Memory use stays bounded by the longest sentence.
pub struct TextCorpus {
    paths: Vec<PathBuf>,
    cfg: PreprocessConfig,
}

impl TextCorpus {
    pub fn new(paths: Vec<PathBuf>, cfg: PreprocessConfig) -> Self {
        TextCorpus { paths, cfg }
    }
}

impl SentenceSource for TextCorpus {
    fn visit(&self, vocab: &Vocabulary, visitor: &mut dyn FnMut(&[u32])) -> Result<(), TrainError> {
        let mut indexed = Vec::new();
        for path in &self.paths {
            let file = File::open(path).map_err(|e| {
                TrainError::Corpus(CorpusError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                )))
            })?;
            for sent in preprocess(BufReader::new(file), &self.cfg) {
                let sent = sent?;
                indexed.clear();
                indexed.extend(sent.tokens.iter().filter_map(|t| vocab.index(t)));
                visitor(&indexed);
            }
        }
        Ok(())
    }
}

/// Keep each word independently with its keeping probability. Fresh
/// randomness per call, so per-epoch invocations re-randomize the masks.
pub fn subsample_sentence<R: Rng + ?Sized>(
    sent: &[u32],
    vocab: &Vocabulary,
    cfg: &SubsamplingConfig,
    rng: &mut R,
) -> Vec<u32> {
    let mut kept = Vec::with_capacity(sent.len());
    for &w in sent {
        if rng.random::<f64>() < keep_probability(w, vocab, cfg) {
            kept.push(w);
        }
    }
    kept
}

#[inline]
fn subsample_into<R: Rng + ?Sized>(sent: &[u32], keep: &[f64], rng: &mut R, out: &mut Vec<u32>) {
    out.clear();
    for &w in sent {
        if rng.random::<f64>() < keep[w as usize] {
            out.push(w);
        }
    }
}

#[inline]
fn draw_width<R: Rng + ?Sized>(rng: &mut R, window: usize, policy: WindowPolicy) -> usize {
    match policy {
        WindowPolicy::Dynamic => rng.random_range(1..=window),
        WindowPolicy::Fixed => window,
    }
}

/// One window item: the word at a position plus its effective context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowItem {
    pub center: u32,
    pub context: Vec<u32>,
}

/// Window the sentence: per position an effective width is drawn (see
/// [`WindowPolicy`]), context clipped at sentence bounds, center excluded.
/// Positions with an empty context yield nothing, so single-word
/// sentences produce no items. Skip-gram flattens each item into
/// per-context-word pairs; CBOW consumes items whole.
pub fn generate_pairs<R: Rng + ?Sized>(
    sent: &[u32],
    window: usize,
    policy: WindowPolicy,
    rng: &mut R,
) -> Vec<WindowItem> {
    let mut items = Vec::new();
    for t in 0..sent.len() {
        let b = draw_width(rng, window, policy);
        let lo = t.saturating_sub(b);
        let hi = (t + b).min(sent.len() - 1);
        let mut context = Vec::with_capacity(hi - lo);
        for c in lo..=hi {
            if c != t {
                context.push(sent[c]);
            }
        }
        if !context.is_empty() {
            items.push(WindowItem {
                center: sent[t],
                context,
            });
        }
    }
    items
}

/// Flatten window items into skip-gram pairs.
pub fn skipgram_pairs(items: &[WindowItem]) -> Vec<TrainingPair> {
    items
        .iter()
        .flat_map(|item| {
            item.context.iter().map(|&context| TrainingPair {
                center: item.center,
                context,
            })
        })
        .collect()
}

/// One skip-gram SGD step on the model; `negatives` must exclude `target`.
/// Returns the pre-update loss.
pub fn sgns_update(
    model: &mut EmbeddingModel,
    center: u32,
    target: u32,
    negatives: &[u32],
    lr: f32,
) -> f32 {
    let (input, output) = model.parts_mut();
    let mut grad_hidden = Vec::new();
    kernels::sgns_step(input, output, center, target, negatives, lr, &mut grad_hidden)
}

/// One CBOW SGD step on the model. Empty context is a no-op returning 0.
pub fn cbow_update(
    model: &mut EmbeddingModel,
    context: &[u32],
    target: u32,
    negatives: &[u32],
    lr: f32,
    cbow_mean: bool,
) -> f32 {
    let (input, output) = model.parts_mut();
    let mut hidden = Vec::new();
    let mut grad_hidden = Vec::new();
    kernels::cbow_step(
        input,
        output,
        context,
        target,
        negatives,
        lr,
        cbow_mean,
        &mut hidden,
        &mut grad_hidden,
    )
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean pre-update loss per update this epoch.
    pub mean_loss: f64,
    /// Learning rate at the end of the epoch.
    pub lr: f64,
    /// Vocabulary words fed to the trainer this epoch (before subsampling).
    pub words: u64,
    pub updates: u64,
    pub duration: Duration,
}

impl EpochStats {
    pub fn words_per_sec(&self) -> f64 {
        self.words as f64 / self.duration.as_secs_f64().max(1e-9)
    }
}

/// Shared parameter matrices for lock-free parallel SGD.
///
/// Workers borrow overlapping mutable row views without mutual exclusion;
/// with sparse updates the races are benign and torn `f32` writes are
/// tolerated by the algorithm.
struct SharedParams {
    input: UnsafeCell<Matrix>,
    output: UnsafeCell<Matrix>,
}

unsafe impl Sync for SharedParams {}

impl SharedParams {
    fn new(input: Matrix, output: Matrix) -> Self {
        SharedParams {
            input: UnsafeCell::new(input),
            output: UnsafeCell::new(output),
        }
    }

    fn into_inner(self) -> (Matrix, Matrix) {
        (self.input.into_inner(), self.output.into_inner())
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row(&self, w: u32) -> &mut [f32] {
        (*self.input.get()).row_mut(w)
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row_ref(&self, w: u32) -> &[f32] {
        (*self.input.get()).row(w)
    }
}

struct SharedOutput<'a>(&'a SharedParams);

impl OutputRows<f32> for SharedOutput<'_> {
    #[inline]
    fn out_row(&mut self, word: u32) -> &mut [f32] {
        unsafe { (*self.0.output.get()).row_mut(word) }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream per (seed, epoch, worker): epoch advancement
/// re-randomizes subsampling masks and window widths.
fn worker_seed(seed: u64, epoch: usize, worker: usize) -> u64 {
    mix64(mix64(mix64(seed) ^ epoch as u64) ^ (worker as u64).wrapping_add(1))
}

#[inline]
fn lr_at(processed: u64, total_planned: u64, cfg: &TrainingConfig) -> f32 {
    let remaining = 1.0 - processed as f64 / total_planned.max(1) as f64;
    (cfg.lr_initial * remaining).max(cfg.lr_floor) as f32
}

struct WorkerState {
    rng: ChaCha8Rng,
    kept: Vec<u32>,
    grad_hidden: Vec<f32>,
    hidden: Vec<f32>,
    negatives: Vec<u32>,
    loss_sum: f64,
    updates: u64,
    words: u64,
}

impl WorkerState {
    fn new(cfg: &TrainingConfig, epoch: usize, worker: usize) -> Self {
        WorkerState {
            rng: ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, epoch, worker)),
            kept: Vec::new(),
            grad_hidden: vec![0.0; cfg.dim],
            hidden: vec![0.0; cfg.dim],
            negatives: vec![0; cfg.negatives],
            loss_sum: 0.0,
            updates: 0,
            words: 0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn process_sentence(
    sent: &[u32],
    shared: &SharedParams,
    table: &NegativeTable,
    keep: &[f64],
    cfg: &TrainingConfig,
    processed: &AtomicU64,
    total_planned: u64,
    st: &mut WorkerState,
) {
    if sent.is_empty() {
        return;
    }
    st.words += sent.len() as u64;
    let seen = processed.fetch_add(sent.len() as u64, Ordering::Relaxed) + sent.len() as u64;
    let lr = lr_at(seen, total_planned, cfg);

    let WorkerState {
        rng,
        kept,
        grad_hidden,
        hidden,
        negatives,
        loss_sum,
        updates,
        ..
    } = st;

    subsample_into(sent, keep, rng, kept);
    let len = kept.len();
    for t in 0..len {
        let b = draw_width(rng, cfg.window, cfg.window_policy);
        let lo = t.saturating_sub(b);
        let hi = (t + b).min(len - 1);
        match cfg.mode {
            TrainingMode::SkipGram => {
                let center = kept[t];
                for c in lo..=hi {
                    if c == t {
                        continue;
                    }
                    let target = kept[c];
                    for slot in negatives.iter_mut() {
                        *slot = sample_negative(table, rng, target);
                    }
                    let center_row = unsafe { shared.input_row(center) };
                    grad_hidden.iter_mut().for_each(|g| *g = 0.0);
                    *loss_sum += ns_step(
                        &mut SharedOutput(shared),
                        center_row,
                        grad_hidden,
                        target,
                        negatives,
                        lr,
                    ) as f64;
                    axpy(center_row, -lr, grad_hidden);
                    *updates += 1;
                }
            }
            TrainingMode::Cbow => {
                if lo == hi {
                    continue; // context would be empty
                }
                let target = kept[t];
                for slot in negatives.iter_mut() {
                    *slot = sample_negative(table, rng, target);
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                let context_len = (hi - lo) as f32;
                for c in lo..=hi {
                    if c != t {
                        axpy(hidden, 1.0, unsafe { shared.input_row_ref(kept[c]) });
                    }
                }
                let scale = if cfg.cbow_mean { 1.0 / context_len } else { 1.0 };
                if cfg.cbow_mean {
                    hidden.iter_mut().for_each(|h| *h *= scale);
                }
                grad_hidden.iter_mut().for_each(|g| *g = 0.0);
                *loss_sum += ns_step(
                    &mut SharedOutput(shared),
                    hidden,
                    grad_hidden,
                    target,
                    negatives,
                    lr,
                ) as f64;
                for c in lo..=hi {
                    if c != t {
                        axpy(
                            unsafe { shared.input_row(kept[c]) },
                            -(lr * scale),
                            grad_hidden,
                        );
                    }
                }
                *updates += 1;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn worker_pass<S: SentenceSource + ?Sized>(
    shared: &SharedParams,
    stream: &S,
    memory: Option<(&[Vec<u32>], &[u32])>,
    vocab: &Vocabulary,
    table: &NegativeTable,
    keep: &[f64],
    cfg: &TrainingConfig,
    epoch: usize,
    worker: usize,
    processed: &AtomicU64,
    total_planned: u64,
) -> Result<(f64, u64, u64), TrainError> {
    let mut st = WorkerState::new(cfg, epoch, worker);
    match memory {
        Some((sentences, order)) => {
            let mut pos = worker;
            while pos < order.len() {
                process_sentence(
                    &sentences[order[pos] as usize],
                    shared,
                    table,
                    keep,
                    cfg,
                    processed,
                    total_planned,
                    &mut st,
                );
                pos += cfg.workers;
            }
        }
        None => {
            let mut i = 0usize;
            stream.visit(vocab, &mut |sent| {
                if i % cfg.workers == worker {
                    process_sentence(
                        sent,
                        shared,
                        table,
                        keep,
                        cfg,
                        processed,
                        total_planned,
                        &mut st,
                    );
                }
                i += 1;
            })?;
        }
    }
    Ok((st.loss_sum, st.updates, st.words))
}

/// Train a fresh model over the corpus.
pub fn train<S: SentenceSource + ?Sized>(
    corpus: &S,
    vocab: Arc<Vocabulary>,
    cfg: &TrainingConfig,
) -> Result<EmbeddingModel, TrainError> {
    train_with_observer(corpus, vocab, cfg, |_, _| {})
}

/// [`train`], invoking `observer` with the stats and current model after
/// every epoch (for progress lines and per-epoch checkpoints).
pub fn train_with_observer<S, O>(
    corpus: &S,
    vocab: Arc<Vocabulary>,
    cfg: &TrainingConfig,
    mut observer: O,
) -> Result<EmbeddingModel, TrainError>
where
    S: SentenceSource + ?Sized,
    O: FnMut(&EpochStats, &EmbeddingModel),
{
    cfg.validate()?;
    if vocab.len() < 2 {
        return Err(TrainError::VocabTooSmall);
    }

    let table = NegativeTable::build(&vocab, cfg.table_size)?;
    let sub = cfg.subsampling();
    let keep: Vec<f64> = (0..vocab.len() as u32)
        .map(|w| keep_probability(w, &vocab, &sub))
        .collect();
    let total_planned = cfg.epochs as u64 * vocab.total_count();
    let processed = AtomicU64::new(0);

    let memory: Option<IndexedCorpus> = if cfg.shuffle {
        Some(IndexedCorpus::index(corpus, &vocab)?)
    } else {
        None
    };

    let model = EmbeddingModel::init(Arc::clone(&vocab), cfg.dim, cfg.seed)?;
    let (_, mut input, mut output) = model.into_parts();

    for epoch in 0..cfg.epochs {
        let order: Vec<u32> = match &memory {
            Some(mem) => {
                let mut order: Vec<u32> = (0..mem.len() as u32).collect();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, epoch, usize::MAX));
                order.shuffle(&mut rng);
                order
            }
            None => Vec::new(),
        };

        let shared = SharedParams::new(input, output);
        let started = Instant::now();
        let results: Vec<Result<(f64, u64, u64), TrainError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.workers)
                .map(|w| {
                    let shared = &shared;
                    let vocab = &vocab;
                    let table = &table;
                    let keep = &keep;
                    let processed = &processed;
                    let mem = memory.as_ref().map(|m| (m.sentences.as_slice(), &order[..]));
                    scope.spawn(move || {
                        worker_pass(
                            shared,
                            corpus,
                            mem,
                            vocab,
                            table,
                            keep,
                            cfg,
                            epoch,
                            w,
                            processed,
                            total_planned,
                        )
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let duration = started.elapsed();

        let mut loss_sum = 0.0;
        let mut updates = 0u64;
        let mut words = 0u64;
        for r in results {
            let (l, u, w) = r?;
            loss_sum += l;
            updates += u;
            words += w;
        }

        let (inp, out) = shared.into_inner();
        input = inp;
        output = out;

        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            lr: lr_at(processed.load(Ordering::Relaxed), total_planned, cfg) as f64,
            words,
            updates,
            duration,
        };
        let model = EmbeddingModel::from_parts(Arc::clone(&vocab), input, output);
        observer(&stats, &model);
        let (_, inp, out) = model.into_parts();
        input = inp;
        output = out;
    }

    Ok(EmbeddingModel::from_parts(vocab, input, output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixOf;
    use proptest::prelude::*;

    fn uniform_vocab(n: usize, count: u64) -> Arc<Vocabulary> {
        Arc::new(
            Vocabulary::from_counts((0..n).map(|i| (format!("w{i:03}"), count)), 1).unwrap(),
        )
    }

    fn skewed_vocab(counts: &[u64]) -> Arc<Vocabulary> {
        Arc::new(
            Vocabulary::from_counts(
                counts.iter().enumerate().map(|(i, &c)| (format!("w{i:03}"), c)),
                1,
            )
            .unwrap(),
        )
    }

    #[test]
    fn subsample_keeps_rare_words() {
        // all words at f(w) <= s keep probability exactly 1
        let vocab = uniform_vocab(4, 1);
        let cfg = SubsamplingConfig { s: 0.9 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sent: Vec<u32> = vec![0, 1, 2, 3, 0, 1];
        assert_eq!(subsample_sentence(&sent, &vocab, &cfg, &mut rng), sent);
    }

    #[test]
    fn subsample_empirical_rate() {
        // a word at f = 0.1 with s = 0.001 keeps at rate 0.11
        let vocab = skewed_vocab(&[10, 90]);
        let w = (0..2).find(|&i| vocab.count(i) == 10).unwrap();
        let cfg = SubsamplingConfig { s: 1e-3 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sent = vec![w; 100_000];
        let kept = subsample_sentence(&sent, &vocab, &cfg, &mut rng);
        let rate = kept.len() as f64 / sent.len() as f64;
        assert!((rate - 0.11).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn pairs_window_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let items = generate_pairs(&[10, 11, 12], 1, WindowPolicy::Dynamic, &mut rng);
        let pairs = skipgram_pairs(&items);
        let expect = [(10, 11), (11, 10), (11, 12), (12, 11)];
        assert_eq!(
            pairs,
            expect
                .iter()
                .map(|&(center, context)| TrainingPair { center, context })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn pairs_single_word_sentence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_pairs(&[5], 4, WindowPolicy::Dynamic, &mut rng).is_empty());
        assert!(generate_pairs(&[], 4, WindowPolicy::Dynamic, &mut rng).is_empty());
    }

    #[test]
    fn zero_output_loss_is_k_plus_one_ln2() {
        let vocab = uniform_vocab(6, 2);
        let mut model = EmbeddingModel::init(vocab, 8, 9).unwrap();
        let k = 3;
        let loss = sgns_update(&mut model, 0, 1, &[2, 3, 4], 0.0);
        let expect = (1 + k) as f32 * std::f32::consts::LN_2;
        assert!((loss - expect).abs() < 1e-5, "loss {loss} vs {expect}");
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let vocab = uniform_vocab(6, 2);
        let mut model = EmbeddingModel::init(vocab, 8, 9).unwrap();
        let before_in = model.input().clone();
        let before_out = model.output().clone();
        let loss = sgns_update(&mut model, 0, 1, &[2, 3], 0.0);
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(model.input(), &before_in);
        assert_eq!(model.output(), &before_out);
    }

    #[test]
    fn sgns_update_touches_only_its_rows() {
        let vocab = uniform_vocab(10, 2);
        let mut model = EmbeddingModel::init(Arc::clone(&vocab), 6, 4).unwrap();
        // seed the output matrix so negative updates actually move rows
        for w in 0..10u32 {
            let (_, output) = model.parts_mut();
            for (j, x) in output.row_mut(w).iter_mut().enumerate() {
                *x = (w as f32 + 1.0) * 0.01 + j as f32 * 0.001;
            }
        }
        let before_in = model.input().clone();
        let before_out = model.output().clone();
        let negatives = [7u32, 3];
        sgns_update(&mut model, 2, 5, &negatives, 0.05);

        for w in 0..10u32 {
            let in_same = model.input().row(w) == before_in.row(w);
            let out_same = model.output().row(w) == before_out.row(w);
            assert_eq!(in_same, w != 2, "input row {w}");
            let touched = w == 5 || negatives.contains(&w);
            assert_eq!(out_same, !touched, "output row {w}");
        }
    }

    #[test]
    fn cbow_singleton_context_equals_sgns() {
        let vocab = uniform_vocab(8, 2);
        let mut a = EmbeddingModel::init(Arc::clone(&vocab), 8, 12).unwrap();
        let mut b = EmbeddingModel::init(vocab, 8, 12).unwrap();
        let loss_a = sgns_update(&mut a, 3, 6, &[1, 2], 0.1);
        let loss_b = cbow_update(&mut b, &[3], 6, &[1, 2], 0.1, true);
        assert_eq!(loss_a, loss_b);
        assert_eq!(a.input().as_slice(), b.input().as_slice());
        assert_eq!(a.output().as_slice(), b.output().as_slice());
    }

    #[test]
    fn cbow_empty_context_is_noop() {
        let vocab = uniform_vocab(4, 2);
        let mut model = EmbeddingModel::init(vocab, 4, 1).unwrap();
        let before = model.input().clone();
        assert_eq!(cbow_update(&mut model, &[], 1, &[2], 0.1, true), 0.0);
        assert_eq!(model.input(), &before);
    }

    #[test]
    fn finite_difference_spot_check() {
        // d=8, K=3 instance in f64; the acceptance suite runs the full grid
        let dim = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut out: MatrixOf<f64> = MatrixOf::zeros(6, dim);
        for x in out.as_mut_slice() {
            *x = rng.random_range(-1.0..1.0);
        }
        let hidden: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = 0u32;
        let negatives = [2u32, 3, 4];

        // analytic dL/dh from the kernel at lr = 0 (rows unchanged)
        let mut grad = vec![0.0; dim];
        kernels::ns_step(&mut out.clone(), &hidden, &mut grad, target, &negatives, 0.0);

        let h = 1e-4;
        for j in 0..dim {
            let mut plus = hidden.clone();
            plus[j] += h;
            let mut minus = hidden.clone();
            minus[j] -= h;
            let fd = (kernels::ns_loss(&out, &plus, target, &negatives)
                - kernels::ns_loss(&out, &minus, target, &negatives))
                / (2.0 * h);
            let rel = (grad[j] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-4, "component {j}: analytic {} vs fd {fd}", grad[j]);
        }
    }

    #[test]
    fn train_rejects_bad_config() {
        let vocab = uniform_vocab(4, 2);
        let corpus = InMemoryCorpus::from_texts(["a b"], &PreprocessConfig::default());
        let cfg = TrainingConfig {
            epochs: 0,
            ..TrainingConfig::default()
        };
        match train(&corpus, vocab, &cfg) {
            Err(TrainError::Config { field, .. }) => assert_eq!(field, "epochs"),
            other => panic!("expected config error, got {:?}", other.err()),
        }
    }

    fn toy_corpus() -> (InMemoryCorpus, Arc<Vocabulary>) {
        let cfg = PreprocessConfig::default();
        let text = "il gatto dorme sul tetto. il cane corre nel prato. \
                    il gatto e il cane giocano. la casa ha un tetto rosso. \
                    nel prato la casa dorme."
            .repeat(20);
        let corpus = InMemoryCorpus::from_texts([text.as_str()], &cfg);
        let vocab = Arc::new(Vocabulary::build(corpus.sentences(), 1).unwrap());
        (corpus, vocab)
    }

    #[test]
    fn single_worker_training_is_deterministic() {
        let (corpus, vocab) = toy_corpus();
        let cfg = TrainingConfig {
            dim: 16,
            window: 3,
            negatives: 3,
            epochs: 2,
            table_size: 1000,
            seed: 42,
            ..TrainingConfig::default()
        };
        let a = train(&corpus, Arc::clone(&vocab), &cfg).unwrap();
        let b = train(&corpus, Arc::clone(&vocab), &cfg).unwrap();
        assert_eq!(a.input().as_slice(), b.input().as_slice());
        assert_eq!(a.output().as_slice(), b.output().as_slice());

        let c = train(&corpus, vocab, &TrainingConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.input().as_slice(), c.input().as_slice());
    }

    #[test]
    fn multi_worker_training_runs() {
        let (corpus, vocab) = toy_corpus();
        let cfg = TrainingConfig {
            dim: 8,
            window: 2,
            negatives: 2,
            epochs: 2,
            workers: 4,
            table_size: 1000,
            ..TrainingConfig::default()
        };
        let model = train(&corpus, vocab, &cfg).unwrap();
        assert!(model.input().as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn shuffle_training_runs_and_differs() {
        let (corpus, vocab) = toy_corpus();
        let base = TrainingConfig {
            dim: 8,
            window: 2,
            negatives: 2,
            epochs: 2,
            table_size: 1000,
            ..TrainingConfig::default()
        };
        let plain = train(&corpus, Arc::clone(&vocab), &base).unwrap();
        let shuffled = train(
            &corpus,
            vocab,
            &TrainingConfig {
                shuffle: true,
                ..base
            },
        )
        .unwrap();
        assert_ne!(plain.input().as_slice(), shuffled.input().as_slice());
    }

    #[test]
    fn observer_sees_every_epoch() {
        let (corpus, vocab) = toy_corpus();
        let cfg = TrainingConfig {
            dim: 8,
            epochs: 3,
            table_size: 1000,
            ..TrainingConfig::default()
        };
        let mut seen = Vec::new();
        train_with_observer(&corpus, vocab, &cfg, |stats, model| {
            assert_eq!(model.dim(), 8);
            assert!(stats.mean_loss > 0.0);
            seen.push(stats.epoch);
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2, 3]);
    }

    #[test]
    fn worker_seed_varies_by_epoch_and_worker() {
        let mut seen = std::collections::HashSet::new();
        for epoch in 0..10 {
            for worker in 0..8 {
                assert!(seen.insert(worker_seed(7, epoch, worker)));
            }
        }
    }

    #[test]
    fn subsampling_masks_differ_across_epochs() {
        // same worker, consecutive epochs: different keep masks
        let sent: Vec<u32> = (0..64).collect();
        let keep = vec![0.5f64; 64];
        let mut mask_a = Vec::new();
        let mut mask_b = Vec::new();
        let mut rng_a = ChaCha8Rng::seed_from_u64(worker_seed(1, 0, 0));
        let mut rng_b = ChaCha8Rng::seed_from_u64(worker_seed(1, 1, 0));
        subsample_into(&sent, &keep, &mut rng_a, &mut mask_a);
        subsample_into(&sent, &keep, &mut rng_b, &mut mask_b);
        assert_ne!(mask_a, mask_b);
    }

    proptest! {
        /// With the width pinned to W >= len-1 every ordered pair of
        /// distinct positions appears exactly once.
        #[test]
        fn full_window_enumerates_all_ordered_pairs(len in 2usize..9) {
            let sent: Vec<u32> = (0..len as u32).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let items = generate_pairs(&sent, len - 1, WindowPolicy::Fixed, &mut rng);
            let pairs = skipgram_pairs(&items);
            prop_assert_eq!(pairs.len(), len * (len - 1));
            let set: std::collections::HashSet<_> =
                pairs.iter().map(|p| (p.center, p.context)).collect();
            prop_assert_eq!(set.len(), pairs.len());
        }

        /// Deleting one word removes at most 2W pairs (fixed width).
        #[test]
        fn deleting_a_word_costs_at_most_two_windows(
            len in 2usize..10,
            window in 1usize..5,
            remove in 0usize..10,
        ) {
            let remove = remove % len;
            let sent: Vec<u32> = (0..len as u32).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let full = skipgram_pairs(&generate_pairs(&sent, window, WindowPolicy::Fixed, &mut rng)).len();
            let mut shorter = sent.clone();
            shorter.remove(remove);
            let reduced = skipgram_pairs(&generate_pairs(&shorter, window, WindowPolicy::Fixed, &mut rng)).len();
            prop_assert!(full >= reduced);
            prop_assert!(full - reduced <= 2 * window);
        }

        /// Pre-update loss is strictly positive.
        #[test]
        fn loss_is_positive(seed in 0u64..500) {
            let vocab = uniform_vocab(8, 2);
            let mut model = EmbeddingModel::init(vocab, 6, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let center = rng.random_range(0..8);
                let mut target = rng.random_range(0..8);
                if target == center { target = (target + 1) % 8; }
                let negatives: Vec<u32> = (0..3)
                    .map(|_| {
                        let mut w = rng.random_range(0..8);
                        while w == target { w = rng.random_range(0..8); }
                        w
                    })
                    .collect();
                let loss = sgns_update(&mut model, center, target, &negatives, 0.025);
                prop_assert!(loss > 0.0);
            }
        }
    }
}
