//! Analogy evaluation: test-set parsing, the additive and multiplicative
//! cosine solvers, and per-category accuracy reports under both
//! out-of-vocabulary accounting modes.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{tokenize_sentence, PreprocessConfig};
use crate::model::NormalizedEmbeddings;

#[derive(Debug, Error)]
pub enum EvalError {
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
    #[error("word `{word}` is not in the vocabulary")]
    OovWord { word: String },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacroArea {
    Semantic,
    Syntactic,
}

impl fmt::Display for MacroArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MacroArea::Semantic => write!(f, "semantic"),
            MacroArea::Syntactic => write!(f, "syntactic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    CosAdd,
    CosMul,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::CosAdd => write!(f, "3COSADD"),
            Metric::CosMul => write!(f, "3COSMUL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovMode {
    /// Non-executable analogies stay in the denominator and count as wrong.
    CountAsError,
    /// Non-executable analogies are excluded from the denominator.
    ExecutableOnly,
}

impl fmt::Display for OovMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OovMode::CountAsError => write!(f, "count_as_error"),
            OovMode::ExecutableOnly => write!(f, "executable_only"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub metric: Metric,
    pub epsilon: f64,
    pub oov_mode: OovMode,
    /// Remove the three query words from the candidate set.
    pub exclude_inputs: bool,
    /// Shift cosines to [0, 1] via (x+1)/2 before the multiplicative
    /// formula, keeping the ratio sign-stable.
    pub cosmul_shift: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metric: Metric::CosMul,
            epsilon: 1e-6,
            oov_mode: OovMode::ExecutableOnly,
            exclude_inputs: true,
            cosmul_shift: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.epsilon > 0.0) {
            return Err(EvalError::Parse {
                path: "config".into(),
                line: 0,
                msg: "epsilon must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One analogy `a : a* = b : b*` with its category and macro-area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuery {
    pub a: String,
    pub a_star: String,
    pub b: String,
    pub b_star: String,
    pub category: String,
    pub macro_area: MacroArea,
}

#[derive(Debug, Clone)]
pub struct AnalogyTestSet {
    pub queries: Vec<AnalogyQuery>,
    /// Categories in file order with their macro-area.
    pub categories: Vec<(String, MacroArea)>,
}

/// Category to macro-area assignment. Categories not listed explicitly
/// fall back to a prefix rule: names starting with a syntactic prefix
/// (by convention `gram`) are syntactic, everything else semantic.
#[derive(Debug, Clone)]
pub struct MacroMap {
    pub explicit: HashMap<String, MacroArea>,
    pub syntactic_prefixes: Vec<String>,
}

impl Default for MacroMap {
    fn default() -> Self {
        MacroMap {
            explicit: HashMap::new(),
            syntactic_prefixes: vec!["gram".to_string()],
        }
    }
}

impl MacroMap {
    pub fn classify(&self, category: &str) -> MacroArea {
        if let Some(&area) = self.explicit.get(category) {
            return area;
        }
        if self
            .syntactic_prefixes
            .iter()
            .any(|p| category.starts_with(p.as_str()))
        {
            MacroArea::Syntactic
        } else {
            MacroArea::Semantic
        }
    }
}

/// Normalize a test word with the corpus cleaning pipeline so it can be
/// looked up against vocabulary keys. Words that do not clean to exactly
/// one token are kept lowercased as-is; they can never match a cleaned
/// vocabulary word, so they count as out-of-vocabulary.
pub fn clean_query_word(word: &str, cfg: &PreprocessConfig) -> String {
    let mut sent = tokenize_sentence(word, cfg);
    if sent.tokens.len() == 1 {
        sent.tokens.pop().unwrap()
    } else {
        word.to_lowercase()
    }
}

/// Parse the analogy file format: `: category-name` lines open a category,
/// whitespace-separated 4-word lines become queries.
pub fn parse_analogy_file(
    path: &Path,
    macro_map: &MacroMap,
    pre_cfg: &PreprocessConfig,
) -> Result<AnalogyTestSet, EvalError> {
    let parse_err = |line: usize, msg: String| EvalError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let file = File::open(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;

    let mut queries = Vec::new();
    let mut categories: Vec<(String, MacroArea)> = Vec::new();
    let mut current: Option<(String, MacroArea)> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix(':') {
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(parse_err(i + 1, "empty category name".into()));
            }
            let area = macro_map.classify(&name);
            categories.push((name.clone(), area));
            current = Some((name, area));
            continue;
        }
        let words: Vec<&str> = trimmed.split_whitespace().collect();
        if words.len() != 4 {
            return Err(parse_err(
                i + 1,
                format!("expected 4 words, found {}", words.len()),
            ));
        }
        let (category, macro_area) = current
            .clone()
            .ok_or_else(|| parse_err(i + 1, "analogy before any `: category` header".into()))?;
        queries.push(AnalogyQuery {
            a: clean_query_word(words[0], pre_cfg),
            a_star: clean_query_word(words[1], pre_cfg),
            b: clean_query_word(words[2], pre_cfg),
            b_star: clean_query_word(words[3], pre_cfg),
            category,
            macro_area,
        });
    }
    Ok(AnalogyTestSet {
        queries,
        categories,
    })
}

/// Cosine similarity with 64-bit accumulation.
pub fn cosine(x: &[f32], y: &[f32]) -> Result<f64, EvalError> {
    let mut dot = 0.0f64;
    let mut nx = 0.0f64;
    let mut ny = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        dot += a as f64 * b as f64;
        nx += a as f64 * a as f64;
        ny += b as f64 * b as f64;
    }
    if nx == 0.0 || ny == 0.0 {
        return Err(EvalError::ZeroVector);
    }
    Ok(dot / (nx.sqrt() * ny.sqrt()))
}

#[inline]
fn dot64(x: &[f32], y: &[f32]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn resolve(emb: &NormalizedEmbeddings, q: &AnalogyQuery) -> Option<(u32, u32, u32)> {
    let v = emb.vocab();
    Some((v.index(&q.a)?, v.index(&q.a_star)?, v.index(&q.b)?))
}

fn excluded_set(cfg: &EvalConfig, a: u32, a_star: u32, b: u32) -> [Option<u32>; 3] {
    if cfg.exclude_inputs {
        [Some(a), Some(a_star), Some(b)]
    } else {
        [None; 3]
    }
}

/// Rank all candidates by score, highest first, ties by lower index, the
/// excluded indices removed. `k = 0` yields an empty list.
fn rank<S: FnMut(u32) -> f64>(
    n: u32,
    excluded: &[Option<u32>; 3],
    mut score: S,
    k: usize,
) -> Vec<(u32, f64)> {
    let mut scored: Vec<(u32, f64)> = (0..n)
        .filter(|c| !excluded.contains(&Some(*c)))
        .map(|c| (c, score(c)))
        .collect();
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    scored.truncate(k);
    scored
}

/// Single-pass argmax with the same tie rule as [`rank`].
fn argmax<S: FnMut(u32) -> f64>(n: u32, excluded: &[Option<u32>; 3], mut score: S) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for c in 0..n {
        if excluded.contains(&Some(c)) {
            continue;
        }
        let s = score(c);
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((c, s)),
        }
    }
    best.map(|(c, _)| c)
}

fn cosadd_scorer<'e>(
    emb: &'e NormalizedEmbeddings,
    a: u32,
    a_star: u32,
    b: u32,
) -> impl FnMut(u32) -> f64 + 'e {
    let dim = emb.dim();
    let mut target = vec![0.0f64; dim];
    let (ra, rs, rb) = (emb.row(a), emb.row(a_star), emb.row(b));
    for j in 0..dim {
        target[j] = rb[j] as f64 - ra[j] as f64 + rs[j] as f64;
    }
    move |c: u32| {
        emb.row(c)
            .iter()
            .zip(&target)
            .map(|(&x, t)| x as f64 * t)
            .sum()
    }
}

fn cosmul_scorer<'e>(
    emb: &'e NormalizedEmbeddings,
    a: u32,
    a_star: u32,
    b: u32,
    cfg: &EvalConfig,
) -> impl FnMut(u32) -> f64 + 'e {
    let eps = cfg.epsilon;
    let shift = cfg.cosmul_shift;
    move |c: u32| {
        let row = emb.row(c);
        let mut cb = dot64(row, emb.row(b));
        let mut cs = dot64(row, emb.row(a_star));
        let mut ca = dot64(row, emb.row(a));
        if shift {
            cb = (cb + 1.0) / 2.0;
            cs = (cs + 1.0) / 2.0;
            ca = (ca + 1.0) / 2.0;
        }
        cb * cs / (ca + eps)
    }
}

/// Solve with the additive metric: argmax over candidates of
/// `cos(c, b - a + a*)`. Returns the ranked top-k (the prediction first),
/// or `None` when `a`, `a*` or `b` is out of vocabulary. Scores are
/// proportional to the cosine (rows are unit; the offset norm is a
/// positive constant across candidates).
pub fn solve_3cosadd(
    emb: &NormalizedEmbeddings,
    q: &AnalogyQuery,
    cfg: &EvalConfig,
    k: usize,
) -> Option<Vec<(u32, f64)>> {
    let (a, a_star, b) = resolve(emb, q)?;
    let excluded = excluded_set(cfg, a, a_star, b);
    let scorer = cosadd_scorer(emb, a, a_star, b);
    Some(rank(emb.vocab().len() as u32, &excluded, scorer, k))
}

/// Solve with the multiplicative metric:
/// `cos(c,b) * cos(c,a*) / (cos(c,a) + epsilon)`.
pub fn solve_3cosmul(
    emb: &NormalizedEmbeddings,
    q: &AnalogyQuery,
    cfg: &EvalConfig,
    k: usize,
) -> Option<Vec<(u32, f64)>> {
    let (a, a_star, b) = resolve(emb, q)?;
    let excluded = excluded_set(cfg, a, a_star, b);
    let scorer = cosmul_scorer(emb, a, a_star, b, cfg);
    Some(rank(emb.vocab().len() as u32, &excluded, scorer, k))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryReport {
    pub category: String,
    pub macro_area: MacroArea,
    /// Executable queries that were actually solved.
    pub attempted: u64,
    pub correct: u64,
    /// Queries skipped because some of the four words is out of vocabulary.
    pub skipped: u64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metric: Metric,
    pub oov_mode: OovMode,
    pub categories: Vec<CategoryReport>,
}

fn accuracy(correct: u64, attempted: u64, skipped: u64, mode: OovMode) -> f64 {
    let denom = match mode {
        OovMode::CountAsError => attempted + skipped,
        OovMode::ExecutableOnly => attempted,
    };
    if denom == 0 {
        0.0
    } else {
        100.0 * correct as f64 / denom as f64
    }
}

/// Percentage with two decimals, half-up.
pub fn format_pct(pct: f64) -> String {
    format!("{:.2}", (pct * 100.0).round() / 100.0)
}

impl EvalReport {
    pub fn category_accuracy(&self, c: &CategoryReport) -> f64 {
        accuracy(c.correct, c.attempted, c.skipped, self.oov_mode)
    }

    /// (attempted, correct, skipped) over one macro-area.
    pub fn macro_counts(&self, area: MacroArea) -> (u64, u64, u64) {
        self.categories
            .iter()
            .filter(|c| c.macro_area == area)
            .fold((0, 0, 0), |(a, c0, s), c| {
                (a + c.attempted, c0 + c.correct, s + c.skipped)
            })
    }

    pub fn macro_accuracy(&self, area: MacroArea) -> f64 {
        let (attempted, correct, skipped) = self.macro_counts(area);
        accuracy(correct, attempted, skipped, self.oov_mode)
    }

    pub fn total_counts(&self) -> (u64, u64, u64) {
        self.categories.iter().fold((0, 0, 0), |(a, c0, s), c| {
            (a + c.attempted, c0 + c.correct, s + c.skipped)
        })
    }

    pub fn total_accuracy(&self) -> f64 {
        let (attempted, correct, skipped) = self.total_counts();
        accuracy(correct, attempted, skipped, self.oov_mode)
    }

    /// Aligned text table with per-category rows, macro-area summaries and
    /// the grand total.
    pub fn to_table(&self) -> String {
        let name_width = self
            .categories
            .iter()
            .map(|c| c.category.len())
            .chain([12])
            .max()
            .unwrap();
        let mut out = String::new();
        out.push_str(&format!(
            "metric {}  oov {}\n{:<name_width$}  {:>9}  {:>9}  {:>8}  {:>7}  {:>8}\n",
            self.metric, self.oov_mode, "category", "area", "attempted", "correct", "skipped", "accuracy"
        ));
        for c in &self.categories {
            out.push_str(&format!(
                "{:<name_width$}  {:>9}  {:>9}  {:>8}  {:>7}  {:>8}\n",
                c.category,
                c.macro_area.to_string(),
                c.attempted,
                c.correct,
                c.skipped,
                format_pct(self.category_accuracy(c)),
            ));
        }
        for area in [MacroArea::Semantic, MacroArea::Syntactic] {
            let (attempted, correct, skipped) = self.macro_counts(area);
            out.push_str(&format!(
                "{:<name_width$}  {:>9}  {:>9}  {:>8}  {:>7}  {:>8}\n",
                area.to_string(),
                "",
                attempted,
                correct,
                skipped,
                format_pct(self.macro_accuracy(area)),
            ));
        }
        let (attempted, correct, skipped) = self.total_counts();
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>8}  {:>7}  {:>8}\n",
            "total",
            "",
            attempted,
            correct,
            skipped,
            format_pct(self.total_accuracy()),
        ));
        out
    }

    /// `category,macro_area,attempted,correct,skipped,accuracy` rows, then
    /// the two macro-area summaries and the total.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,macro_area,attempted,correct,skipped,accuracy\n");
        for c in &self.categories {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.category,
                c.macro_area,
                c.attempted,
                c.correct,
                c.skipped,
                format_pct(self.category_accuracy(c)),
            ));
        }
        for area in [MacroArea::Semantic, MacroArea::Syntactic] {
            let (attempted, correct, skipped) = self.macro_counts(area);
            out.push_str(&format!(
                "{area},{area},{attempted},{correct},{skipped},{}\n",
                format_pct(self.macro_accuracy(area)),
            ));
        }
        let (attempted, correct, skipped) = self.total_counts();
        out.push_str(&format!(
            "total,,{attempted},{correct},{skipped},{}\n",
            format_pct(self.total_accuracy()),
        ));
        out
    }
}

/// Evaluate a test set. A query is executable iff all four words are in
/// the vocabulary; it is correct iff the argmax equals `b*`.
pub fn evaluate(
    emb: &NormalizedEmbeddings,
    testset: &AnalogyTestSet,
    cfg: &EvalConfig,
) -> EvalReport {
    let n = emb.vocab().len() as u32;
    let mut by_category: HashMap<&str, CategoryReport> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (name, area) in &testset.categories {
        if !by_category.contains_key(name.as_str()) {
            order.push(name);
            by_category.insert(
                name,
                CategoryReport {
                    category: name.clone(),
                    macro_area: *area,
                    attempted: 0,
                    correct: 0,
                    skipped: 0,
                },
            );
        }
    }

    for q in &testset.queries {
        let entry = by_category
            .entry(q.category.as_str())
            .or_insert_with(|| {
                order.push(q.category.as_str());
                CategoryReport {
                    category: q.category.clone(),
                    macro_area: q.macro_area,
                    attempted: 0,
                    correct: 0,
                    skipped: 0,
                }
            });

        let resolved = resolve(emb, q);
        let expected = emb.vocab().index(&q.b_star);
        let (a, a_star, b, b_star) = match (resolved, expected) {
            (Some((a, a_star, b)), Some(b_star)) => (a, a_star, b, b_star),
            _ => {
                entry.skipped += 1;
                continue;
            }
        };

        let excluded = excluded_set(cfg, a, a_star, b);
        let predicted = match cfg.metric {
            Metric::CosAdd => argmax(n, &excluded, cosadd_scorer(emb, a, a_star, b)),
            Metric::CosMul => argmax(n, &excluded, cosmul_scorer(emb, a, a_star, b, cfg)),
        };
        entry.attempted += 1;
        if predicted == Some(b_star) {
            entry.correct += 1;
        }
    }

    let categories = order
        .into_iter()
        .map(|name| by_category[name].clone())
        .collect();
    EvalReport {
        metric: cfg.metric,
        oov_mode: cfg.oov_mode,
        categories,
    }
}

/// Top-k nearest neighbors of a vocabulary word by cosine, the word itself
/// excluded, ties by lower index.
pub fn nearest_neighbors(
    emb: &NormalizedEmbeddings,
    word: &str,
    k: usize,
) -> Result<Vec<(String, f64)>, EvalError> {
    let w = emb
        .vocab()
        .index(word)
        .ok_or_else(|| EvalError::OovWord {
            word: word.to_string(),
        })?;
    let row = emb.row(w);
    let mut scored: Vec<(u32, f64)> = (0..emb.vocab().len() as u32)
        .filter(|&c| c != w)
        .map(|c| (c, dot64(emb.row(c), row)))
        .collect();
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(c, s)| (emb.vocab().word(c).to_string(), s))
        .collect())
}

/// Executability rule shared with [`evaluate`]: all four words in the
/// vocabulary.
pub fn is_executable(emb: &NormalizedEmbeddings, q: &AnalogyQuery) -> bool {
    let v = emb.vocab();
    [&q.a, &q.a_star, &q.b, &q.b_star]
        .iter()
        .all(|w| v.index(w).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmbeddingModel, Matrix};
    use crate::vocab::Vocabulary;
    use std::sync::Arc;

    fn emb_from_rows(words: &[&str], rows: Vec<Vec<f32>>) -> NormalizedEmbeddings {
        let vocab = Arc::new(
            Vocabulary::from_ordered(words.iter().map(|w| (w.to_string(), 1))).unwrap(),
        );
        let n = rows.len();
        let dim = rows[0].len();
        let model = EmbeddingModel::from_parts(
            vocab,
            Matrix::from_rows(rows),
            Matrix::zeros(n, dim),
        );
        model.normalized().unwrap()
    }

    fn query(a: &str, a_star: &str, b: &str, b_star: &str) -> AnalogyQuery {
        AnalogyQuery {
            a: a.into(),
            a_star: a_star.into(),
            b: b.into(),
            b_star: b_star.into(),
            category: "test".into(),
            macro_area: MacroArea::Semantic,
        }
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
        assert!(
            (cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs()
                < 1e-4
        );
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 1.0]),
            Err(EvalError::ZeroVector)
        ));
    }

    #[test]
    fn cosadd_king_queen() {
        // v_queen = v_king - v_man + v_woman exactly
        let man = vec![1.0, 0.0, 0.0];
        let woman = vec![0.0, 1.0, 0.0];
        let king = vec![1.0, 0.0, 1.0];
        let queen = vec![0.0, 1.0, 1.0];
        let filler = vec![0.3, -0.2, -0.9];
        let emb = emb_from_rows(
            &["man", "woman", "king", "queen", "filler"],
            vec![man, woman, king, queen, filler],
        );
        let cfg = EvalConfig::default();
        let top = solve_3cosadd(&emb, &query("man", "woman", "king", "queen"), &cfg, 1).unwrap();
        assert_eq!(emb.vocab().word(top[0].0), "queen");
    }

    #[test]
    fn cosadd_collapsed_query_is_nearest_neighbor() {
        // a == a*: the offset collapses to b, so the answer is b's nearest
        // neighbor with {a, b} excluded
        let emb = emb_from_rows(
            &["a", "b", "close", "far"],
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.1, 1.0],
                vec![1.0, -0.5],
            ],
        );
        let cfg = EvalConfig::default();
        let top = solve_3cosadd(&emb, &query("a", "a", "b", "close"), &cfg, 2).unwrap();
        assert_eq!(emb.vocab().word(top[0].0), "close");
    }

    #[test]
    fn cosadd_oov_is_not_executable() {
        let emb = emb_from_rows(&["a", "b"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let cfg = EvalConfig::default();
        assert!(solve_3cosadd(&emb, &query("missing", "a", "b", "a"), &cfg, 1).is_none());
    }

    #[test]
    fn cosmul_dominant_candidate_wins() {
        // "up" maximizes both numerator cosines and minimizes the
        // denominator cosine
        let emb = emb_from_rows(
            &["a", "astar", "b", "up", "down"],
            vec![
                vec![-1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.1],
                vec![0.0, 0.1, 1.0],
                vec![0.9, 0.3, 0.3],
                vec![-0.9, -0.3, -0.3],
            ],
        );
        let cfg = EvalConfig::default();
        let top = solve_3cosmul(&emb, &query("a", "astar", "b", "up"), &cfg, 1).unwrap();
        assert_eq!(emb.vocab().word(top[0].0), "up");
    }

    #[test]
    fn solvers_are_scale_invariant() {
        // scaling all rows by powers of two leaves normalized rows, and
        // therefore predictions, bit-identical
        let words: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
        let word_refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let mut rows = Vec::new();
        let mut state = 0x12345u64;
        for _ in 0..20 {
            let mut row = Vec::new();
            for _ in 0..6 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                row.push(((state >> 33) as f32 / (1u64 << 31) as f32) - 0.5);
            }
            rows.push(row);
        }
        let scaled: Vec<Vec<f32>> = rows
            .iter()
            .map(|r| r.iter().map(|x| x * 4.0).collect())
            .collect();
        let emb1 = emb_from_rows(&word_refs, rows);
        let emb2 = emb_from_rows(&word_refs, scaled);
        let cfg = EvalConfig::default();
        for (a, s, b) in [(0, 1, 2), (3, 7, 11), (5, 13, 19)] {
            let q = query(&words[a], &words[s], &words[b], &words[0]);
            for solver in [solve_3cosadd, solve_3cosmul] {
                let r1 = solver(&emb1, &q, &cfg, 1).unwrap();
                let r2 = solver(&emb2, &q, &cfg, 1).unwrap();
                assert_eq!(r1[0].0, r2[0].0);
            }
        }
    }

    fn write_analogies(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("analogies.txt");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn parse_simple_file() {
        let (_d, path) = write_analogies(": capital-common\nroma italia parigi francia\n");
        let set =
            parse_analogy_file(&path, &MacroMap::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(set.queries.len(), 1);
        let q = &set.queries[0];
        assert_eq!(q.category, "capital-common");
        assert_eq!(q.macro_area, MacroArea::Semantic);
        assert_eq!((q.a.as_str(), q.b_star.as_str()), ("roma", "francia"));
    }

    #[test]
    fn parse_cleans_words() {
        let (_d, path) = write_analogies(": gram1-case\nRoma ITALIA Parigi Francia\n");
        let set =
            parse_analogy_file(&path, &MacroMap::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(set.queries[0].macro_area, MacroArea::Syntactic);
        assert_eq!(set.queries[0].a, "roma");
        assert_eq!(set.queries[0].a_star, "italia");
    }

    #[test]
    fn parse_rejects_three_word_line() {
        let (_d, path) = write_analogies(": cat\na b c\n");
        match parse_analogy_file(&path, &MacroMap::default(), &PreprocessConfig::default()) {
            Err(EvalError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other.err()),
        }
    }

    #[test]
    fn parse_rejects_headerless_data() {
        let (_d, path) = write_analogies("a b c d\n");
        match parse_analogy_file(&path, &MacroMap::default(), &PreprocessConfig::default()) {
            Err(EvalError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {:?}", other.err()),
        }
    }

    #[test]
    fn parse_full_size_test_set_shape() {
        // 19 categories, 19791 analogies total, 6 semantic + 13 syntactic
        let mut content = String::new();
        let mut remaining = 19791;
        for c in 0..19 {
            let name = if c < 6 {
                format!(": class-{c}\n")
            } else {
                format!(": gram{c}-case\n")
            };
            content.push_str(&name);
            let lines = if c == 18 { remaining } else { 19791 / 19 };
            remaining -= lines;
            for i in 0..lines {
                content.push_str(&format!("a{i} b{i} c{i} d{i}\n"));
            }
        }
        let (_d, path) = write_analogies(&content);
        let set =
            parse_analogy_file(&path, &MacroMap::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(set.queries.len(), 19791);
        assert_eq!(set.categories.len(), 19);
        let semantic = set
            .categories
            .iter()
            .filter(|(_, a)| *a == MacroArea::Semantic)
            .count();
        assert_eq!(semantic, 6);
    }

    #[test]
    fn parse_explicit_macro_map() {
        let mut mm = MacroMap::default();
        mm.explicit
            .insert("oddly-named".to_string(), MacroArea::Syntactic);
        let (_d, path) = write_analogies(": oddly-named\na b c d\n");
        let set = parse_analogy_file(&path, &mm, &PreprocessConfig::default()).unwrap();
        assert_eq!(set.queries[0].macro_area, MacroArea::Syntactic);
    }

    /// Four almost-orthogonal direction words plus two clusters built so
    /// that within-cluster analogies are solvable exactly.
    fn toy_emb() -> NormalizedEmbeddings {
        emb_from_rows(
            &["x0", "y0", "x1", "y1", "noise"],
            vec![
                vec![1.0, 0.0, 0.1],
                vec![0.0, 1.0, 0.1],
                vec![1.0, 0.0, 0.9],
                vec![0.0, 1.0, 0.9],
                vec![-0.5, -0.5, 0.2],
            ],
        )
    }

    #[test]
    fn evaluate_counts_and_modes() {
        let emb = toy_emb();
        let mut queries = vec![
            // executable, correct: x0:y0 = x1:y1
            query("x0", "y0", "x1", "y1"),
            // executable, correct the other way
            query("y0", "x0", "y1", "x1"),
            // executable, wrong on purpose (answer is y1, expect noise)
            query("x0", "y0", "x1", "noise"),
            // not executable: b* out of vocabulary
            query("x0", "y0", "x1", "missing"),
        ];
        for q in &mut queries {
            q.category = "family".to_string();
        }
        let testset = AnalogyTestSet {
            queries,
            categories: vec![("family".to_string(), MacroArea::Semantic)],
        };

        let cfg = EvalConfig {
            metric: Metric::CosAdd,
            oov_mode: OovMode::ExecutableOnly,
            ..EvalConfig::default()
        };
        let report = evaluate(&emb, &testset, &cfg);
        let c = &report.categories[0];
        assert_eq!((c.attempted, c.correct, c.skipped), (3, 2, 1));
        assert!((report.total_accuracy() - 200.0 / 3.0).abs() < 1e-9);

        let report = evaluate(
            &emb,
            &testset,
            &EvalConfig {
                oov_mode: OovMode::CountAsError,
                ..cfg
            },
        );
        assert!((report.total_accuracy() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_hand_computed_fixture() {
        // 4 executable with 2 correct plus 1 OOV:
        // executable_only 50.00, count_as_error 40.00
        let emb = toy_emb();
        let mut queries = vec![
            query("x0", "y0", "x1", "y1"),
            query("y0", "x0", "y1", "x1"),
            query("x0", "y0", "x1", "noise"),
            query("y0", "x0", "x1", "x0"),
            query("x0", "y0", "missing", "y1"),
        ];
        for q in &mut queries {
            q.category = "fixture".to_string();
        }
        let testset = AnalogyTestSet {
            queries,
            categories: vec![("fixture".to_string(), MacroArea::Semantic)],
        };
        let base = EvalConfig {
            metric: Metric::CosAdd,
            ..EvalConfig::default()
        };

        let exec_only = evaluate(
            &emb,
            &testset,
            &EvalConfig {
                oov_mode: OovMode::ExecutableOnly,
                ..base.clone()
            },
        );
        let (attempted, correct, skipped) = exec_only.total_counts();
        assert_eq!((attempted, skipped), (4, 1));
        assert_eq!(correct, 2);
        assert_eq!(format_pct(exec_only.total_accuracy()), "50.00");

        let as_error = evaluate(
            &emb,
            &testset,
            &EvalConfig {
                oov_mode: OovMode::CountAsError,
                ..base
            },
        );
        assert_eq!(format_pct(as_error.total_accuracy()), "40.00");
    }

    #[test]
    fn report_macro_totals_sum_to_total() {
        let report = EvalReport {
            metric: Metric::CosMul,
            oov_mode: OovMode::CountAsError,
            categories: vec![
                CategoryReport {
                    category: "sem1".into(),
                    macro_area: MacroArea::Semantic,
                    attempted: 10,
                    correct: 4,
                    skipped: 2,
                },
                CategoryReport {
                    category: "gram1".into(),
                    macro_area: MacroArea::Syntactic,
                    attempted: 20,
                    correct: 11,
                    skipped: 0,
                },
            ],
        };
        let (sa, sc, ss) = report.macro_counts(MacroArea::Semantic);
        let (ya, yc, ys) = report.macro_counts(MacroArea::Syntactic);
        let (ta, tc, ts) = report.total_counts();
        assert_eq!((sa + ya, sc + yc, ss + ys), (ta, tc, ts));
        // recomputing the printed percentage from raw counts matches
        let pct: f64 = report.to_csv().lines().last().unwrap().split(',').last().unwrap().parse().unwrap();
        assert!((pct - 100.0 * tc as f64 / (ta + ts) as f64).abs() < 0.01);
    }

    #[test]
    fn evaluation_ignores_output_matrix() {
        // eval reads only the input matrix, so perturbing the output
        // matrix cannot change any report
        let vocab = Arc::new(
            Vocabulary::from_ordered((0..6).map(|i| (format!("w{i}"), 1))).unwrap(),
        );
        let mut model = EmbeddingModel::init(Arc::clone(&vocab), 8, 5).unwrap();
        let q = query("w0", "w1", "w2", "w3");
        let testset = AnalogyTestSet {
            queries: vec![q],
            categories: vec![("test".to_string(), MacroArea::Semantic)],
        };
        let cfg = EvalConfig::default();
        let before = evaluate(&model.normalized().unwrap(), &testset, &cfg);
        let (_, output) = model.parts_mut();
        for x in output.as_mut_slice() {
            *x = 123.456;
        }
        let after = evaluate(&model.normalized().unwrap(), &testset, &cfg);
        assert_eq!(before.categories, after.categories);
    }

    #[test]
    fn nearest_neighbors_basics() {
        let emb = toy_emb();
        assert!(nearest_neighbors(&emb, "x0", 0).unwrap().is_empty());
        let nn = nearest_neighbors(&emb, "x0", 10).unwrap();
        assert_eq!(nn.len(), 4); // vocabulary minus the query word
        assert!(nn.iter().all(|(w, _)| w != "x0"));
        assert!(matches!(
            nearest_neighbors(&emb, "zzz", 3),
            Err(EvalError::OovWord { .. })
        ));
    }

    #[test]
    fn nearest_neighbors_matches_bruteforce() {
        let vocab = Arc::new(
            Vocabulary::from_ordered((0..50).map(|i| (format!("w{i:02}"), 1))).unwrap(),
        );
        let model = EmbeddingModel::init(vocab, 10, 77).unwrap();
        let emb = model.normalized().unwrap();
        let got = nearest_neighbors(&emb, "w07", 50).unwrap();

        let qrow = emb.row(7);
        let mut want: Vec<(u32, f64)> = (0..50u32)
            .filter(|&c| c != 7)
            .map(|c| {
                let mut dot = 0.0f64;
                for (x, y) in emb.row(c).iter().zip(qrow) {
                    dot += *x as f64 * *y as f64;
                }
                (c, dot)
            })
            .collect();
        want.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let want: Vec<String> = want
            .iter()
            .map(|&(c, _)| emb.vocab().word(c).to_string())
            .collect();
        let got: Vec<String> = got.into_iter().map(|(w, _)| w).collect();
        assert_eq!(got, want);
    }

    /// Independent full-scan references for both metrics, built straight
    /// from the cosine definition.
    mod oracle {
        use super::super::*;

        pub fn cos_ref(x: &[f32], y: &[f32]) -> f64 {
            let dot: f64 = x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum();
            let nx: f64 = x.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|&b| (b as f64).powi(2)).sum::<f64>().sqrt();
            dot / (nx * ny)
        }

        pub fn brute_cosadd(
            emb: &NormalizedEmbeddings,
            a: u32,
            a_star: u32,
            b: u32,
            exclude: &[u32],
        ) -> u32 {
            let dim = emb.dim();
            let mut target = vec![0.0f32; dim];
            for j in 0..dim {
                target[j] = emb.row(b)[j] - emb.row(a)[j] + emb.row(a_star)[j];
            }
            let zero = target.iter().all(|&t| t == 0.0);
            let mut best: Option<(u32, f64)> = None;
            for c in 0..emb.vocab().len() as u32 {
                if exclude.contains(&c) {
                    continue;
                }
                let s = if zero { 0.0 } else { cos_ref(emb.row(c), &target) };
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((c, s));
                }
            }
            best.unwrap().0
        }

        pub fn brute_cosmul(
            emb: &NormalizedEmbeddings,
            a: u32,
            a_star: u32,
            b: u32,
            exclude: &[u32],
            eps: f64,
            shift: bool,
        ) -> u32 {
            let mut best: Option<(u32, f64)> = None;
            for c in 0..emb.vocab().len() as u32 {
                if exclude.contains(&c) {
                    continue;
                }
                let f = |x: f64| if shift { (x + 1.0) / 2.0 } else { x };
                let s = f(cos_ref(emb.row(c), emb.row(b)))
                    * f(cos_ref(emb.row(c), emb.row(a_star)))
                    / (f(cos_ref(emb.row(c), emb.row(a))) + eps);
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((c, s));
                }
            }
            best.unwrap().0
        }
    }

    #[test]
    fn solvers_match_bruteforce_oracle() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
        let vocab = Arc::new(
            Vocabulary::from_ordered(words.iter().map(|w| (w.clone(), 1))).unwrap(),
        );
        let model = EmbeddingModel::init(vocab, 10, 404).unwrap();
        let emb = model.normalized().unwrap();

        let mut state = 999u64;
        let mut next = |n: u32| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % n as u64) as u32
        };
        for exclude_inputs in [true, false] {
            for shift in [true, false] {
                let cfg = EvalConfig {
                    exclude_inputs,
                    cosmul_shift: shift,
                    metric: Metric::CosAdd,
                    ..EvalConfig::default()
                };
                for _ in 0..200 {
                    let (a, s, b) = (next(20), next(20), next(20));
                    let q = query(&words[a as usize], &words[s as usize], &words[b as usize], "w00");
                    let exclude: Vec<u32> = if exclude_inputs { vec![a, s, b] } else { vec![] };

                    let got = solve_3cosadd(&emb, &q, &cfg, 1).unwrap()[0].0;
                    assert_eq!(got, oracle::brute_cosadd(&emb, a, s, b, &exclude));

                    let got = solve_3cosmul(&emb, &q, &cfg, 1).unwrap()[0].0;
                    assert_eq!(
                        got,
                        oracle::brute_cosmul(&emb, a, s, b, &exclude, cfg.epsilon, shift)
                    );
                }
            }
        }
    }

    #[test]
    fn cosmul_epsilon_sensitivity_keeps_oracle_equivalence() {
        let words: Vec<String> = (0..15).map(|i| format!("w{i:02}")).collect();
        let vocab = Arc::new(
            Vocabulary::from_ordered(words.iter().map(|w| (w.clone(), 1))).unwrap(),
        );
        let model = EmbeddingModel::init(vocab, 8, 1234).unwrap();
        let emb = model.normalized().unwrap();
        for eps in [1e-6, 2e-6] {
            let cfg = EvalConfig {
                epsilon: eps,
                ..EvalConfig::default()
            };
            let q = query("w03", "w08", "w11", "w00");
            let got = solve_3cosmul(&emb, &q, &cfg, 1).unwrap()[0].0;
            assert_eq!(
                got,
                oracle::brute_cosmul(&emb, 3, 8, 11, &[3, 8, 11], eps, true)
            );
        }
    }
}
