//! Vocabulary construction and CBOW embedding induction with negative
//! sampling.
//!
//! Training is single-threaded and driven by one seeded ChaCha stream, so
//! a fixed `(corpus, vocab, config)` triple always produces bit-identical
//! vectors. Context windows never cross line boundaries.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Subword vocabulary budget used for target-domain vocabularies.
pub const DEFAULT_MAX_VOCAB: usize = 16_000;

const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbowConfig {
    pub dim: usize,
    /// Symmetric context radius.
    pub window: usize,
    /// Negative samples per prediction.
    pub negatives: usize,
    pub epochs: usize,
    /// Starting learning rate, decayed linearly to zero.
    pub initial_lr: f64,
    pub min_count: u64,
    pub max_vocab: usize,
    pub seed: u64,
    /// Frequent-token subsampling threshold; 0 disables it.
    pub subsample_threshold: f64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.05,
            min_count: 1,
            max_vocab: DEFAULT_MAX_VOCAB,
            seed: 0,
            subsample_threshold: 1e-4,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("max_vocab", self.max_vocab),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::InvalidConfig("initial_lr must be positive".into()));
        }
        if !(self.subsample_threshold.is_finite() && self.subsample_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "subsample_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Counts whitespace-separated tokens, keeps those with at least
/// `min_count` occurrences and truncates to the `max_vocab` most frequent.
/// Ties are broken by first occurrence.
pub fn build_vocab<I, S>(corpus: I, min_count: u64, max_vocab: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    for line in corpus {
        for token in line.as_ref().split_whitespace() {
            let next = counts.len();
            counts.entry(token.to_owned()).or_insert((0, next)).0 += 1;
        }
    }
    let mut entries: Vec<(String, u64, usize)> = counts
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(token, (count, first))| (token, count, first))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    entries.truncate(max_vocab);
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "no token occurs at least {min_count} times"
        )));
    }
    Vocabulary::with_frequencies(entries.into_iter().map(|(t, c, _)| (t, c)))
}

/// Trains CBOW with negative sampling and returns the input-side vectors.
pub fn train_cbow<S: AsRef<str>>(
    corpus: &[S],
    vocab: &Vocabulary,
    config: &CbowConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary("cannot train on an empty vocabulary".into()));
    }

    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|line| {
            line.as_ref()
                .split_whitespace()
                .filter_map(|t| vocab.index_of(t).map(|i| i as u32))
                .collect()
        })
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();
    if !sentences.iter().any(|s| s.len() >= 2) {
        return Err(Error::NoTrainingPairs);
    }

    let mut counts = vec![0u64; vocab.len()];
    for &id in sentences.iter().flatten() {
        counts[id as usize] += 1;
    }
    let total_words: u64 = counts.iter().sum();

    let mut trainer = Trainer::new(vocab.len(), config, &counts, total_words)?;
    for _ in 0..config.epochs {
        for sentence in &sentences {
            trainer.train_sentence(sentence);
        }
    }

    let data = trainer.input.iter().map(|&v| f64::from(v)).collect();
    EmbeddingMatrix::new(vocab.clone(), config.dim, data)
}

struct Trainer<'a> {
    config: &'a CbowConfig,
    rng: ChaCha8Rng,
    input: Vec<f32>,
    output: Vec<f32>,
    negatives: WeightedIndex<f64>,
    keep_prob: Vec<f64>,
    processed: u64,
    total_steps: f64,
    // scratch
    hidden: Vec<f32>,
    grad: Vec<f32>,
    kept: Vec<u32>,
}

impl<'a> Trainer<'a> {
    fn new(
        vocab_size: usize,
        config: &'a CbowConfig,
        counts: &[u64],
        total_words: u64,
    ) -> Result<Self> {
        let dim = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 0.5 / dim as f32;
        let input = (0..vocab_size * dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let output = vec![0.0f32; vocab_size * dim];

        let weights = counts.iter().map(|&c| (c as f64).powf(UNIGRAM_POWER));
        let negatives = WeightedIndex::new(weights)
            .map_err(|e| Error::InvalidConfig(format!("negative sampling table: {e}")))?;

        let threshold = config.subsample_threshold * total_words as f64;
        let keep_prob = counts
            .iter()
            .map(|&c| {
                if threshold <= 0.0 || c == 0 {
                    1.0
                } else {
                    let c = c as f64;
                    ((c / threshold).sqrt() + 1.0) * threshold / c
                }
            })
            .collect();

        Ok(Trainer {
            config,
            rng,
            input,
            output,
            negatives,
            keep_prob,
            processed: 0,
            total_steps: (config.epochs as u64 * total_words) as f64,
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            kept: Vec::new(),
        })
    }

    fn learning_rate(&self) -> f32 {
        let progress = self.processed as f64 / self.total_steps;
        (self.config.initial_lr * (1.0 - progress)).max(0.0) as f32
    }

    fn train_sentence(&mut self, sentence: &[u32]) {
        self.kept.clear();
        for &id in sentence {
            let p = self.keep_prob[id as usize];
            if p >= 1.0 || self.rng.random::<f64>() < p {
                self.kept.push(id);
            }
        }
        let lr = self.learning_rate();
        self.processed += sentence.len() as u64;

        let kept = std::mem::take(&mut self.kept);
        for pos in 0..kept.len() {
            let lo = pos.saturating_sub(self.config.window);
            let hi = (pos + self.config.window + 1).min(kept.len());
            if hi - lo < 2 {
                continue;
            }
            self.step(&kept, pos, lo, hi, lr);
        }
        self.kept = kept;
    }

    fn step(&mut self, sentence: &[u32], pos: usize, lo: usize, hi: usize, lr: f32) {
        let dim = self.config.dim;
        let center = sentence[pos] as usize;

        self.hidden.fill(0.0);
        for (i, &ctx) in sentence[lo..hi].iter().enumerate() {
            if lo + i == pos {
                continue;
            }
            let row = &self.input[ctx as usize * dim..(ctx as usize + 1) * dim];
            for (h, v) in self.hidden.iter_mut().zip(row) {
                *h += v;
            }
        }
        let n_ctx = (hi - lo - 1) as f32;
        for h in &mut self.hidden {
            *h /= n_ctx;
        }

        self.grad.fill(0.0);
        for sample in 0..=self.config.negatives {
            let (target, label) = if sample == 0 {
                (center, 1.0f32)
            } else {
                let t = self.negatives.sample(&mut self.rng);
                if t == center {
                    continue;
                }
                (t, 0.0)
            };
            let out = &mut self.output[target * dim..(target + 1) * dim];
            let f: f32 = self.hidden.iter().zip(out.iter()).map(|(h, o)| h * o).sum();
            let g = (label - sigmoid(f)) * lr;
            for ((e, o), h) in self.grad.iter_mut().zip(out.iter_mut()).zip(&self.hidden) {
                *e += g * *o;
                *o += g * h;
            }
        }

        for (i, &ctx) in sentence[lo..hi].iter().enumerate() {
            if lo + i == pos {
                continue;
            }
            let row = &mut self.input[ctx as usize * dim..(ctx as usize + 1) * dim];
            for (v, e) in row.iter_mut().zip(&self.grad) {
                *v += e;
            }
        }
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_counts() {
        let v = build_vocab(["a a b"], 1, 10).unwrap();
        assert_eq!(v.tokens(), &["a", "b"]);
        assert_eq!(v.frequencies(), &[2, 1]);
        assert_eq!(v.specials().count(), 0);
    }

    #[test]
    fn vocab_min_count() {
        let v = build_vocab(["a a b"], 2, 10).unwrap();
        assert_eq!(v.tokens(), &["a"]);
    }

    #[test]
    fn vocab_tie_break_first_occurrence() {
        let v = build_vocab(["a b c"], 1, 2).unwrap();
        assert_eq!(v.tokens(), &["a", "b"]);
        let v = build_vocab(["c b", "a b"], 1, 2).unwrap();
        assert_eq!(v.tokens(), &["b", "c"]);
    }

    #[test]
    fn vocab_empty_is_error() {
        assert!(matches!(
            build_vocab(Vec::<&str>::new(), 1, 10),
            Err(Error::EmptyVocabulary(_))
        ));
        assert!(build_vocab(["a"], 2, 10).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CbowConfig::default().validate().is_ok());
        let bad = CbowConfig { negatives: 0, ..CbowConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CbowConfig { initial_lr: 0.0, ..CbowConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn no_pairs_is_error() {
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let cfg = CbowConfig { dim: 4, ..CbowConfig::default() };
        assert!(matches!(
            train_cbow::<&str>(&[], &vocab, &cfg),
            Err(Error::NoTrainingPairs)
        ));
        assert!(matches!(
            train_cbow(&["a", "b", "zzz a"], &vocab, &cfg),
            Err(Error::NoTrainingPairs)
        ));
    }

    #[test]
    fn unseen_tokens_keep_init() {
        let vocab = Vocabulary::new(["a", "b", "unused"]).unwrap();
        let cfg = CbowConfig {
            dim: 4,
            epochs: 2,
            subsample_threshold: 0.0,
            ..CbowConfig::default()
        };
        let emb = train_cbow(&["a b a b"; 20], &vocab, &cfg).unwrap();
        let bound = 0.5 / 4.0;
        assert!(emb.row(2).iter().all(|v| v.abs() <= bound));
        assert!(emb.row(0).iter().any(|v| v.abs() > bound));
    }
}
