//! Generator for the small bundled example: a tied-decoder checkpoint with
//! width 8, pre-trained vocabularies for both sides, target-domain corpora
//! and a pipeline config.
//!
//! Each side has four topics. Topics `a` and `b` exist in the pre-trained
//! vocabulary and in the target corpus; `c` and `d` occur only in the
//! corpus; `z` only in the pre-trained vocabulary. Token `<lang>_a00` is
//! pre-trained next to topic `a` but used with topic `c` in the corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocadapt_core::checkpoint::{Roles, Tensor, VocabRef};
use vocadapt_core::vocab::{write_vocab, DEFAULT_SPECIALS};
use vocadapt_core::{write_checkpoint, Checkpoint, Vocabulary};

use crate::error::CliError;
use crate::files::write_file;

pub const WIDTH: usize = 8;
pub const LINES: usize = 3000;
const WORDS_PER_TOPIC: usize = 12;
const FUNCTION_WORDS: usize = 8;
const SEED: u64 = 0x70f;

const CONFIG: &str = r#"# Toy adaptation run: both sides, locally linear mapping with k = 10.
checkpoint = "model.vack"
output_dir = "out"
seed = 0

[encoder]
vocab = "vocab.en.txt"
corpus = "corpus.en.txt"

[encoder.cbow]
# A vocabulary this small needs much lighter subsampling than the default.
subsample_threshold = 0.001

[encoder.projection]
method = "llm"
k = 10

[decoder]
vocab = "vocab.ja.txt"
corpus = "corpus.ja.txt"

[decoder.cbow]
subsample_threshold = 0.001

[decoder.projection]
method = "llm"
k = 10
"#;

fn word(lang: &str, topic: char, i: usize) -> String {
    format!("{lang}_{topic}{i:02}")
}

fn function_word(lang: &str, i: usize) -> String {
    format!("{lang}_f{i}")
}

fn uniform(rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..WIDTH).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Pre-trained vocabulary and embedding rows for one language.
fn pretrained(lang: &str, rng: &mut ChaCha8Rng) -> (Vocabulary, Vec<f32>) {
    let mut tokens: Vec<String> = DEFAULT_SPECIALS.iter().map(|s| s.to_string()).collect();
    let mut rows: Vec<Vec<f64>> = (0..DEFAULT_SPECIALS.len()).map(|_| uniform(rng, 0.1)).collect();
    for i in 0..FUNCTION_WORDS {
        tokens.push(function_word(lang, i));
        rows.push(uniform(rng, 1.0));
    }
    for topic in ['a', 'b', 'z'] {
        let center = uniform(rng, 1.0);
        for i in 0..WORDS_PER_TOPIC {
            tokens.push(word(lang, topic, i));
            let noise = uniform(rng, 0.3);
            rows.push(center.iter().zip(noise).map(|(c, n)| c + n).collect());
        }
    }
    let entries = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, if i < DEFAULT_SPECIALS.len() { 0 } else { 100 }));
    let vocab = Vocabulary::with_frequencies(entries)
        .expect("distinct tokens")
        .with_default_specials();
    let data = rows.into_iter().flatten().map(|v| v as f32).collect();
    (vocab, data)
}

fn corpus(lang: &str, rng: &mut ChaCha8Rng) -> String {
    let topics = ['a', 'b', 'c', 'd'];
    let shifted = word(lang, 'a', 0);
    let mut out = String::new();
    for _ in 0..LINES {
        let topic = topics[rng.random_range(0..topics.len())];
        let len = rng.random_range(6..=12);
        let mut line = Vec::with_capacity(len + 1);
        for _ in 0..len {
            if rng.random_bool(0.25) {
                line.push(function_word(lang, rng.random_range(0..FUNCTION_WORDS)));
            } else {
                // Index 0 of topic a is never drawn here; it appears with c.
                let lo = usize::from(topic == 'a');
                line.push(word(lang, topic, rng.random_range(lo..WORDS_PER_TOPIC)));
            }
        }
        if topic == 'c' && rng.random_bool(0.5) {
            let at = rng.random_range(0..=line.len());
            line.insert(at, shifted.clone());
        }
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// Writes the toy files into `dir`, which is created if needed.
pub fn write_toy_data(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (enc_vocab, enc_rows) = pretrained("en", &mut rng);
    let (dec_vocab, dec_rows) = pretrained("ja", &mut rng);

    let mut tensors = BTreeMap::new();
    let enc = Tensor::new(vec![enc_vocab.len(), WIDTH], enc_rows).expect("rows");
    let dec = Tensor::new(vec![dec_vocab.len(), WIDTH], dec_rows).expect("rows");
    tensors.insert("encoder.embed_tokens.weight".to_owned(), enc);
    tensors.insert("decoder.embed_tokens.weight".to_owned(), dec);
    for (name, shape) in [
        ("encoder.layers.0.self_attn.weight", vec![WIDTH, WIDTH]),
        ("encoder.layer_norm.weight", vec![WIDTH]),
        ("decoder.layers.0.self_attn.weight", vec![WIDTH, WIDTH]),
        ("decoder.layers.0.self_attn.bias", vec![WIDTH]),
    ] {
        tensors.insert(name.to_owned(), tensor(&mut rng, shape));
    }
    let roles = Roles {
        encoder_embedding: "encoder.embed_tokens.weight".into(),
        decoder_embedding: "decoder.embed_tokens.weight".into(),
        decoder_output: "decoder.embed_tokens.weight".into(),
        tied_decoder: true,
        encoder_vocab: VocabRef { file: "vocab.en.txt".into(), size: enc_vocab.len() },
        decoder_vocab: VocabRef { file: "vocab.ja.txt".into(), size: dec_vocab.len() },
    };
    let cp = Checkpoint::new(roles, tensors);
    write_checkpoint(&cp, dir.join("model.vack"))?;
    write_vocab(&enc_vocab, dir.join("vocab.en.txt"))?;
    write_vocab(&dec_vocab, dir.join("vocab.ja.txt"))?;
    write_file(&dir.join("corpus.en.txt"), corpus("en", &mut rng))?;
    write_file(&dir.join("corpus.ja.txt"), corpus("ja", &mut rng))?;
    write_file(&dir.join("pipeline.toml"), CONFIG)?;
    Ok(())
}

/// Names of the files produced by [`write_toy_data`].
pub const TOY_FILES: [&str; 6] = [
    "model.vack",
    "vocab.en.txt",
    "vocab.ja.txt",
    "corpus.en.txt",
    "corpus.ja.txt",
    "pipeline.toml",
];
