#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use punctrest::corpus::LabeledWord;
use punctrest::tagger::{weighted_loss_and_grad, ContextWindowModel, Logits};
use punctrest::tokenizer::{encode_compound, EncodedSequence, Vocab};
use punctrest::PunctClass;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn toy_corpus() -> PathBuf {
    crate_dir().join("data/toy/corpus")
}

pub fn toy_vocab() -> PathBuf {
    crate_dir().join("data/toy/vocab.txt")
}

pub fn testdata(name: &str) -> PathBuf {
    crate_dir().join("testdata").join(name)
}

/// Runs the CLI with `args` (no program name).
pub fn run<S: AsRef<str>>(args: &[S]) -> i32 {
    let argv: Vec<String> = std::iter::once("punctrest".to_string())
        .chain(args.iter().map(|a| a.as_ref().to_string()))
        .collect();
    punctrest::cli::dispatch(argv)
}

pub fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Relative path → contents for every file below `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// preprocess → stats → split → plan → train → predict → eval on the toy
/// corpus, driven by a config file. Returns the exit codes.
pub fn toy_pipeline(config_dir: &Path, out: &Path, seed: u64) -> Vec<i32> {
    let config = config_dir.join("run.conf");
    fs::write(
        &config,
        format!(
            "# toy run\nseed = {seed}\ncorpus = {}\nvocab = {}\nout = {}\n",
            p(&toy_corpus()),
            p(&toy_vocab()),
            p(out)
        ),
    )
    .unwrap();
    let conf = p(&config);
    ["preprocess", "stats", "split", "plan", "train", "predict", "eval"]
        .iter()
        .map(|cmd| run(&[*cmd, "--config", &conf]))
        .collect()
}

/// Pieces `a`..`e`, their continuations and a few longer pieces.
pub fn letter_vocab() -> Vocab {
    let mut pieces: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "abc", "de", "##bcd", "##ea"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in 'a'..='e' {
        pieces.push(c.to_string());
        pieces.push(format!("##{c}"));
    }
    Vocab::from_pieces(pieces).unwrap()
}

pub fn random_sequences(rng: &mut ChaCha8Rng, vocab: &Vocab, n: usize) -> Vec<EncodedSequence> {
    let letters = ['a', 'b', 'c', 'd', 'e'];
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..10);
            let words: Vec<LabeledWord> = (0..len)
                .map(|_| {
                    let wl = rng.gen_range(1..5);
                    let w: String = (0..wl).map(|_| letters[rng.gen_range(0..5)]).collect();
                    LabeledWord::new(w, PunctClass::ALL[rng.gen_range(0..4)])
                })
                .collect();
            encode_compound(&words, vocab, 64).unwrap().sequence().unwrap()
        })
        .collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, radius: usize, dim: usize) -> ContextWindowModel {
    let weights = (0..4 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias = [0; 4].map(|_| rng.gen_range(-1.0..1.0));
    ContextWindowModel::from_parts(radius, dim, 0, weights, bias).unwrap()
}

pub struct GradCheck {
    pub models: usize,
    pub coordinates: usize,
    pub nonzero: usize,
    pub max_rel_error: f64,
}

/// Compares analytic gradients with central differences (step 1e-5) at
/// `per_model` random coordinates of each of `models` random models. Odd
/// models use class weights.
pub fn gradient_check(seed: u64, models: usize, per_model: usize) -> GradCheck {
    let vocab = letter_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-5;
    let mut out = GradCheck { models, coordinates: 0, nonzero: 0, max_rel_error: 0.0 };
    for m in 0..models {
        let dim = 32;
        let model = random_model(&mut rng, 1 + m % 3, dim);
        let data = random_sequences(&mut rng, &vocab, 6);
        let cw: Option<Logits> = (m % 2 == 1).then_some([0.5, 2.0, 1.5, 3.0]);
        let loss_of = |mm: &ContextWindowModel| weighted_loss_and_grad(mm, &data, cw.as_ref()).unwrap();
        let (_, grad) = loss_of(&model);
        for _ in 0..per_model {
            let k = rng.gen_range(0..4 * dim + 4);
            let (mut plus, mut minus) = (model.clone(), model.clone());
            let analytic = if k < 4 * dim {
                plus.weights_mut()[k] += eps;
                minus.weights_mut()[k] -= eps;
                grad.weights[k]
            } else {
                plus.bias_mut()[k - 4 * dim] += eps;
                minus.bias_mut()[k - 4 * dim] -= eps;
                grad.bias[k - 4 * dim]
            };
            let fd = (loss_of(&plus).0 - loss_of(&minus).0) / (2.0 * eps);
            let rel = (analytic - fd).abs() / fd.abs().max(1.0);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.coordinates += 1;
            out.nonzero += usize::from(analytic != 0.0);
        }
    }
    out
}

/// Writes one labels file per document, each holding `sizes[i]` words. Every
/// seventh word ends a sentence; the rest carry EMPTY or COMMA.
pub fn write_synthetic_labels(dir: &Path, sizes: &[usize]) -> Vec<String> {
    fs::create_dir_all(dir).unwrap();
    let mut stream = Vec::new();
    let mut n = 0usize;
    for (d, &size) in sizes.iter().enumerate() {
        let mut tsv = String::new();
        for i in 0..size {
            let word = format!("w{n}");
            let label = if i + 1 == size || i % 7 == 6 {
                PunctClass::Period
            } else if i % 5 == 2 {
                PunctClass::Comma
            } else {
                PunctClass::Empty
            };
            tsv.push_str(&format!("{word}\t{label}\n"));
            if label == PunctClass::Period && i + 1 < size {
                tsv.push('\n');
            }
            stream.push(word);
            n += 1;
        }
        fs::write(dir.join(format!("doc{d:03}.tsv")), tsv).unwrap();
    }
    stream
}
