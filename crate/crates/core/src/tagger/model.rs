//! Trainable context-window softmax tagger.
//!
//! Each position is scored by a linear layer over hashed features of the
//! pieces around it, followed by a softmax over the four classes. Training
//! minimises the mean cross-entropy over positions whose label is not
//! [`MASK_LABEL`], with mini-batch SGD and optional momentum.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{featurize, validate_shape};
use super::{log_softmax, softmax, Logits, TaggerBackend, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::label::MASK_LABEL;
use crate::tokenizer::EncodedSequence;

const MODEL_MAGIC: &str = "punctrest-model";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ContextWindowModel {
    radius: usize,
    dim: usize,
    seed: u64,
    /// Class-major: `weights[c * dim + f]`.
    weights: Vec<f64>,
    bias: Logits,
}

/// Same shape as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Logits,
}

impl ContextWindowModel {
    /// A zero-initialised model.
    pub fn new(radius: usize, dim: usize, seed: u64) -> Result<Self> {
        validate_shape(radius, dim)?;
        Ok(ContextWindowModel {
            radius,
            dim,
            seed,
            weights: vec![0.0; NUM_CLASSES * dim],
            bias: [0.0; NUM_CLASSES],
        })
    }

    pub fn from_parts(radius: usize, dim: usize, seed: u64, weights: Vec<f64>, bias: Logits) -> Result<Self> {
        validate_shape(radius, dim)?;
        if weights.len() != NUM_CLASSES * dim {
            return Err(Error::Config(format!(
                "expected {} weights, got {}",
                NUM_CLASSES * dim,
                weights.len()
            )));
        }
        if !weights.iter().chain(&bias).all(|w| w.is_finite()) {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        Ok(ContextWindowModel {
            radius,
            dim,
            seed,
            weights,
            bias,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &Logits {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Logits {
        &mut self.bias
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.dim + feature]
    }

    pub fn features(&self, tokens: &[String], position: usize) -> Vec<u32> {
        featurize(tokens, position, self.radius, self.dim)
    }

    /// `logits[c] = bias[c] + sum of weights[c][f]` over the active features.
    pub fn forward(&self, features: &[u32]) -> Logits {
        let mut z = self.bias;
        for &f in features {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += self.weights[c * self.dim + f as usize];
            }
        }
        z
    }

    /// Logits for every position of `seq`. Padding positions get zeros.
    pub fn sequence_logits(&self, seq: &EncodedSequence) -> Vec<Logits> {
        let content = &seq.tokens[..seq.content_len()];
        let mut out = vec![[0.0; NUM_CLASSES]; seq.len()];
        for (p, slot) in out.iter_mut().enumerate().take(content.len()) {
            *slot = self.forward(&self.features(content, p));
        }
        out
    }

    fn zero_gradient(&self) -> Gradient {
        Gradient {
            weights: vec![0.0; self.weights.len()],
            bias: [0.0; NUM_CLASSES],
        }
    }

    /// Serializes to the versioned text model format:
    ///
    /// ```text
    /// punctrest-model 1
    /// radius <r>
    /// dim <F>
    /// seed <seed>
    /// bias <b0> <b1> <b2> <b3>
    /// nonzero <n>
    /// <class>\t<feature>\t<weight>      (n lines, class-major order)
    /// ```
    ///
    /// Floats use Rust's shortest round-trip representation.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        writeln!(w, "radius {}", self.radius)?;
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "seed {}", self.seed)?;
        let mut bias = String::from("bias");
        for b in self.bias {
            let _ = write!(bias, " {b:?}");
        }
        writeln!(w, "{bias}")?;
        let nonzero: Vec<(usize, f64)> = self
            .weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        writeln!(w, "nonzero {}", nonzero.len())?;
        for (i, v) in nonzero {
            writeln!(w, "{}\t{}\t{v:?}", i / self.dim, i % self.dim)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse(source_name, 0, format!("unexpected end of file, expected {key}")))?;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix([' ', '\t']))
                .ok_or_else(|| Error::parse(source_name, i + 1, format!("expected {key:?}")))?;
            Ok((i + 1, rest.to_string()))
        };
        let bad = |line: usize, what: &str| Error::parse(source_name, line, format!("bad {what}"));

        let (l, version) = next(MODEL_MAGIC)?;
        if version.trim() != MODEL_VERSION.to_string() {
            return Err(Error::parse(source_name, l, format!("unsupported model version {version}")));
        }
        let (l, radius) = next("radius")?;
        let radius: usize = radius.parse().map_err(|_| bad(l, "radius"))?;
        let (l, dim) = next("dim")?;
        let dim: usize = dim.parse().map_err(|_| bad(l, "dim"))?;
        validate_shape(radius, dim)?;
        let (l, seed) = next("seed")?;
        let seed: u64 = seed.parse().map_err(|_| bad(l, "seed"))?;
        let (l, bias_line) = next("bias")?;
        let bias_vals = bias_line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(l, "bias"))?;
        let bias: Logits = bias_vals.try_into().map_err(|_| bad(l, "bias"))?;
        let (l, count) = next("nonzero")?;
        let count: usize = count.parse().map_err(|_| bad(l, "nonzero count"))?;

        let mut weights = vec![0.0; NUM_CLASSES * dim];
        for _ in 0..count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse(source_name, 0, "truncated weight list"))?;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            let mut parts = line.split('\t');
            let (Some(c), Some(f), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad(i + 1, "weight line"));
            };
            let c: usize = c.parse().map_err(|_| bad(i + 1, "class"))?;
            let f: usize = f.parse().map_err(|_| bad(i + 1, "feature"))?;
            let v: f64 = v.parse().map_err(|_| bad(i + 1, "weight"))?;
            if c >= NUM_CLASSES || f >= dim {
                return Err(bad(i + 1, "weight index"));
            }
            weights[c * dim + f] = v;
        }
        Self::from_parts(radius, dim, seed, weights, bias)
    }
}

impl TaggerBackend for ContextWindowModel {
    fn logits(&mut self, seq: &EncodedSequence) -> Result<Vec<Logits>> {
        Ok(self.sequence_logits(seq))
    }
}

/// Mean cross-entropy over unmasked positions of `batch`, and its gradient.
pub fn loss_and_grad(model: &ContextWindowModel, batch: &[EncodedSequence]) -> Result<(f64, Gradient)> {
    weighted_loss_and_grad(model, batch, None)
}

/// As [`loss_and_grad`], with optional per-class weights (indexed by label
/// id). The loss is `sum(w[y] * ce) / sum(w[y])`.
pub fn weighted_loss_and_grad(
    model: &ContextWindowModel,
    batch: &[EncodedSequence],
    class_weights: Option<&Logits>,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Argument("loss over an empty batch".into()));
    }
    let examples: Vec<Example> = batch.iter().flat_map(|s| examples_of(model, s)).collect();
    let refs: Vec<&Example> = examples.iter().collect();
    Ok(loss_over(model, &refs, class_weights))
}

struct Example {
    features: Vec<u32>,
    class: usize,
}

fn examples_of(model: &ContextWindowModel, seq: &EncodedSequence) -> Vec<Example> {
    let content = &seq.tokens[..seq.content_len()];
    (0..content.len())
        .filter(|&p| seq.labels[p] != MASK_LABEL)
        .map(|p| Example {
            features: model.features(content, p),
            class: seq.labels[p] as usize,
        })
        .collect()
}

fn loss_over(model: &ContextWindowModel, examples: &[&Example], class_weights: Option<&Logits>) -> (f64, Gradient) {
    let mut grad = model.zero_gradient();
    let weight_of = |c: usize| class_weights.map_or(1.0, |w| w[c]);
    let total: f64 = examples.iter().map(|e| weight_of(e.class)).sum();
    if examples.is_empty() || total == 0.0 {
        log::warn!("batch has no unmasked positions; loss defined as 0");
        return (0.0, grad);
    }

    let mut loss = 0.0;
    for ex in examples {
        let z = model.forward(&ex.features);
        let w = weight_of(ex.class) / total;
        loss -= w * log_softmax(&z)[ex.class];
        let p = softmax(&z);
        for c in 0..NUM_CLASSES {
            let dz = w * (p[c] - if c == ex.class { 1.0 } else { 0.0 });
            grad.bias[c] += dz;
            let row = &mut grad.weights[c * model.dim..(c + 1) * model.dim];
            for &f in &ex.features {
                row[f as usize] += dz;
            }
        }
    }
    (loss, grad)
}

/// Hyperparameters for [`train`].
///
/// The fine-tuned encoder this tagger stands in for was trained with Adam at
/// learning rate 1e-5, 4 epochs, batch size 4 per device and no warm-up.
/// Those values do not transfer to a linear model over sparse features; the
/// defaults here are tuned for it instead.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Compounds per mini-batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Per-class loss weights by label id; `None` is plain cross-entropy.
    pub class_weights: Option<Logits>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.5,
            momentum: 0.9,
            epochs: 10,
            batch_size: 4,
            seed: 0,
            class_weights: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("class weights must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ContextWindowModel,
    /// Full-data loss before the first update.
    pub initial_loss: f64,
    /// Full-data loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD with momentum. Compound order is reshuffled every epoch
/// from a ChaCha8 stream seeded with `cfg.seed`, so a run is fully
/// determined by its inputs.
pub fn train(mut model: ContextWindowModel, data: &[EncodedSequence], cfg: &TrainingConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    let per_seq: Vec<Vec<Example>> = data.iter().map(|s| examples_of(&model, s)).collect();
    let weights = cfg.class_weights.as_ref();
    let full_loss = |m: &ContextWindowModel| -> f64 {
        let all: Vec<&Example> = per_seq.iter().flatten().collect();
        mean_loss(m, &all, weights)
    };

    let initial_loss = full_loss(&model);
    let mut velocity = model.zero_gradient();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().flat_map(|&i| per_seq[i].iter()).collect();
            let (loss, grad) = loss_over(&model, &batch, weights);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss,
                    learning_rate: cfg.learning_rate,
                });
            }
            if !sgd_step(&mut model, &mut velocity, &grad, cfg) {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::INFINITY,
                    learning_rate: cfg.learning_rate,
                });
            }
        }
        let loss = full_loss(&model);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
                loss,
                learning_rate: cfg.learning_rate,
            });
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        epoch_losses.push(loss);
    }

    Ok(TrainOutcome {
        model,
        initial_loss,
        epoch_losses,
    })
}

fn mean_loss(model: &ContextWindowModel, examples: &[&Example], class_weights: Option<&Logits>) -> f64 {
    let weight_of = |c: usize| class_weights.map_or(1.0, |w| w[c]);
    let total: f64 = examples.iter().map(|e| weight_of(e.class)).sum();
    if total == 0.0 {
        return 0.0;
    }
    examples
        .iter()
        .map(|e| -weight_of(e.class) * log_softmax(&model.forward(&e.features))[e.class])
        .sum::<f64>()
        / total
}

/// Returns false if any parameter stopped being finite.
fn sgd_step(model: &mut ContextWindowModel, velocity: &mut Gradient, grad: &Gradient, cfg: &TrainingConfig) -> bool {
    let (lr, mu) = (cfg.learning_rate, cfg.momentum);
    let mut finite = true;
    for ((w, v), g) in model.weights.iter_mut().zip(&mut velocity.weights).zip(&grad.weights) {
        *v = mu * *v - lr * g;
        *w += *v;
        finite &= w.is_finite();
    }
    for c in 0..NUM_CLASSES {
        velocity.bias[c] = mu * velocity.bias[c] - lr * grad.bias[c];
        model.bias[c] += velocity.bias[c];
        finite &= model.bias[c].is_finite();
    }
    finite
}
