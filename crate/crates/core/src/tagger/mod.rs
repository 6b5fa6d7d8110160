//! Token-tagging backends.
//!
//! A backend maps an [`EncodedSequence`] to one four-vector of logits per
//! position, indexed by label id. [`predict`] reads the logits at each word's
//! root piece and ignores every other position.

mod features;
mod model;
mod replay;

pub use features::{featurize, validate_shape};
pub use model::{loss_and_grad, train, weighted_loss_and_grad, ContextWindowModel, Gradient, TrainOutcome, TrainingConfig};
pub use replay::{export_logits, read_logit_file, write_logit_file, LogitRecord, ReplayBackend, FILE_ORDER};

use crate::error::{Error, Result};
use crate::label::PunctClass;
use crate::tokenizer::EncodedSequence;

pub const NUM_CLASSES: usize = 4;

/// Class scores indexed by label id (EMPTY, PERIOD, COMMA, QUESTION).
pub type Logits = [f64; NUM_CLASSES];

pub trait TaggerBackend {
    /// One logit vector per position of `seq`.
    fn logits(&mut self, seq: &EncodedSequence) -> Result<Vec<Logits>>;
}

pub fn softmax(z: &Logits) -> Logits {
    let lse = log_sum_exp(z);
    z.map(|v| (v - lse).exp())
}

pub fn log_softmax(z: &Logits) -> Logits {
    let lse = log_sum_exp(z);
    z.map(|v| v - lse)
}

fn log_sum_exp(z: &Logits) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Highest-scoring class; ties go to the lowest label id.
pub fn argmax(z: &Logits) -> PunctClass {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if z[c] > z[best] {
            best = c;
        }
    }
    PunctClass::ALL[best]
}

/// One class per word, read from the logits at the word's root piece.
pub fn predict<B: TaggerBackend + ?Sized>(backend: &mut B, seq: &EncodedSequence) -> Result<Vec<PunctClass>> {
    let logits = backend.logits(seq)?;
    if logits.len() != seq.len() {
        return Err(Error::Protocol(format!(
            "backend returned {} logit vectors for a sequence of {} positions",
            logits.len(),
            seq.len()
        )));
    }
    Ok(seq.word_starts.iter().map(|&p| argmax(&logits[p])).collect())
}

/// Fraction of words whose predicted class matches the root-piece label.
pub fn token_accuracy<B: TaggerBackend + ?Sized>(backend: &mut B, seqs: &[EncodedSequence]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for seq in seqs {
        let pred = predict(backend, seq)?;
        for (p, g) in pred.iter().zip(seq.word_labels()) {
            hit += usize::from(*p == g);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}
