//! Log-linear source-word omission classifier.
//!
//! Features of position `i` are a bias plus one indicator per offset
//! `-w..=w` naming the token found there (`<s>` / `</s>` past the edges).
//! Training minimizes the binary cross entropy against unaligned-word
//! indicators by gradient descent; the objective is averaged over sentences.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{check_position, OmissionModel, UnalignedIndicator, BOS, EOS};
use crate::alignment::SourceSentence;
use crate::error::{Error, Result};

const HEADER: &str = "empty-model";
const VERSION: &str = "1";
const BIAS: &str = "bias";

#[derive(Debug, Clone, PartialEq)]
pub struct EmptyPhraseModel {
    window: usize,
    bias: f64,
    weights: HashMap<String, f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn context_features(source: &SourceSentence, i: usize, window: usize) -> Vec<String> {
    let n = source.len() as isize;
    (-(window as isize)..=window as isize)
        .map(|d| {
            let p = i as isize + d;
            let tok = if p < 1 {
                BOS
            } else if p > n {
                EOS
            } else {
                source.token(p as usize).unwrap_or(EOS)
            };
            format!("{d}:{tok}")
        })
        .collect()
}

impl EmptyPhraseModel {
    /// All weights zero: every position scores 0.5.
    pub fn zero(window: usize) -> Self {
        Self {
            window,
            bias: 0.0,
            weights: HashMap::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    pub fn features(&self, source: &SourceSentence, i: usize) -> Vec<String> {
        context_features(source, i, self.window)
    }

    fn linear(&self, source: &SourceSentence, i: usize) -> f64 {
        self.bias
            + self
                .features(source, i)
                .iter()
                .map(|f| self.weight(f))
                .sum::<f64>()
    }

    /// Versioned text format: `empty-model<TAB>1<TAB>window<TAB>w`, then
    /// `feature<TAB>weight` lines, the bias under the name `bias`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}\t{VERSION}\twindow\t{}", self.window)?;
        writeln!(out, "{BIAS}\t{}", self.bias)?;
        let mut feats: Vec<_> = self.weights.iter().collect();
        feats.sort_by(|a, b| a.0.cmp(b.0));
        for (f, w) in feats {
            writeln!(out, "{f}\t{w}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let h: Vec<&str> = header.split('\t').collect();
        let window = match h.as_slice() {
            [HEADER, VERSION, "window", w] => w.parse().ok(),
            _ => None,
        }
        .ok_or_else(|| Error::Format {
            line: 1,
            msg: format!("expected `{HEADER}<TAB>{VERSION}<TAB>window<TAB>N`"),
        })?;
        let mut model = Self::zero(window);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let err = || Error::Format {
                line: n + 2,
                msg: "expected `feature<TAB>weight`".into(),
            };
            let (f, w) = line.rsplit_once('\t').ok_or_else(err)?;
            let w: f64 = w.parse().map_err(|_| err())?;
            if !w.is_finite() {
                return Err(err());
            }
            if f == BIAS {
                model.bias = w;
            } else {
                model.weights.insert(f.to_owned(), w);
            }
        }
        Ok(model)
    }
}

impl OmissionModel for EmptyPhraseModel {
    fn score_omission(&self, source: &SourceSentence, i: usize) -> Result<f64> {
        check_position(source, i)?;
        Ok(sigmoid(self.linear(source, i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub window: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once an epoch improves the loss by less than this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 2,
            learning_rate: 0.1,
            max_epochs: 200,
            tolerance: 1e-6,
        }
    }
}

/// Training positions with their features resolved to parameter indices.
/// Parameter 0 is the bias.
#[derive(Debug, Clone)]
pub struct OmissionDataset {
    window: usize,
    names: Vec<String>,
    examples: Vec<(Vec<usize>, bool)>,
    sentences: usize,
}

impl OmissionDataset {
    pub fn new(corpus: &[(SourceSentence, UnalignedIndicator)], window: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::NoData);
        }
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut examples = Vec::new();
        for (k, (x, u)) in corpus.iter().enumerate() {
            if x.len() != u.len() {
                return Err(Error::InvalidArgument(format!(
                    "sentence {}: indicator length {} != sentence length {}",
                    k + 1,
                    u.len(),
                    x.len()
                )));
            }
            for i in 1..=x.len() {
                let feats = context_features(x, i, window)
                    .into_iter()
                    .map(|f| {
                        *index.entry(f.clone()).or_insert_with(|| {
                            names.push(f);
                            names.len()
                        })
                    })
                    .collect();
                examples.push((feats, u.0[i - 1]));
            }
        }
        Ok(Self {
            window,
            names,
            examples,
            sentences: corpus.len(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.names.len() + 1
    }

    fn linear(&self, params: &[f64], feats: &[usize]) -> f64 {
        params[0] + feats.iter().map(|&f| params[f]).sum::<f64>()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let total: f64 = self
            .examples
            .iter()
            .map(|(feats, u)| {
                let z = self.linear(params, feats);
                softplus(z) - if *u { z } else { 0.0 }
            })
            .sum();
        total / self.sentences as f64
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let mut total = 0.0;
        for (feats, u) in &self.examples {
            let z = self.linear(params, feats);
            let target = if *u { 1.0 } else { 0.0 };
            total += softplus(z) - target * z;
            let r = sigmoid(z) - target;
            grad[0] += r;
            for &f in feats {
                grad[f] += r;
            }
        }
        let s = self.sentences as f64;
        grad.iter_mut().for_each(|g| *g /= s);
        (total / s, grad)
    }

    pub fn to_model(&self, params: &[f64]) -> EmptyPhraseModel {
        EmptyPhraseModel {
            window: self.window,
            bias: params[0],
            weights: self
                .names
                .iter()
                .zip(&params[1..])
                .filter(|(_, &w)| w != 0.0)
                .map(|(n, &w)| (n.clone(), w))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEmptyModel {
    pub model: EmptyPhraseModel,
    /// Loss before training followed by the loss after each epoch.
    pub loss_curve: Vec<f64>,
}

/// Gradient descent on the omission cross entropy. A step that would raise
/// the loss is halved until it does not.
pub fn train_empty_model(
    corpus: &[(SourceSentence, UnalignedIndicator)],
    config: &TrainConfig,
) -> Result<TrainedEmptyModel> {
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let data = OmissionDataset::new(corpus, config.window)?;
    let mut params = vec![0.0; data.param_count()];
    let mut loss = data.loss(&params);
    let mut curve = vec![loss];
    for _ in 0..config.max_epochs {
        let (_, grad) = data.loss_and_gradient(&params);
        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let l = data.loss(&candidate);
            if l <= loss {
                accepted = Some((candidate, l));
                break;
            }
            step /= 2.0;
        }
        let Some((next, next_loss)) = accepted else { break };
        let improvement = loss - next_loss;
        params = next;
        loss = next_loss;
        curve.push(loss);
        if improvement < config.tolerance {
            break;
        }
    }
    Ok(TrainedEmptyModel {
        model: data.to_model(&params),
        loss_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sent(s: &str) -> SourceSentence {
        SourceSentence::parse(s).unwrap()
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = EmptyPhraseModel::zero(2);
        let x = sent("a b c");
        for i in 1..=3 {
            assert_eq!(m.score_omission(&x, i).unwrap(), 0.5);
        }
        assert!(m.score_omission(&x, 4).is_err());
        assert!(m.score_omission(&x, 0).is_err());
    }

    #[test]
    fn features_pad_sentence_edges() {
        let m = EmptyPhraseModel::zero(1);
        assert_eq!(m.features(&sent("a b"), 1), vec!["-1:<s>", "0:a", "1:b"]);
        assert_eq!(m.features(&sent("a b"), 2), vec!["-1:a", "0:b", "1:</s>"]);
    }

    #[test]
    fn single_positive_example_rises_every_epoch() {
        let corpus = vec![(sent("f"), UnalignedIndicator(vec![true]))];
        let mut last = 0.5;
        for epochs in 1..6 {
            let cfg = TrainConfig {
                max_epochs: epochs,
                tolerance: 0.0,
                ..TrainConfig::default()
            };
            let p = train_empty_model(&corpus, &cfg).unwrap().model.score_omission(&sent("f"), 1).unwrap();
            assert!(p > last, "epoch {epochs}: {p} <= {last}");
            last = p;
        }
    }

    #[test]
    fn all_negative_labels_end_below_half() {
        let corpus: Vec<_> = ["a b", "b c a", "c"]
            .iter()
            .map(|s| {
                let x = sent(s);
                let n = x.len();
                (x, UnalignedIndicator(vec![false; n]))
            })
            .collect();
        let t = train_empty_model(&corpus, &TrainConfig::default()).unwrap();
        for (x, _) in &corpus {
            for i in 1..=x.len() {
                assert!(t.model.score_omission(x, i).unwrap() < 0.5);
            }
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let corpus = vec![(sent("a"), UnalignedIndicator(vec![true]))];
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let t = train_empty_model(&corpus, &cfg).unwrap();
        assert_eq!(t.loss_curve.len(), 1);
        assert_eq!(t.model, EmptyPhraseModel::zero(2));
    }

    #[test]
    fn rejects_empty_and_mismatched_corpora() {
        assert!(matches!(train_empty_model(&[], &TrainConfig::default()), Err(Error::NoData)));
        let bad = vec![(sent("a b"), UnalignedIndicator(vec![true]))];
        assert!(matches!(
            train_empty_model(&bad, &TrainConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let corpus = synth::omission_corpus(40, 11);
        let data = OmissionDataset::new(&corpus, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let params: Vec<f64> = (0..data.param_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let (_, grad) = data.loss_and_gradient(&params);
            let h = 1e-5;
            for k in 0..params.len() {
                let mut up = params.clone();
                let mut down = params.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (data.loss(&up) - data.loss(&down)) / (2.0 * h);
                let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {k}: analytic {} vs numeric {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn separable_corpus_is_learned() {
        let train = synth::omission_corpus(1000, 1);
        let held_out = synth::omission_corpus(300, 2);
        let t = train_empty_model(&train, &TrainConfig::default()).unwrap();
        for w in t.loss_curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        let acc = synth::omission_accuracy(&t.model, &held_out);
        assert!(acc >= 0.99, "held-out accuracy {acc}");
        let x = sent("w1 f w2 w3");
        assert!(t.model.score_omission(&x, 2).unwrap() > 0.9);
        assert!(t.model.score_omission(&x, 1).unwrap() < 0.1);
    }

    #[test]
    fn model_file_round_trip() {
        let train = synth::omission_corpus(50, 3);
        let t = train_empty_model(&train, &TrainConfig::default()).unwrap();
        let mut buf = Vec::new();
        t.model.write(&mut buf).unwrap();
        let back = EmptyPhraseModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, t.model);
        assert!(EmptyPhraseModel::load("empty-model\t2\twindow\t2\n".as_bytes()).is_err());
        assert!(EmptyPhraseModel::load("empty-model\t1\twindow\t2\nbias\tx\n".as_bytes()).is_err());
    }
}
