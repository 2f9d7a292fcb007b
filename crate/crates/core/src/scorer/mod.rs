//! Probability models used during search.
//!
//! [`SequenceScorer`] supplies word-level target probabilities conditioned on
//! the source and the target prefix. [`OmissionModel`] supplies the
//! probability that a single source word is left untranslated.

use std::fmt::Debug;
use std::hash::Hash;

use crate::alignment::SourceSentence;
use crate::error::{Error, Result};

mod empty;
mod ngram;
mod table;

pub use empty::{EmptyPhraseModel, OmissionDataset, TrainConfig, TrainedEmptyModel, train_empty_model};
pub use ngram::NgramScorer;
pub use table::TableScorer;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Incremental conditional word probabilities.
///
/// `extend` must be a pure function of `(state, token)`; equal states are
/// interchangeable for the rest of the sentence, which the decoder relies on
/// when recombining hypotheses.
pub trait SequenceScorer {
    type State: Clone + Eq + Hash + Debug;

    fn begin(&self, source: &SourceSentence) -> Self::State;

    /// Log probability of `token` after `state`, and the successor state.
    fn extend(&self, state: &Self::State, token: &str) -> (Self::State, f64);

    /// Log probability of ending the sentence after `state`.
    fn end(&self, state: &Self::State) -> f64;

    /// Score a whole target sentence, including the end-of-sentence term.
    fn score_sentence(&self, source: &SourceSentence, tokens: &[String]) -> f64 {
        let mut state = self.begin(source);
        let mut total = 0.0;
        for t in tokens {
            let (next, lp) = self.extend(&state, t);
            total += lp;
            state = next;
        }
        total + self.end(&state)
    }
}

/// Probability that source word `i` (1-based) aligns to the empty target word.
pub trait OmissionModel {
    fn score_omission(&self, source: &SourceSentence, i: usize) -> Result<f64>;
}

fn check_position(source: &SourceSentence, i: usize) -> Result<()> {
    if i == 0 || i > source.len() {
        return Err(Error::InvalidArgument(format!(
            "position {i} outside 1..={}",
            source.len()
        )));
    }
    Ok(())
}

/// Every outcome, end-of-sentence included, gets `1 / (V + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }

    fn logp(&self) -> f64 {
        -((self.vocab_size + 1) as f64).ln()
    }
}

impl SequenceScorer for UniformScorer {
    type State = ();

    fn begin(&self, _source: &SourceSentence) {}

    fn extend(&self, _state: &(), _token: &str) -> ((), f64) {
        ((), self.logp())
    }

    fn end(&self, _state: &()) -> f64 {
        self.logp()
    }
}

/// Per-position omission probabilities, independent of the sentence text.
/// Positions past the end of the list score 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOmission {
    probs: Vec<f64>,
}

impl FixedOmission {
    pub fn new(probs: Vec<f64>) -> Self {
        Self { probs }
    }
}

impl OmissionModel for FixedOmission {
    fn score_omission(&self, source: &SourceSentence, i: usize) -> Result<f64> {
        check_position(source, i)?;
        Ok(self.probs.get(i - 1).copied().unwrap_or(0.0))
    }
}

/// Never omits anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoOmission;

impl OmissionModel for NoOmission {
    fn score_omission(&self, source: &SourceSentence, i: usize) -> Result<f64> {
        check_position(source, i)?;
        Ok(0.0)
    }
}

/// `u_i = 1` iff source word `i` has no alignment point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnalignedIndicator(pub Vec<bool>);

impl UnalignedIndicator {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn mark_unaligned(alignment: &[(usize, usize)], src_len: usize) -> Result<UnalignedIndicator> {
    let mut u = vec![true; src_len];
    for &(i, j) in alignment {
        if i == 0 || i > src_len {
            return Err(Error::MalformedAlignment(format!(
                "pair {i}-{j} outside source length {src_len}"
            )));
        }
        u[i - 1] = false;
    }
    Ok(UnalignedIndicator(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scorer_counts_end_symbol() {
        let s = UniformScorer::new(9);
        let x = SourceSentence::parse("a").unwrap();
        let st = s.begin(&x);
        assert_eq!(st, s.begin(&x));
        let (_, lp) = s.extend(&st, "anything");
        assert!((lp - (0.1f64).ln()).abs() < 1e-15);
        assert_eq!(s.end(&st), lp);
    }

    #[test]
    fn mark_unaligned_examples() {
        assert_eq!(
            mark_unaligned(&[(1, 1), (3, 2)], 3).unwrap(),
            UnalignedIndicator(vec![false, true, false])
        );
        assert_eq!(mark_unaligned(&[], 2).unwrap(), UnalignedIndicator(vec![true, true]));
        assert_eq!(
            mark_unaligned(&[(1, 1), (2, 1)], 2).unwrap(),
            UnalignedIndicator(vec![false, false])
        );
        assert!(matches!(mark_unaligned(&[(4, 1)], 3), Err(Error::MalformedAlignment(_))));
    }

    #[test]
    fn fixed_omission_checks_range() {
        let x = SourceSentence::parse("a b").unwrap();
        let m = FixedOmission::new(vec![0.9]);
        assert_eq!(m.score_omission(&x, 1).unwrap(), 0.9);
        assert_eq!(m.score_omission(&x, 2).unwrap(), 0.0);
        assert!(m.score_omission(&x, 3).is_err());
        assert!(NoOmission.score_omission(&x, 0).is_err());
    }
}
