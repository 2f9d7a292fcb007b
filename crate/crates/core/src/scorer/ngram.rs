//! Add-k smoothed n-gram scorer with backoff to shorter contexts.
//!
//! For a history `h` the model uses the longest suffix of `h` seen as a
//! context in training and returns `(c(h w) + k) / (c(h) + k (V + 1))`,
//! where `V` counts word types plus `<unk>` and the extra outcome is `</s>`.
//! Each level is normalized on its own, so every state is too.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{SequenceScorer, BOS, EOS, UNK};
use crate::alignment::SourceSentence;
use crate::error::{Error, Result};

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    k: f64,
    ids: HashMap<String, u32>,
    words: Vec<String>,
    counts: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, u64>,
    total: u64,
}

impl NgramScorer {
    fn empty(order: usize, k: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidArgument("smoothing constant must be positive".into()));
        }
        let words: Vec<String> = [BOS, EOS, UNK].iter().map(|s| (*s).to_owned()).collect();
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Ok(Self {
            order,
            k,
            ids,
            words,
            counts: HashMap::new(),
            contexts: HashMap::new(),
            total: 0,
        })
    }

    pub fn train<S: AsRef<[String]>>(corpus: &[S], order: usize, k: f64) -> Result<Self> {
        let mut model = Self::empty(order, k)?;
        if corpus.is_empty() {
            return Err(Error::NoData);
        }
        for sentence in corpus {
            let mut padded = vec![BOS_ID; order - 1];
            for w in sentence.as_ref() {
                padded.push(model.intern(w));
            }
            padded.push(EOS_ID);
            for t in order - 1..padded.len() {
                for m in 1..=order {
                    model.add(padded[t + 1 - m..=t].to_vec(), 1);
                }
            }
        }
        Ok(model)
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_owned());
        self.ids.insert(w.to_owned(), id);
        id
    }

    fn add(&mut self, gram: Vec<u32>, n: u64) {
        if gram.len() == 1 {
            self.total += n;
        } else {
            *self.contexts.entry(gram[..gram.len() - 1].to_vec()).or_default() += n;
        }
        *self.counts.entry(gram).or_default() += n;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Vocabulary size `V`, counting `<unk>` but not `<s>` or `</s>`.
    pub fn vocab_size(&self) -> usize {
        self.words.len() - 2
    }

    /// Every outcome a state can be extended with: the vocabulary (with
    /// `<unk>`); `</s>` is scored by [`SequenceScorer::end`].
    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(2).map(String::as_str)
    }

    fn id(&self, w: &str) -> u32 {
        match self.ids.get(w) {
            Some(&id) if id != BOS_ID && id != EOS_ID => id,
            _ => UNK_ID,
        }
    }

    fn prob(&self, history: &[u32], w: u32) -> f64 {
        let outcomes = (self.vocab_size() + 1) as f64;
        for m in (2..=self.order).rev() {
            let h = &history[history.len() + 1 - m..];
            if let Some(&c) = self.contexts.get(h) {
                let mut gram = h.to_vec();
                gram.push(w);
                let n = self.counts.get(&gram).copied().unwrap_or(0);
                return (n as f64 + self.k) / (c as f64 + self.k * outcomes);
            }
        }
        let n = self.counts.get(&vec![w]).copied().unwrap_or(0);
        (n as f64 + self.k) / (self.total as f64 + self.k * outcomes)
    }

    /// Sentence log probability computed from the padded token sequence in
    /// one pass, without going through scorer states.
    pub fn sentence_logprob(&self, tokens: &[String]) -> f64 {
        let mut padded = vec![BOS_ID; self.order - 1];
        padded.extend(tokens.iter().map(|t| self.id(t)));
        padded.push(EOS_ID);
        (self.order - 1..padded.len())
            .map(|t| self.prob(&padded[t + 1 - self.order..t], padded[t]).ln())
            .sum()
    }

    /// Counts file: a header `ngram-counts<TAB>order<TAB>k`, then one
    /// `ngram<TAB>count` line per event n-gram of every order.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ngram-counts\t{}\t{}", self.order, self.k)?;
        let mut grams: Vec<(String, u64)> = self
            .counts
            .iter()
            .map(|(g, &n)| {
                let text: Vec<&str> = g.iter().map(|&id| self.words[id as usize].as_str()).collect();
                (text.join(" "), n)
            })
            .collect();
        grams.sort();
        for (g, n) in grams {
            writeln!(out, "{g}\t{n}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let bad_header = || Error::Format {
            line: 1,
            msg: "expected `ngram-counts<TAB>order<TAB>k`".into(),
        };
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 3 || fields[0] != "ngram-counts" {
            return Err(bad_header());
        }
        let order = fields[1].parse().map_err(|_| bad_header())?;
        let k = fields[2].parse().map_err(|_| bad_header())?;
        let mut model = Self::empty(order, k)?;
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = || Error::Format {
                line: n + 2,
                msg: "expected `ngram<TAB>count`".into(),
            };
            let (gram, count) = line.rsplit_once('\t').ok_or_else(err)?;
            let count: u64 = count.trim().parse().map_err(|_| err())?;
            let gram: Vec<u32> = gram.split(' ').map(|w| model.intern(w)).collect();
            if gram.is_empty() || gram.len() > order {
                return Err(err());
            }
            model.add(gram, count);
        }
        if model.total == 0 {
            return Err(Error::NoData);
        }
        Ok(model)
    }
}

impl SequenceScorer for NgramScorer {
    /// The last `order - 1` token ids, padded with `<s>`.
    type State = Vec<u32>;

    fn begin(&self, _source: &SourceSentence) -> Vec<u32> {
        vec![BOS_ID; self.order - 1]
    }

    fn extend(&self, state: &Vec<u32>, token: &str) -> (Vec<u32>, f64) {
        let id = self.id(token);
        let lp = self.prob(state, id).ln();
        let mut next = state.clone();
        if !next.is_empty() {
            next.remove(0);
            next.push(id);
        }
        (next, lp)
    }

    fn end(&self, state: &Vec<u32>) -> f64 {
        self.prob(state, EOS_ID).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    fn src() -> SourceSentence {
        SourceSentence::parse("ignored").unwrap()
    }

    fn state_sum(m: &NgramScorer, st: &Vec<u32>) -> f64 {
        m.vocab().map(|w| m.extend(st, w).1.exp()).sum::<f64>() + m.end(st).exp()
    }

    #[test]
    fn bigram_add_one_estimate() {
        let m = NgramScorer::train(&corpus(&["X Y"]), 2, 1.0).unwrap();
        // V = {X, Y, <unk>}
        assert_eq!(m.vocab_size(), 3);
        let st = m.begin(&src());
        assert_eq!(st, m.begin(&src()));
        let (_, lp) = m.extend(&st, "X");
        assert!((lp - (2.0f64 / 5.0).ln()).abs() < 1e-15);
        // c(<s> </s>) = 0, c(<s>) = 1
        assert!((m.end(&st) - (1.0f64 / 5.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn unigram_normalizes_with_end_symbol() {
        let m = NgramScorer::train(&corpus(&["X"]), 1, 1.0).unwrap();
        let st = m.begin(&src());
        // events: X, </s>; V = {X, <unk>}
        assert!((m.extend(&st, "X").1 - (2.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!((m.end(&st) - (2.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!((m.extend(&st, "never-seen").1 - (1.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!((state_sum(&m, &st) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trigram_backs_off_for_unseen_context() {
        let m = NgramScorer::train(&corpus(&["a b c", "b c", "c a"]), 3, 0.5).unwrap();
        let bigram = NgramScorer::train(&corpus(&["a b c", "b c", "c a"]), 2, 0.5).unwrap();
        // history (c, b) never occurs as a trigram context; (b) does.
        let st = vec![m.id("c"), m.id("b")];
        let bst = vec![bigram.id("b")];
        for w in ["a", "b", "c", "zzz"] {
            let (_, lp3) = m.extend(&st, w);
            let (_, lp2) = bigram.extend(&bst, w);
            assert!((lp3 - lp2).abs() < 1e-15, "{w}");
        }
        // hand-traced: c(b c) = 2, c(b ·) = 2, V = 4 -> (2 + .5) / (2 + .5 * 5)
        assert!((m.extend(&st, "c").1 - (2.5f64 / 4.5).ln()).abs() < 1e-15);
        // a fully unseen history falls to the unigram level.
        let unseen = vec![UNK_ID, UNK_ID];
        // unigram events: a×2, b×2, c×3, </s>×3 -> total 10
        assert!((m.extend(&unseen, "c").1 - (3.5f64 / 12.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_corpus_and_bad_params() {
        assert!(matches!(NgramScorer::train::<Vec<String>>(&[], 2, 1.0), Err(Error::NoData)));
        assert!(NgramScorer::train(&corpus(&["a"]), 0, 1.0).is_err());
        assert!(NgramScorer::train(&corpus(&["a"]), 2, 0.0).is_err());
    }

    #[test]
    fn counts_file_round_trip() {
        let m = NgramScorer::train(&corpus(&["a b c", "b c", "c a"]), 3, 0.1).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = NgramScorer::load(buf.as_slice()).unwrap();
        assert_eq!((back.order(), back.smoothing(), back.vocab_size()), (3, 0.1, m.vocab_size()));
        let toks: Vec<String> = ["a", "c", "b", "q"].iter().map(|s| s.to_string()).collect();
        assert_eq!(back.sentence_logprob(&toks), m.sentence_logprob(&toks));
        assert!(NgramScorer::load("bogus\n".as_bytes()).is_err());
        assert!(NgramScorer::load("ngram-counts\t2\t1\na b c\t1\n".as_bytes()).is_err());
    }

    fn sentences() -> impl Strategy<Value = Vec<Vec<String>>> {
        let word = prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")].prop_map(str::to_owned);
        proptest::collection::vec(proptest::collection::vec(word, 0..6), 1..6)
    }

    proptest! {
        #[test]
        fn states_normalize_and_scores_are_incremental(
            train in sentences(),
            probe in proptest::collection::vec(prop_oneof![Just("a"), Just("c"), Just("e")], 0..6),
            order in 1usize..4,
            k in 0.01f64..2.0,
        ) {
            let m = NgramScorer::train(&train, order, k).unwrap();
            let probe: Vec<String> = probe.into_iter().map(str::to_owned).collect();
            let mut st = m.begin(&src());
            let mut total = 0.0;
            for t in &probe {
                prop_assert!((state_sum(&m, &st) - 1.0).abs() < 1e-6);
                let (next, lp) = m.extend(&st, t);
                prop_assert!(lp <= 0.0);
                let (again, lp2) = m.extend(&st, t);
                prop_assert_eq!(&next, &again);
                prop_assert_eq!(lp.to_bits(), lp2.to_bits());
                total += lp;
                st = next;
            }
            total += m.end(&st);
            prop_assert_eq!(total, m.sentence_logprob(&probe));
            prop_assert_eq!(total, m.score_sentence(&src(), &probe));
        }
    }
}
