//! Corpus-level BLEU-4 in the multi-bleu convention, with three ways of
//! treating markup.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use phrasealign::{tokenize_markup, Error, MarkupToken, Result};

const N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BleuMode {
    /// Tags removed from both sides.
    WithoutTags,
    /// Tags scored as ordinary tokens.
    WithTags,
    /// Only words enclosed by at least one tag pair, each counted once.
    InTag,
}

impl FromStr for BleuMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "w/o-tag" | "without-tags" => Ok(Self::WithoutTags),
            "w/-tag" | "with-tags" => Ok(Self::WithTags),
            "in-tag" => Ok(Self::InTag),
            _ => Err(format!("unknown BLEU mode {s:?} (expected w/o-tag, w/-tag or in-tag)")),
        }
    }
}

impl fmt::Display for BleuMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WithoutTags => "w/o-tag",
            Self::WithTags => "w/-tag",
            Self::InTag => "in-tag",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Percentage in `[0, 100]`.
    pub bleu: f64,
    pub precisions: [f64; N],
    pub matches: [usize; N],
    pub totals: [usize; N],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Smallest n whose precision is zero, if any.
    pub zero_precision: Option<usize>,
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect();
        write!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            p.join("/"),
            self.brevity_penalty,
            self.hyp_len as f64 / self.ref_len.max(1) as f64,
            self.hyp_len,
            self.ref_len
        )?;
        if let Some(n) = self.zero_precision {
            write!(f, " [no matching {n}-grams]")?;
        }
        Ok(())
    }
}

/// Lowercased tokens of one line under `mode`, plus whether it had tags.
pub fn mode_tokens(line: &str, mode: BleuMode) -> (Vec<String>, bool) {
    let mut depth = 0usize;
    let mut tagged = false;
    let mut out = Vec::new();
    for tok in tokenize_markup(line) {
        match &tok {
            MarkupToken::Word(w) => {
                if mode != BleuMode::InTag || depth > 0 {
                    out.push(w.to_lowercase());
                }
            }
            MarkupToken::Open { .. } => {
                tagged = true;
                depth += 1;
            }
            MarkupToken::Close { .. } => depth = depth.saturating_sub(1),
            MarkupToken::Void(_) => {}
        }
        if mode == BleuMode::WithTags && tok.is_markup() {
            out.push(tok.text().to_lowercase());
        }
    }
    (out, tagged)
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

/// Single-reference BLEU.
pub fn compute_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], mode: BleuMode) -> Result<BleuReport> {
    let refs: Vec<Vec<&str>> = references.iter().map(|r| vec![r.as_ref()]).collect();
    compute_bleu_multi(hypotheses, &refs, mode)
}

/// BLEU with any number of references per hypothesis. Clipping uses the
/// maximum count over references; the reference length is the one closest
/// to the hypothesis length, shorter on ties.
pub fn compute_bleu_multi<H: AsRef<str>>(hypotheses: &[H], references: &[Vec<&str>], mode: BleuMode) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidInput(format!(
            "{} hypotheses but {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("sentence without a reference".into()));
    }
    let mut matches = [0usize; N];
    let mut totals = [0usize; N];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    let mut any_tagged_ref = false;
    for (h, rs) in hypotheses.iter().zip(references) {
        let (hyp, _) = mode_tokens(h.as_ref(), mode);
        let refs: Vec<Vec<String>> = rs
            .iter()
            .map(|r| {
                let (t, tagged) = mode_tokens(r, mode);
                any_tagged_ref |= tagged;
                t
            })
            .collect();
        hyp_len += hyp.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&l| (l.abs_diff(hyp.len()), l))
            .unwrap_or(0);
        for n in 1..=N {
            let hc = ngram_counts(&hyp, n);
            let rcs: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
            for (g, c) in hc {
                let max_ref = rcs.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                matches[n - 1] += c.min(max_ref);
            }
            totals[n - 1] += hyp.len().saturating_sub(n - 1);
        }
    }
    if mode == BleuMode::InTag && !any_tagged_ref {
        return Err(Error::InvalidInput("in-tag mode needs tagged references".into()));
    }
    let precisions: [f64; N] =
        std::array::from_fn(|k| if totals[k] == 0 { 0.0 } else { matches[k] as f64 / totals[k] as f64 });
    let zero_precision = (0..N).find(|&k| matches[k] == 0).map(|k| k + 1);
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
    };
    let bleu = match zero_precision {
        Some(_) => 0.0,
        None => {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / N as f64;
            100.0 * brevity_penalty * log_mean.exp()
        }
    };
    Ok(BleuReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
        zero_precision,
    })
}
