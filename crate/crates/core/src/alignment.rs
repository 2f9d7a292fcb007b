//! Sentences and phrase alignments.
//!
//! All positions are 1-based. Position 0 on either side denotes the empty
//! word, so a link `(0, 0, j_b, j_e)` is an inserted target phrase and
//! `(i, i, 0, 0)` an omitted source word.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSentence {
    tokens: Vec<String>,
}

impl SourceSentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("source sentence is empty".into()));
        }
        Ok(Self { tokens })
    }

    /// Whitespace tokenization; no markup handling.
    pub fn parse(line: &str) -> Result<Self> {
        Self::new(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based position `i`.
    pub fn token(&self, i: usize) -> Option<&str> {
        i.checked_sub(1)
            .and_then(|k| self.tokens.get(k))
            .map(String::as_str)
    }

    /// Tokens of the inclusive 1-based span `begin..=end`.
    pub fn span(&self, begin: usize, end: usize) -> &[String] {
        &self.tokens[begin - 1..end]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl fmt::Display for SourceSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TargetSentence {
    pub tokens: Vec<String>,
}

impl TargetSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for TargetSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// One link `(i_b, i_e, j_b, j_e)` between a source and a target phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlignmentLink {
    pub src_begin: usize,
    pub src_end: usize,
    pub tgt_begin: usize,
    pub tgt_end: usize,
}

impl AlignmentLink {
    pub const fn new(src_begin: usize, src_end: usize, tgt_begin: usize, tgt_end: usize) -> Self {
        Self {
            src_begin,
            src_end,
            tgt_begin,
            tgt_end,
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.src_begin == 0 && self.src_end == 0
    }

    pub fn is_omission(&self) -> bool {
        self.tgt_begin == 0 && self.tgt_end == 0
    }

    pub fn source_len(&self) -> usize {
        if self.is_insertion() {
            0
        } else {
            self.src_end + 1 - self.src_begin
        }
    }

    pub fn target_len(&self) -> usize {
        if self.is_omission() {
            0
        } else {
            self.tgt_end + 1 - self.tgt_begin
        }
    }
}

impl fmt::Display for AlignmentLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}",
            self.src_begin, self.src_end, self.tgt_begin, self.tgt_end
        )
    }
}

impl FromStr for AlignmentLink {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::MalformedAlignment(format!("cannot parse link {s:?}"));
        let (src, tgt) = s.split_once('-').ok_or_else(bad)?;
        let pair = |p: &str| -> Result<(usize, usize)> {
            let (a, b) = p.split_once(':').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        let (ib, ie) = pair(src)?;
        let (jb, je) = pair(tgt)?;
        Ok(Self::new(ib, ie, jb, je))
    }
}

/// Links in the order their target phrases were generated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PhraseAlignment {
    pub links: Vec<AlignmentLink>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BothEmpty { link: usize },
    SourceOutOfRange { link: usize },
    TargetOutOfRange { link: usize },
    MultiWordOmission { link: usize },
    SourceUncovered(usize),
    SourceOverlap(usize),
    TargetUncovered(usize),
    TargetOverlap(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl PhraseAlignment {
    pub fn new(links: Vec<AlignmentLink>) -> Self {
        Self { links }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Check every structural rule against sentence lengths `src_len` and
    /// `tgt_len`. Violations are reported, never raised.
    pub fn validate(&self, src_len: usize, tgt_len: usize) -> ValidationReport {
        let mut violations = Vec::new();
        let mut src_hits = vec![0usize; src_len + 1];
        let mut tgt_hits = vec![0usize; tgt_len + 1];

        for (k, l) in self.links.iter().enumerate() {
            let src_empty = (l.src_begin, l.src_end) == (0, 0);
            let tgt_empty = (l.tgt_begin, l.tgt_end) == (0, 0);
            if src_empty && tgt_empty {
                violations.push(Violation::BothEmpty { link: k });
                continue;
            }
            let src_ok = src_empty || (1 <= l.src_begin && l.src_begin <= l.src_end && l.src_end <= src_len);
            let tgt_ok = tgt_empty || (1 <= l.tgt_begin && l.tgt_begin <= l.tgt_end && l.tgt_end <= tgt_len);
            if !src_ok {
                violations.push(Violation::SourceOutOfRange { link: k });
            }
            if !tgt_ok {
                violations.push(Violation::TargetOutOfRange { link: k });
            }
            if tgt_empty && l.src_begin != l.src_end {
                violations.push(Violation::MultiWordOmission { link: k });
            }
            if src_ok && !src_empty {
                for i in l.src_begin..=l.src_end {
                    src_hits[i] += 1;
                }
            }
            if tgt_ok && !tgt_empty {
                for j in l.tgt_begin..=l.tgt_end {
                    tgt_hits[j] += 1;
                }
            }
        }

        for (i, &n) in src_hits.iter().enumerate().skip(1) {
            match n {
                0 => violations.push(Violation::SourceUncovered(i)),
                1 => {}
                _ => violations.push(Violation::SourceOverlap(i)),
            }
        }
        for (j, &n) in tgt_hits.iter().enumerate().skip(1) {
            match n {
                0 => violations.push(Violation::TargetUncovered(j)),
                1 => {}
                _ => violations.push(Violation::TargetOverlap(j)),
            }
        }
        ValidationReport { violations }
    }

    /// Parse the space-separated `i_b:i_e-j_b:j_e` line format.
    pub fn parse(line: &str) -> Result<Self> {
        line.split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for PhraseAlignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.links.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}
