use std::collections::HashMap;

use super::SequenceScorer;
use crate::alignment::SourceSentence;
use crate::error::{Error, Result};

/// Deterministic lookup scorer for tests and fixtures.
///
/// Log probabilities are keyed by the last `window` prefix tokens (or the
/// whole prefix when `window` is `None`) and the next token. Missing keys
/// fall back to `default_logp`.
#[derive(Debug, Clone)]
pub struct TableScorer {
    window: Option<usize>,
    extend: HashMap<(Vec<String>, String), f64>,
    end: HashMap<Vec<String>, f64>,
    default_logp: f64,
    default_end: f64,
}

impl TableScorer {
    pub fn new(window: Option<usize>, default_logp: f64, default_end: f64) -> Result<Self> {
        if default_logp > 0.0 || default_end > 0.0 {
            return Err(Error::InvalidArgument("log probabilities must be <= 0".into()));
        }
        Ok(Self {
            window,
            extend: HashMap::new(),
            end: HashMap::new(),
            default_logp,
            default_end,
        })
    }

    fn key(&self, prefix: &[&str]) -> Vec<String> {
        let start = self.window.map_or(0, |w| prefix.len().saturating_sub(w));
        prefix[start..].iter().map(|s| (*s).to_owned()).collect()
    }

    pub fn set(&mut self, prefix: &[&str], token: &str, logp: f64) -> Result<()> {
        if logp > 0.0 {
            return Err(Error::InvalidArgument(format!("log probability {logp} > 0")));
        }
        let key = self.key(prefix);
        self.extend.insert((key, token.to_owned()), logp);
        Ok(())
    }

    pub fn set_end(&mut self, prefix: &[&str], logp: f64) -> Result<()> {
        if logp > 0.0 {
            return Err(Error::InvalidArgument(format!("log probability {logp} > 0")));
        }
        let key = self.key(prefix);
        self.end.insert(key, logp);
        Ok(())
    }
}

impl SequenceScorer for TableScorer {
    type State = Vec<String>;

    fn begin(&self, _source: &SourceSentence) -> Vec<String> {
        Vec::new()
    }

    fn extend(&self, state: &Vec<String>, token: &str) -> (Vec<String>, f64) {
        let lp = self
            .extend
            .get(&(state.clone(), token.to_owned()))
            .copied()
            .unwrap_or(self.default_logp);
        let mut next = state.clone();
        next.push(token.to_owned());
        if let Some(w) = self.window {
            if next.len() > w {
                next.drain(..next.len() - w);
            }
        }
        (next, lp)
    }

    fn end(&self, state: &Vec<String>) -> f64 {
        self.end.get(state).copied().unwrap_or(self.default_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_stored_values() {
        let mut s = TableScorer::new(None, -5.0, -1.0).unwrap();
        s.set(&[], "X", -0.1).unwrap();
        s.set(&["X"], "Y", -0.2).unwrap();
        s.set_end(&["X", "Y"], -0.05).unwrap();
        let x = SourceSentence::parse("a b").unwrap();
        let st = s.begin(&x);
        let (st, a) = s.extend(&st, "X");
        let (st, b) = s.extend(&st, "Y");
        assert_eq!((a, b, s.end(&st)), (-0.1, -0.2, -0.05));
        let (st2, c) = s.extend(&st, "Z");
        assert_eq!((c, s.end(&st2)), (-5.0, -1.0));
        assert!(s.set(&[], "X", 0.5).is_err());
    }

    #[test]
    fn window_truncates_state() {
        let mut s = TableScorer::new(Some(1), -3.0, -3.0).unwrap();
        s.set(&["X"], "Y", -0.5).unwrap();
        let x = SourceSentence::parse("a").unwrap();
        let (st, _) = s.extend(&s.begin(&x), "W");
        let (st, _) = s.extend(&st, "X");
        assert_eq!(st, vec!["X".to_owned()]);
        assert_eq!(s.extend(&st, "Y").1, -0.5);
    }
}
