//! Lexical and structural constraints.
//!
//! Structural constraints come from paired tags in the input, either the
//! canonical `<cN> ... </cN>` form or ordinary HTML. The sentence itself is
//! the root constraint. Filtering functions never touch insertion options.

use std::io::BufRead;

use crate::alignment::SourceSentence;
use crate::error::{Error, Result};
use crate::phrasetable::{OptionKind, OptionLattice, Phrase, TranslationOption};

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];

/// A whitespace token or a tag recognized in marked-up text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkupToken {
    Word(String),
    Open { name: String, text: String },
    Close { name: String, text: String },
    /// Self-closing or void element; carried through as a plain token.
    Void(String),
}

impl MarkupToken {
    pub fn text(&self) -> &str {
        match self {
            MarkupToken::Word(t) | MarkupToken::Void(t) => t,
            MarkupToken::Open { text, .. } | MarkupToken::Close { text, .. } => text,
        }
    }

    pub fn is_markup(&self) -> bool {
        !matches!(self, MarkupToken::Word(_))
    }
}

fn classify_tag(text: &str) -> Option<MarkupToken> {
    let inner = text.strip_prefix('<')?.strip_suffix('>')?;
    let (closing, body) = match inner.strip_prefix('/') {
        Some(rest) => (true, rest),
        None => (false, inner),
    };
    let name: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
        .collect();
    if !name.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let name = name.to_ascii_lowercase();
    let text = text.to_owned();
    Some(if closing {
        MarkupToken::Close { name, text }
    } else if body.trim_end().ends_with('/') || VOID_ELEMENTS.contains(&name.as_str()) {
        MarkupToken::Void(text)
    } else {
        MarkupToken::Open { name, text }
    })
}

/// Split text into words and tags. A tag may touch adjacent words
/// (`<b>x</b>`) and may contain spaces inside its attribute list.
pub fn tokenize_markup(input: &str) -> Vec<MarkupToken> {
    let mut out = Vec::new();
    let mut text = String::new();
    let flush = |text: &mut String, out: &mut Vec<MarkupToken>| {
        out.extend(text.split_whitespace().map(|w| MarkupToken::Word(w.to_owned())));
        text.clear();
    };
    let mut rest = input;
    while let Some(lt) = rest.find('<') {
        text.push_str(&rest[..lt]);
        let after = &rest[lt..];
        match after.find('>').and_then(|gt| classify_tag(&after[..=gt]).map(|t| (gt, t))) {
            Some((gt, tag)) => {
                flush(&mut text, &mut out);
                out.push(tag);
                rest = &after[gt + 1..];
            }
            None => {
                text.push('<');
                rest = &after[1..];
            }
        }
    }
    text.push_str(rest);
    flush(&mut text, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintNode {
    pub id: String,
    pub span: (usize, usize),
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub open_token: String,
    pub close_token: String,
    pub depth: usize,
}

impl ConstraintNode {
    pub fn contains(&self, span: (usize, usize)) -> bool {
        self.span.0 <= span.0 && span.1 <= self.span.1
    }

    pub fn disjoint(&self, span: (usize, usize)) -> bool {
        span.1 < self.span.0 || self.span.1 < span.0
    }
}

/// Constraint nodes in an arena; node 0 is the root spanning the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintTree {
    nodes: Vec<ConstraintNode>,
    innermost: Vec<usize>,
}

pub const ROOT: usize = 0;

impl ConstraintTree {
    pub fn root_only(len: usize) -> Self {
        Self {
            nodes: vec![ConstraintNode {
                id: "root".into(),
                span: (1, len),
                parent: None,
                children: Vec::new(),
                open_token: String::new(),
                close_token: String::new(),
                depth: 0,
            }],
            innermost: vec![ROOT; len],
        }
    }

    pub fn nodes(&self) -> &[ConstraintNode] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> &ConstraintNode {
        &self.nodes[n]
    }

    /// Innermost node enclosing 1-based position `i`.
    pub fn innermost(&self, i: usize) -> usize {
        self.innermost[i - 1]
    }

    /// The innermost node shared by every position of `span`, if the span
    /// does not straddle a node boundary.
    pub fn innermost_of_span(&self, span: (usize, usize)) -> Option<usize> {
        let n = self.innermost(span.0);
        (span.0..=span.1).all(|i| self.innermost(i) == n).then_some(n)
    }

    /// Maximum nesting depth below the root.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Nodes strictly below `top` down to and including `node`, outermost
    /// first, or `None` when `node` is not a descendant of `top`.
    pub fn path_below(&self, top: usize, node: usize) -> Option<Vec<usize>> {
        let mut path = Vec::new();
        let mut cur = node;
        while cur != top {
            path.push(cur);
            cur = self.nodes[cur].parent?;
        }
        path.reverse();
        Some(path)
    }

    /// Re-emit the tagged sentence, tags as separate tokens.
    pub fn to_tagged_string(&self, source: &SourceSentence) -> String {
        let mut out: Vec<&str> = Vec::new();
        self.emit(ROOT, source, &mut out);
        out.join(" ")
    }

    fn emit<'a>(&'a self, n: usize, source: &'a SourceSentence, out: &mut Vec<&'a str>) {
        let node = &self.nodes[n];
        if n != ROOT {
            out.push(&node.open_token);
        }
        let mut pos = node.span.0;
        for &c in &node.children {
            let child = &self.nodes[c];
            out.extend(source.span(pos, child.span.0).iter().take(child.span.0 - pos).map(String::as_str));
            self.emit(c, source, out);
            pos = child.span.1 + 1;
        }
        if pos <= node.span.1 {
            out.extend(source.span(pos, node.span.1).iter().map(String::as_str));
        }
        if n != ROOT {
            out.push(&node.close_token);
        }
    }
}

fn canonical_id(name: &str) -> bool {
    name.len() > 1 && name.starts_with('c') && name[1..].chars().all(|c| c.is_ascii_digit())
}

/// Strip tags from `input`, returning the plain sentence and the constraint
/// tree they describe.
pub fn parse_tagged(input: &str) -> Result<(SourceSentence, ConstraintTree)> {
    let mut tokens: Vec<String> = Vec::new();
    let mut tree = ConstraintTree::root_only(0);
    let mut names: Vec<String> = vec![String::new()];
    let mut stack = vec![ROOT];
    let mut pairs = 0;

    for tok in tokenize_markup(input) {
        match tok {
            MarkupToken::Word(w) | MarkupToken::Void(w) => {
                tokens.push(w);
                let pos = tokens.len();
                for &n in &stack {
                    let span = &mut tree.nodes[n].span;
                    if span.0 == 0 {
                        span.0 = pos;
                    }
                    span.1 = pos;
                }
                tree.innermost.push(*stack.last().unwrap());
            }
            MarkupToken::Open { name, text } => {
                pairs += 1;
                let parent = *stack.last().unwrap();
                let id = if canonical_id(&name) { name.clone() } else { format!("c{pairs}") };
                let n = tree.nodes.len();
                tree.nodes.push(ConstraintNode {
                    id,
                    span: (0, 0),
                    parent: Some(parent),
                    children: Vec::new(),
                    open_token: text,
                    close_token: String::new(),
                    depth: tree.nodes[parent].depth + 1,
                });
                tree.nodes[parent].children.push(n);
                names.push(name);
                stack.push(n);
            }
            MarkupToken::Close { name, text } => {
                let top = *stack.last().unwrap();
                if top == ROOT || names[top] != name {
                    let msg = if stack.iter().skip(1).any(|&n| names[n] == name) {
                        "crossing tags"
                    } else {
                        "close tag without matching open tag"
                    };
                    return Err(Error::MalformedMarkup { tag: text, msg: msg.into() });
                }
                if tree.nodes[top].span.0 == 0 {
                    return Err(Error::MalformedMarkup {
                        tag: text,
                        msg: "tag pair encloses no tokens".into(),
                    });
                }
                tree.nodes[top].close_token = text;
                stack.pop();
            }
        }
    }
    if let Some(&open) = stack.get(1) {
        return Err(Error::MalformedMarkup {
            tag: tree.nodes[open].open_token.clone(),
            msg: "unclosed tag".into(),
        });
    }
    let source = SourceSentence::new(tokens)?;
    tree.nodes[ROOT].span = (1, source.len());
    Ok((source, tree))
}

/// A source span that must be translated as exactly `target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LexicalConstraint {
    pub span: (usize, usize),
    pub target: Phrase,
}

/// A constraint as written by a user, before it is located in a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexicalRule {
    pub source: Phrase,
    pub target: Phrase,
}

/// Read `source tokens ||| target tokens` lines.
pub fn load_lexical_rules<R: BufRead>(reader: R) -> Result<Vec<LexicalRule>> {
    let mut rules = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = || Error::Format {
            line: k + 1,
            msg: "expected `source ||| target`".into(),
        };
        let (s, t) = line.split_once("|||").ok_or_else(err)?;
        let source: Phrase = s.split_whitespace().map(str::to_owned).collect();
        let target: Phrase = t.split_whitespace().map(str::to_owned).collect();
        if source.is_empty() || target.is_empty() {
            return Err(err());
        }
        rules.push(LexicalRule { source, target });
    }
    Ok(rules)
}

/// Every exact contiguous match of `phrase` in `source`, leftmost first.
pub fn locate_constraint_occurrences(source: &SourceSentence, phrase: &[String]) -> Vec<(usize, usize)> {
    if phrase.is_empty() || phrase.len() > source.len() {
        return Vec::new();
    }
    source
        .tokens()
        .windows(phrase.len())
        .enumerate()
        .filter(|(_, w)| *w == phrase)
        .map(|(k, _)| (k + 1, k + phrase.len()))
        .collect()
}

/// Locate each rule in `source`. Overlapping matches of one rule are
/// resolved leftmost-first; `occurrences` (1-based) selects among the
/// remaining matches, `None` keeping all of them.
pub fn resolve_lexical(
    source: &SourceSentence,
    rules: &[LexicalRule],
    occurrences: Option<&[usize]>,
) -> Vec<LexicalConstraint> {
    let mut out = Vec::new();
    for rule in rules {
        let mut last_end = 0;
        let matches = locate_constraint_occurrences(source, &rule.source)
            .into_iter()
            .filter(|&(b, e)| {
                let keep = b > last_end;
                if keep {
                    last_end = e;
                }
                keep
            })
            .enumerate()
            .filter(|(k, _)| occurrences.is_none_or(|sel| sel.contains(&(k + 1))));
        out.extend(matches.map(|(_, span)| LexicalConstraint {
            span,
            target: rule.target.clone(),
        }));
    }
    out
}

fn check_lexical(src_len: usize, constraints: &[LexicalConstraint]) -> Result<()> {
    for (a, c) in constraints.iter().enumerate() {
        if c.span.0 == 0 || c.span.0 > c.span.1 || c.span.1 > src_len {
            return Err(Error::InvalidArgument(format!(
                "constraint span {:?} outside 1..={src_len}",
                c.span
            )));
        }
        if c.target.is_empty() {
            return Err(Error::InvalidArgument("constraint with empty target".into()));
        }
        for d in &constraints[a + 1..] {
            if c.span.0 <= d.span.1 && d.span.0 <= c.span.1 && c != d {
                return Err(Error::ConflictingConstraints(c.span, d.span));
            }
        }
    }
    Ok(())
}

/// Force each constrained span to be translated by exactly its target
/// phrase: every non-insertion option touching the span is dropped and one
/// option carrying the constraint target is added.
pub fn apply_lexical(lattice: &OptionLattice, constraints: &[LexicalConstraint]) -> Result<OptionLattice> {
    let n = lattice.src_len();
    check_lexical(n, constraints)?;
    let mut out = lattice.clone();
    for c in constraints {
        out.retain(|o| !o.overlaps(c.span));
    }
    for c in constraints {
        out.push(TranslationOption::regular(n, c.span, c.target.clone())?)?;
    }
    Ok(out)
}

/// Drop every non-insertion option whose span straddles a constraint
/// boundary.
pub fn apply_structural(lattice: &OptionLattice, tree: &ConstraintTree) -> OptionLattice {
    let mut out = lattice.clone();
    out.retain(|o| {
        o.kind == OptionKind::Insertion
            || tree
                .nodes()
                .iter()
                .all(|node| node.contains(o.span) || node.disjoint(o.span))
    });
    out
}
