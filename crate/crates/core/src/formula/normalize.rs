//! Token-level normalization: synonym commands, formatting-only commands,
//! `\over`/`\choose` forms and redundant groups.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::formula::token::{tokenize_latex, LatexToken};
use crate::formula::vocab::{self, FENCE_MODIFIERS};

const BUILTIN_SYNONYMS: &str = include_str!("../../data/synonyms.txt");
const BUILTIN_STRIP: &str = include_str!("../../data/strip.txt");

/// Upper bound on normalization rounds; each round only shortens or
/// canonicalizes, so a fixpoint is reached long before this.
const MAX_ROUNDS: usize = 16;

/// Synonym table and strip list driving `normalize_tokens`.
#[derive(Debug, Clone, Default)]
pub struct NormalizationTables {
    synonyms: Vec<(Vec<LatexToken>, Vec<LatexToken>)>,
    strip: HashSet<String>,
}

impl NormalizationTables {
    /// Tables shipped in `data/`.
    pub fn builtin() -> &'static NormalizationTables {
        static TABLES: OnceLock<NormalizationTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            NormalizationTables::parse(BUILTIN_SYNONYMS, BUILTIN_STRIP)
                .expect("builtin normalization tables are well formed")
        })
    }

    pub fn from_files(synonyms: &Path, strip: &Path) -> Result<Self> {
        let syn = std::fs::read_to_string(synonyms).map_err(|e| Error::io(synonyms, e))?;
        let strip_text = std::fs::read_to_string(strip).map_err(|e| Error::io(strip, e))?;
        Self::parse_named(&syn, &synonyms.display().to_string(), &strip_text)
    }

    pub fn parse(synonyms: &str, strip: &str) -> Result<Self> {
        Self::parse_named(synonyms, "<synonyms>", strip)
    }

    fn parse_named(synonyms: &str, source: &str, strip: &str) -> Result<Self> {
        let mut table = Vec::new();
        for (n, line) in synonyms.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| Error::MalformedLine {
                path: source.to_string(),
                line: n + 1,
                reason: reason.to_string(),
            };
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| malformed("expected `\"<command>\" -> \"<canonical>\"`"))?;
            let lhs = unquote(lhs.trim()).ok_or_else(|| malformed("left side is not quoted"))?;
            let rhs = unquote(rhs.trim()).ok_or_else(|| malformed("right side is not quoted"))?;
            let from = tokenize_latex(lhs)?;
            if from.is_empty() {
                return Err(malformed("empty left side"));
            }
            table.push((from, tokenize_latex(rhs)?));
        }
        // longest source first so `\not=` wins over a hypothetical `\not`
        table.sort_by_key(|e| std::cmp::Reverse(e.0.len()));

        let mut strip_set = HashSet::new();
        for raw in strip.lines() {
            let line = raw.trim_end_matches('\r');
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            // a line holding only a space names the `\ ` command
            let name = if line.trim().is_empty() { " " } else { line.trim() };
            strip_set.insert(name.to_string());
        }
        Ok(NormalizationTables {
            synonyms: table,
            strip: strip_set,
        })
    }

    fn strips(&self, tok: &LatexToken) -> bool {
        match tok {
            LatexToken::Command(name) => self.strip.contains(name),
            // `~` is an unbreakable space
            LatexToken::OperatorGlyph('~') => true,
            _ => false,
        }
    }
}

fn unquote(s: &str) -> Option<&str> {
    s.strip_prefix('"')?.strip_suffix('"')
}

/// Normalize with the builtin tables.
pub fn normalize_tokens(toks: &[LatexToken]) -> Vec<LatexToken> {
    normalize_tokens_with(toks, NormalizationTables::builtin())
}

pub fn normalize_tokens_with(toks: &[LatexToken], tables: &NormalizationTables) -> Vec<LatexToken> {
    let mut current = toks.to_vec();
    for _ in 0..MAX_ROUNDS {
        let next = normalize_round(&current, tables);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn normalize_round(toks: &[LatexToken], tables: &NormalizationTables) -> Vec<LatexToken> {
    let stripped = strip_formatting(toks, tables);
    let replaced = apply_synonyms(&stripped, tables);
    let tree = normalize_sequence(group_tree(&replaced));
    let mut out = Vec::with_capacity(replaced.len());
    flatten(&tree, &mut out);
    out
}

fn strip_formatting(toks: &[LatexToken], tables: &NormalizationTables) -> Vec<LatexToken> {
    let mut out = Vec::with_capacity(toks.len());
    let mut i = 0;
    while i < toks.len() {
        let tok = &toks[i];
        i += 1;
        if !tables.strips(tok) {
            out.push(tok.clone());
            continue;
        }
        // `\left.` and friends: the dot is an invisible delimiter
        if let LatexToken::Command(name) = tok {
            if FENCE_MODIFIERS.contains(&name.as_str()) && toks.get(i) == Some(&LatexToken::OperatorGlyph('.')) {
                i += 1;
            }
        }
    }
    out
}

fn apply_synonyms(toks: &[LatexToken], tables: &NormalizationTables) -> Vec<LatexToken> {
    let mut out = Vec::with_capacity(toks.len());
    let mut i = 0;
    'outer: while i < toks.len() {
        for (from, to) in &tables.synonyms {
            if toks[i..].starts_with(from) {
                out.extend(to.iter().cloned());
                i += from.len();
                continue 'outer;
            }
        }
        out.push(toks[i].clone());
        i += 1;
    }
    out
}

/// Token list with brace groups made explicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Elem {
    Tok(LatexToken),
    Group(Vec<Elem>),
}

/// Build the group structure. Tolerant of imbalance: a stray close brace is
/// kept as a token and unclosed groups end at the end of input.
pub(crate) fn group_tree(toks: &[LatexToken]) -> Vec<Elem> {
    let mut stack: Vec<Vec<Elem>> = vec![Vec::new()];
    for tok in toks {
        match tok {
            LatexToken::GroupOpen => stack.push(Vec::new()),
            LatexToken::GroupClose if stack.len() > 1 => {
                let group = stack.pop().expect("nested level");
                stack.last_mut().expect("outer level").push(Elem::Group(group));
            }
            other => stack.last_mut().expect("a level").push(Elem::Tok(other.clone())),
        }
    }
    while stack.len() > 1 {
        let group = stack.pop().expect("nested level");
        stack.last_mut().expect("outer level").push(Elem::Group(group));
    }
    stack.pop().unwrap_or_default()
}

pub(crate) fn flatten(elems: &[Elem], out: &mut Vec<LatexToken>) {
    for elem in elems {
        match elem {
            Elem::Tok(t) => out.push(t.clone()),
            Elem::Group(g) => {
                out.push(LatexToken::GroupOpen);
                flatten(g, out);
                out.push(LatexToken::GroupClose);
            }
        }
    }
}

/// A one-element group is redundant unless it holds a multi-digit run:
/// `a^{23}` and `a^23` differ because a script takes a single digit.
fn wrap(mut content: Vec<Elem>) -> Elem {
    if content.len() == 1 {
        let single_digit_safe = !matches!(&content[0], Elem::Tok(LatexToken::DigitRun(d)) if d.len() > 1);
        if single_digit_safe {
            return content.pop().expect("one element");
        }
    }
    Elem::Group(content)
}

fn normalize_sequence(elems: Vec<Elem>) -> Vec<Elem> {
    let elems: Vec<Elem> = elems
        .into_iter()
        .map(|e| match e {
            Elem::Group(g) => wrap(normalize_sequence(g)),
            tok => tok,
        })
        .collect();
    merge_digit_runs(rewrite_infix_fraction(elems))
}

/// `a \over b` becomes `\frac{a}{b}`, `n \choose k` becomes `\binom{n}{k}`.
/// More than one such command in a group is ambiguous and left alone.
fn rewrite_infix_fraction(mut elems: Vec<Elem>) -> Vec<Elem> {
    let positions: Vec<usize> = elems
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, Elem::Tok(t) if t.is_command("over") || t.is_command("choose")))
        .map(|(i, _)| i)
        .collect();
    let [at] = positions[..] else {
        return elems;
    };
    let denominator = elems.split_off(at + 1);
    let infix = elems.pop().expect("infix command");
    let numerator = elems;
    let target = if matches!(&infix, Elem::Tok(t) if t.is_command("over")) {
        vocab::FRAC
    } else {
        vocab::BINOM
    };
    vec![
        Elem::Tok(LatexToken::command(target)),
        wrap(numerator),
        wrap(denominator),
    ]
}

fn merge_digit_runs(elems: Vec<Elem>) -> Vec<Elem> {
    let mut out: Vec<Elem> = Vec::with_capacity(elems.len());
    for elem in elems {
        if let (Some(Elem::Tok(LatexToken::DigitRun(prev))), Elem::Tok(LatexToken::DigitRun(d))) =
            (out.last_mut(), &elem)
        {
            prev.push_str(d);
            continue;
        }
        out.push(elem);
    }
    out
}
