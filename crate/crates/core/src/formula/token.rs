use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Punctuation that may follow a backslash. `\\` is a line break, the rest
/// are spacing commands or escaped literals.
const ESCAPABLE_PUNCTUATION: &[char] = &['\\', ',', ';', ':', '!', ' ', '{', '}', '|', '%', '#', '&', '_', '$'];

/// One lexical unit of a LaTeX math string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "kebab-case")]
pub enum LatexToken {
    /// Command name without the leading backslash (`frac`, `alpha`, `,`).
    Command(String),
    Letter(char),
    DigitRun(String),
    OperatorGlyph(char),
    GroupOpen,
    GroupClose,
    SubscriptMarker,
    SuperscriptMarker,
    /// `*n*` query slot, n >= 1.
    Wildcard(u32),
}

impl LatexToken {
    pub fn command(name: &str) -> Self {
        LatexToken::Command(name.to_string())
    }

    /// The token as it would be written in LaTeX source.
    pub fn source_text(&self) -> String {
        match self {
            LatexToken::Command(name) => format!("\\{name}"),
            LatexToken::Letter(c) | LatexToken::OperatorGlyph(c) => c.to_string(),
            LatexToken::DigitRun(d) => d.clone(),
            LatexToken::GroupOpen => "{".into(),
            LatexToken::GroupClose => "}".into(),
            LatexToken::SubscriptMarker => "_".into(),
            LatexToken::SuperscriptMarker => "^".into(),
            LatexToken::Wildcard(slot) => format!("*{slot}*"),
        }
    }

    pub fn is_command(&self, name: &str) -> bool {
        matches!(self, LatexToken::Command(n) if n == name)
    }
}

impl fmt::Display for LatexToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text())
    }
}

/// Split a LaTeX math string into tokens.
///
/// Whitespace separates tokens and is otherwise dropped. Consecutive digits
/// form one `DigitRun`; `*n*` with a positive integer n becomes a wildcard
/// slot. Braces must balance.
pub fn tokenize_latex(src: &str) -> Result<Vec<LatexToken>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut tokens = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let (offset, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '\\' => {
                let Some(&(_, next)) = chars.get(i + 1) else {
                    return Err(Error::UnknownEscape {
                        offset,
                        found: String::new(),
                    });
                };
                if next.is_ascii_alphabetic() {
                    let mut j = i + 1;
                    let mut name = String::new();
                    while let Some(&(_, ch)) = chars.get(j) {
                        if !ch.is_ascii_alphabetic() {
                            break;
                        }
                        name.push(ch);
                        j += 1;
                    }
                    tokens.push(LatexToken::Command(name));
                    i = j;
                } else if ESCAPABLE_PUNCTUATION.contains(&next) {
                    tokens.push(LatexToken::Command(next.to_string()));
                    i += 2;
                } else {
                    return Err(Error::UnknownEscape {
                        offset,
                        found: next.to_string(),
                    });
                }
            }
            '{' => {
                depth.push(offset);
                tokens.push(LatexToken::GroupOpen);
                i += 1;
            }
            '}' => {
                if depth.pop().is_none() {
                    return Err(Error::UnbalancedBraces { offset });
                }
                tokens.push(LatexToken::GroupClose);
                i += 1;
            }
            '^' => {
                tokens.push(LatexToken::SuperscriptMarker);
                i += 1;
            }
            '_' => {
                tokens.push(LatexToken::SubscriptMarker);
                i += 1;
            }
            '*' => {
                if let Some((slot, consumed)) = wildcard_at(&chars[i..]) {
                    tokens.push(LatexToken::Wildcard(slot));
                    i += consumed;
                } else {
                    tokens.push(LatexToken::OperatorGlyph('*'));
                    i += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let mut run = String::new();
                while let Some(&(_, d)) = chars.get(i) {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    run.push(d);
                    i += 1;
                }
                tokens.push(LatexToken::DigitRun(run));
            }
            c if c.is_alphabetic() => {
                tokens.push(LatexToken::Letter(c));
                i += 1;
            }
            c => {
                tokens.push(LatexToken::OperatorGlyph(c));
                i += 1;
            }
        }
    }

    if let Some(offset) = depth.pop() {
        return Err(Error::UnbalancedBraces { offset });
    }
    Ok(tokens)
}

/// Recognise `*<digits>*` at the head of `chars`; returns (slot, chars consumed).
fn wildcard_at(chars: &[(usize, char)]) -> Option<(u32, usize)> {
    let digits: String = chars[1..]
        .iter()
        .map(|&(_, c)| c)
        .take_while(|c| c.is_ascii_digit())
        .collect();
    if digits.is_empty() || chars.get(1 + digits.len()).map(|&(_, c)| c) != Some('*') {
        return None;
    }
    let slot: u32 = digits.parse().ok()?;
    (slot >= 1).then_some((slot, digits.len() + 2))
}

/// Render tokens back to LaTeX with no whitespace. A command directly
/// followed by a letter gets an empty group so the two stay distinct.
pub fn render_compact(tokens: &[LatexToken]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        out.push_str(&tok.source_text());
        if let LatexToken::Command(name) = tok {
            let alphabetic_name = name.chars().all(|c| c.is_ascii_alphabetic());
            if alphabetic_name && matches!(tokens.get(i + 1), Some(LatexToken::Letter(c)) if c.is_ascii_alphabetic()) {
                out.push_str("{}");
            }
        }
    }
    out
}
