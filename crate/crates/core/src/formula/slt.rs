//! Symbol Layout Trees: symbols arranged on writing lines.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::normalize::{group_tree, Elem};
use crate::formula::token::LatexToken;
use crate::formula::vocab;

/// Spatial relation from a node to a child. Declaration order is the
/// canonical serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeLabel {
    Next,
    Sup,
    Sub,
    Above,
    Below,
    Under,
    Over,
    Within,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 8] = [
        EdgeLabel::Next,
        EdgeLabel::Sup,
        EdgeLabel::Sub,
        EdgeLabel::Above,
        EdgeLabel::Below,
        EdgeLabel::Under,
        EdgeLabel::Over,
        EdgeLabel::Within,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Next => "NEXT",
            EdgeLabel::Sup => "SUP",
            EdgeLabel::Sub => "SUB",
            EdgeLabel::Above => "ABOVE",
            EdgeLabel::Below => "BELOW",
            EdgeLabel::Under => "UNDER",
            EdgeLabel::Over => "OVER",
            EdgeLabel::Within => "WITHIN",
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum SltLabel {
    Symbol(String),
    Number(String),
    Operator(String),
    Fraction,
    /// `\binom`: stacked like a fraction but without a bar, inside parentheses.
    Binomial,
    Radical,
    /// Fenced row; `open`/`close` are empty for a bare scripted brace group.
    GroupRow {
        open: String,
        close: String,
    },
    Wildcard(u32),
}

impl SltLabel {
    /// Injective text form used in canonical keys and features.
    pub fn canonical(&self) -> String {
        match self {
            SltLabel::Symbol(s) => format!("S{}", quoted(s)),
            SltLabel::Number(s) => format!("N{}", quoted(s)),
            SltLabel::Operator(s) => format!("O{}", quoted(s)),
            SltLabel::Fraction => "F".into(),
            SltLabel::Binomial => "B".into(),
            SltLabel::Radical => "R".into(),
            SltLabel::GroupRow { open, close } => format!("G{}{}", quoted(open), quoted(close)),
            SltLabel::Wildcard(slot) => format!("W{slot}"),
        }
    }

    /// Literal text the label was read from, if it came from one token.
    pub fn glyph(&self) -> Option<&str> {
        match self {
            SltLabel::Symbol(s) | SltLabel::Number(s) | SltLabel::Operator(s) => Some(s),
            _ => None,
        }
    }
}

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SltNode {
    pub label: SltLabel,
    pub edges: Vec<(EdgeLabel, usize)>,
}

impl SltNode {
    pub fn child(&self, edge: EdgeLabel) -> Option<usize> {
        self.edges.iter().find(|(e, _)| *e == edge).map(|&(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolLayoutTree {
    pub nodes: Vec<SltNode>,
    pub root: usize,
}

impl SymbolLayoutTree {
    pub fn node(&self, id: usize) -> &SltNode {
        &self.nodes[id]
    }

    /// Nodes along a writing line, starting at `start`.
    pub fn baseline(&self, start: usize) -> Vec<usize> {
        let mut line = vec![start];
        let mut cur = start;
        while let Some(next) = self.nodes[cur].child(EdgeLabel::Next) {
            line.push(next);
            cur = next;
        }
        line
    }

    pub fn has_wildcards(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.label, SltLabel::Wildcard(_)))
    }

    /// Deterministic preorder text: label, then each child prefixed by its
    /// edge label, children in `EdgeLabel` order.
    pub fn serialize(&self) -> String {
        self.serialize_from(self.root)
    }

    pub fn serialize_from(&self, start: usize) -> String {
        let mut out = String::new();
        // explicit stack: writing lines can be long
        enum Step {
            Node(usize),
            Text(&'static str),
        }
        let mut stack = vec![Step::Node(start)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Text(t) => out.push_str(t),
                Step::Node(id) => {
                    let node = &self.nodes[id];
                    out.push_str(&node.label.canonical());
                    let mut edges = node.edges.clone();
                    edges.sort_by_key(|&(e, _)| e);
                    for &(edge, child) in edges.iter().rev() {
                        stack.push(Step::Text("]"));
                        stack.push(Step::Node(child));
                        stack.push(Step::Text(match edge {
                            EdgeLabel::Next => "[NEXT:",
                            EdgeLabel::Sup => "[SUP:",
                            EdgeLabel::Sub => "[SUB:",
                            EdgeLabel::Above => "[ABOVE:",
                            EdgeLabel::Below => "[BELOW:",
                            EdgeLabel::Under => "[UNDER:",
                            EdgeLabel::Over => "[OVER:",
                            EdgeLabel::Within => "[WITHIN:",
                        }));
                    }
                }
            }
        }
        out
    }

    /// Check the structural invariants: a tree reachable from the root,
    /// at most one edge per label, fractions with exactly ABOVE and BELOW.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.root >= self.nodes.len() {
            return Err(format!("root {} out of range", self.root));
        }
        let mut parent = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            let mut seen = Vec::new();
            for &(edge, child) in &node.edges {
                if child >= self.nodes.len() {
                    return Err(format!("node {id}: child {child} out of range"));
                }
                if seen.contains(&edge) {
                    return Err(format!("node {id}: two {edge} edges"));
                }
                seen.push(edge);
                if parent[child].replace(id).is_some() {
                    return Err(format!("node {child} has two parents"));
                }
            }
            if matches!(node.label, SltLabel::Fraction | SltLabel::Binomial) {
                let mut labels = seen.clone();
                labels.retain(|e| matches!(e, EdgeLabel::Above | EdgeLabel::Below));
                if labels.len() != 2 {
                    return Err(format!("node {id}: fraction needs ABOVE and BELOW"));
                }
            }
        }
        if parent[self.root].is_some() {
            return Err("root has a parent".into());
        }
        // every node reachable from the root, which with single parents rules out cycles
        let mut reached = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut reached[id], true) {
                return Err(format!("cycle through node {id}"));
            }
            stack.extend(self.nodes[id].edges.iter().map(|&(_, c)| c));
        }
        if let Some(orphan) = reached.iter().position(|r| !r) {
            return Err(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }
}

/// Parse normalized tokens into a Symbol Layout Tree.
pub fn parse_slt(toks: &[LatexToken]) -> Result<SymbolLayoutTree> {
    let mut builder = Builder { nodes: Vec::new() };
    let line = builder.row(group_tree(toks).into())?;
    let Some(&root) = line.first() else {
        return Err(Error::ParseFailure("empty formula".into()));
    };
    let tree = SymbolLayoutTree {
        nodes: builder.nodes,
        root,
    };
    debug_assert_eq!(tree.validate(), Ok(()));
    Ok(tree)
}

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParseFailure(msg.into()))
}

struct Builder {
    nodes: Vec<SltNode>,
}

/// Delimiter identity of a token, if it can open or close a fence.
fn fence_name(tok: &LatexToken) -> Option<String> {
    match tok {
        LatexToken::OperatorGlyph(c) => Some(c.to_string()),
        LatexToken::Command(n) if n == "|" => Some("\\|".into()),
        LatexToken::Command(n) => Some(n.clone()),
        _ => None,
    }
    .filter(|n| vocab::is_opener(n) || vocab::is_closer(n) || vocab::is_self_paired(n))
}

impl Builder {
    fn push(&mut self, label: SltLabel) -> usize {
        self.nodes.push(SltNode {
            label,
            edges: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn attach(&mut self, parent: usize, edge: EdgeLabel, child: usize) -> Result<()> {
        if self.nodes[parent].child(edge).is_some() {
            return fail(format!("double {edge} on one base"));
        }
        self.nodes[parent].edges.push((edge, child));
        Ok(())
    }

    /// Parse a writing line; returns its baseline nodes, linked by NEXT.
    fn row(&mut self, queue: VecDeque<Elem>) -> Result<Vec<usize>> {
        let line = self.items(queue)?;
        for pair in line.windows(2) {
            self.attach(pair[0], EdgeLabel::Next, pair[1])?;
        }
        Ok(line)
    }

    /// Baseline nodes of a writing line, not yet linked.
    fn items(&mut self, mut queue: VecDeque<Elem>) -> Result<Vec<usize>> {
        let mut line: Vec<usize> = Vec::new();
        while let Some(elem) = queue.pop_front() {
            match elem {
                Elem::Group(inner) => {
                    if starts_script(&queue) {
                        let id = self.push(SltLabel::GroupRow {
                            open: String::new(),
                            close: String::new(),
                        });
                        self.fill_within(id, inner.into())?;
                        line.push(id);
                    } else {
                        // a bare group on the writing line is transparent
                        let spliced = self.items(inner.into())?;
                        line.extend(spliced);
                    }
                }
                Elem::Tok(tok) => match tok {
                    LatexToken::SuperscriptMarker | LatexToken::SubscriptMarker => {
                        let Some(&base) = line.last() else {
                            return fail("script without a base");
                        };
                        let arg = self.argument(&mut queue)?;
                        let large = matches!(&self.nodes[base].label,
                            SltLabel::Symbol(s) if vocab::is_large_operator(s));
                        let edge = match (tok == LatexToken::SuperscriptMarker, large) {
                            (true, false) => EdgeLabel::Sup,
                            (false, false) => EdgeLabel::Sub,
                            (true, true) => EdgeLabel::Over,
                            (false, true) => EdgeLabel::Under,
                        };
                        self.attach(base, edge, arg)?;
                    }
                    other => {
                        if let Some(name) = fence_name(&other) {
                            let id = self.fence(name, &mut queue)?;
                            line.push(id);
                        } else {
                            let id = self.atom(other, &mut queue)?;
                            line.push(id);
                        }
                    }
                },
            }
        }
        Ok(line)
    }

    fn fill_within(&mut self, parent: usize, inner: VecDeque<Elem>) -> Result<()> {
        let content = self.row(inner)?;
        if let Some(&first) = content.first() {
            self.attach(parent, EdgeLabel::Within, first)?;
        }
        Ok(())
    }

    /// A fence opener (or a self-paired bar) at the head of the line; pairs it
    /// with its closer on the same level and wraps the content in a GroupRow.
    fn fence(&mut self, open: String, queue: &mut VecDeque<Elem>) -> Result<usize> {
        if vocab::is_closer(&open) {
            return fail(format!("unmatched closing `{open}`"));
        }
        let self_paired = vocab::is_self_paired(&open);
        let mut depth = 0usize;
        let mut close_at = None;
        for (i, elem) in queue.iter().enumerate() {
            let Elem::Tok(tok) = elem else { continue };
            let Some(name) = fence_name(tok) else { continue };
            if self_paired {
                if name == open && depth == 0 {
                    close_at = Some(i);
                    break;
                }
                if vocab::is_opener(&name) {
                    depth += 1;
                } else if vocab::is_closer(&name) {
                    depth = depth.saturating_sub(1);
                }
            } else if vocab::is_opener(&name) {
                depth += 1;
            } else if vocab::is_closer(&name) {
                if depth == 0 {
                    close_at = Some(i);
                    break;
                }
                depth -= 1;
            }
        }
        let Some(close_at) = close_at else {
            if self_paired {
                // a lone bar is an ordinary operator (`a | b`)
                return Ok(self.push(SltLabel::Operator(open)));
            }
            return fail(format!("unmatched opening `{open}`"));
        };
        let inner: VecDeque<Elem> = queue.drain(..close_at).collect();
        let close = match queue.pop_front() {
            Some(Elem::Tok(tok)) => fence_name(&tok).expect("closer found above"),
            _ => unreachable!("closer found above"),
        };
        let id = self.push(SltLabel::GroupRow { open, close });
        self.fill_within(id, inner)?;
        Ok(id)
    }

    /// A single token that is not a fence or script marker.
    fn atom(&mut self, tok: LatexToken, queue: &mut VecDeque<Elem>) -> Result<usize> {
        match tok {
            LatexToken::Letter(c) => Ok(self.push(SltLabel::Symbol(c.to_string()))),
            LatexToken::DigitRun(d) => Ok(self.push(SltLabel::Number(d))),
            LatexToken::Wildcard(slot) => Ok(self.push(SltLabel::Wildcard(slot))),
            LatexToken::OperatorGlyph(c) => Ok(self.push(SltLabel::Operator(c.to_string()))),
            LatexToken::Command(name) => self.command(name, queue),
            LatexToken::GroupOpen | LatexToken::GroupClose => fail("stray brace"),
            LatexToken::SubscriptMarker | LatexToken::SuperscriptMarker => {
                fail("script marker where an atom was expected")
            }
        }
    }

    fn command(&mut self, name: String, queue: &mut VecDeque<Elem>) -> Result<usize> {
        match name.as_str() {
            vocab::FRAC | vocab::BINOM => {
                let label = if name == vocab::FRAC {
                    SltLabel::Fraction
                } else {
                    SltLabel::Binomial
                };
                let id = self.push(label);
                let above = self.argument(queue)?;
                let below = self.argument(queue)?;
                self.attach(id, EdgeLabel::Above, above)?;
                self.attach(id, EdgeLabel::Below, below)?;
                Ok(id)
            }
            vocab::SQRT => {
                let id = self.push(SltLabel::Radical);
                if matches!(queue.front(), Some(Elem::Tok(LatexToken::OperatorGlyph('[')))) {
                    queue.pop_front();
                    let close = queue
                        .iter()
                        .position(|e| matches!(e, Elem::Tok(LatexToken::OperatorGlyph(']'))))
                        .ok_or_else(|| Error::ParseFailure("unclosed root index".into()))?;
                    let index: VecDeque<Elem> = queue.drain(..close).collect();
                    queue.pop_front();
                    let index_line = self.row(index)?;
                    let Some(&first) = index_line.first() else {
                        return fail("empty root index");
                    };
                    self.attach(id, EdgeLabel::Above, first)?;
                }
                let body = self.argument(queue)?;
                self.attach(id, EdgeLabel::Within, body)?;
                Ok(id)
            }
            n if vocab::is_symbol(n) || vocab::is_function(n) || vocab::is_large_operator(n) => {
                Ok(self.push(SltLabel::Symbol(name)))
            }
            n if vocab::is_operator_command(n) => Ok(self.push(SltLabel::Operator(name))),
            n => fail(format!("unsupported command `\\{n}`")),
        }
    }

    /// One macro argument: a group, or a single token. Only the first digit
    /// of a digit run is taken; the rest goes back on the line.
    fn argument(&mut self, queue: &mut VecDeque<Elem>) -> Result<usize> {
        match queue.pop_front() {
            None => fail("missing argument"),
            Some(Elem::Group(inner)) => {
                let line = self.row(inner.into())?;
                match line.first() {
                    Some(&first) => Ok(first),
                    None => fail("empty argument"),
                }
            }
            Some(Elem::Tok(LatexToken::DigitRun(d))) if d.len() > 1 => {
                let (head, rest) = d.split_at(1);
                queue.push_front(Elem::Tok(LatexToken::DigitRun(rest.to_string())));
                Ok(self.push(SltLabel::Number(head.to_string())))
            }
            Some(Elem::Tok(tok)) => {
                if let Some(name) = fence_name(&tok) {
                    if !matches!(tok, LatexToken::OperatorGlyph(_)) || vocab::is_opener(&name) {
                        return fail(format!("delimiter `{name}` as an argument"));
                    }
                }
                self.atom(tok, queue)
            }
        }
    }
}

fn starts_script(queue: &VecDeque<Elem>) -> bool {
    matches!(
        queue.front(),
        Some(Elem::Tok(LatexToken::SuperscriptMarker | LatexToken::SubscriptMarker))
    )
}

impl fmt::Display for SymbolLayoutTree {
    /// Indented outline, one node per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut stack = vec![(self.root, None::<EdgeLabel>, 0usize)];
        while let Some((id, edge, depth)) = stack.pop() {
            let node = &self.nodes[id];
            let prefix = edge.map(|e| format!("{e} ")).unwrap_or_default();
            writeln!(
                out,
                "{:indent$}{prefix}{}",
                "",
                node.label.canonical(),
                indent = depth * 2
            )?;
            let mut edges = node.edges.clone();
            edges.sort_by_key(|&(e, _)| e);
            for &(e, c) in edges.iter().rev() {
                stack.push((c, Some(e), depth + 1));
            }
        }
        f.write_str(&out)
    }
}
