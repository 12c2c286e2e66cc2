//! Operator Trees: operators over their arguments, derived from an SLT.
//!
//! Binding, loosest first: separators (`,` `;` `:`), relations, additive,
//! multiplicative (explicit or implicit), prefix signs and function
//! application, postfix `!`/`'`, then scripts. Operators of one level
//! associate to the left.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::slt::{EdgeLabel, SltLabel, SymbolLayoutTree};
use crate::formula::vocab::{self, OperatorClass};

pub const IMPLICIT_TIMES: &str = "implicit-times";
pub const POWER: &str = "^";
pub const SUBSCRIPT: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum OptLabel {
    Operator(String),
    Operand(String),
    Apply(String),
    Wildcard(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptNode {
    pub label: OptLabel,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorTree {
    pub nodes: Vec<OptNode>,
    pub root: usize,
}

impl OperatorTree {
    pub fn node(&self, id: usize) -> &OptNode {
        &self.nodes[id]
    }

    /// Prefix form, e.g. `=(+(^(a,2),^(b,2)),^(c,2))`.
    pub fn render(&self) -> String {
        self.render_from(self.root)
    }

    pub fn render_from(&self, id: usize) -> String {
        let node = &self.nodes[id];
        let head = match &node.label {
            OptLabel::Operator(s) | OptLabel::Operand(s) | OptLabel::Apply(s) => s.clone(),
            OptLabel::Wildcard(slot) => format!("*{slot}*"),
        };
        if node.children.is_empty() {
            return head;
        }
        let args: Vec<String> = node.children.iter().map(|&c| self.render_from(c)).collect();
        format!("{head}({})", args.join(","))
    }

    /// Unambiguous text of the subtree at `id`, used for structural equality.
    pub fn serialize_from(&self, id: usize) -> String {
        let node = &self.nodes[id];
        let mut out = match &node.label {
            OptLabel::Operator(s) => format!("O{s:?}"),
            OptLabel::Operand(s) => format!("V{s:?}"),
            OptLabel::Apply(s) => format!("A{s:?}"),
            OptLabel::Wildcard(slot) => format!("W{slot}"),
        };
        out.push('(');
        for (i, &c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&self.serialize_from(c));
        }
        out.push(')');
        out
    }
}

impl fmt::Display for OperatorTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::OptFailure(msg.into()))
}

/// Convert a Symbol Layout Tree to an Operator Tree.
pub fn slt_to_opt(slt: &SymbolLayoutTree) -> Result<OperatorTree> {
    let mut conv = Converter { slt, nodes: Vec::new() };
    let root = conv.line(slt.root)?;
    Ok(OperatorTree {
        nodes: conv.nodes,
        root,
    })
}

/// One baseline element, classified for the precedence parser.
#[derive(Debug)]
enum Item {
    Operand(usize),
    Infix(String, OperatorClass),
    Prefix(String),
    Postfix(String),
    Function {
        name: String,
        sub: Option<usize>,
        sup: Option<usize>,
    },
    LargeOperator {
        name: String,
        under: Option<usize>,
        over: Option<usize>,
    },
}

impl Item {
    fn starts_operand(&self) -> bool {
        matches!(
            self,
            Item::Operand(_) | Item::Prefix(_) | Item::Function { .. } | Item::LargeOperator { .. }
        )
    }
}

struct Converter<'a> {
    slt: &'a SymbolLayoutTree,
    nodes: Vec<OptNode>,
}

impl Converter<'_> {
    fn push(&mut self, label: OptLabel, children: Vec<usize>) -> usize {
        self.nodes.push(OptNode { label, children });
        self.nodes.len() - 1
    }

    fn op(&mut self, name: &str, children: Vec<usize>) -> usize {
        self.push(OptLabel::Operator(name.to_string()), children)
    }

    /// Convert the writing line starting at `start` into one expression.
    fn line(&mut self, start: usize) -> Result<usize> {
        let mut items = Vec::new();
        for id in self.slt.baseline(start) {
            items.push(self.item(id)?);
        }
        let mut parser = Parser {
            items,
            pos: 0,
            conv: self,
        };
        let root = parser.separated()?;
        if parser.pos != parser.items.len() {
            return fail(format!("unexpected {:?}", parser.items[parser.pos]));
        }
        Ok(root)
    }

    fn optional_line(&mut self, id: usize, edge: EdgeLabel) -> Result<Option<usize>> {
        self.slt.node(id).child(edge).map(|c| self.line(c)).transpose()
    }

    fn item(&mut self, id: usize) -> Result<Item> {
        let node = self.slt.node(id);
        let sup = self.optional_line(id, EdgeLabel::Sup)?;
        let sub = self.optional_line(id, EdgeLabel::Sub)?;
        let scripted = sup.is_some() || sub.is_some();

        let base = match &node.label {
            SltLabel::Operator(name) => {
                let Some(class) = vocab::operator_class(name) else {
                    return fail(format!("operator `{name}` has no precedence"));
                };
                if scripted {
                    return fail(format!("scripted operator `{name}`"));
                }
                return Ok(match class {
                    OperatorClass::Postfix => Item::Postfix(name.clone()),
                    OperatorClass::Prefix => Item::Prefix(name.clone()),
                    c => Item::Infix(name.clone(), c),
                });
            }
            SltLabel::Symbol(name) if vocab::is_function(name) => {
                return Ok(Item::Function {
                    name: name.clone(),
                    sub,
                    sup,
                });
            }
            SltLabel::Symbol(name) if vocab::is_large_operator(name) => {
                return Ok(Item::LargeOperator {
                    name: name.clone(),
                    under: self.optional_line(id, EdgeLabel::Under)?,
                    over: self.optional_line(id, EdgeLabel::Over)?,
                });
            }
            SltLabel::Symbol(name) | SltLabel::Number(name) => self.push(OptLabel::Operand(name.clone()), vec![]),
            SltLabel::Wildcard(slot) => self.push(OptLabel::Wildcard(*slot), vec![]),
            SltLabel::Fraction | SltLabel::Binomial => {
                let name = if node.label == SltLabel::Fraction {
                    "frac"
                } else {
                    "binom"
                };
                let above = self.optional_line(id, EdgeLabel::Above)?;
                let below = self.optional_line(id, EdgeLabel::Below)?;
                let (Some(a), Some(b)) = (above, below) else {
                    return fail("fraction without both parts");
                };
                self.op(name, vec![a, b])
            }
            SltLabel::Radical => {
                let Some(body) = self.optional_line(id, EdgeLabel::Within)? else {
                    return fail("empty radical");
                };
                let mut children = vec![body];
                children.extend(self.optional_line(id, EdgeLabel::Above)?);
                self.op("sqrt", children)
            }
            SltLabel::GroupRow { open, close } => {
                let inner = self.optional_line(id, EdgeLabel::Within)?;
                self.op(&format!("{open}{close}"), inner.into_iter().collect())
            }
        };

        let mut expr = base;
        if let Some(s) = sub {
            expr = self.op(SUBSCRIPT, vec![expr, s]);
        }
        if let Some(s) = sup {
            expr = self.op(POWER, vec![expr, s]);
        }
        Ok(Item::Operand(expr))
    }
}

struct Parser<'c, 'a> {
    items: Vec<Item>,
    pos: usize,
    conv: &'c mut Converter<'a>,
}

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&Item> {
        self.items.get(self.pos)
    }

    fn peek_infix(&self, class: OperatorClass) -> Option<String> {
        match self.peek() {
            Some(Item::Infix(name, c)) if *c == class => Some(name.clone()),
            _ => None,
        }
    }

    fn binary_level(&mut self, class: OperatorClass, next: fn(&mut Self) -> Result<usize>) -> Result<usize> {
        let mut lhs = next(self)?;
        while let Some(name) = self.peek_infix(class) {
            self.pos += 1;
            if self.peek().is_none() {
                return fail(format!("dangling `{name}`"));
            }
            let rhs = next(self)?;
            lhs = self.conv.op(&name, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn separated(&mut self) -> Result<usize> {
        self.binary_level(OperatorClass::Separator, Self::relation)
    }

    fn relation(&mut self) -> Result<usize> {
        self.binary_level(OperatorClass::Relation, Self::additive)
    }

    fn additive(&mut self) -> Result<usize> {
        self.binary_level(OperatorClass::Additive, Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<usize> {
        let mut lhs = self.unary()?;
        loop {
            if let Some(name) = self.peek_infix(OperatorClass::Multiplicative) {
                self.pos += 1;
                if self.peek().is_none() {
                    return fail(format!("dangling `{name}`"));
                }
                let rhs = self.unary()?;
                lhs = self.conv.op(&name, vec![lhs, rhs]);
            } else if self.peek().is_some_and(Item::starts_operand) {
                let rhs = self.unary()?;
                lhs = self.conv.op(IMPLICIT_TIMES, vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<usize> {
        let Some(item) = self.peek() else {
            return fail("expression ends early");
        };
        match item {
            Item::Infix(name, OperatorClass::Additive) if vocab::is_signed_prefix(name) => {
                let name = name.clone();
                self.pos += 1;
                let arg = self.unary()?;
                Ok(self.conv.op(&name, vec![arg]))
            }
            Item::Prefix(name) => {
                let name = name.clone();
                self.pos += 1;
                let arg = self.unary()?;
                Ok(self.conv.op(&name, vec![arg]))
            }
            Item::Function { .. } => {
                let Item::Function { name, sub, sup } = self.take() else {
                    unreachable!()
                };
                let mut children = Vec::new();
                if let Some(s) = sub {
                    children.push(self.conv.op("sub", vec![s]));
                }
                if self.peek().is_some_and(Item::starts_operand) {
                    children.push(self.postfix()?);
                }
                let mut expr = self.conv.push(OptLabel::Apply(name), children);
                if let Some(s) = sup {
                    expr = self.conv.op(POWER, vec![expr, s]);
                }
                Ok(expr)
            }
            Item::LargeOperator { .. } => {
                let Item::LargeOperator { name, under, over } = self.take() else {
                    unreachable!()
                };
                let mut children = Vec::new();
                if let Some(u) = under {
                    children.push(self.conv.op("under", vec![u]));
                }
                if let Some(o) = over {
                    children.push(self.conv.op("over", vec![o]));
                }
                if self.peek().is_some_and(Item::starts_operand) {
                    children.push(self.multiplicative()?);
                }
                Ok(self.conv.push(OptLabel::Apply(name), children))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<usize> {
        let mut expr = self.primary()?;
        while let Some(Item::Postfix(name)) = self.peek() {
            let name = name.clone();
            self.pos += 1;
            expr = self.conv.op(&name, vec![expr]);
        }
        Ok(expr)
    }

    fn primary(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Item::Operand(id)) => {
                let id = *id;
                self.pos += 1;
                Ok(id)
            }
            Some(Item::Function { .. } | Item::LargeOperator { .. } | Item::Prefix(_)) => self.unary(),
            Some(other) => fail(format!("expected an operand, found {other:?}")),
            None => fail("expected an operand"),
        }
    }

    fn take(&mut self) -> Item {
        let item = std::mem::replace(&mut self.items[self.pos], Item::Operand(usize::MAX));
        self.pos += 1;
        item
    }
}
