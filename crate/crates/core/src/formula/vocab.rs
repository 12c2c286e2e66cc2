//! Command tables for the supported LaTeX subset.

/// Single symbols written as commands.
const SYMBOLS: &[&str] = &[
    "alpha",
    "beta",
    "gamma",
    "delta",
    "epsilon",
    "varepsilon",
    "zeta",
    "eta",
    "theta",
    "vartheta",
    "iota",
    "kappa",
    "lambda",
    "mu",
    "nu",
    "xi",
    "pi",
    "varpi",
    "rho",
    "varrho",
    "sigma",
    "varsigma",
    "tau",
    "upsilon",
    "phi",
    "varphi",
    "chi",
    "psi",
    "omega",
    "Gamma",
    "Delta",
    "Theta",
    "Lambda",
    "Xi",
    "Pi",
    "Sigma",
    "Upsilon",
    "Phi",
    "Psi",
    "Omega",
    "infty",
    "partial",
    "nabla",
    "ell",
    "hbar",
    "emptyset",
    "forall",
    "exists",
    "ldots",
    "cdots",
    "vdots",
    "ddots",
    "aleph",
    "imath",
    "jmath",
    "Re",
    "Im",
    "prime",
    "top",
    "bot",
    "angle",
    "triangle",
    "%",
    "#",
    "&",
    "_",
    "$",
];

/// Named functions; they apply to the operand that follows.
const FUNCTIONS: &[&str] = &[
    "sin", "cos", "tan", "cot", "sec", "csc", "sinh", "cosh", "tanh", "coth", "arcsin", "arccos", "arctan", "log",
    "ln", "lg", "exp", "det", "dim", "ker", "gcd", "arg", "deg", "hom", "Pr", "mod", "bmod", "sgn",
];

/// Large operators; `_`/`^` on these become UNDER/OVER limits.
const LARGE_OPERATORS: &[&str] = &[
    "sum",
    "prod",
    "coprod",
    "int",
    "iint",
    "iiint",
    "oint",
    "lim",
    "limsup",
    "liminf",
    "bigcup",
    "bigcap",
    "bigoplus",
    "bigotimes",
    "bigvee",
    "bigwedge",
    "max",
    "min",
    "sup",
    "inf",
];

const RELATIONS: &[&str] = &[
    "=",
    "<",
    ">",
    "ne",
    "leq",
    "geq",
    "approx",
    "equiv",
    "sim",
    "simeq",
    "cong",
    "propto",
    "in",
    "notin",
    "ni",
    "subset",
    "subseteq",
    "supset",
    "supseteq",
    "rightarrow",
    "leftarrow",
    "Rightarrow",
    "Leftarrow",
    "Leftrightarrow",
    "leftrightarrow",
    "mapsto",
    "mid",
    "perp",
    "parallel",
    "ll",
    "gg",
    "prec",
    "succ",
    "models",
    "vdash",
];

const ADDITIVE: &[&str] = &[
    "+", "-", "pm", "mp", "cup", "cap", "setminus", "oplus", "wedge", "vee", "sqcup",
];

const MULTIPLICATIVE: &[&str] = &["*", "/", "times", "cdot", "div", "circ", "otimes", "bullet", "star"];

const SEPARATORS: &[&str] = &[",", ";", ":"];

const POSTFIX: &[&str] = &["!", "'"];

const PREFIX: &[&str] = &["neg"];

/// Opening fences paired with their closers. Any opener may close with any
/// closer (`[0,1)` is a valid interval).
const OPENERS: &[&str] = &["(", "[", "{", "langle", "lfloor", "lceil"];
const CLOSERS: &[&str] = &[")", "]", "}", "rangle", "rfloor", "rceil"];

/// Delimiters that open and close with the same glyph.
const SELF_PAIRED: &[&str] = &["|", "\\|"];

/// Commands that take structural arguments.
pub const FRAC: &str = "frac";
pub const SQRT: &str = "sqrt";
pub const BINOM: &str = "binom";

/// Fence modifiers whose `.` argument is an invisible delimiter.
pub const FENCE_MODIFIERS: &[&str] = &[
    "left", "right", "middle", "big", "Big", "bigg", "Bigg", "bigl", "bigr", "Bigl", "Bigr", "biggl", "biggr", "Biggl",
    "Biggr",
];

pub fn is_symbol(name: &str) -> bool {
    SYMBOLS.contains(&name)
}

pub fn is_function(name: &str) -> bool {
    FUNCTIONS.contains(&name)
}

pub fn is_large_operator(name: &str) -> bool {
    LARGE_OPERATORS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorClass {
    Separator,
    Relation,
    Additive,
    Multiplicative,
    Prefix,
    Postfix,
}

/// Precedence class of an operator glyph or command name.
pub fn operator_class(name: &str) -> Option<OperatorClass> {
    if RELATIONS.contains(&name) {
        Some(OperatorClass::Relation)
    } else if ADDITIVE.contains(&name) {
        Some(OperatorClass::Additive)
    } else if MULTIPLICATIVE.contains(&name) {
        Some(OperatorClass::Multiplicative)
    } else if SEPARATORS.contains(&name) {
        Some(OperatorClass::Separator)
    } else if POSTFIX.contains(&name) {
        Some(OperatorClass::Postfix)
    } else if PREFIX.contains(&name) {
        Some(OperatorClass::Prefix)
    } else {
        None
    }
}

/// Commands that denote an operator rather than an operand.
pub fn is_operator_command(name: &str) -> bool {
    operator_class(name).is_some()
}

pub fn is_opener(name: &str) -> bool {
    OPENERS.contains(&name)
}

pub fn is_closer(name: &str) -> bool {
    CLOSERS.contains(&name)
}

pub fn is_self_paired(name: &str) -> bool {
    SELF_PAIRED.contains(&name)
}

/// Additive operators double as unary prefixes (`-x`).
pub fn is_signed_prefix(name: &str) -> bool {
    matches!(name, "+" | "-" | "pm" | "mp")
}
