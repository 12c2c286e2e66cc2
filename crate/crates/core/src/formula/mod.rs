//! LaTeX formulas: tokens, normalization, Symbol Layout Trees, Operator
//! Trees and canonical keys.

mod key;
mod normalize;
mod opt;
mod slt;
mod token;
pub(crate) mod vocab;

pub use key::{canonical_key, canonical_key_with, CanonicalKey, KeyKind};
pub use normalize::{normalize_tokens, normalize_tokens_with, NormalizationTables};
pub use opt::{slt_to_opt, OperatorTree, OptLabel, OptNode, IMPLICIT_TIMES};
pub use slt::{parse_slt, EdgeLabel, SltLabel, SltNode, SymbolLayoutTree};
pub use token::{render_compact, tokenize_latex, LatexToken};

use crate::error::Result;

/// Tokenize, normalize and parse in one step.
pub fn parse_formula(src: &str) -> Result<SymbolLayoutTree> {
    parse_slt(&normalize_tokens(&tokenize_latex(src)?))
}
