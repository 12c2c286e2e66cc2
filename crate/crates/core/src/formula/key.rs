use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formula::normalize::{normalize_tokens_with, NormalizationTables};
use crate::formula::slt::parse_slt;
use crate::formula::token::{render_compact, tokenize_latex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyKind {
    Slt,
    LatexFallback,
}

/// Identity of a formula's appearance. Two formulas are visually identical
/// when kind and `serialized` match; `digest` is the SHA-256 of `serialized`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalKey {
    pub kind: KeyKind,
    pub digest: String,
    pub serialized: String,
}

impl CanonicalKey {
    fn new(kind: KeyKind, serialized: String) -> Self {
        let digest = hex::encode(Sha256::digest(serialized.as_bytes()));
        CanonicalKey {
            kind,
            digest,
            serialized,
        }
    }
}

pub fn canonical_key(src: &str) -> CanonicalKey {
    canonical_key_with(src, NormalizationTables::builtin())
}

/// Key from the serialized SLT when the formula parses, otherwise from the
/// normalized LaTeX with whitespace removed.
pub fn canonical_key_with(src: &str, tables: &NormalizationTables) -> CanonicalKey {
    match tokenize_latex(src) {
        Ok(tokens) => {
            let normalized = normalize_tokens_with(&tokens, tables);
            match parse_slt(&normalized) {
                Ok(slt) => CanonicalKey::new(KeyKind::Slt, slt.serialize()),
                Err(_) => CanonicalKey::new(KeyKind::LatexFallback, render_compact(&normalized)),
            }
        }
        Err(_) => {
            let stripped: String = src.chars().filter(|c| !c.is_whitespace()).collect();
            CanonicalKey::new(KeyKind::LatexFallback, stripped)
        }
    }
}
