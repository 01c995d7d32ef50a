use std::collections::{BTreeMap, HashSet};

use super::keywords::is_valid_identifier;
use super::lexer::{lex_lenient, TokenKind};
use super::{RtlError, RtlModule};

/// Renames whole identifier tokens of the module source. Comments and
/// string literals are left alone.
pub fn rename_identifiers(
    module: &RtlModule,
    mapping: &BTreeMap<String, String>,
) -> Result<String, RtlError> {
    let text = module.body_text.as_str();
    let tokens = lex_lenient(text);
    let present: HashSet<&str> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text(text))
        .collect();

    let mut targets = HashSet::new();
    for (from, to) in mapping {
        if !present.contains(from.as_str()) {
            return Err(RtlError::UnknownIdentifier { name: from.clone() });
        }
        if !is_valid_identifier(to) {
            return Err(RtlError::InvalidIdentifier { name: to.clone() });
        }
        if !targets.insert(to.as_str()) {
            return Err(RtlError::MappingCollision { name: to.clone() });
        }
        // a target may only exist already if it is itself renamed away
        if present.contains(to.as_str()) && !mapping.contains_key(to) {
            return Err(RtlError::MappingCollision { name: to.clone() });
        }
    }

    let mut out = String::with_capacity(text.len());
    for t in &tokens {
        let s = t.text(text);
        match (t.kind, mapping.get(s)) {
            (TokenKind::Ident, Some(new)) => out.push_str(new),
            _ => out.push_str(s),
        }
    }
    Ok(out)
}
