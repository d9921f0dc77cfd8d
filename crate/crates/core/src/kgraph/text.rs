use alloc::string::String;
use alloc::vec::Vec;

use super::KgError;

/// Prefix that marks a relation name as a textual surface pattern.
pub const TEXT_RELATION_PREFIX: &str = "text:";

/// Shortens the token span between two entity mentions to its first two and
/// last two tokens. Spans of four tokens or fewer are kept whole.
pub fn truncate_textual_relation<S: AsRef<str>>(phrase: &[S]) -> Result<String, KgError> {
    if phrase.is_empty() {
        return Err(KgError::EmptyPhrase);
    }
    let tokens: Vec<&str> = phrase.iter().map(AsRef::as_ref).collect();
    if tokens.len() <= 4 {
        return Ok(tokens.join(" "));
    }
    let n = tokens.len();
    let mut kept: Vec<&str> = Vec::with_capacity(5);
    kept.extend_from_slice(&tokens[..2]);
    kept.push("…");
    kept.extend_from_slice(&tokens[n - 2..]);
    Ok(kept.join(" "))
}
