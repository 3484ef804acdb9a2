use std::fs;
use std::path::Path;

use crate::error::Result;

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '¿' | '¡')
}

/// Splits raw text on whitespace and detaches leading and trailing
/// punctuation characters as separate tokens. Inner punctuation
/// ("don't", "e-mail") stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in text.split_whitespace() {
        let chars: Vec<char> = piece.chars().collect();
        let start = chars.iter().position(|&c| !is_punct(c)).unwrap_or(chars.len());
        let end = chars
            .iter()
            .rposition(|&c| !is_punct(c))
            .map_or(start, |i| i + 1);
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end.max(start)..].iter().map(|c| c.to_string()));
    }
    out
}

/// Whitespace-tokenized sentences, one per non-empty line.
pub fn read_token_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_outer_punctuation() {
        assert_eq!(
            tokenize("Hello, world! (I don't know.)"),
            ["Hello", ",", "world", "!", "(", "I", "don't", "know", ".", ")"]
        );
    }

    #[test]
    fn punctuation_only_pieces() {
        assert_eq!(tokenize("... ?!"), [".", ".", ".", "?", "!"]);
        assert!(tokenize("   \n\t").is_empty());
    }
}
