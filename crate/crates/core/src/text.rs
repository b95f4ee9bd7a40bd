//! Value normalization and tokenization shared by matching, ranking and prompts.

/// Lowercases, trims and collapses internal whitespace runs to one space.
///
/// Slot values are stored verbatim; every comparison of values goes
/// through this function on both sides.
pub fn normalize(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for word in value.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// The answer token used for empty slots.
pub const NONE_ANSWER: &str = "none";

/// Returns true when a (normalized) answer encodes an empty slot.
pub fn is_none_answer(answer: &str) -> bool {
    normalize(answer) == NONE_ANSWER
}

pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercase and split on every non-alphanumeric character.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimpleTokenizer;

impl Tokenizer for SimpleTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_and_lowercases() {
        assert_eq!(normalize("  The   Hilton\tHotel \n"), "the hilton hotel");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("3"), "3");
    }

    #[test]
    fn normalize_is_idempotent() {
        for s in ["A  b", " x ", "ÄBC  déf", "none"] {
            assert_eq!(normalize(&normalize(s)), normalize(s));
        }
    }

    #[test]
    fn none_answer_detection() {
        assert!(is_none_answer(" None "));
        assert!(!is_none_answer("nonesuch"));
    }

    #[test]
    fn tokenizer_splits_on_punctuation() {
        let toks = SimpleTokenizer.tokenize("Find me a 3-star hotel, please!");
        assert_eq!(toks, ["find", "me", "a", "3", "star", "hotel", "please"]);
        assert!(SimpleTokenizer.tokenize(" ,.; ").is_empty());
    }
}
