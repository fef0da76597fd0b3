//! Word-level normalization shared by the spec parser, tagger and matchers.

/// Function words that are never rephrased.
pub const STOPWORDS: &[&str] = &["the", "a", "an", "to", "of", "at", "on", "with", "and", "as", "by"];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Lowercases and splits on anything that is not alphanumeric or `_`.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_punctuation_and_case() {
        assert_eq!(words("Move the Cube to (2,3)!"), ["move", "the", "cube", "to", "2", "3"]);
        assert_eq!(words("  "), Vec::<String>::new());
        assert_eq!(words("block_set"), ["block_set"]);
    }
}
