//! Text similarity used for parameter clustering and API ranking.

use std::collections::BTreeSet;

use crate::graph::ParamMember;

/// Scores how alike two pieces of text are, in `[0, 1]`.
pub trait SimilarityProvider {
    fn similarity(&self, a: &str, b: &str) -> f64;

    /// Standardized name for a parameter cluster.
    fn canonical_name(&self, members: &[ParamMember]) -> String {
        crate::graph::default_canonical_name(members)
    }
}

/// Lowercased alphanumeric word tokens.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Jaccard overlap of the word-token sets of two strings.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSimilarity;

impl SimilarityProvider for LexicalSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let ta: BTreeSet<String> = tokens(a).collect();
        let tb: BTreeSet<String> = tokens(b).collect();
        if ta.is_empty() || tb.is_empty() {
            return 0.0;
        }
        let inter = ta.intersection(&tb).count();
        let union = ta.union(&tb).count();
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_on_word_tokens() {
        let s = LexicalSimilarity;
        assert_eq!(s.similarity("city name", "City  Name"), 1.0);
        assert_eq!(s.similarity("city", "hospital"), 0.0);
        assert!((s.similarity("get_weather now", "get weather") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.similarity("", "x"), 0.0);
    }
}
