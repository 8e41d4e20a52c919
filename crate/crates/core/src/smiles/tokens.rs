use std::sync::OnceLock;

use regex::Regex;

// Tokenization used by transformer-based atom mappers; the token budget is
// counted in these units rather than characters.
const PATTERN: &str =
    r"(\[[^\]]+\]|Br?|Cl?|N|O|S|P|F|I|b|c|n|o|s|p|\(|\)|\.|=|#|-|\+|\\|/|:|~|@|\?|>|\*|\$|%[0-9]{2}|[0-9])";

fn regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(PATTERN).expect("valid token pattern"))
}

/// Number of model tokens in a (reaction) SMILES string.
pub fn token_count(smiles: &str) -> usize {
    regex().find_iter(smiles).count()
}
